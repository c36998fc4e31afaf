"""Closed-form engine checks: quadrature kernel oracles, distribution
building blocks, exact/lower-bound/asymptotic outage behavior, and the
printed-variant arbitration against the simulator."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import dblquad, quad
from scipy.special import kv

from fdnoma.analytic import (
    PhiTerm,
    QuadratureSpec,
    asymptotic_cdf_two_strongest_sum,
    asymptotic_outage_ideal,
    asymptotic_outage_practical,
    array_gain,
    cdf_ordered_gain,
    cdf_two_strongest_sum,
    diversity_order,
    exact_outage,
    lower_bound_outage,
    pdf_ordered_gain,
    pdf_two_strongest_sum,
    phi_integral,
    sf_ordered_gain,
    sf_relay_ratio,
    sf_two_strongest_sum,
)
from fdnoma.errors import ConfigError, NumericsError
from fdnoma.mcsim import simulate_outage
from fdnoma.sysmodel import SystemConfig, derive_link_stats

BASE = SystemConfig()
PRACTICAL = replace(
    BASE, sigma2_est_sr=0.01, sigma2_est_ru=(0.01,) * 3, fd_tau_sr=0.03, fd_tau_ru=(0.03,) * 3
)


class TestPhiIntegral:
    TERM = PhiTerm(z_power=1.0, pi_power=1.5, pi_shift=0.8, decay=3.0, bessel_coeff=2.0, order=2)

    @staticmethod
    def _direct(term, z):
        return (
            z**term.z_power
            * (z + term.pi_shift) ** term.pi_power
            * np.exp(-term.decay * z)
            * kv(abs(term.order), 2.0 * np.sqrt(term.bessel_coeff * (z + term.pi_shift)))
        )

    def test_trapezoid_oracle(self):
        # brute-force trapezoid on [0, 40/decay] with 1e6 panels
        term = self.TERM
        z = np.linspace(0.0, 40.0 / term.decay, 1_000_001)
        oracle = np.trapezoid(self._direct(term, z), z)
        assert phi_integral(term) == pytest.approx(oracle, rel=1e-8)

    def test_transforms_agree(self):
        for spec in (QuadratureSpec(transform="none"), QuadratureSpec(transform="log_substitution")):
            assert phi_integral(self.TERM, spec) == pytest.approx(
                phi_integral(self.TERM), rel=1e-9
            )

    def test_bessel_decay_monotone(self):
        vals = [
            phi_integral(replace_term(self.TERM, bessel_coeff=b))
            for b in (1.0, 5.0, 25.0, 125.0, 625.0)
        ]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-6 * vals[0]

    def test_change_of_variables_identity(self):
        # z -> 2w: phi(zp, pp, z0, c, b) == 2^(zp+pp+1) phi(zp, pp, z0/2, 2c, 2b)
        term = self.TERM
        half = PhiTerm(
            z_power=term.z_power,
            pi_power=term.pi_power,
            pi_shift=term.pi_shift / 2.0,
            decay=term.decay * 2.0,
            bessel_coeff=term.bessel_coeff * 2.0,
            order=term.order,
        )
        factor = 2.0 ** (term.z_power + term.pi_power + 1.0)
        assert phi_integral(term) == pytest.approx(factor * phi_integral(half), rel=1e-9)

    def test_near_singular_shift(self):
        # tiny pi_shift with order 0 produces the log-edge behavior
        term = PhiTerm(z_power=0.0, pi_power=0.5, pi_shift=1e-8, decay=1.0,
                       bessel_coeff=1.0, order=0)
        z = np.geomspace(1e-12, 40.0, 4_000_001)
        oracle = np.trapezoid(self._direct(term, z), z)
        assert phi_integral(term) == pytest.approx(oracle, rel=1e-6)

    def test_invalid_rates(self):
        with pytest.raises(ValueError):
            PhiTerm(z_power=0, pi_power=1, pi_shift=0.0, decay=1.0, bessel_coeff=1.0, order=1)

    def test_rel_tol_floor(self):
        with pytest.raises(ValueError):
            QuadratureSpec(rel_tol=1e-14)


def replace_term(term: PhiTerm, **kw) -> PhiTerm:
    from dataclasses import replace as _r

    return _r(term, **kw)


class TestFirstHopDistribution:
    @pytest.mark.parametrize("n_b,m", [(2, 1), (3, 1), (3, 2), (4, 2), (2, 3)])
    def test_unit_mass(self, n_b, m):
        lam = m / 16.0
        val, _ = quad(lambda x: float(pdf_two_strongest_sum(x, n_b, m, lam)), 0.0, np.inf,
                      limit=300)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_cdf_sf_complement(self):
        for x in (0.5, 5.0, 40.0):
            f = cdf_two_strongest_sum(x, 3, 2, 0.125)
            s = sf_two_strongest_sum(x, 3, 2, 0.125)
            assert f + s == pytest.approx(1.0, abs=1e-12)

    def test_cdf_matches_pdf_integral(self):
        for x in (2.0, 10.0, 30.0):
            val, _ = quad(lambda u: float(pdf_two_strongest_sum(u, 3, 2, 0.125)), 0.0, x,
                          limit=300)
            assert cdf_two_strongest_sum(x, 3, 2, 0.125) == pytest.approx(val, abs=1e-10)

    def test_histogram_match(self):
        rng = np.random.default_rng(7)
        n_b, m, omega = 3, 2, 16.0
        g = rng.gamma(m, omega / m, size=(1_000_000, n_b))
        g.sort(axis=1)
        samples = g[:, -1] + g[:, -2]
        hist, edges = np.histogram(samples, bins=100, range=(0.0, 120.0), density=True)
        mid = 0.5 * (edges[1:] + edges[:-1])
        l1 = np.trapezoid(np.abs(hist - pdf_two_strongest_sum(mid, n_b, m, m / omega)), mid)
        assert l1 < 0.02

    @pytest.mark.parametrize("n_b,m", [(2, 1), (3, 2), (4, 3)])
    def test_asymptotic_cdf_small_argument(self, n_b, m):
        # oracle for the exact CDF at tiny arguments: direct double integral
        # over the ordered-pair region (the alternating closed form loses all
        # digits there)
        omega = 16.0
        lam = m / omega
        t = 1e-3 * omega

        def joint(y, x):  # y <= x
            fy = lam**m * y ** (m - 1) * math.exp(-lam * y) / math.gamma(m)
            fx = lam**m * x ** (m - 1) * math.exp(-lam * x) / math.gamma(m)
            from scipy.special import gammainc

            cdf_y = gammainc(m, lam * y)
            return n_b * (n_b - 1) * fx * fy * cdf_y ** (n_b - 2)

        exact, _ = dblquad(joint, 0.0, t, lambda x: 0.0, lambda x: lambda_min(x, t))
        approx = float(asymptotic_cdf_two_strongest_sum(t, n_b, m, omega))
        assert approx / exact == pytest.approx(1.0, rel=0.02)


def lambda_min(x, t):
    return min(x, t - x)


class TestOrderedGainDistribution:
    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_unit_mass(self, l):
        val, _ = quad(lambda x: float(pdf_ordered_gain(x, l, 3, 2, 0.125)), 0.0, np.inf,
                      limit=300)
        assert val == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_cdf_matches_pdf_integral(self, l):
        for x in (1.0, 8.0, 30.0):
            val, _ = quad(lambda u: float(pdf_ordered_gain(u, l, 3, 2, 0.125)), 0.0, x, limit=300)
            assert cdf_ordered_gain(x, l, 3, 2, 0.125) == pytest.approx(val, abs=1e-10)

    def test_empirical_match(self):
        rng = np.random.default_rng(11)
        m_total, lam, L = 2, 0.125, 3
        g = rng.gamma(m_total, 1.0 / lam, size=(500_000, L))
        g.sort(axis=1)
        for l in (1, 2, 3):
            for x in (4.0, 12.0, 30.0):
                emp = float(np.mean(g[:, l - 1] <= x))
                ana = float(cdf_ordered_gain(x, l, L, m_total, lam))
                assert ana == pytest.approx(emp, abs=4e-3)

    def test_min_of_three_exponentials(self):
        # L=3, m_total=1: the smallest gain is Exp with tripled rate
        lam = 1.0 / 16.0
        for x in (2.0, 10.0):
            assert float(cdf_ordered_gain(x, 1, 3, 1, lam)) == pytest.approx(
                1.0 - math.exp(-3 * lam * x), rel=1e-12
            )


class TestRelayRatioCdf:
    def test_practical_against_simulation(self):
        snr_bar = 10.0 ** 1.5
        stats = derive_link_stats(PRACTICAL, snr_bar)
        theta4p = snr_bar / 2 * stats.sigma2_sr + 1.0
        rng = np.random.default_rng(13)
        n = 500_000
        g = rng.gamma(1.0, stats.omega_hat_sr, size=(n, PRACTICAL.n_b))
        g.sort(axis=1)
        a = g[:, -1] + g[:, -2]
        c = rng.gamma(1.0, stats.omega_rr, size=n)
        w = snr_bar * a / (snr_bar * c + theta4p)
        for x in (5.0, 50.0, 200.0):
            emp = float(np.mean(w > x))
            ana = sf_relay_ratio(
                x, n_b=PRACTICAL.n_b, m_sr=1, lam_sr=1.0 / stats.omega_hat_sr,
                m_rr=1, omega_rr=stats.omega_rr, snr_bar=snr_bar,
                theta4p=theta4p, ideal=False,
            )
            assert ana == pytest.approx(emp, abs=4e-3)

    def test_ideal_against_simulation(self):
        snr_bar = 10.0**2
        stats = derive_link_stats(BASE, snr_bar)
        rng = np.random.default_rng(15)
        n = 500_000
        g = rng.gamma(1.0, stats.omega_hat_sr, size=(n, 2))
        a = g.sum(axis=1)
        c = rng.gamma(1.0, stats.omega_rr, size=n)
        for x in (20.0, 200.0, 2000.0):
            emp = float(np.mean(a / c > x))
            ana = sf_relay_ratio(
                x, n_b=2, m_sr=1, lam_sr=1.0 / stats.omega_hat_sr, m_rr=1,
                omega_rr=stats.omega_rr, snr_bar=snr_bar, theta4p=1.0, ideal=True,
            )
            assert ana == pytest.approx(emp, abs=4e-3)


class TestExactOutage:
    def test_vanishing_thresholds(self):
        cfg = replace(BASE, gamma_th=(1e-9, 1e-9, 1e-9))
        for l in (1, 2, 3):
            assert exact_outage(cfg, 10.0, l).value < 1e-6

    def test_monotone_in_snr(self):
        vals = [exact_outage(BASE, snr, 2).value for snr in (0.0, 10.0, 20.0, 30.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_monotone_in_threshold_and_impairments(self):
        base = exact_outage(BASE, 15.0, 2).value
        tighter = replace(BASE, gamma_th=(0.95, 1.8, 2.4))
        assert exact_outage(tighter, 15.0, 2).value > base
        assert exact_outage(PRACTICAL, 15.0, 2).value > base
        worse_si = replace(BASE, mu=0.75)
        assert exact_outage(worse_si, 15.0, 2).value > base

    @pytest.mark.parametrize(
        "cfg,snr",
        [
            (BASE, 15.0),
            (replace(BASE, n_b=3), 10.0),
            (PRACTICAL, 20.0),
            (replace(BASE, n_b=3, m_sr=2, m_rr=2, m_ru=(2, 2, 2)), 10.0),
            (replace(BASE, mu=1.0), 15.0),
            (replace(BASE, n_r=2), 10.0),
        ],
    )
    def test_agrees_with_simulator(self, cfg, snr):
        for l in (1, 2, 3):
            mc = simulate_outage(cfg, snr, l, 400_000, rng=3)
            exact = exact_outage(cfg, snr, l).value
            sd = math.sqrt(max(mc.value * (1 - mc.value), 1e-12) / 400_000)
            assert abs(exact - mc.value) < 4.5 * sd + 1e-6

    def test_printed_variant_is_refuted_by_simulation(self):
        # arbitration of the inconsistent typeset form: the as-printed
        # variant disagrees with the simulator by orders of magnitude (it is
        # not even a probability), the consistent variant sits inside the
        # Monte Carlo uncertainty
        cfg, snr, l = replace(BASE, n_b=3), 10.0, 2
        mc = simulate_outage(cfg, snr, l, 200_000, rng=5)
        consistent = exact_outage(cfg, snr, l, variant="consistent").value
        sd = math.sqrt(mc.value * (1 - mc.value) / 200_000)
        assert abs(consistent - mc.value) < 5 * sd
        with pytest.raises(NumericsError):
            # blows past the roundoff clamp budget: not a probability at all
            exact_outage(cfg, snr, l, variant="as_printed")

    def test_quadrature_spec_respected(self):
        loose = QuadratureSpec(rel_tol=1e-6)
        tight = QuadratureSpec(rel_tol=1e-12)
        a = exact_outage(BASE, 15.0, 2, loose).value
        b = exact_outage(BASE, 15.0, 2, tight).value
        assert a == pytest.approx(b, rel=1e-5)

    def test_non_integer_shape_rejected(self):
        with pytest.raises(ConfigError, match="integer"):
            exact_outage(replace(BASE, m_sr=0.98, m_rr=0.98, m_ru=(0.98,) * 3), 10.0, 1)

    def test_heterogeneous_users_rejected(self):
        with pytest.raises(ConfigError, match="identical"):
            exact_outage(replace(BASE, d_ru=(0.4, 0.5, 0.6)), 10.0, 1)


class TestLowerBound:
    @pytest.mark.parametrize(
        "cfg",
        [
            BASE,
            replace(BASE, n_b=3),
            replace(BASE, mu=1.0),
            PRACTICAL,
            replace(PRACTICAL, n_b=3),
            replace(BASE, n_b=3, m_sr=2, m_rr=2, m_ru=(2, 2, 2)),
        ],
    )
    def test_never_exceeds_exact(self, cfg):
        for snr in (0.0, 10.0, 25.0, 40.0):
            for l in (1, 2, 3):
                lb = lower_bound_outage(cfg, snr, l).value
                ex = exact_outage(cfg, snr, l).value
                assert lb <= ex + 1e-8

    def test_tight_at_high_snr_for_si_floor(self):
        cfg = replace(BASE, mu=1.0)
        for snr in (35.0, 40.0, 45.0, 50.0):
            for l in (1, 2, 3):
                lb = lower_bound_outage(cfg, snr, l).value
                ex = exact_outage(cfg, snr, l).value
                assert (ex - lb) / ex < 0.05

    def test_zero_threshold_limit(self):
        cfg = replace(BASE, gamma_th=(1e-12, 1e-12, 1e-12))
        assert lower_bound_outage(cfg, 20.0, 3).value < 1e-9

    def test_printed_theta4p_breaks_the_bound(self):
        # with the typeset gbar^2 constant the "bound" crosses above the
        # exact outage under impairments; the grouping-consistent constant
        # keeps the ordering at every point tested
        cfg = PRACTICAL
        violated = False
        for snr in (10.0, 25.0, 40.0):
            for l in (1, 2, 3):
                printed = lower_bound_outage(cfg, snr, l, variant="as_printed").value
                ex = exact_outage(cfg, snr, l).value
                violated = violated or printed > ex + 1e-8
        assert violated


class TestAsymptotics:
    def test_diversity_order_examples(self):
        assert diversity_order(replace(BASE, n_b=3, mu=0.25), 2) == pytest.approx(2.0)
        assert diversity_order(replace(BASE, mu=0.0), 1) == pytest.approx(1.0)
        assert diversity_order(replace(BASE, mu=1.0), 3) == 0.0

    def test_array_gain_equal_branch(self):
        cfg = replace(BASE, n_b=2, n_r=2, m_sr=2, m_rr=1, m_ru=(1, 1, 1), mu=0.5)
        # (1-mu) m_sr n_b = 2 equals m_ru n_r l = 2 at l=1
        g_eq = array_gain(cfg, 1)
        xi1 = array_gain(replace(cfg, mu=0.625), 1)  # first branch smaller: 1.5 < 2
        assert g_eq > xi1  # equal branch adds the second-hop gain

    def test_array_gain_rejects_floor_regime(self):
        with pytest.raises(ConfigError):
            array_gain(replace(BASE, mu=1.0), 1)

    def test_mu_one_floor_is_snr_independent(self):
        cfg = replace(BASE, mu=1.0)
        vals = [asymptotic_outage_ideal(cfg, snr, 2).value for snr in (20.0, 35.0, 50.0)]
        assert max(vals) == pytest.approx(min(vals), rel=1e-12)
        assert asymptotic_outage_ideal(cfg, 40.0, 2).floor

    def test_mu_one_exact_matches_floor(self):
        cfg = replace(BASE, mu=1.0)
        for l in (1, 2, 3):
            floor = asymptotic_outage_ideal(cfg, 45.0, l).value
            hi = exact_outage(cfg, 45.0, l).value
            assert hi == pytest.approx(floor, rel=0.02)

    def test_converges_to_exact(self):
        # within 0.15 decades at 45 dB for every power-law curve family
        for mu in (0.0, 0.25, 0.5):
            cfg = replace(BASE, mu=mu)
            for l in (1, 2, 3):
                ex = exact_outage(cfg, 45.0, l).value
                asym = asymptotic_outage_ideal(cfg, 45.0, l).value
                assert abs(math.log10(ex) - math.log10(asym)) < 0.15

    def test_requires_ideal(self):
        with pytest.raises(ConfigError):
            asymptotic_outage_ideal(PRACTICAL, 30.0, 1)

    def test_practical_floor_matches_high_snr_exact(self):
        for l in (1, 2, 3):
            floor = asymptotic_outage_practical(PRACTICAL, l).value
            ex = exact_outage(PRACTICAL, 50.0, l).value
            assert floor == pytest.approx(ex, rel=0.05)

    def test_practical_floor_monotone_in_cee(self):
        worse = replace(
            PRACTICAL, sigma2_est_sr=0.02, sigma2_est_ru=(0.02,) * 3
        )
        for l in (1, 2, 3):
            assert (
                asymptotic_outage_practical(worse, l).value
                > asymptotic_outage_practical(PRACTICAL, l).value
            )

    def test_practical_floor_rejects_ideal(self):
        with pytest.raises(ConfigError):
            asymptotic_outage_practical(BASE, 1)

    def test_practical_floor_mu_one(self):
        cfg = replace(PRACTICAL, mu=1.0)
        floor = asymptotic_outage_practical(cfg, 2).value
        ex = exact_outage(cfg, 55.0, 2).value
        assert floor == pytest.approx(ex, rel=0.05)

    def test_practical_floor_single_sided_impairment(self):
        cfg = replace(BASE, sigma2_est_sr=0.02)  # first hop only
        floor = asymptotic_outage_practical(cfg, 1).value
        ex = exact_outage(cfg, 60.0, 1).value
        assert floor == pytest.approx(ex, rel=0.05)
