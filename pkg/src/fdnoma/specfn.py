"""Special functions and combinatorial kernels used by the closed-form engine.

Everything here is pure and stateless.  The gamma/Bessel evaluations are
delegated to scipy.special, which meets the accuracy targets with large
margin; the polynomial-power coefficients and the partial fraction
decomposition are implemented locally because they are the load-bearing
combinatorial pieces of the outage formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from scipy import special as _sp

from .errors import NumericsError

__all__ = [
    "ln_gamma",
    "lower_incomplete_gamma_reg",
    "bessel_k_int",
    "ln_bessel_k_int",
    "PolyCoeffs",
    "poly_power_coeffs",
    "PfdForm",
    "pfd_two_pole",
]


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    if not x > 0:
        raise ValueError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def lower_incomplete_gamma_reg(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0."""
    if not a > 0:
        raise ValueError(f"lower_incomplete_gamma_reg requires a > 0, got a={a}")
    if not x >= 0:
        raise ValueError(f"lower_incomplete_gamma_reg requires x >= 0, got x={x}")
    return float(_sp.gammainc(a, x))


def bessel_k_int(v: int, x: float) -> float:
    """Modified Bessel function of the second kind K_v(x), integer order.

    K_{-v} = K_v is applied for negative orders.  Underflow to 0.0 for
    large x is allowed (K_v decays like exp(-x)).
    """
    if not x > 0:
        raise ValueError(f"bessel_k_int requires x > 0, got {x}")
    return float(_sp.kv(abs(int(v)), x))


def ln_bessel_k_int(v: int, x: float) -> float:
    """log K_v(x) computed without underflow via the scaled Bessel kve.

    Beyond kve's argument range the two-term large-x expansion
    sqrt(pi/(2x)) e^{-x} (1 + (4v^2-1)/(8x)) is exact to double precision.
    """
    if not x > 0:
        raise ValueError(f"ln_bessel_k_int requires x > 0, got {x}")
    v = abs(int(v))
    if x > 1e8:
        return 0.5 * (math.log(math.pi / 2.0) - math.log(x)) - x + math.log1p(
            (4.0 * v * v - 1.0) / (8.0 * x)
        )
    scaled = float(_sp.kve(v, x))
    if scaled <= 0 or math.isnan(scaled):
        raise NumericsError(f"kve({v}, {x}) returned {scaled}")
    return math.log(scaled) - x


@dataclass(frozen=True)
class PolyCoeffs:
    """Coefficients of a polynomial in y, index n = power of y.

    Represents the multinomial expansion
        (sum_{k=0}^{m-1} (lam*y)^k / k!) ** r  =  sum_n coeffs[n] * y^n,
    so coeffs[0] == 1 and len(coeffs) == r*(m-1) + 1.
    """

    coeffs: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, n: int) -> float:
        return self.coeffs[n]


def _poly_power_exact(m: int, lam: Fraction, r: int) -> list[Fraction]:
    base = [lam**k / math.factorial(k) for k in range(m)]
    out = [Fraction(1)]
    for _ in range(r):
        new = [Fraction(0)] * (len(out) + m - 1)
        for i, a in enumerate(out):
            if a == 0:
                continue
            for j, b in enumerate(base):
                new[i + j] += a * b
        out = new
    return out


@lru_cache(maxsize=4096)
def poly_power_coeffs(m: int, lam: float, r: int) -> PolyCoeffs:
    """Expansion coefficients of the truncated-exponential polynomial power.

    Computed by iterated exact convolution (Fraction arithmetic), so the
    semigroup identity conv(r1+r2) == conv(r1) * conv(r2) holds exactly
    before the final float rounding.
    """
    if m < 1 or r < 0:
        raise ValueError(f"poly_power_coeffs requires m >= 1 and r >= 0, got m={m}, r={r}")
    if not lam > 0:
        raise ValueError(f"poly_power_coeffs requires lam > 0, got {lam}")
    exact = _poly_power_exact(int(m), Fraction(lam), int(r))
    return PolyCoeffs(tuple(float(c) for c in exact))


@dataclass(frozen=True)
class PfdForm:
    """Partial fraction decomposition of prod_t (s + s_t)^(-alpha_t).

    kappa[t1][t2-1] is the coefficient of (s + poles[t1])^(-t2), matching
        prod_t (s + s_t)^(-alpha_t)
            = sum_{t1} sum_{t2=1}^{mult[t1]} kappa[t1][t2-1] (s + s_t1)^(-t2).
    """

    poles: tuple[float, ...]
    multiplicities: tuple[int, ...]
    kappa: tuple[tuple[float, ...], ...]

    @property
    def pole_count(self) -> int:
        return len(self.poles)

    def reconstruct(self, s: float) -> float:
        """Evaluate the decomposition at a point (used for self-checks)."""
        total = 0.0
        for pole, row in zip(self.poles, self.kappa):
            for t2, coeff in enumerate(row, start=1):
                total += coeff * (s + pole) ** (-t2)
        return total

    def source(self, s: float) -> float:
        """Evaluate the original product of inverse-power factors."""
        total = 1.0
        for pole, alpha in zip(self.poles, self.multiplicities):
            total *= (s + pole) ** (-alpha)
        return total


def _residue_row(pole: float, mult: int, other_pole: float, other_mult: int) -> tuple[float, ...]:
    # kappa_{., t2} = d^{j}/ds^{j} (s+other)^{-other_mult} / j! at s = -pole,
    # j = mult - t2.  Exact rational arithmetic with one final rounding, so
    # each coefficient is correct to 0.5 ulp; the decomposition as a whole
    # is still limited by float64 once multiplicities grow (see PfdForm).
    row = []
    diff = Fraction(other_pole) - Fraction(pole)
    for t2 in range(1, mult + 1):
        j = mult - t2
        val = (-1) ** j * math.comb(other_mult + j - 1, j) / diff ** (other_mult + j)
        row.append(float(val))
    return tuple(row)


def pfd_two_pole(s1: float, a1: int, s2: float = 0.0, a2: int = 0) -> PfdForm:
    """PFD of (s+s1)^(-a1) (s+s2)^(-a2) via the repeated-pole residue formula.

    a2 == 0 degenerates to the single pure power (s+s1)^(-a1), whose only
    nonzero coefficient is kappa_{1,a1} = 1.
    """
    a1, a2 = int(a1), int(a2)
    if a1 < 1:
        raise ValueError(f"pfd_two_pole requires a1 >= 1, got {a1}")
    if not s1 > 0:
        raise ValueError(f"pfd_two_pole requires s1 > 0, got {s1}")
    if a2 == 0:
        row = [0.0] * a1
        row[a1 - 1] = 1.0
        return PfdForm(poles=(s1,), multiplicities=(a1,), kappa=(tuple(row),))
    if not s2 > 0:
        raise ValueError(f"pfd_two_pole requires s2 > 0 when a2 > 0, got {s2}")
    if s1 == s2:
        raise ValueError("pfd_two_pole: coincident poles with two factors are degenerate")
    return PfdForm(
        poles=(s1, s2),
        multiplicities=(a1, a2),
        kappa=(_residue_row(s1, a1, s2, a2), _residue_row(s2, a2, s1, a1)),
    )
