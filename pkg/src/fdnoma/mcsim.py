"""Monte Carlo outage engine.

Independent of the closed-form path: channels are sampled as Gamma powers,
ordered exactly as the selection/feedback protocol orders them, and the
per-stage SINR events are evaluated from the SINR expression directly.

Reproducibility: trials are partitioned into fixed chunks of CHUNK_TRIALS;
chunk i draws from the stream (seed, base_stream + i).  Chunk counts are
integers and merge by addition, so the totals are identical for any worker
count and any execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .analytic import OutagePoint
from .errors import ConfigError
from .sysmodel import (
    HdRule,
    LinkStats,
    SystemConfig,
    ThetaSet,
    compute_deltas,
    compute_theta,
    derive_link_stats,
    map_baseline_thresholds,
    with_overrides,
)

__all__ = [
    "CHUNK_TRIALS",
    "RngStream",
    "ChannelDraw",
    "SinrBreakdown",
    "wilson_interval",
    "sample_first_hop",
    "sample_second_hop",
    "sample_si_gain",
    "evaluate_sinr",
    "simulate_outage",
    "simulate_outage_all",
    "simulate_baseline",
]

CHUNK_TRIALS = 1_000_000
MIN_TRIALS = 10_000

_SIM_METHODS = ("monte_carlo", "hd_noma", "fd_oma")


@dataclass(frozen=True)
class RngStream:
    """Counter-style stream identity: (seed, stream_id) fixes all draws."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.seed, self.stream_id)))

    def child(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + offset)


@dataclass(frozen=True)
class ChannelDraw:
    """One realization of the fading state entering the SINR.

    a: sum of the two largest first-hop estimated-delayed gains.
    b: the users' second-hop effective gains sorted ascending (entry l-1
       belongs to user l).  c: residual SI gain.
    """

    a: float
    b: tuple[float, ...]
    c: float

    def __post_init__(self):
        if self.a < 0 or self.c < 0 or any(x < 0 for x in self.b):
            raise ValueError("channel gains must be nonnegative")
        if any(self.b[i] > self.b[i + 1] for i in range(len(self.b) - 1)):
            raise ValueError("b must be sorted ascending (order statistics)")


@dataclass(frozen=True)
class SinrBreakdown:
    """Per-stage SINRs gamma_{k->l} for k = 1..l."""

    user: int
    gammas: tuple[float, ...]


def wilson_interval(successes: int, trials: int, conf: float = 0.95) -> tuple[float, float]:
    """Wilson score interval; preferred over Wald for small-probability tails."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = float(ndtri(0.5 + conf / 2.0))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def sample_first_hop(cfg: SystemConfig, stats: LinkStats, rng: np.random.Generator, size: int = 1):
    """Sum of the two largest of n_b i.i.d. Gamma(m_sr) estimated gains."""
    g = rng.gamma(cfg.m_sr, stats.omega_hat_sr / cfg.m_sr, size=(size, cfg.n_b))
    if cfg.n_b == 2:
        return g.sum(axis=1)
    top2 = np.partition(g, cfg.n_b - 2, axis=1)[:, -2:]
    return top2.sum(axis=1)


def sample_second_hop(cfg: SystemConfig, stats: LinkStats, rng: np.random.Generator, size: int = 1):
    """Per-user combined gains (n_r branches each), sorted ascending."""
    cols = []
    for l in range(cfg.n_users):
        shape = cfg.m_ru[l] * cfg.n_r
        scale = stats.omega_hat_ru[l] / cfg.m_ru[l]
        cols.append(rng.gamma(shape, scale, size=size))
    b = np.stack(cols, axis=1)
    b.sort(axis=1)
    return b


def sample_si_gain(cfg: SystemConfig, stats: LinkStats, rng: np.random.Generator, size: int = 1):
    return rng.gamma(cfg.m_rr, stats.omega_rr / cfg.m_rr, size=size)


def evaluate_sinr(
    draw: ChannelDraw,
    theta: ThetaSet,
    cfg: SystemConfig,
    snr_bar: float,
    l: int,
) -> SinrBreakdown:
    """Instantaneous SINR of every SIC stage k <= l for one channel state."""
    a, b, c = draw.a, draw.b[l - 1], draw.c
    g = snr_bar
    d0 = (
        theta.theta1 * g * a
        + theta.theta2 * g * b
        + theta.theta3 * g * c
        + theta.theta4 * g**2 * b * c
        + theta.theta5
    )
    gammas = []
    for k in range(1, l + 1):
        num = g**2 / 2 * a * b * cfg.a[k - 1]
        den = g**2 / 2 * a * b * sum(cfg.a[k:]) + d0
        gammas.append(num / den)
    return SinrBreakdown(user=l, gammas=tuple(gammas))


def _chunk_counts(
    cfg: SystemConfig,
    snr_db: float,
    trials: int,
    stream: RngStream,
    methods: tuple[str, ...],
    hd_rule: HdRule,
) -> dict[str, np.ndarray]:
    """Outage counts per method and user for one chunk of trials.

    The joint stage event collapses to a single comparison: user l is in
    outage iff (gbar^2/2) A B_l <= Lambda_l^+ * D0, with D0 the
    theta-weighted denominator terms shared by all stages.
    """
    snr_bar = 10.0 ** (snr_db / 10.0)
    stats = derive_link_stats(cfg, snr_bar)
    lam_fd = compute_deltas(cfg, snr_bar).lambda_dag
    lam_alt: dict[str, tuple[float, ...]] = {}
    if "hd_noma" in methods:
        thr = map_baseline_thresholds(cfg, "hd_noma", hd_rule)
        cfg_hd = with_overrides(cfg, gamma_th=thr)
        lam_alt["hd_noma"] = compute_deltas(cfg_hd, snr_bar).lambda_dag
    if "fd_oma" in methods:
        thr = map_baseline_thresholds(cfg, "fd_oma")
        lam_alt["fd_oma"] = thr  # full power, empty interference sum

    rng = stream.generator()
    a = sample_first_hop(cfg, stats, rng, trials)
    b = sample_second_hop(cfg, stats, rng, trials)
    c = sample_si_gain(cfg, stats, rng, trials)

    g = snr_bar
    counts = {m: np.zeros(cfg.n_users, dtype=np.int64) for m in methods}
    for l in range(1, cfg.n_users + 1):
        theta = compute_theta(stats, snr_bar, l)
        bl = b[:, l - 1]
        lhs = g**2 / 2 * a * bl
        d0_common = theta.theta1 * g * a + theta.theta2 * g * bl + theta.theta5
        d0_si = theta.theta3 * g * c + theta.theta4 * g**2 * bl * c
        if "monte_carlo" in methods:
            counts["monte_carlo"][l - 1] = np.count_nonzero(
                lhs <= lam_fd[l - 1] * (d0_common + d0_si)
            )
        if "hd_noma" in methods:
            counts["hd_noma"][l - 1] = np.count_nonzero(
                lhs <= lam_alt["hd_noma"][l - 1] * d0_common
            )
        if "fd_oma" in methods:
            counts["fd_oma"][l - 1] = np.count_nonzero(
                lhs <= lam_alt["fd_oma"][l - 1] * (d0_common + d0_si)
            )
    return counts


def simulate_outage_all(
    cfg: SystemConfig,
    snr_db: float,
    trials: int,
    rng: RngStream | int = 0,
    workers: int = 1,
    methods: tuple[str, ...] = ("monte_carlo",),
    hd_rule: HdRule = "equal",
    conf: float = 0.95,
) -> dict[str, list[OutagePoint]]:
    """Estimated OP for every user, for each requested simulation method.

    All methods share the same channel draws (common random numbers), so
    method differences at one point are paired.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    for m in methods:
        if m not in _SIM_METHODS:
            raise ValueError(f"unknown simulation method {m!r}")
    base = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    n_chunks = (trials + CHUNK_TRIALS - 1) // CHUNK_TRIALS
    sizes = [CHUNK_TRIALS] * (n_chunks - 1) + [trials - CHUNK_TRIALS * (n_chunks - 1)]
    jobs = [
        (cfg, snr_db, sizes[i], base.child(i), tuple(methods), hd_rule)
        for i in range(n_chunks)
    ]
    if workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_counts_star, jobs))
    else:
        results = [_chunk_counts(*job) for job in jobs]

    out: dict[str, list[OutagePoint]] = {}
    for m in methods:
        total = np.zeros(cfg.n_users, dtype=np.int64)
        for res in results:
            total += res[m]
        points = []
        for l in range(1, cfg.n_users + 1):
            ci = wilson_interval(int(total[l - 1]), trials, conf)
            points.append(
                OutagePoint(
                    user=l,
                    snr_db=snr_db,
                    value=int(total[l - 1]) / trials,
                    method=m,
                    ci=ci,
                )
            )
        out[m] = points
    return out


def _chunk_counts_star(args):
    return _chunk_counts(*args)


def simulate_outage(
    cfg: SystemConfig,
    snr_db: float,
    l: int,
    trials: int,
    rng: RngStream | int = 0,
    workers: int = 1,
    conf: float = 0.95,
) -> OutagePoint:
    """OP of user l by direct simulation, Wilson CI attached."""
    res = simulate_outage_all(cfg, snr_db, trials, rng, workers, ("monte_carlo",), conf=conf)
    return res["monte_carlo"][l - 1]


def simulate_baseline(
    cfg: SystemConfig,
    snr_db: float,
    l: int,
    baseline: str,
    trials: int,
    rng: RngStream | int = 0,
    workers: int = 1,
    hd_rule: HdRule = "equal",
    conf: float = 0.95,
) -> OutagePoint:
    """HD-NOMA (no SI, mapped thresholds) or FD-OMA (single-user, product
    threshold) over the same TAS/Alamouti-MRC chain."""
    if baseline not in ("hd_noma", "fd_oma"):
        raise ConfigError(f"unknown baseline {baseline!r}")
    res = simulate_outage_all(
        cfg, snr_db, trials, rng, workers, (baseline,), hd_rule=hd_rule, conf=conf
    )
    return res[baseline][l - 1]
