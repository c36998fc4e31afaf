"""Figure presets: the sweep protocol and configuration behind each of the
reference result figures (fig3..fig12).

Where a figure shows several curves sharing one axis (different mu, antenna
counts, Nakagami shapes), the preset expands into one variant per curve
family, each with its own SystemConfig.  Parameters not spelled out in a
caption fall back to the baseline setup (n_b=2, n_r=1, m=1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ConfigError
from .sysmodel import SystemConfig

__all__ = ["SweepSpec", "PresetVariant", "figure_preset", "PRESET_NAMES"]

_AXES = ("snr_db", "mu", "sigma2_est_sr", "sigma2_est_ru", "d_sr")
_METHODS = (
    "exact",
    "lower_bound",
    "asymptotic_ideal",
    "asymptotic_practical",
    "monte_carlo",
    "hd_noma",
    "fd_oma",
)


@dataclass(frozen=True)
class SweepSpec:
    """Axis, grid and output protocol of one sweep.

    snr_db fixes the operating point when the axis is not snr_db; hd_rule
    picks the HD-NOMA threshold mapping for the hd_noma method.
    """

    axis: str = "snr_db"
    grid: tuple[float, ...] = ()
    methods: tuple[str, ...] = ("exact",)
    users: tuple[int, ...] = (1, 2, 3)
    trials: int = 100_000
    seed: int = 1
    snr_db: float | None = None
    hd_rule: str = "equal"

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {_AXES}")
        if not self.grid:
            raise ConfigError("sweep grid is empty")
        if any(self.grid[i] >= self.grid[i + 1] for i in range(len(self.grid) - 1)):
            raise ConfigError("sweep grid must be strictly increasing")
        for m in self.methods:
            if m not in _METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {_METHODS}")
        if self.axis != "snr_db" and self.snr_db is None:
            raise ConfigError(f"axis {self.axis!r} needs a fixed snr_db")
        if not self.users:
            raise ConfigError("users list is empty")


@dataclass(frozen=True)
class PresetVariant:
    label: str
    sweep: SweepSpec
    config: SystemConfig


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    out = []
    k = 0
    while True:
        v = start + k * step
        if v > stop + 1e-9:
            break
        out.append(round(v, 12))
        k += 1
    return tuple(out)


_BASE = SystemConfig()  # defaults: the baseline three-user setup
_PRACTICAL = dict(
    sigma2_est_sr=0.01, sigma2_est_ru=(0.01,) * 3, fd_tau_sr=0.03, fd_tau_ru=(0.03,) * 3
)


def _fig3():
    sweep = SweepSpec(grid=_grid(0, 50, 5), methods=("exact", "lower_bound", "monte_carlo"))
    return [
        PresetVariant(f"nb{nb}", sweep, replace(_BASE, n_b=nb, mu=1.0)) for nb in (2, 3)
    ]


def _fig4():
    sweep = SweepSpec(
        grid=_grid(0, 40, 5), methods=("exact", "asymptotic_ideal", "monte_carlo")
    )
    out = []
    for mu in (0.0, 0.25, 0.5, 1.0):
        out.append(PresetVariant(f"mu{mu:g}", sweep, replace(_BASE, mu=mu)))
    return out


def _fig5():
    sweep = SweepSpec(grid=_grid(0, 40, 5), methods=("exact", "monte_carlo"))
    return [PresetVariant(f"nb{nb}", sweep, replace(_BASE, n_b=nb)) for nb in (2, 3)]


def _fig6():
    sweep = SweepSpec(
        grid=_grid(0, 50, 5),
        methods=("exact", "asymptotic_practical", "monte_carlo"),
    )
    out = []
    for nb, nr in ((2, 1), (3, 1), (2, 2), (3, 2)):
        cfg = replace(_BASE, n_b=nb, n_r=nr, **_PRACTICAL)
        out.append(PresetVariant(f"nb{nb}_nr{nr}", sweep, cfg))
    return out


def _fig7():
    sweep = SweepSpec(grid=_grid(0, 40, 5), methods=("exact", "monte_carlo"))
    out = []
    for m in (2, 3):
        shapes = dict(m_sr=m, m_rr=m, m_ru=(m,) * 3)
        out.append(PresetVariant(f"m{m}_ideal", sweep, replace(_BASE, **shapes)))
        out.append(PresetVariant(f"m{m}_practical", sweep, replace(_BASE, **shapes, **_PRACTICAL)))
    return out


def _fig8():
    # test-bed protocol: estimated shape 0.98, CEE variance from the LS
    # estimator, no feedback delay, SI fully cancelled
    cfg = replace(
        _BASE,
        n_b=3,
        n_r=2,
        m_sr=0.98,
        m_rr=0.98,
        m_ru=(0.98,) * 3,
        a=(0.761, 0.191, 0.048),
        gamma_th=(2.0, 2.5, 3.0),
        mu=0.0,
        sigma2_est_sr=0.048,
        sigma2_est_ru=(0.048,) * 3,
    )
    sweep = SweepSpec(grid=_grid(0, 40, 5), methods=("monte_carlo",))
    return [PresetVariant("testbed", sweep, cfg)]


def _fig9():
    sweep = SweepSpec(
        axis="mu",
        grid=_grid(0.0, 1.0, 0.1),
        methods=("monte_carlo", "hd_noma"),
        snr_db=15.0,
        hd_rule="equal",
    )
    return [PresetVariant("nb2", sweep, _BASE)]


def _fig10():
    out = []
    for examined in ("sr", "ru"):
        for nb in (2, 3):
            if examined == "sr":
                cfg = replace(_BASE, n_b=nb, fd_tau_sr=0.03)
                axis = "sigma2_est_sr"
            else:
                cfg = replace(_BASE, n_b=nb, fd_tau_ru=(0.03,) * 3)
                axis = "sigma2_est_ru"
            sweep = SweepSpec(
                axis=axis,
                grid=_grid(0.0, 0.25, 0.025),
                methods=("exact", "monte_carlo", "fd_oma"),
                snr_db=15.0,
            )
            out.append(PresetVariant(f"{examined}_nb{nb}", sweep, cfg))
    return out


def _fig11():
    sweep = SweepSpec(
        axis="d_sr",
        grid=_grid(0.1, 0.9, 0.05),
        methods=("exact", "monte_carlo", "fd_oma"),
        snr_db=15.0,
    )
    out = []
    for nb, nr in ((2, 1), (3, 1), (4, 1), (2, 2)):
        out.append(PresetVariant(f"nb{nb}_nr{nr}", sweep, replace(_BASE, n_b=nb, n_r=nr)))
    return out


def _fig12():
    sweep = SweepSpec(
        axis="d_sr",
        grid=_grid(0.1, 0.9, 0.05),
        methods=("exact", "monte_carlo", "fd_oma"),
        snr_db=15.0,
    )
    out = []
    for nb, nr in ((2, 1), (3, 1), (2, 2)):
        cfg = replace(_BASE, n_b=nb, n_r=nr, **_PRACTICAL)
        out.append(PresetVariant(f"nb{nb}_nr{nr}", sweep, cfg))
    return out


_PRESETS = {
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
    "fig10": _fig10,
    "fig11": _fig11,
    "fig12": _fig12,
}

PRESET_NAMES = tuple(_PRESETS)


def figure_preset(name: str) -> list[PresetVariant]:
    """All curve-family variants of one figure preset.

    A name of the form "figN:variant" selects a single variant.
    """
    base, _, variant = name.partition(":")
    if base not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    variants = _PRESETS[base]()
    if not variant:
        return variants
    for v in variants:
        if v.label == variant:
            return [v]
    labels = ", ".join(v.label for v in variants)
    raise ConfigError(f"unknown variant {variant!r} for {base}; available: {labels}")
