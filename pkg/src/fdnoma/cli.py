"""Command-line front end: analytic/simulation sweeps to CSV, figure
presets, and the cross-engine validation harness.

Exit codes: 0 ok, 1 usage, 2 config, 3 numeric failure, 4 validation
failure.  CSV output is byte-identical across runs for a fixed seed and
preset; wall-clock timings are only written under --timings because they
would break that guarantee.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, replace

from . import analytic, mcsim
from .errors import ConfigError, FdnomaError, NumericsError
from .presets import PRESET_NAMES, SweepSpec, figure_preset
from .sysmodel import SystemConfig, dump_config, load_config, with_overrides

__all__ = ["CsvRow", "run_sweep", "validate", "main"]

_CSV_COLUMNS = ("axis_value", "user", "method", "op", "ci_low", "ci_high", "trials", "wall_ms", "error")
_METHOD_ORDER = (
    "exact",
    "lower_bound",
    "asymptotic_ideal",
    "asymptotic_practical",
    "monte_carlo",
    "hd_noma",
    "fd_oma",
)
_SIM_METHODS = ("monte_carlo", "hd_noma", "fd_oma")


@dataclass(frozen=True)
class CsvRow:
    axis_value: float
    user: int
    method: str
    op: float | None
    ci_low: float | None = None
    ci_high: float | None = None
    trials: int | None = None
    wall_ms: int | None = None
    error: str = ""

    def formatted(self) -> list[str]:
        def f(x):
            if x is None:
                return ""
            if isinstance(x, int):
                return str(x)
            return format(x, ".17g")

        return [
            f(self.axis_value),
            str(self.user),
            self.method,
            f(self.op),
            f(self.ci_low),
            f(self.ci_high),
            f(self.trials),
            f(self.wall_ms),
            self.error,
        ]


def _apply_axis(cfg: SystemConfig, axis: str, value: float) -> tuple[SystemConfig, float | None]:
    """Config override and (possibly axis-supplied) SNR for one grid point."""
    if axis == "snr_db":
        return cfg, value
    if axis == "mu":
        return with_overrides(cfg, mu=value), None
    if axis == "sigma2_est_sr":
        return with_overrides(cfg, sigma2_est_sr=value), None
    if axis == "sigma2_est_ru":
        return with_overrides(cfg, sigma2_est_ru=(value,) * cfg.n_users), None
    if axis == "d_sr":
        # users sit on the far side of the relay: d_ru = 1 - d_sr
        return with_overrides(cfg, d_sr=value, d_ru=(1.0 - value,) * cfg.n_users), None
    raise ConfigError(f"unknown axis {axis!r}")


def run_sweep(
    spec: SweepSpec,
    cfg: SystemConfig,
    out,
    quad: analytic.QuadratureSpec | None = None,
    workers: int = 1,
    timings: bool = False,
) -> list[CsvRow]:
    """Evaluate every (axis point, user, method) cell and stream CSV rows.

    Per-point failures become rows with the error column set; the sweep
    continues.  Row order is fixed: grid order, then user, then method in
    canonical order.
    """
    quad = quad or analytic.QuadratureSpec()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    methods = tuple(m for m in _METHOD_ORDER if m in spec.methods)
    sim_methods = tuple(m for m in methods if m in _SIM_METHODS)
    rows: list[CsvRow] = []

    for idx, value in enumerate(spec.grid):
        t0 = time.perf_counter()
        cell_error = ""
        try:
            cfg_pt, snr = _apply_axis(cfg, spec.axis, value)
            if snr is None:
                snr = spec.snr_db
        except FdnomaError as exc:
            cfg_pt, snr, cell_error = cfg, math.nan, str(exc)

        sim_points = {}
        if sim_methods and not cell_error:
            try:
                sim_points = mcsim.simulate_outage_all(
                    cfg_pt,
                    snr,
                    spec.trials,
                    rng=mcsim.RngStream(spec.seed, idx * 1000),
                    workers=workers,
                    methods=sim_methods,
                    hd_rule=spec.hd_rule,
                )
            except FdnomaError as exc:
                cell_error = str(exc)

        wall = int(round((time.perf_counter() - t0) * 1000.0))
        for user in spec.users:
            for method in methods:
                row = _one_cell(
                    cfg_pt, snr, user, method, value, spec, quad, sim_points, cell_error
                )
                if timings:
                    row = replace(row, wall_ms=wall)
                rows.append(row)
                writer.writerow(row.formatted())
    return rows


def _one_cell(cfg_pt, snr, user, method, value, spec, quad, sim_points, cell_error) -> CsvRow:
    if cell_error:
        return CsvRow(axis_value=value, user=user, method=method, op=None, error=cell_error)
    try:
        if method == "exact":
            pt = analytic.exact_outage(cfg_pt, snr, user, quad)
        elif method == "lower_bound":
            pt = analytic.lower_bound_outage(cfg_pt, snr, user)
        elif method == "asymptotic_ideal":
            pt = analytic.asymptotic_outage_ideal(cfg_pt, snr, user)
        elif method == "asymptotic_practical":
            pt = analytic.asymptotic_outage_practical(cfg_pt, user, quad)
        else:
            pt = sim_points[method][user - 1]
    except FdnomaError as exc:
        return CsvRow(axis_value=value, user=user, method=method, op=None, error=str(exc))
    if method in _SIM_METHODS:
        return CsvRow(
            axis_value=value,
            user=user,
            method=method,
            op=pt.value,
            ci_low=pt.ci[0],
            ci_high=pt.ci[1],
            trials=spec.trials,
        )
    return CsvRow(axis_value=value, user=user, method=method, op=pt.value)


# --------------------------------------------------------------------------
# Cross-engine validation harness
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationLine:
    snr_db: float
    user: int
    check: str
    status: str  # "ok" | "fail" | "insufficient trials"
    detail: str


def validate(
    cfg: SystemConfig,
    snr_grid: tuple[float, ...],
    trials: int,
    tolerance: float = 0.10,
    seed: int = 1,
    workers: int = 1,
    conf: float = 0.99,
) -> tuple[list[ValidationLine], bool]:
    """Exact-vs-MC agreement, bound ordering, and (ideal, mu<1) slope checks.

    A point whose expected outage count is below ~25 cannot falsify the
    closed form, so it is reported as "insufficient trials" rather than a
    failure.
    """
    lines: list[ValidationLine] = []
    exact_vals: dict[tuple[float, int], float] = {}
    for idx, snr in enumerate(snr_grid):
        sim = mcsim.simulate_outage_all(
            cfg, snr, trials, rng=mcsim.RngStream(seed, idx * 1000), workers=workers, conf=conf
        )["monte_carlo"]
        for l in range(1, cfg.n_users + 1):
            exact = analytic.exact_outage(cfg, snr, l).value
            lb = analytic.lower_bound_outage(cfg, snr, l).value
            exact_vals[(snr, l)] = exact
            mc = sim[l - 1]
            lo, hi = mc.ci
            if trials * max(exact, mc.value) < 25:
                status, detail = "insufficient trials", (
                    f"expected outages {trials * exact:.1f} too few to resolve"
                )
            elif lo <= exact <= hi:
                status, detail = "ok", f"exact={exact:.6g} in [{lo:.6g}, {hi:.6g}]"
            else:
                status, detail = "fail", f"exact={exact:.6g} outside [{lo:.6g}, {hi:.6g}]"
            lines.append(ValidationLine(snr, l, "mc_agreement", status, detail))
            if lb <= exact + 1e-8:
                lines.append(
                    ValidationLine(snr, l, "bound_ordering", "ok", f"lb={lb:.6g} <= exact={exact:.6g}")
                )
            else:
                lines.append(
                    ValidationLine(
                        snr, l, "bound_ordering", "fail", f"lb={lb:.6g} > exact={exact:.6g}"
                    )
                )
    ideal = not (
        cfg.sigma2_est_sr or cfg.fd_tau_sr or any(cfg.sigma2_est_ru) or any(cfg.fd_tau_ru)
    )
    if ideal and cfg.mu < 1.0 and len(snr_grid) >= 3 and max(snr_grid) >= 30.0:
        top = [s for s in snr_grid if s >= max(snr_grid) - 10.0]
        for l in range(1, cfg.n_users + 1):
            gdo = analytic.diversity_order(cfg, l)
            ys = [math.log10(max(exact_vals[(s, l)], 1e-300)) for s in top]
            xs = [s / 10.0 for s in top]
            n = len(xs)
            sx, sy = sum(xs), sum(ys)
            sxx = sum(x * x for x in xs)
            sxy = sum(x * y for x, y in zip(xs, ys))
            slope = -(n * sxy - sx * sy) / (n * sxx - sx * sx)
            ok = abs(slope - gdo) <= tolerance * gdo
            lines.append(
                ValidationLine(
                    max(top),
                    l,
                    "high_snr_slope",
                    "ok" if ok else "fail",
                    f"fitted {slope:.3f} vs diversity order {gdo:.3f}",
                )
            )
    return lines, all(line.status != "fail" for line in lines)


# --------------------------------------------------------------------------
# argparse front end
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        start, stop, step = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise ConfigError(f"--grid expects start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"--grid expects an increasing range, got {text!r}")
    out, k = [], 0
    while start + k * step <= stop + 1e-9:
        out.append(round(start + k * step, 12))
        k += 1
    return tuple(out)


def _load_cfg(args) -> SystemConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    if getattr(args, "preset", None):
        variants = figure_preset(args.preset)
        if len(variants) > 1:
            labels = ", ".join(v.label for v in variants)
            raise ConfigError(
                f"preset {args.preset!r} has variants ({labels}); pick one as NAME:VARIANT"
            )
        return variants[0].config
    return SystemConfig()


def _add_common(p, sim: bool):
    p.add_argument("--config", help="system config file (flat key = value format)")
    p.add_argument("--preset", help="figure preset name, optionally NAME:VARIANT")
    p.add_argument("--users", default="", help="comma-separated user indices (default: all)")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--rel-tol", type=float, default=1e-10, help="quadrature relative tolerance")
    p.add_argument("--timings", action="store_true", help="record wall_ms (breaks byte-identity)")
    if sim:
        p.add_argument("--trials", type=int, default=1_000_000)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)


def _users(args, cfg) -> tuple[int, ...]:
    if not args.users:
        return tuple(range(1, cfg.n_users + 1))
    users = tuple(int(u) for u in args.users.split(","))
    for u in users:
        if not 1 <= u <= cfg.n_users:
            raise ConfigError(f"user index {u} out of range 1..{cfg.n_users}")
    return users


def _open_out(path):
    if path:
        return open(path, "w", encoding="utf-8", newline="")
    return sys.stdout


def _run_spec(args, spec: SweepSpec, cfg: SystemConfig) -> None:
    quad = analytic.QuadratureSpec(rel_tol=args.rel_tol)
    out = _open_out(args.out)
    try:
        run_sweep(spec, cfg, out, quad=quad, workers=getattr(args, "workers", 1),
                  timings=args.timings)
    finally:
        if out is not sys.stdout:
            out.close()


def main(argv=None) -> int:
    parser = _Parser(prog="fdnoma", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form outage over an SNR grid")
    _add_common(p, sim=False)
    p.add_argument("--grid", default="0:40:5", help="SNR grid start:stop:step in dB")
    p.add_argument(
        "--methods", default="exact,lower_bound",
        help="subset of exact,lower_bound,asymptotic_ideal,asymptotic_practical",
    )

    p = sub.add_parser("simulate", help="Monte Carlo outage over an SNR grid")
    _add_common(p, sim=True)
    p.add_argument("--grid", default="0:40:5")
    p.add_argument("--methods", default="monte_carlo",
                   help="subset of monte_carlo,hd_noma,fd_oma")
    p.add_argument("--hd-rule", default="equal", choices=("equal", "squared"))

    p = sub.add_parser("sweep", help="general sweep over any supported axis")
    _add_common(p, sim=True)
    p.add_argument("--axis", default="snr_db",
                   choices=("snr_db", "mu", "sigma2_est_sr", "sigma2_est_ru", "d_sr"))
    p.add_argument("--grid", required=True)
    p.add_argument("--methods", default="exact,monte_carlo")
    p.add_argument("--snr", type=float, help="fixed SNR in dB for non-SNR axes")
    p.add_argument("--hd-rule", default="equal", choices=("equal", "squared"))

    p = sub.add_parser("preset", help="run a figure preset (all variants)")
    p.add_argument("name", help=f"one of: {', '.join(PRESET_NAMES)}")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trials", type=int, help="override preset trial count")
    p.add_argument("--seed", type=int, help="override preset seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--timings", action="store_true")

    p = sub.add_parser("validate", help="cross-engine agreement harness")
    _add_common(p, sim=True)
    p.add_argument("--grid", default="0:30:5")
    p.add_argument("--tolerance", type=float, default=0.10, help="slope tolerance")

    args = parser.parse_args(argv)
    try:
        return _dispatch(parser, args)
    except ConfigError as exc:
        print(f"fdnoma: config error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"fdnoma: numeric failure: {exc}", file=sys.stderr)
        return 3
    except FdnomaError as exc:
        print(f"fdnoma: error: {exc}", file=sys.stderr)
        return 2


def _dispatch(parser, args) -> int:
    if args.command in ("analyze", "simulate", "sweep"):
        cfg = _load_cfg(args)
        methods = tuple(args.methods.split(","))
        axis = getattr(args, "axis", "snr_db")
        spec = SweepSpec(
            axis=axis,
            grid=_parse_grid(args.grid),
            methods=methods,
            users=_users(args, cfg),
            trials=getattr(args, "trials", 100_000),
            seed=getattr(args, "seed", 1),
            snr_db=getattr(args, "snr", None),
            hd_rule=getattr(args, "hd_rule", "equal"),
        )
        _run_spec(args, spec, cfg)
        return 0

    if args.command == "preset":
        variants = figure_preset(args.name)
        os.makedirs(args.out, exist_ok=True)
        quad = analytic.QuadratureSpec(rel_tol=args.rel_tol)
        for var in variants:
            spec = var.sweep
            if args.trials:
                spec = replace(spec, trials=args.trials)
            if args.seed is not None:
                spec = replace(spec, seed=args.seed)
            path = os.path.join(args.out, f"{args.name.split(':')[0]}_{var.label}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                run_sweep(spec, var.config, fh, quad=quad, workers=args.workers,
                          timings=args.timings)
            cfg_path = os.path.join(args.out, f"{args.name.split(':')[0]}_{var.label}.cfg")
            with open(cfg_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(dump_config(var.config))
        return 0

    if args.command == "validate":
        cfg = _load_cfg(args)
        lines, ok = validate(
            cfg,
            _parse_grid(args.grid),
            trials=args.trials,
            tolerance=args.tolerance,
            seed=args.seed,
            workers=args.workers,
        )
        out = _open_out(args.out)
        try:
            for line in lines:
                print(
                    f"{line.check:16s} snr={line.snr_db:6.1f} user={line.user} "
                    f"{line.status:20s} {line.detail}",
                    file=out,
                )
            print("PASS" if ok else "FAIL", file=out)
        finally:
            if out is not sys.stdout:
                out.close()
        return 0 if ok else 4

    parser.error(f"unknown command {args.command!r}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
