"""Command-line experiment driver.

Verbs
-----
fig2              squeezing-dynamics traces (per-trace CSV + optional SVG overlay)
sweep             final squeezing versus one swept parameter
postselect-table  retention q and variance ratio mu per threshold
exact-compare     brute-force oracle versus the Gaussian closed form
validate          the full named-invariant suite; nonzero exit on any failure

Exit codes: 0 success, 1 validation failure, 2 bad config/arguments, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import ensemble as ens
from . import exact, qnd, report
from .config import ConfigError, ExperimentConfig, load_config
from .postselect import make_rule
from .validate import run_all_checks

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

TRAJECTORY_COLUMNS = ("t_over_tau", "xi_squared", "gamma_xx", "gamma_yy",
                      "gamma_zz", "eta", "validity_warning")
EXACT_WINDOW_POINTS = 16
SWEEP_PARAMS = ("alpha", "S0", "N", "j", "kappa_per_segment", "threshold_ratio")
ORACLE_GRID = {"n_atoms": (2, 4, 6), "s0_levels": (21, 41, 81), "kappa": (0.5, 1.0, 2.0)}


def _trace_rows(traj: qnd.Trajectory) -> list[list]:
    return [[r.t_total, r.xi_squared, r.gamma_xx, r.gamma_yy, r.gamma_zz,
             r.eta, r.validity_warning] for r in traj.rows]


def _exact_trace(config: ExperimentConfig):
    """Exact-model rows: the figure window plus a tail out to the projective limit."""
    params = config.ensemble_params()
    n1 = params.n_atoms // 2
    state = exact.TwoGroupState(n1=n1, n2=params.n_atoms - n1, j=params.j)
    duration = config.schedule.durations[0]
    window = np.linspace(duration / EXACT_WINDOW_POINTS, duration, EXACT_WINDOW_POINTS)
    tail = np.geomspace(duration, 10.0 * math.sqrt(state.j_total), 25)[1:]
    rows = []
    for t in np.concatenate([window, tail]):
        xi = exact.xi_exact(state, float(t))
        half = state.transverse_moment / state.j_total / 2.0
        rows.append([float(t), xi, xi - 2.0 * half, half, half, 0.0, False])
    dots = (window, np.array([row[1] for row in rows[:EXACT_WINDOW_POINTS]]))
    return rows, dots


def cmd_fig2(args, config: ExperimentConfig, out: Path) -> int:
    fmt = config.output.format
    params = config.ensemble_params()
    pulse = config.pulse_params()
    mixed = ens.make_completely_mixed(params, pulse)
    init2 = ens.make_product_updown(params, pulse)
    runs = [("mixed", "mixed lossless", mixed, None),
            ("init2", "product up/down lossless", init2, None)]
    for alpha in config.loss.alphas:
        runs.append((f"alpha{alpha:g}", f"mixed, alpha = {alpha:g}", mixed, alpha))
    traces = {}
    written = []
    for name, label, initial, alpha in runs:
        traj = qnd.run_sequence(initial, config.schedule_for(alpha=alpha),
                                mode=config.feedback.readout, seed=config.seed)
        rows = _trace_rows(traj)
        if fmt in ("table", "both"):
            written.append(report.write_table(out / f"fig2_{name}.csv",
                                              TRAJECTORY_COLUMNS, rows, config))
        arr = np.asarray([row[:2] for row in rows], dtype=float)
        traces[label] = (arr[:, 0], arr[:, 1])
    exact_rows, dots = _exact_trace(config)
    if fmt in ("table", "both"):
        written.append(report.write_table(
            out / "fig2_exact.csv", TRAJECTORY_COLUMNS, exact_rows, config,
            extra_comments=[
                "exact two-group model (lossless, first measurement only); rows past "
                "the segment window extend to the projective limit xi^2 -> 1/2",
                "gamma_yy/gamma_zz report the conserved transverse sum split evenly",
            ]))
    if fmt in ("plot", "both"):
        written.append(report.render_figure(
            out / "fig2.svg", traces, dots=dots,
            title="Sequential QND squeezing of an unpolarized ensemble"))
    for path in written:
        print(path)
    return EXIT_OK


def _sweep_config(config: ExperimentConfig, param: str, value: float):
    """Return (config, alpha) realizing one sweep point."""
    if param == "alpha":
        return config, value
    if param == "S0":
        return replace(config, pulse=replace(config.pulse, s0=value)), None
    if param == "N":
        n = int(round(value))
        if n != value:
            raise ConfigError(f"N must be an integer, got {value!r}")
        return replace(config, ensemble=replace(config.ensemble, n_atoms=n)), None
    if param == "j":
        return replace(config, ensemble=replace(config.ensemble, j=value)), None
    if param == "kappa_per_segment":
        durations = tuple(value for _ in config.schedule.durations)
        return replace(config, schedule=replace(config.schedule, durations=durations)), None
    if param == "threshold_ratio":
        return replace(config, feedback=replace(config.feedback, mode="postselect"),
                       postselect=replace(config.postselect, threshold_ratio=value)), None
    raise ConfigError(f"unknown sweep parameter {param!r}")


def cmd_sweep(args, config: ExperimentConfig, out: Path) -> int:
    fmt = config.output.format
    rows = []
    for value in args.values:
        cfg, alpha = _sweep_config(config, args.param, value)
        initial = ens.make_completely_mixed(cfg.ensemble_params(), cfg.pulse_params())
        traj = qnd.run_sequence(initial, cfg.schedule_for(alpha=alpha),
                                mode=cfg.feedback.readout, seed=cfg.seed)
        rep = traj.final_report
        g = np.diag(traj.final_state.cov)[:3]
        rows.append([value, rep.xi_squared, float(g[0]), float(g[1]), float(g[2])])
    columns = (args.param, "xi_squared", "gamma_xx", "gamma_yy", "gamma_zz")
    written = []
    comment = ("rows run the full schedule from the completely mixed state; "
               "non-alpha sweeps are lossless")
    if fmt in ("table", "both"):
        written.append(report.write_table(out / "sweep.csv", columns, rows, config,
                                          extra_comments=[comment]))
    if fmt in ("plot", "both"):
        finite = [(v, xi) for v, xi, *_ in rows if math.isfinite(v)]
        if finite:
            xs, ys = zip(*finite)
            written.append(report.render_figure(
                out / "sweep.svg", {f"final squeezing vs {args.param}": (xs, ys)},
                title=f"Final squeezing versus {args.param}", xlabel=args.param))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_postselect_table(args, config: ExperimentConfig, out: Path) -> int:
    fmt = config.output.format
    try:
        rules = [make_rule(r) for r in args.ratios]
    except ValueError as err:
        raise ConfigError(str(err)) from err
    rows = [[rule.threshold_ratio, rule.q, rule.mu, rule.q**3] for rule in rules]
    written = []
    if fmt in ("table", "both"):
        written.append(report.write_table(
            out / "postselect.csv", ("threshold_ratio", "q", "mu", "q_cubed"),
            rows, config,
            extra_comments=["q_cubed is the retained fraction after all three axes"]))
    if fmt in ("plot", "both"):
        grid = np.geomspace(0.05, 5.0, 200)
        curve = [make_rule(float(b)) for b in grid]
        finite = [(r.threshold_ratio, r.q) for r in rules
                  if math.isfinite(r.threshold_ratio)]
        written.append(report.render_figure(
            out / "postselect.svg",
            {"retention q": (grid, [r.q for r in curve]),
             "variance ratio mu": (grid, [r.mu for r in curve])},
            dots=tuple(zip(*finite)) if finite else None,
            title="Post-selection trade-off", xlabel=r"$B/\Delta$",
            ylabel="fraction", dots_label="requested thresholds"))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_exact_compare(args, config: ExperimentConfig, out: Path) -> int:
    fmt = config.output.format
    columns = ("mode", "n_atoms", "s0_levels", "kappa", "var_x", "var_gaussian",
               "rel_err", "transverse_pre", "transverse_post")
    rows = []
    means = {}  # (mode, levels) -> mean rel err
    for mode in ("mixed", "init2"):
        for levels in ORACLE_GRID["s0_levels"]:
            errs = []
            for n in ORACLE_GRID["n_atoms"]:
                for kappa in ORACLE_GRID["kappa"]:
                    res = exact.brute_force_oracle(n, levels, kappa, initial=mode,
                                                   seed=config.seed)
                    ref = exact.gaussian_reference_var(n, kappa)
                    err = abs(res.var_x - ref) / ref
                    errs.append(err)
                    rows.append([mode, n, levels, kappa, res.var_x, ref, err,
                                 res.transverse_pre, res.transverse_post])
            means[(mode, levels)] = float(np.mean(errs))
    comments = ["mean rel_err by (mode, s0_levels): " + ", ".join(
        f"{m}/{lv}: {means[(m, lv)]:.4f}" for m, lv in means)]
    written = []
    if fmt in ("table", "both"):
        written.append(report.write_table(out / "exact_compare.csv", columns, rows,
                                          config, extra_comments=comments))
    if fmt in ("plot", "both"):
        levels = ORACLE_GRID["s0_levels"]
        traces = {f"{mode} (mean over N, kappa)":
                  (levels, [means[(mode, lv)] for lv in levels])
                  for mode in ("mixed", "init2")}
        written.append(report.render_figure(
            out / "exact_compare.svg", traces,
            title="Oracle versus Gaussian closed form", xlabel="light levels (2 S0 + 1)",
            ylabel="relative error of var(Jx)"))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_validate(args, config: ExperimentConfig, out: Path) -> int:
    results = run_all_checks(config, quick=args.quick, seed=config.seed)
    rows = [[r.name, r.passed, r.observed, r.expected, r.detail] for r in results]
    report.write_table(out / "validate.csv",
                       ("check", "passed", "observed", "expected", "detail"),
                       rows, config)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.observed} (expected: {r.expected})")
    n_failed = sum(not r.passed for r in results)
    print(f"{len(results) - n_failed}/{len(results)} checks passed")
    return EXIT_OK if n_failed == 0 else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="JSON experiment config (defaults are built in)")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help="output directory (default: config output.directory)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    common.add_argument("--format", dest="format_", choices=("table", "plot", "both"),
                        default=argparse.SUPPRESS, help="what to emit")
    parser = argparse.ArgumentParser(
        prog="singletsim", parents=[common],
        description="QND spin-squeezing simulator for unpolarized ensembles")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="verb")

    p = sub.add_parser("fig2", parents=[common],
                       help="squeezing dynamics traces and overlay figure")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("sweep", parents=[common],
                       help="final squeezing versus one parameter")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, nargs="+", type=float,
                   help="sweep values ('inf' allowed where meaningful)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("postselect-table", parents=[common],
                       help="retention and variance-ratio table")
    p.add_argument("--ratios", nargs="+", type=float, default=[0.678, 1.150],
                   help="threshold ratios B/Delta (default: 0.678 1.150)")
    p.set_defaults(func=cmd_postselect_table)

    p = sub.add_parser("exact-compare", parents=[common],
                       help="brute-force oracle versus Gaussian closed form")
    p.set_defaults(func=cmd_exact_compare)

    p = sub.add_parser("validate", parents=[common],
                       help="run the named invariant suite")
    p.add_argument("--quick", action="store_true",
                   help="reduced fuzz counts and oracle grid")
    p.set_defaults(func=cmd_validate)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    path = getattr(args, "config", None)
    config = load_config(path) if path else ExperimentConfig()
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = replace(config, seed=seed)
    fmt = getattr(args, "format_", None)
    if fmt is not None:
        config = replace(config, output=replace(config.output, format=fmt))
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
    except (ConfigError, json.JSONDecodeError) as err:
        print(f"error: bad config: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return EXIT_IO
    out = Path(getattr(args, "out", None) or config.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, config, out)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        where = f" ({err.filename})" if getattr(err, "filename", None) else ""
        print(f"error: I/O failure{where}: {err.strerror or err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
