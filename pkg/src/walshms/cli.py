"""Command-line front end.

Subcommands::

    walshms scan       --config PATH --csv PATH [--svg PATH] [--engine E]
    walshms trajectory --config PATH --csv PATH [--svg PATH]
    walshms verify     [--order N]
    walshms plan       --order N [--omega-hz F | --config PATH]
    walshms slope      --order N

All frequencies given on the command line or in config files are in Hz and
are multiplied by 2 pi on entry. Exit codes: 0 success, 2 configuration
error, 3 engine error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys

from . import gate_model as gm
from . import scan as scan_mod
from . import svg, walsh
from .config import GATE_DEFAULTS, RunConfig, load_config
from .errors import ConfigError, DomainError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_ENGINE = 3

CSV_HEADER = ("axis", "axis_value", "analytic", "oracle", "status")
TRAJECTORY_HEADER = ("t", "re_alpha_up", "im_alpha_up", "re_alpha_down", "im_alpha_down")
VERIFY_TOL = 1e-12

log = logging.getLogger("walshms")


def fmt(value) -> str:
    """17 significant digits, independent of locale; empty for missing values."""
    if value is None:
        return ""
    return format(float(value), ".16e")


def _csv_text(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _fail(code: int, message: str) -> int:
    print(f"walshms: {message}", file=sys.stderr)
    return code


# ---------------------------------------------------------------- scan


def scan_rows(cfg: RunConfig, engine: str | None = None):
    """Run every series of ``cfg``; returns (csv_rows, results, user_grid)."""
    user_grid = cfg.grid_values()
    specs = cfg.scan_specs(engine)
    results = [scan_mod.run_scan(spec) for spec in specs]
    rows = []
    for res in results:
        name = cfg.scan["axis"] + (f":{res.spec.label}" if res.spec.label else "")
        for u, row in zip(user_grid, res.rows):
            rows.append((name, fmt(u), fmt(row.analytic), fmt(row.oracle), row.status))
    return rows, results, user_grid


def _axis_label(cfg: RunConfig) -> str:
    axis, units = cfg.scan["axis"], cfg.scan["units"]
    if axis in ("delta", "delta_error"):
        sym = "delta" if axis == "delta" else "Delta"
        return {"hz": f"{sym} / 2pi (Hz)", "normalized": f"{sym} t_g / 2pi",
                "offset": f"{sym} t_g / 2pi - closure"}[units]
    return {"nbar": "nbar", "gate_time": "t_g (s)"}[axis]


def cmd_scan(args) -> int:
    if not args.csv:
        return _fail(EXIT_CONFIG, "scan needs --csv PATH")
    cfg = load_config(args.config)
    if args.echo_config:
        sys.stdout.write(cfg.canonical_json())
    rows, results, user_grid = scan_rows(cfg, args.engine)
    _write(args.csv, _csv_text(rows, CSV_HEADER))
    if args.svg:
        series = []
        for res in results:
            label = res.spec.label or cfg.scan["observable"]
            for eng in ("analytic", "oracle"):
                y = [getattr(r, eng) for r in res.rows]
                if all(v is None for v in y):
                    continue
                y = [math.nan if v is None else v for v in y]
                tag = label if res.spec.engine != "both" else f"{label} {eng}"
                series.append((tag, user_grid, y))
        svg.write_line_plot(args.svg, series, xlabel=_axis_label(cfg), ylabel=cfg.scan["observable"])
    total = sum(len(r.rows) for r in results)
    failed = sum(r.failed for r in results)
    if failed:
        first = next(row.status for r in results for row in r.rows if row.status != "ok")
        log.warning("%d of %d points failed; first: %s", failed, total, first)
    if failed == total:
        return _fail(EXIT_ENGINE, f"engine failed on all {total} points: {first}")
    return EXIT_OK


# ---------------------------------------------------------------- trajectory


def cmd_trajectory(args) -> int:
    if not args.csv:
        return _fail(EXIT_CONFIG, "trajectory needs --csv PATH")
    cfg = load_config(args.config)
    if args.echo_config:
        sys.stdout.write(cfg.canonical_json())
    params = cfg.gate_params()
    try:
        traj = gm.trajectory(params, cfg.trajectory["n_samples"])
    except DomainError as exc:
        return _fail(EXIT_ENGINE, f"trajectory failed: {exc}")
    rows = [
        (fmt(t), fmt(u.real), fmt(u.imag), fmt(d.real), fmt(d.imag))
        for t, u, d in zip(traj.times, traj.alpha_up, traj.alpha_down)
    ]
    _write(args.csv, _csv_text(rows, TRAJECTORY_HEADER))
    if args.svg:
        series = [("spin up", traj.alpha_up.real, traj.alpha_up.imag),
                  ("spin down", traj.alpha_down.real, traj.alpha_down.imag)]
        svg.write_line_plot(args.svg, series, title=f"W({params.walsh_index})",
                            xlabel="Re alpha", ylabel="Im alpha")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def verify_table(order: int) -> list[tuple[str, float, bool]]:
    checks = []
    for n in range(1, order + 1):
        for l in range(n + 1):
            r = walsh.verify_identity(n, l)
            checks.append((f"identity n={n} l={l}", r, r <= VERIFY_TOL))
    bad = walsh.orthonormality_defect(31)
    checks.append(("orthonormality j,k<=31", float(bad), bad == 0))
    return checks


def cmd_verify(args) -> int:
    order = 6 if args.order is None else args.order
    if not 1 <= order <= 10:
        return _fail(EXIT_CONFIG, f"--order must lie in [1, 10], got {order}")
    checks = verify_table(order)
    width = max(len(name) for name, _, _ in checks)
    for name, residual, ok in checks:
        print(f"{name:<{width}}  {residual:.3e}  {'PASS' if ok else 'FAIL'}")
    passed = sum(ok for _, _, ok in checks)
    print(f"{passed}/{len(checks)} checks passed")
    return EXIT_OK if passed == len(checks) else EXIT_FAIL


# ---------------------------------------------------------------- plan, slope


def cmd_plan(args) -> int:
    if args.order is None or args.order < 0:
        return _fail(EXIT_CONFIG, "plan needs --order N with N >= 0")
    if args.omega_hz is not None:
        omega_hz = args.omega_hz
    elif args.config:
        omega_hz = load_config(args.config).gate["omega_hz"]
    else:
        omega_hz = GATE_DEFAULTS["omega_hz"]
    try:
        gate_time, delta = gm.plan_gate(args.order, 2 * math.pi * omega_hz)
    except DomainError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    params = gm.planned_params(args.order, 2 * math.pi * omega_hz)
    print(f"walsh_index      {2**args.order - 1}")
    print(f"omega_hz         {fmt(omega_hz)}")
    print(f"gate_time_s      {fmt(gate_time)}")
    print(f"delta_hz         {fmt(delta / (2 * math.pi))}")
    print(f"entangling_phase {fmt(gm.entangling_phase(params))}")
    print(f"fidelity_two_ion {fmt(gm.fidelity_two_ion(params))}")
    return EXIT_OK


def cmd_slope(args) -> int:
    orders = range(5) if args.order is None else [args.order]
    if args.order is not None and args.order < 0:
        return _fail(EXIT_CONFIG, "--order must be non-negative")
    for n in orders:
        try:
            slope, r2 = scan_mod.suppression_slope(n)
        except DomainError as exc:
            return _fail(EXIT_ENGINE, f"slope fit failed for n={n}: {exc}")
        print(f"n={n}  slope={slope:.6f}  expected={2 * n + 2}  r2={r2:.12f}")
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walshms", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="sweep one parameter and write CSV/SVG")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.add_argument("--engine", choices=scan_mod.ENGINES)
    p.add_argument("--echo-config", action="store_true", help="print the canonical config")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("trajectory", help="write the phase-space trajectory alpha(t)")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.add_argument("--echo-config", action="store_true")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("verify", help="check the Walsh moment identities and orthonormality")
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plan", help="shortest fully entangling W(2^n - 1) gate")
    p.add_argument("--order", type=int)
    p.add_argument("--omega-hz", type=float, help="sideband Rabi rate in Hz")
    p.add_argument("--config")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("slope", help="fit the infidelity suppression order")
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_slope)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    except (DomainError, RuntimeError, ArithmeticError) as exc:
        return _fail(EXIT_ENGINE, f"engine error: {exc}")
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot write output: {exc}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
