"""Command-line entry point: simulate, screen-n1, analyze-stability, bench."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from . import harness as hs
from .power import PowerSystem, load_case
from .step_control import char_roots, stability_table

log = logging.getLogger("dtsim")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _config(args) -> hs.RunConfig:
    if getattr(args, "config", None):
        return hs.load_config(args.config, unsafe=True if args.unsafe else None)
    return hs.RunConfig(unsafe=bool(args.unsafe))


def cmd_simulate(args) -> int:
    case = load_case(args.case)
    cfg = _config(args)
    over = {}
    for key in ("trace_out", "step_log_out", "summary_out"):
        if getattr(args, key):
            over[key] = getattr(args, key)
    if args.benchmark:
        over.update(benchmark=True, benchmark_out=args.benchmark)
    if over:
        cfg = hs.RunConfig.from_dict({**cfg.to_dict(), **over})
    res = hs.run_simulation(cfg, case)
    print(json.dumps(res.summary, indent=2, sort_keys=True))
    return res.exit_code


def cmd_screen(args) -> int:
    case = load_case(args.case)
    cfg = _config(args)
    report = hs.run_n1_screening(case, cfg, jobs=args.jobs)
    csv_path, txt_path = hs.export_report(report, args.out)
    sys.stdout.write(report.summary_text())
    print(f"report: {csv_path}")
    return hs.EXIT_OK


def cmd_stability(args) -> int:
    l1, l2 = char_roots(args.k, args.ki, args.kp, args.variant)
    radius = max(abs(l1), abs(l2))
    print(f"K={args.k} ki={args.ki:g} kp={args.kp:g} variant={args.variant}")
    for name, root in (("root1", l1), ("root2", l2)):
        print(f"{name} = {root.real:.12g}{root.imag:+.12g}j  |{name}| = {abs(root):.12g}")
    print(f"max modulus = {radius:.12g} -> {'stable' if radius < 1 else 'unstable'}")
    if args.out:
        zs = [complex(z) for z in args.z.split(",") if z.strip()] if args.z else ()
        rows = stability_table(args.k, args.ki, args.kp, args.variant, zs)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return hs.EXIT_OK if radius < 1 else hs.EXIT_UNSTABLE


def cmd_bench(args) -> int:
    case = load_case(args.case)
    base = _config(args)
    rows = []
    for tol in _floats(args.tols):
        runs = [("vsoo-dt", base.order.K0)] + [("vs-dt", K) for K in _ints(args.orders)]
        for solver, K in runs:
            d = base.to_dict()
            d["step"]["tol"] = tol
            d.update(solver=solver, K=K, trace_out=None, step_log_out=None, summary_out=None,
                     benchmark=False, benchmark_out=None)
            cfg = hs.RunConfig.from_dict(d)
            system = PowerSystem(case, cfg.model, fault_admittance=cfg.fault_admittance)
            tr = hs.integrate(system, cfg, hs._schedule(case, cfg))
            rows.append({"tol": tol, "solver": solver, "K": K if solver == "vs-dt" else "",
                         "multiplies": tr.multiplies, "steps": tr.n_steps, "rejected": tr.rejected,
                         "final_K": tr.steps[-1].K if tr.steps else "", "status": tr.status})
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return hs.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--case", required=True, help="case JSON file")
    s.add_argument("--config", help="run configuration JSON (defaults if omitted)")
    s.add_argument("--benchmark", "--benchmark-out", dest="benchmark", metavar="F",
                   help="RK4 benchmark trace CSV; reused if it exists, otherwise computed and written")
    s.add_argument("--trace-out", dest="trace_out")
    s.add_argument("--step-log-out", dest="step_log_out")
    s.add_argument("--summary-out", dest="summary_out")
    s.add_argument("--unsafe", action="store_true", help="allow parameters outside the supported envelope")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("screen-n1", help="fault-and-trip screening over every in-service branch")
    s.add_argument("--case", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--unsafe", action="store_true")
    s.set_defaults(func=cmd_screen)

    s = sub.add_parser("analyze-stability", help="roots of the PI step-size recursion")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--ki", type=float, required=True)
    s.add_argument("--kp", type=float, required=True)
    s.add_argument("--variant", choices=("full", "last"), default="full")
    s.add_argument("--z", help="comma-separated complex z=lambda*h probes for the Jacobian radius, "
                              "e.g. --z=-0.5,-1+0.5j")
    s.add_argument("--out", help="CSV with roots and radii")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("bench", help="multiply counts of VSOO-DT against fixed-order VS-DT")
    s.add_argument("--case", required=True)
    s.add_argument("--config")
    s.add_argument("--tols", required=True, help="comma-separated tolerances")
    s.add_argument("--orders", required=True, help="comma-separated fixed orders for VS-DT")
    s.add_argument("--out", help="CSV path (stdout if omitted)")
    s.add_argument("--unsafe", action="store_true")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except hs.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return hs.EXIT_INPUT
    except hs.PowerFlowError as exc:
        print(f"error: power flow failed: {exc}", file=sys.stderr)
        return hs.EXIT_POWER_FLOW
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return hs.EXIT_INPUT
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        code = hs.exit_code_for(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
