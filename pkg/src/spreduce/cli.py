"""Command-line interface: ``spreduce {generate,reduce,sweep,validate}``.

Exit codes:

    0  success
    1  input or usage error
    2  reduction infeasible at the requested order
    3  validation mismatch (H2 oracles disagree, or the reduced model is
       unstable or has feedthrough)
"""

import argparse
import csv
import io as _io
import json
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NoReductionPossible, SPReduceError, UnstableErrorSystem
from .generate import PRESETS, generate, preset
from .greedy import greedy_reduce
from .io import FORMATS, load_model, load_reduced, save_model, save_reduced
from .sp import reduce as sp_reduce
from .lti import build_error_system, h2_error, impulse_response_error, white_noise_error
from .stiefel import stabilizing_transform, stiefel_reduce

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_MISMATCH = 3

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ["r", "method", "h2_error", "iterations", "wall_time_s", "termination"]
VALIDATE_RTOL = 0.01


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def threads():
    """Worker cap from ``SPREDUCE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SPREDUCE_THREADS", "1")))
    except ValueError:
        return 1


def parse_orders(text):
    """Parse ``"2..9"``, ``"5..50:5"``, ``"3,5,8"`` or mixtures into sorted unique ints."""
    orders = set()
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)\.\.(\d+)(?::(\d+))?", part)
        if m:
            lo, hi, step = int(m[1]), int(m[2]), int(m[3] or 1)
            if step < 1 or lo > hi:
                raise UsageError(f"bad order range {part!r}")
            orders.update(range(lo, hi + 1, step))
        elif part.isdigit():
            orders.add(int(part))
        else:
            raise UsageError(f"cannot parse order {part!r}")
    if not orders:
        raise UsageError("no orders given")
    return sorted(orders)


def _load_source(args):
    if args.model and args.generate:
        raise UsageError("give either --model or --generate, not both")
    if args.model:
        return load_model(args.model, args.format)
    if args.generate:
        overrides = {} if args.seed is None else {"seed": args.seed}
        return generate(preset(args.generate, **overrides))
    raise UsageError("one of --model or --generate is required")


def _run_greedy(model, r):
    """Greedy trace down to `r`, or None if not even one step is feasible."""
    try:
        return greedy_reduce(model, r, workers=threads())
    except NoReductionPossible:
        return None


def _stiefel_termination(res):
    reason = {
        "gradient tolerance reached": "Converged",
        "budget exhausted": "BudgetExhausted",
        "line search found no decrease": "Stalled",
        "empty decision variable": "Converged",
    }.get(res.report.stop_reason, res.report.stop_reason)
    return f"{reason}({res.start}-start)"


def cmd_reduce(args):
    model = _load_source(args)
    r = args.order
    if not 1 <= r < model.n:
        raise UsageError(f"--order must satisfy 1 <= order < n={model.n}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = ["greedy", "stiefel"] if args.method == "both" else [args.method]
    report = {"n": model.n, "m": model.m, "p": model.p, "order": r}
    produced = 0
    lines = [f"model: n={model.n} m={model.m} p={model.p}; target order {r}"]

    trace = _run_greedy(model, r)
    if "greedy" in methods:
        entry = {"trace": trace.to_dict() if trace else None}
        if trace is not None and trace.final_order == r:
            reduced = sp_reduce(model, trace.projection_at(r))
            entry["h2_error"] = trace.error_at(r)
            save_reduced(reduced, out / "reduced_greedy.json")
            produced += 1
            lines.append(f"greedy:  order {r}, H2 error {entry['h2_error']:.6e}, "
                         f"eliminated {trace.eliminated}")
        else:
            why = trace.termination.value if trace else "NoReductionPossible"
            entry["failure"] = why
            stop = f", stopped at order {trace.final_order}" if trace else ""
            lines.append(f"greedy:  infeasible at order {r} ({why}{stop})")
        report["greedy"] = entry

    if "stiefel" in methods:
        if r < model.p:
            report["stiefel"] = {"failure": f"order below number of outputs p={model.p}"}
            lines.append(f"stiefel: infeasible, order {r} < p={model.p}")
        else:
            seed = 0 if args.seed is None else args.seed
            res = stiefel_reduce(model, r, greedy=trace, budget=args.budget, seed=seed)
            entry = res.report.to_dict()
            entry["start"] = res.start
            entry["h2_error"] = res.report.final_objective
            report["stiefel"] = entry
            save_reduced(res.reduced, out / "reduced_stiefel.json",
                         extra={"transform_L": res.tmodel.L})
            produced += 1
            lines.append(f"stiefel: order {r}, H2 error {res.report.final_objective:.6e} "
                         f"({res.start} start, {res.report.iterations} iterations, "
                         f"{res.report.stop_reason})")

    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print("\n".join(lines))
    return EXIT_OK if produced else EXIT_INFEASIBLE


def _fmt_err(x):
    return "" if x is None else format(x, ".10e")


def sweep_rows(model, orders, methods, budget=500, seed=0, timing=True):
    """Rows of the sweep table, sorted by (r, method)."""
    rows = []
    trace = None
    t0 = time.perf_counter()
    deepest = min(orders)
    trace = _run_greedy(model, deepest) if deepest < model.n else None
    greedy_time = time.perf_counter() - t0
    if "greedy" in methods:
        for r in orders:
            if trace is not None and trace.final_order <= r:
                rows.append({"r": r, "method": "greedy", "h2_error": trace.error_at(r),
                             "iterations": model.n - r,
                             "wall_time_s": trace.elapsed_at(r),
                             "termination": "ReachedTargetOrder"})
            else:
                why = trace.termination.value if trace else "NoReductionPossible"
                rows.append({"r": r, "method": "greedy", "h2_error": None, "iterations": None,
                             "wall_time_s": greedy_time, "termination": why})
    if "stiefel" in methods:
        tmodel = stabilizing_transform(model)

        def one(r):
            if r < model.p:
                return {"r": r, "method": "stiefel", "h2_error": None, "iterations": None,
                        "wall_time_s": 0.0, "termination": "OrderBelowOutputCount"}
            start = time.perf_counter()
            res = stiefel_reduce(model, r, greedy=trace, budget=budget, seed=seed, tmodel=tmodel)
            return {"r": r, "method": "stiefel", "h2_error": res.report.final_objective,
                    "iterations": res.report.iterations,
                    "wall_time_s": time.perf_counter() - start,
                    "termination": _stiefel_termination(res)}

        with ThreadPoolExecutor(threads()) as pool:
            rows.extend(pool.map(one, orders))
    rows.sort(key=lambda row: (row["r"], row["method"]))
    if not timing:
        for row in rows:
            row["wall_time_s"] = None
    return rows


def rows_to_csv(rows):
    buf = _io.StringIO()
    buf.write(f"# spreduce sweep schema v{CSV_SCHEMA_VERSION}: {','.join(CSV_COLUMNS)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([
            row["r"], row["method"], _fmt_err(row["h2_error"]),
            "n/a" if row["iterations"] is None else row["iterations"],
            "" if row["wall_time_s"] is None else f"{row['wall_time_s']:.3f}",
            row["termination"],
        ])
    return buf.getvalue()


def cmd_sweep(args):
    orders = parse_orders(args.orders)
    model = _load_source(args)
    bad = [r for r in orders if not 1 <= r < model.n]
    if bad:
        raise UsageError(f"orders {bad} outside 1..{model.n - 1}")
    methods = ["greedy", "stiefel"] if args.method == "both" else [args.method]
    seed = 0 if args.seed is None else args.seed
    rows = sweep_rows(model, orders, methods, budget=args.budget, seed=seed,
                      timing=not args.no_timing)
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        ok = sum(row["h2_error"] is not None for row in rows)
        print(f"wrote {len(rows)} rows ({ok} successful) to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def validate(full, reduced, seed=0, horizon=None, dt=None, mc_duration=None, mc_dt=None):
    """Compute the H2 error three ways; returns a JSON-ready report dict."""
    report = {"order": reduced.order, "feedthrough_max": float(np.max(np.abs(reduced.Dhat), initial=0.0))}
    try:
        lyap = h2_error(build_error_system(full, reduced))
    except UnstableErrorSystem as exc:
        report.update(ok=False, reason=f"unstable: {exc}")
        return report
    imp = impulse_response_error(full, reduced, horizon=horizon, dt=dt)
    mc = white_noise_error(full, reduced, seed=seed, duration=mc_duration, dt=mc_dt)

    def dev(x):
        return abs(x - lyap) / lyap if lyap > 0 else (0.0 if x == 0 else float("inf"))

    report.update(lyapunov=lyap, impulse=imp, monte_carlo=mc,
                  impulse_rel_dev=dev(imp), monte_carlo_rel_dev=dev(mc))
    ok = abs(imp - lyap) <= VALIDATE_RTOL * abs(lyap) + 1e-12
    reason = "" if ok else "Lyapunov and impulse-response values differ by more than 1%"
    if report["feedthrough_max"] > 1e-10:
        ok = False
        reason = "reduced model has nonzero feedthrough; H2 error is not finite"
    report.update(ok=ok, reason=reason)
    return report


def cmd_validate(args):
    full = load_model(args.model, args.format)
    reduced = load_reduced(args.reduced)
    if reduced.Bhat.shape[1] != full.m or reduced.Chat.shape[0] != full.p:
        raise UsageError("reduced model inputs/outputs do not match the full model")
    rep = validate(full, reduced, seed=args.seed or 0)
    if args.out:
        Path(args.out).write_text(json.dumps(rep, indent=2) + "\n")
    if "lyapunov" in rep:
        print(f"lyapunov     {rep['lyapunov']:.6e}")
        print(f"impulse      {rep['impulse']:.6e}  (rel. dev. {rep['impulse_rel_dev']:.2e})")
        print(f"monte carlo  {rep['monte_carlo']:.6e}  (rel. dev. {rep['monte_carlo_rel_dev']:.2e})")
    print("OK" if rep["ok"] else f"MISMATCH: {rep['reason']}")
    return EXIT_OK if rep["ok"] else EXIT_MISMATCH


def cmd_generate(args):
    overrides = {} if args.seed is None else {"seed": args.seed}
    model = generate(preset(args.preset, **overrides))
    save_model(model, args.out, args.format)
    print(f"wrote {args.preset} model (n={model.n}, m={model.m}, p={model.p}) to {args.out}")
    return EXIT_OK


def _add_source(p):
    p.add_argument("--model", help="model file (JSON) or Matrix Market directory")
    p.add_argument("--generate", metavar="PRESET", choices=sorted(PRESETS),
                   help=f"generate a model from a preset: {', '.join(sorted(PRESETS))}")
    p.add_argument("--format", choices=FORMATS, help="model format (default: guess from path)")
    p.add_argument("--seed", type=int, help="generator seed and random-start seed")
    p.add_argument("--method", choices=["greedy", "stiefel", "both"], default="both")
    p.add_argument("--budget", type=int, default=500, help="optimizer iteration budget")


def build_parser():
    parser = _Parser(prog="spreduce", description="Singular-perturbation model reduction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a generated test model")
    p.add_argument("--preset", choices=sorted(PRESETS), default="small")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("reduce", help="reduce a model to one order")
    _add_source(p)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("sweep", help="reduce to a range of orders and write CSV")
    _add_source(p)
    p.add_argument("--orders", required=True, help='e.g. "2..9", "5..50:5", "3,5,8"')
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.add_argument("--no-timing", action="store_true",
                   help="leave wall_time_s empty so output is byte-reproducible")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="cross-check the H2 error of a reduced model")
    p.add_argument("--model", required=True)
    p.add_argument("--reduced", required=True)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, SPReduceError, OSError) as exc:
        print(f"spreduce: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
