"""Command line interface.

Every subcommand reads a model configuration, runs its checks and writes a
JSON report (stdout by default).  Exit codes: 0 all checks pass, 1 a
violation was found, 2 usage or configuration error, 3 solver coverage below
the threshold.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import load_config
from .contact import contact_verdict
from .errors import EmptyEstimate, LineFibError
from .evaluator import field_at_many, field_valid, scale_homotopy
from .report import dumps, envelope, write_field_csv
from .validators import (
    SuiteSettings, check_gauss_convexity, check_skew_criterion, check_monotone_pushoff,
    classify_structure, classify_support_line, detect_antipodal, estimate_S_u,
    oracle_disjointness, pushoff_gamma, run_structure_suite, sample_gauss_image,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_COVERAGE = 0, 1, 2, 3


def worker_count():
    """Worker threads: ``LINEFIB_THREADS`` if set, else the CPU count."""
    env = os.environ.get("LINEFIB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise LineFibError(f"LINEFIB_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def _floats(text, n=None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) not in (n if isinstance(n, tuple) else (n,)):
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _vec(n):
    return lambda text: _floats(text, n)


def _run_parallel(jobs):
    """Run named callables on the worker pool; results are keyed by name."""
    with ThreadPoolExecutor(max_workers=min(worker_count(), max(1, len(jobs)))) as pool:
        futs = {k: pool.submit(f) for k, f in jobs.items()}
        return {k: futs[k].result() for k in sorted(futs)}


def export_grid(spec):
    """Grid points from ``lo,hi,n`` (a cube) or nine numbers (one triple per axis)."""
    if len(spec) == 3:
        spec = list(spec) * 3
    axes = []
    for lo, hi, n in zip(spec[0::3], spec[1::3], spec[2::3]):
        if n < 1 or n != int(n):
            raise LineFibError("grid counts must be positive integers")
        axes.append(np.linspace(lo, hi, int(n)))
    A, B, C = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([A.ravel(), B.ravel(), C.ravel()])


def _exit_code(violation, coverage, min_coverage):
    # a witnessed violation outranks a coverage shortfall
    if violation:
        return EXIT_VIOLATION
    return EXIT_COVERAGE if coverage < min_coverage else EXIT_OK


# --- subcommands ---------------------------------------------------------------------

def cmd_validate(model, args):
    res = _run_parallel({
        "skew_criterion": lambda: check_skew_criterion(model, args.pairs, args.seed),
        "oracle_disjointness": lambda: oracle_disjointness(model, args.lines, args.seed),
    })
    code = EXIT_OK if all(r.passed for r in res.values()) else EXIT_VIOLATION
    return {k: r.to_dict() for k, r in res.items()}, code


def cmd_gauss(model, args):
    box = ((-args.box, args.box),) * 3
    g = sample_gauss_image(model, box, args.n, args.seed)
    pairs = detect_antipodal(g)
    conv = check_gauss_convexity(g, model, args.midpoints, args.seed)
    checks = {
        "gauss_image": g.to_dict(),
        "antipodal_pairs": [[g.directions[i], g.directions[j]] for i, j in pairs],
        "gauss_convexity": conv.to_dict(),
    }
    return checks, _exit_code(not conv.passed, g.metadata["coverage"], args.min_coverage)


def cmd_base(model, args):
    try:
        e = estimate_S_u(model, args.u)
    except EmptyEstimate as exc:
        return {"base_space": {"u": args.u, "convexity": "Empty", "message": str(exc)}}, EXIT_OK
    ms = args.m or [[np.cos(a), np.sin(a)] for a in np.arange(8) * np.pi / 8]
    support = [{"m": m, "class": classify_support_line(e, m)} for m in ms]
    conv = e.convexity_report()
    checks = {"base_space": e.to_dict(), "support_lines": support,
              "S_u_convexity": conv.to_dict()}
    # a plane-by-plane fibration has base spaces made of parallel lines
    bad = not conv.passed and not model.is_one_param
    return checks, EXIT_VIOLATION if bad else EXIT_OK


def cmd_pushoff(model, args):
    curve = pushoff_gamma(model, args.u, args.m, tuple(args.t_range), args.samples)
    checks = {"pushoff": curve.to_dict()}
    try:
        r = check_monotone_pushoff(curve)
    except ValueError as exc:
        checks["no_canyon"] = {"name": "no_canyon", "passed": None, "message": str(exc)}
        return checks, EXIT_COVERAGE
    checks["no_canyon"] = r.to_dict()
    return checks, EXIT_OK if r.passed else EXIT_VIOLATION


def cmd_contact(model, args):
    grid = {"lo": args.grid[0], "hi": args.grid[1], "step": args.grid[2]}
    r = contact_verdict(model, grid)
    checks = {"contact": r.to_dict(records=args.records)}
    n = len(r.points)
    solved = 1.0 - r.excluded["solver"] / n if n else 1.0
    return checks, _exit_code(r.verdict.value == "MixedViolation", solved, args.min_coverage)


def cmd_classify(model, args):
    cfg = SuiteSettings()
    ev = run_structure_suite(model, args.seed, cfg, workers=worker_count())
    v = classify_structure(model, ev)
    checks = {"evidence": ev.to_dict(), "verdict": v.to_dict()}
    failed = any(r.startswith("failed:") for r in v.reasons)
    return checks, _exit_code(failed, ev.gauss.metadata["coverage"], args.min_coverage)


def _export(model, args):
    X = export_grid(args.grid)
    V, st = field_at_many(model, X)
    ok = field_valid(st)
    V = np.where(ok[:, None], V, np.nan)
    with open(args.csv, "w", newline="") as fh:
        write_field_csv(fh, X, V)
    summary = {"csv": args.csv, "points": int(len(X)), "evaluated": int(ok.sum()),
               "coverage": float(ok.mean()) if len(X) else 1.0}
    code = EXIT_COVERAGE if summary["coverage"] < args.min_coverage else EXIT_OK
    return summary, code


def cmd_export(model, args):
    s, code = _export(model, args)
    return {"export": s}, code


def cmd_homotopy(model, args):
    scaled = scale_homotopy(model, args.s)
    s, code = _export(scaled, args)
    s["s"] = args.s
    s["scale"] = scaled.scale
    return {"homotopy": s}, code


COMMANDS = {
    "validate": cmd_validate, "gauss": cmd_gauss, "base": cmd_base, "pushoff": cmd_pushoff,
    "contact": cmd_contact, "classify": cmd_classify, "export": cmd_export,
    "homotopy": cmd_homotopy,
}


def build_parser():
    p = argparse.ArgumentParser(prog="linefib", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="model configuration (JSON)")
        s.add_argument("--seed", type=int, default=42, help="sampling seed (default 42)")
        s.add_argument("--out", help="write the report here instead of stdout")
        s.add_argument("--min-coverage", type=float, default=0.99,
                       help="exit 3 if fewer evaluations succeed (default 0.99)")
        s.add_argument("--timings", action="store_true",
                       help="add wall-clock timings (makes reports differ between runs)")
        return s

    s = add("validate", "construction criterion and line-line oracle")
    s.add_argument("--pairs", type=int, default=10_000)
    s.add_argument("--lines", type=int, default=500)
    s = add("gauss", "Gauss image, antipodal pairs and midpoint convexity")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--box", type=float, default=5.0)
    s.add_argument("--midpoints", type=int, default=500)
    s = add("base", "base space of a direction and its support lines")
    s.add_argument("--u", type=_vec(3), required=True, help="direction x,y,z")
    s.add_argument("--m", type=_vec(2), action="append", help="support direction x,y (repeat)")
    s = add("pushoff", "parallel plane pushoff curve and its monotonicity")
    s.add_argument("--u", type=_vec(3), required=True)
    s.add_argument("--m", type=_vec(2), required=True)
    s.add_argument("--t-range", type=_vec(2), default=[-5.0, 5.0])
    s.add_argument("--samples", type=int, default=201)
    s = add("contact", "contact scan over a cubic grid")
    s.add_argument("--grid", type=_vec(3), default=[-5.0, 5.0, 0.5], help="lo,hi,step")
    s.add_argument("--records", action="store_true", help="include per-point records")
    add("classify", "all structural checks and the structure verdict")
    for name, help_ in (("export", "CSV of the field on a grid"),
                        ("homotopy", "CSV of the contracted field V((1-s) x)")):
        s = add(name, help_)
        s.add_argument("--grid", type=_vec((3, 9)), default=[-5.0, 5.0, 11.0],
                       help="lo,hi,n or nine numbers, one triple per axis")
        s.add_argument("--csv", required=True, help="CSV output path")
        if name == "homotopy":
            s.add_argument("--s", type=float, required=True, help="homotopy parameter in [0,1]")
    return p


_VECTOR_OPTIONS = ("--u", "--m", "--grid", "--t-range")


def _join_negative_values(argv):
    """Attach ``-1,2`` style values to their option so argparse does not read
    them as flags."""
    out, it = [], iter(argv)
    for a in it:
        if a in _VECTOR_OPTIONS:
            nxt = next(it, None)
            if nxt is None:
                out.append(a)
            else:
                out.append(f"{a}={nxt}")
        else:
            out.append(a)
    return out


def _options(args):
    skip = {"command", "config", "seed", "out", "timings"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(
            _join_negative_values(sys.argv[1:] if argv is None else list(argv)))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    print(f"seed: {args.seed}", file=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.command == "homotopy" and not 0.0 <= args.s <= 1.0:
            raise LineFibError("--s must lie in [0, 1]")
        t0 = time.perf_counter()
        checks, code = COMMANDS[args.command](cfg.model, args)
        elapsed = time.perf_counter() - t0
    except (LineFibError, ValueError) as exc:
        # bad option values (a downward direction, a zero vector) are usage errors
        print(f"linefib: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    timings = {"total_seconds": elapsed} if args.timings else None
    text = dumps(envelope(args.command, cfg.echo(), args.seed, _options(args), checks, code,
                          timings))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
