"""Command-line front end.

Problem files and reports are YAML documents starting with ``format_version: 1``.
A problem file looks like::

    format_version: 1
    cone:
      - {type: nonneg, dim: 2}
    A: [[1.0, 1.0]]
    b: [1.0]
    c: [1.0, 0.0]
    hot_start: {x: [...], s: [...], y: [...]}   # optional
    x_bar: [...]                                # optional

Exit codes: 0 converged, 2 no progress or iteration limit, 3 numerical failure
or invariant violated, 4 input error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import diagnostics as diag
from .barriers import Barrier, ConeSpec, make_block
from .errors import FormatError, InfstartError
from .model import ConicProblem, PrimalDualTriple, validate
from .solvers import (
    CONVERGED,
    INVARIANT_VIOLATED,
    ITERATION_LIMIT,
    NO_PROGRESS,
    NUMERICAL_FAILURE,
    SolverOptions,
    solve,
)

FORMAT_VERSION = 1
OUTPUT_DIR_ENV = "INFSTART_OUTPUT_DIR"

EXIT_OK = 0
EXIT_NO_PROGRESS = 2
EXIT_NUMERICAL = 3
EXIT_INPUT = 4

STATUS_EXIT = {
    CONVERGED: EXIT_OK,
    NO_PROGRESS: EXIT_NO_PROGRESS,
    ITERATION_LIMIT: EXIT_NO_PROGRESS,
    NUMERICAL_FAILURE: EXIT_NUMERICAL,
    INVARIANT_VIOLATED: EXIT_NUMERICAL,
}

SUITES = ("barrier-identities", "hessian-bounds", "central-path", "bound-ledger")


# ---- problem files -----------------------------------------------------------

def _line_index(node, path="", out=None):
    """Map dotted field paths (``cone[0].type``) to 1-based source lines."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = str(k.value)
            sub = f"{path}.{key}" if path else key
            out[sub] = k.start_mark.line + 1
            _line_index(v, sub, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, f"{path}[{i}]", out)
    return out


class _Fields:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        raise FormatError(msg, field=path, line=self.lines.get(path))

    def vector(self, data, path, length=None):
        v = data
        if not isinstance(v, list):
            self.fail(path, "expected a list of numbers")
        for i, e in enumerate(v):
            if isinstance(e, bool) or not isinstance(e, (int, float)):
                self.fail(f"{path}[{i}]", f"expected a number, got {e!r}")
        arr = np.asarray(v, dtype=float)
        if length is not None and arr.size != length:
            self.fail(path, f"expected {length} entries, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            self.fail(path, "entries must be finite")
        return arr

    def matrix(self, data, path, cols):
        if not isinstance(data, list) or not data:
            self.fail(path, "expected a non-empty list of rows")
        return np.vstack([self.vector(r, f"{path}[{i}]", cols) for i, r in enumerate(data)])


def parse_problem(text: str):
    """Parse a problem document. Returns ``(problem, hot_start or None, x_bar or None)``."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise FormatError(f"not valid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    if node is None or not isinstance(data, dict):
        raise FormatError("document must be a mapping", line=1)
    f = _Fields(_line_index(node))
    if data.get("format_version") != FORMAT_VERSION:
        f.fail("format_version", f"expected format_version: {FORMAT_VERSION}")
    for key in ("cone", "A", "b", "c"):
        if key not in data:
            raise FormatError("missing required field", field=key)
    unknown = set(data) - {"format_version", "cone", "A", "b", "c", "hot_start", "x_bar"}
    if unknown:
        k = sorted(unknown)[0]
        f.fail(k, "unknown field")

    cone_data = data["cone"]
    if not isinstance(cone_data, list) or not cone_data:
        f.fail("cone", "expected a non-empty list of blocks")
    blocks = []
    for i, blk in enumerate(cone_data):
        p = f"cone[{i}]"
        if not isinstance(blk, dict):
            f.fail(p, "expected a mapping with type and dim")
        kind = blk.get("type")
        if kind not in ("nonneg", "soc"):
            f.fail(f"{p}.type", f"unknown cone type {kind!r}; expected nonneg or soc")
        dim = blk.get("dim")
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1 or (kind == "soc" and dim < 2):
            f.fail(f"{p}.dim", f"invalid dimension {dim!r}")
        blocks.append(make_block(kind, dim))
    cone = ConeSpec(blocks)
    n = cone.dim

    c = f.vector(data["c"], "c", n)
    A = f.matrix(data["A"], "A", n)
    b = f.vector(data["b"], "b", A.shape[0])
    problem = ConicProblem(A, b, c, cone)

    hot = None
    if data.get("hot_start") is not None:
        hs = data["hot_start"]
        if not isinstance(hs, dict):
            f.fail("hot_start", "expected a mapping with x, s, y")
        for k in ("x", "s", "y"):
            if k not in hs:
                f.fail("hot_start", f"missing {k}")
        hot = PrimalDualTriple(
            x=f.vector(hs["x"], "hot_start.x", n),
            s=f.vector(hs["s"], "hot_start.s", n),
            y=f.vector(hs["y"], "hot_start.y", A.shape[0]),
        )
    x_bar = None
    if data.get("x_bar") is not None:
        x_bar = f.vector(data["x_bar"], "x_bar", n)
    return problem, hot, x_bar


def load_problem(path):
    return parse_problem(Path(path).read_text())


def dump_problem(problem: ConicProblem, hot_start=None, x_bar=None) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "cone": problem.cone.to_list(),
        "A": _plain(problem.A),
        "b": _plain(problem.b),
        "c": _plain(problem.c),
    }
    if hot_start is not None:
        doc["hot_start"] = {"x": _plain(hot_start.x), "s": _plain(hot_start.s), "y": _plain(hot_start.y)}
    if x_bar is not None:
        doc["x_bar"] = _plain(x_bar)
    return _dump(doc)


# ---- reports -----------------------------------------------------------------

def _plain(v):
    """Convert numpy containers and scalars to plain Python types (floats keep all 17 digits)."""
    if isinstance(v, np.ndarray):
        return [_plain(e) for e in v.tolist()] if v.ndim else _plain(v.item())
    if isinstance(v, dict):
        return {str(k): _plain(e) for k, e in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(e) for e in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _dump(doc) -> str:
    return yaml.safe_dump(_plain(doc), sort_keys=False, default_flow_style=None, width=120)


def build_report(rep, problem: ConicProblem, ledger=None, measured=None, with_trace=False) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "status": rep.status,
        "epsilon": rep.eps,
        "method": rep.method,
        "iterations": {
            "total": rep.n_steps,
            "damped": rep.count("damped"),
            "path": rep.count("path"),
            "quadratic": rep.count("quadratic"),
            "final_lambda": rep.final_lambda,
        },
        "message": rep.message,
    }
    if rep.recovered is not None:
        t = rep.recovered
        doc["solution"] = {"x": t.x, "s": t.s, "y": t.y}
        r = rep.residuals
        doc["primal_res"] = r.primal
        doc["dual_res"] = r.dual
        doc["gap"] = r.gap
        doc["eps_optimal"] = rep.eps_optimal
    if rep.certificate is not None:
        doc["certificate"] = {
            "x": rep.certificate.x, "y": rep.certificate.y, "tau": rep.certificate.tau,
            "valid": rep.certificate_valid,
        }
    if measured is not None:
        doc["measured"] = measured
    if ledger is not None:
        doc["bound_ledger"] = ledger.to_dict()
    if with_trace:
        doc["trace"] = [r.to_dict() for r in rep.iterations]
    doc["wall_time"] = rep.wall_time
    return doc


def _resolve(path):
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, output, default_name=None):
    target = output
    if target is None and default_name and os.environ.get(OUTPUT_DIR_ENV):
        target = default_name
    p = _resolve(target)
    if p is None:
        sys.stdout.write(text)
    else:
        p.write_text(text)


class _TraceWriter:
    """One JSON record per iteration, flushed as it goes."""

    def __init__(self, path):
        self.fh = open(path, "w")

    def __call__(self, rec):
        self.fh.write(json.dumps(_plain(rec.to_dict()), sort_keys=True) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


# ---- subcommands -------------------------------------------------------------

def _positive(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not (v > 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return conv


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def run_solve(args) -> int:
    try:
        problem, hot, x_bar = load_problem(args.input)
        validate(problem)
        if args.hot_start and hot is None:
            raise FormatError("--hot-start given but the file has no hot_start", field="hot_start")
        opts = SolverOptions(method=args.method, lambda_tol=args.lambda_tol, max_iters=args.max_iters)
    except (InfstartError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    tracer = None
    if args.trace:
        tracer = _TraceWriter(_resolve(args.trace))
        opts.callback = tracer
    start = hot if args.hot_start else None
    try:
        rep = solve(problem, args.epsilon, opts, start=start, x_bar=x_bar)
    except InfstartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if tracer is not None:
            tracer.close()

    ledger = measured = None
    if args.diagnostics:
        try:
            sigma, mu, _ = diag.measure_refs(problem, rep.aux.refs)
            measured = {"sigma": sigma, "mu": mu}
            ledger = diag.predicted_bounds(rep.aux, sigma, mu, rep)
        except InfstartError as exc:
            measured = {"error": str(exc)}
            ledger = diag.predicted_bounds(rep.aux, None, None, rep)
    doc = build_report(rep, problem, ledger, measured)
    _emit(_dump(doc), args.output, Path(args.input).stem + ".report.yaml")
    return STATUS_EXIT.get(rep.status, EXIT_NUMERICAL)


TINY_LP = ConicProblem(np.array([[1.0, 1.0]]), np.array([1.0]), np.array([1.0, 0.0]), ConeSpec.orthant(2))


def _parse_cone(text):
    blocks = []
    for part in text.split(","):
        kind, _, dim = part.strip().partition(":")
        try:
            blocks.append(make_block(kind, int(dim)))
        except ValueError as exc:
            raise FormatError(str(exc), field="--cone") from None
    return ConeSpec(blocks)


def _suite_barrier(args, out):
    cone = _parse_cone(args.cone)
    bar = Barrier(cone)
    rng = np.random.default_rng(args.seed)
    worst = {}
    bad = 0
    for _ in range(args.count):
        x = diag.sample_interior(cone, rng)
        errs = diag.barrier_identity_errors(bar, x, rng)
        for k, v in errs.items():
            worst[k] = max(worst.get(k, 0.0), v)
        if max(errs.values()) > 1e-8:
            bad += 1
    out["points"] = args.count
    out["worst"] = worst
    return bad


def _suite_hessian(args, out):
    cone = _parse_cone(args.cone)
    pairs = diag.random_hessian_pairs(cone, args.count, args.seed)
    rep = diag.check_hessian_bounds(Barrier(cone), pairs, rng=args.seed)
    out.update(c_k=rep.c_k, pairs=rep.n_pairs, simplex_points=rep.n_simplex,
               worst_margin=rep.worst_margin, worst_size_ratio=rep.worst_size_ratio)
    return len(rep.violations)


def _problem_for(args):
    if args.input is None:
        return TINY_LP
    problem, _, _ = load_problem(args.input)
    return validate(problem)


def _suite_central(args, out):
    problem = _problem_for(args)
    start = diag.strictly_feasible_point(problem)
    bad = 0
    checks = []
    for t1, t2 in ((0.1, 1.0), (1.0, 10.0)):
        r = diag.check_path_ordering(problem, t1, t2, start)
        checks.append({"t1": t1, "t2": t2, "margins": r.margins, "product_error": r.product_error, "ok": r.ok})
        bad += not r.ok
    out["orderings"] = checks
    return bad


def _suite_ledger(args, out):
    problem = _problem_for(args)
    eps = args.epsilon
    reps = {m: solve(problem, eps, SolverOptions(method=m, trace=True)) for m in ("damped", "path")}
    aux = reps["damped"].aux
    sigma, mu, _ = diag.measure_refs(problem, aux.refs)
    led = diag.predicted_bounds(aux, sigma, mu, reps)
    out["ledger"] = led.to_dict()
    bad = 0
    bad += not all(r.converged for r in reps.values())
    bad += led.actual_path > led.path_bound
    bad += led.actual_damped > 5 * led.damped_expr
    return bad


def run_diagnostics(args) -> int:
    out = {"format_version": FORMAT_VERSION, "suite": args.suite, "seed": args.seed}
    fn = {
        "barrier-identities": _suite_barrier,
        "hessian-bounds": _suite_hessian,
        "central-path": _suite_central,
        "bound-ledger": _suite_ledger,
    }[args.suite]
    t0 = time.perf_counter()
    try:
        bad = int(fn(args, out))
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfstartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out["violations"] = bad
    out["wall_time"] = time.perf_counter() - t0
    _emit(_dump(out), args.output, f"diagnostics-{args.suite}.yaml")
    print(f"{args.suite}: {bad} violation(s)", file=sys.stderr)
    return EXIT_OK if bad == 0 else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infstart", description="Infeasible-start conic interior-point solver.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("--input", required=True, help="problem file (YAML)")
    s.add_argument("--epsilon", type=_positive("epsilon"), required=True, help="target duality gap")
    s.add_argument("--method", choices=("damped", "path"), default="damped")
    s.add_argument("--lambda-tol", type=_positive("lambda-tol"), default=1e-12)
    s.add_argument("--max-iters", type=_positive_int, default=5000)
    s.add_argument("--trace", help="write a JSON-lines iteration trace here")
    s.add_argument("--hot-start", action="store_true", help="start from the file's hot_start triple")
    s.add_argument("--diagnostics", action="store_true", help="measure sigma and mu and add the bound ledger")
    s.add_argument("--output", help="report path (default: standard output)")
    s.set_defaults(func=run_solve)

    d = sub.add_parser("diagnostics", help="run a diagnostics suite")
    d.add_argument("--suite", choices=SUITES, required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--cone", default="nonneg:4", help="blocks such as 'nonneg:3,soc:4'")
    d.add_argument("--count", type=_positive_int, default=200)
    d.add_argument("--input", help="problem file (default: a two-variable LP)")
    d.add_argument("--epsilon", type=_positive("epsilon"), default=1e-3)
    d.add_argument("--output", help="report path (default: standard output)")
    d.set_defaults(func=run_diagnostics)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags; map that to the input-error code
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
