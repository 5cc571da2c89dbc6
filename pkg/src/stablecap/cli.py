"""Command-line interface.

Every subcommand writes one JSON document to stdout (JSON lines for traces and
vertex dumps).  Exit codes: 0 success, 1 invalid input, 2 numeric
non-convergence (or a failed acceptance criterion), 3 zero capacity or an
infeasible program, 4 hypothesis not applicable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .parallel import default_threads
from .polycore import PolyError, SparsePoly

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2
EXIT_ZERO = 3
EXIT_NOT_APPLICABLE = 4


class InputError(Exception):
    pass


# -- input parsing ------------------------------------------------------------------


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def load_poly(path: str) -> SparsePoly:
    try:
        return SparsePoly.from_json_obj(_read_json(path))
    except PolyError as exc:
        raise InputError(str(exc)) from exc


def _read_csv_rows(path: str) -> dict:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        rows = [[float(c) for c in r] for r in rows]
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric CSV entry") from exc
    return {"n": len(rows), "rows": rows}


def load_matrix(path: str, fmt: str = "json") -> np.ndarray:
    """``{"n": n, "rows": [[...], ...]}``, or plain CSV rows with ``--format csv``."""
    obj = _read_csv_rows(path) if fmt == "csv" or path.endswith(".csv") else _read_json(path)
    try:
        n, rows = obj["n"], obj["rows"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed matrix JSON: missing {exc}") from exc
    if not isinstance(n, int) or n < 1 or not isinstance(rows, list) or len(rows) != n:
        raise InputError("matrix JSON needs an integer n and n rows")
    for r in rows:
        if not isinstance(r, list) or len(r) != n or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in r):
            raise InputError("every row must be a list of n numbers")
    A = np.array(rows, dtype=float)
    if not np.all(np.isfinite(A)) or np.any(A < 0):
        raise InputError("matrix entries must be finite and non-negative")
    return A


def parse_vector(text: str | None, name: str) -> np.ndarray | None:
    if text is None:
        return None
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise InputError(f"--{name}: expected comma separated numbers") from exc
    if not np.all(np.isfinite(v)):
        raise InputError(f"--{name}: values must be finite")
    return v


def parse_partition(text: str) -> list[list[int]]:
    """``"1|2,3"`` (1-based element indices) to 0-based blocks."""
    blocks = []
    for part in text.split("|"):
        try:
            idx = [int(t) - 1 for t in part.split(",") if t.strip()]
        except ValueError as exc:
            raise InputError("--partition: expected blocks like 1|2,3") from exc
        if not idx or min(idx) < 0:
            raise InputError("--partition: blocks must be non-empty 1-based index lists")
        blocks.append(idx)
    return blocks


def _require(value, flag: str):
    if value is None:
        raise InputError(f"{flag} is required")
    return value


# -- output ---------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (list, tuple)):
        return ";".join(str(_cell(x)) for x in v)
    return v


def emit(args, payload, out=None) -> None:
    """Write a document (dict) or JSON lines (list of dicts)."""
    out = out or sys.stdout
    rows = payload if isinstance(payload, list) else [payload]
    if args.format == "csv":
        buf = io.StringIO()
        keys = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k, "")) if not isinstance(r.get(k), dict) else json.dumps(r[k], sort_keys=True) for k in keys])
        out.write(buf.getvalue())
        return
    if isinstance(payload, list):
        for r in payload:
            out.write(json.dumps(r, sort_keys=True) + "\n")
    else:
        out.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# -- subcommands --------------------------------------------------------------------------


def cmd_cap(args) -> int:
    from .capsolve import ZERO, CapacityError, capacity

    p = load_poly(_require(args.poly, "--poly"))
    target = parse_vector(args.alpha, "alpha")
    try:
        res = capacity(p, target, tol=args.tol)
    except CapacityError as exc:
        emit(args, {"error": str(exc), "best_value": exc.best_value})
        return EXIT_NONCONVERGED
    emit(args, res.to_json_obj())
    return EXIT_ZERO if res.status == ZERO else EXIT_OK


def cmd_scale(args) -> int:
    from .polyscale import CONVERGED, VanishingMarginal, run_scaling

    p = load_poly(_require(args.poly, "--poly"))
    try:
        tr = run_scaling(p, tol=args.tol, max_iters=args.max_iters)
    except VanishingMarginal as exc:
        emit(args, {"error": str(exc), "index": exc.index})
        return EXIT_ZERO
    lines = tr.to_json_lines()
    lines.append({"status": tr.status, "estimate": tr.final_capacity_estimate, "steps": len(tr.steps) - 1, "regime_entry": tr.regime_entry})
    emit(args, lines)
    return EXIT_OK if tr.status == CONVERGED else EXIT_NONCONVERGED


def cmd_productize(args) -> int:
    from .productize import StabilityViolation, productize

    p = load_poly(_require(args.poly, "--poly"))
    y = parse_vector(_require(args.point, "--point"), "point")
    alpha = parse_vector(args.alpha, "alpha")
    try:
        cert = productize(p, y, alpha)
    except StabilityViolation as exc:
        emit(args, {"error": str(exc), "root": exc.root})
        return EXIT_NOT_APPLICABLE
    emit(args, cert.to_json_obj())
    return EXIT_OK


def cmd_lnalpha(args) -> int:
    from .lnalpha import l_n_alpha

    alpha = parse_vector(_require(args.alpha, "--alpha"), "alpha")
    res = l_n_alpha(alpha, tol=args.tol, threads=args.threads)
    summary = {
        "L": res.value,
        "alpha": res.alpha.tolist(),
        "argmin": None if res.argmin_forest is None else res.argmin_forest.matrix.entries.tolist(),
        "argmin_edges": None if res.argmin_forest is None else [list(e) for e in res.argmin_forest.edges],
        "vertices": len(res.per_vertex),
        "failures": len(res.failures),
        "boundary_flag": res.boundary_flag,
    }
    if args.emit_vertices:
        lines = [
            {"edges": [list(e) for e in v.edges], "matrix": v.matrix.entries.tolist(), "capacity": c}
            for v, c in res.per_vertex
        ]
        emit(args, lines + [summary])
    else:
        emit(args, summary)
    return EXIT_NONCONVERGED if res.failures else EXIT_OK


def cmd_permanent(args) -> int:
    from .matforms import ORACLE_CAP, permanent_oracle, permanent_ryser, zero_block_certificate

    A = load_matrix(_require(args.matrix, "--matrix"), args.format)
    out = {"n": len(A), "permanent": permanent_ryser(A)}
    if len(A) <= ORACLE_CAP:
        out["oracle"] = permanent_oracle(A)
    block = zero_block_certificate(A)
    if block is not None:
        out["zero_block"] = {"rows": list(block[0]), "cols": list(block[1])}
    emit(args, out)
    return EXIT_OK


def cmd_sinkhorn(args) -> int:
    from .matforms import SinkhornError, sinkhorn

    A = load_matrix(_require(args.matrix, "--matrix"), args.format)
    target = parse_vector(args.alpha, "alpha")

    def doc(res):
        return {
            "scaled": res.scaled.entries.tolist(),
            "row_scalers": res.row_scalers.tolist(),
            "col_scalers": res.col_scalers.tolist(),
            "iterations": res.iterations,
            "residual": res.residual,
        }

    try:
        res = sinkhorn(A, target, tol=args.tol, max_iters=args.max_iters)
    except SinkhornError as exc:
        emit(args, {"error": str(exc), **doc(exc.best)})
        return EXIT_NONCONVERGED
    emit(args, doc(res))
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .bounds import bound_report, marginal_equivalences

    alpha = parse_vector(_require(args.alpha, "--alpha"), "alpha")
    out = bound_report(alpha).to_json_obj()
    eq = marginal_equivalences(alpha)
    out["min_subset_slack"] = eq.min_subset_slack
    out["worst_subset"] = list(eq.worst_subset)
    emit(args, out)
    return EXIT_OK


def cmd_lp_min(args) -> int:
    from .lnalpha import check_support_certificate, lp_min_general
    from .simplex import INFEASIBLE

    alpha = parse_vector(_require(args.alpha, "--alpha"), "alpha")
    t = parse_vector(_require(args.point, "--point"), "point")
    m = len(alpha)
    n = args.degree if args.degree is not None else int(round(alpha.sum()))
    res = lp_min_general(t, alpha, n, m, tol=args.tol)
    if res.status == INFEASIBLE:
        emit(args, {"status": res.status, "farkas": res.farkas.tolist()})
        return EXIT_ZERO
    cert = check_support_certificate(res.support, t, n, m, alpha=alpha)
    emit(args, {
        "status": res.status,
        "value": res.value,
        "coefficients": [{"exp": list(mu), "coeff": c} for mu, c in sorted(res.coefficients.items())],
        "support": [list(mu) for mu in res.support],
        "beta": None if cert is None else cert.beta.tolist(),
        "certificate_value": None if cert is None else cert.value,
    })
    return EXIT_OK


def cmd_tsp_verify(args) -> int:
    from .srtsp import NOT_APPLICABLE, VIOLATED, build_instance, spanning_tree_poly, verify_tsp_bound

    graph = _read_json(_require(args.graph, "--graph"))
    try:
        edges = graph["edges"]
    except (KeyError, TypeError) as exc:
        raise InputError("graph JSON needs an 'edges' list") from exc
    if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
        raise InputError("edges must be a list of [u, v] pairs")
    weights = parse_vector(args.weights, "weights")
    blocks = parse_partition(_require(args.partition, "--partition"))
    dist = spanning_tree_poly(edges, weights)
    inst = build_instance(dist, blocks)
    rep = verify_tsp_bound(inst, tol=args.tol)
    out = rep.to_json_obj()
    out["beta"] = inst.beta.tolist()
    emit(args, out)
    if rep.status == NOT_APPLICABLE:
        return EXIT_NOT_APPLICABLE
    return EXIT_NONCONVERGED if rep.status == VIOLATED else EXIT_OK


def cmd_verify_all(args) -> int:
    from .acceptance import report_json, run_all

    report = run_all(args.seed, args.threads)
    if args.format == "csv":
        emit(args, [{"id": c["id"], "name": c["name"], "passed": c["passed"]} for c in report["criteria"]])
    else:
        sys.stdout.write(report_json(report) + "\n")
    return EXIT_OK if report["all_passed"] else EXIT_NONCONVERGED


COMMANDS = {
    "cap": (cmd_cap, "capacity of a polynomial at a target (default all ones)"),
    "scale": (cmd_scale, "run the multiplicative scaling iteration, one JSON line per step"),
    "productize": (cmd_productize, "product-of-linear-forms certificate at a point"),
    "lnalpha": (cmd_lnalpha, "exact L_n(alpha) by forest enumeration"),
    "permanent": (cmd_permanent, "permanent by Ryser's formula"),
    "sinkhorn": (cmd_sinkhorn, "Sinkhorn scaling to row sums 1 and column sums alpha"),
    "bounds": (cmd_bounds, "closed-form capacity bounds for alpha"),
    "lp-min": (cmd_lp_min, "minimum of p(t) over polynomials with marginals alpha"),
    "tsp-verify": (cmd_tsp_verify, "spanning-tree instance of the TSP probability bound"),
    "verify-all": (cmd_verify_all, "run the acceptance suite"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--max-iters", type=int, default=100_000)
    common.add_argument("--threads", type=int, default=default_threads())
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--poly", metavar="FILE")
    common.add_argument("--matrix", metavar="FILE")
    common.add_argument("--alpha", metavar="CSV")
    common.add_argument("--point", metavar="CSV")
    common.add_argument("--emit-vertices", action="store_true")
    common.add_argument("--graph", metavar="FILE")
    common.add_argument("--weights", metavar="CSV")
    common.add_argument("--partition", metavar="BLOCKS", help='1-based blocks, e.g. "1|2,3"')
    common.add_argument("--degree", type=int)

    parser = argparse.ArgumentParser(prog="stablecap", description="capacity of polynomials with non-negative coefficients")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; remap to the invalid-input code
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if args.tol <= 0 or args.threads < 1 or args.max_iters < 0:
        print("error: --tol must be positive, --threads at least 1, --max-iters non-negative", file=sys.stderr)
        return EXIT_INPUT
    fn, _ = COMMANDS[args.command]
    try:
        return fn(args)
    except (InputError, PolyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
