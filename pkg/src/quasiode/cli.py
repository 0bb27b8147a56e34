"""Batch front door: problem documents, five subcommands, machine output.

Subcommands: verify, matrix, apply, solve, eig. One JSON document format
feeds every task; outputs are JSON (or CSV for apply, aligned text for
matrix). Exit codes: 0 ok, 1 usage or schema failure, 2 verification
mismatch, 3 numeric failure. Log level comes from QUASIODE_LOG
(error | info | debug).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time

import numpy as np

from . import quasi, solver, symbolic
from .coeffs import CoefficientSet, load_coefficient_set, parse_complex
from .errors import CoefficientError, ParseError, QuasiodeError, SchemaError
from .quasi import SmoothFunction
from .shinzettl import eval_matrix, shin_zettl_matrix, sparsity_pattern

log = logging.getLogger("quasiode")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2
EXIT_NUMERIC = 3

TOP_LEVEL_KEYS = {"n", "interval", "coefficients", "y", "ivp", "boundary", "search",
                  "grid", "tolerances"}
TOLERANCE_DEFAULTS = {"rtol": 1e-9, "atol": 1e-12, "refine_tol": 1e-10, "max_iter": 40}


def _fail_unknown(where, obj, allowed):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SchemaError(f"{where}: must be >= {minimum}, got {value}")
    return value


def load_document(path: str) -> dict:
    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"document is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise SchemaError("document root must be a JSON object")
    _fail_unknown("document", doc, TOP_LEVEL_KEYS)
    return doc


def document_tolerances(doc: dict) -> dict:
    tols = dict(TOLERANCE_DEFAULTS)
    block = doc.get("tolerances", {})
    if not isinstance(block, dict):
        raise SchemaError("'tolerances' must be an object")
    _fail_unknown("tolerances", block, TOLERANCE_DEFAULTS)
    for key, value in block.items():
        if key == "max_iter":
            tols[key] = _integer(value, "tolerances.max_iter", minimum=1)
        else:
            v = _number(value, f"tolerances.{key}")
            if v <= 0:
                raise SchemaError(f"tolerances.{key} must be > 0")
            tols[key] = v
    return tols


def document_boundary(doc: dict, cs: CoefficientSet) -> solver.BoundaryProblem:
    if "boundary" not in doc:
        raise SchemaError("eig task requires a 'boundary' block")
    spec = doc["boundary"]
    if isinstance(spec, str):
        if spec not in solver.PRESETS:
            raise SchemaError(f"boundary: unknown preset {spec!r} (have {solver.PRESETS})")
        return solver.boundary_problem(cs, spec)
    if not isinstance(spec, dict):
        raise SchemaError("boundary: expected preset name or {'A':…, 'B':…}")
    _fail_unknown("boundary", spec, {"A", "B"})
    size = 2 * cs.n + 1
    mats = []
    for name in ("A", "B"):
        rows = spec.get(name)
        if (not isinstance(rows, list) or len(rows) != size
                or any(not isinstance(r, list) or len(r) != size for r in rows)):
            raise SchemaError(f"boundary.{name}: expected a {size}x{size} matrix")
        mats.append(np.array([[parse_complex(v) for v in r] for r in rows], dtype=complex))
    return solver.boundary_problem(cs, (mats[0], mats[1]))


def document_search(doc: dict):
    if "search" not in doc:
        raise SchemaError("eig task requires a 'search' block")
    spec = doc["search"]
    if not isinstance(spec, dict):
        raise SchemaError("'search' must be an object")
    kind = spec.get("kind")
    if kind == "real_interval":
        _fail_unknown("search", spec, {"kind", "lo", "hi", "samples"})
        lo = _number(spec.get("lo"), "search.lo")
        hi = _number(spec.get("hi"), "search.hi")
        if not lo < hi:
            raise SchemaError("search: lo must be < hi")
        samples = _integer(spec.get("samples", 200), "search.samples", minimum=2)
        return solver.RealIntervalSearch(lo=lo, hi=hi, samples=samples)
    if kind == "complex_rect":
        _fail_unknown("search", spec, {"kind", "corners", "grid"})
        corners = spec.get("corners")
        if not isinstance(corners, list) or len(corners) != 2:
            raise SchemaError("search.corners must be a pair of complex corners")
        c0, c1 = (parse_complex(c) for c in corners)
        grid = spec.get("grid", [21, 21])
        if not isinstance(grid, list) or len(grid) != 2:
            raise SchemaError("search.grid must be [n_re, n_im]")
        nre = _integer(grid[0], "search.grid[0]", minimum=2)
        nim = _integer(grid[1], "search.grid[1]", minimum=2)
        return solver.ComplexRectSearch(corners=(c0, c1), grid=(nre, nim))
    raise SchemaError(f"search.kind must be 'real_interval' or 'complex_rect', got {kind!r}")


def _cnum(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _write(args, text: str):
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, payload) -> None:
    _write(args, json.dumps(payload, indent=2) + "\n")


def _pick_format(args, default, allowed):
    fmt = args.format or default
    if fmt not in allowed:
        raise SchemaError(f"--format {fmt} not supported here (allowed: {sorted(allowed)})")
    return fmt


# ---------------------------------------------------------------------------
# subcommands

def cmd_verify(args) -> int:
    results = []
    all_equal = True
    t_total = time.perf_counter()
    for n in range(1, args.n_max + 1):
        t0 = time.perf_counter()
        tau = symbolic.quasi_tau(n)
        div = symbolic.expand(symbolic.divergent_form(n))
        report = symbolic.expr_equal(tau, div)
        entry = {
            "n": n,
            "equal": report.equal,
            "term_count_recursion": len(tau),
            "term_count_divergent": len(div),
            "seconds": round(time.perf_counter() - t0, 6),
        }
        if not report.equal:
            entry["diff"] = report.diff_strings()
            all_equal = False
        results.append(entry)
    payload = {
        "n_max": args.n_max,
        "all_equal": all_equal,
        "results": results,
        "total_seconds": round(time.perf_counter() - t_total, 6),
    }
    fmt = _pick_format(args, "json", {"json", "text"})
    if fmt == "json":
        _emit_json(args, payload)
    else:
        lines = [
            f"n={r['n']}: {'ok' if r['equal'] else 'MISMATCH'} "
            f"({r['term_count_recursion']} terms, {r['seconds']:.3f}s)"
            for r in results
        ]
        _write(args, "\n".join(lines) + "\n")
    return EXIT_OK if all_equal else EXIT_MISMATCH


def _parse_xs(text: str, cs: CoefficientSet):
    a, b = cs.interval
    out = []
    for piece in text.split(","):
        try:
            x = float(piece)
        except ValueError:
            raise SchemaError(f"--x: not a number: {piece!r}")
        if not a <= x <= b:
            raise SchemaError(f"--x: point {x} outside [{a}, {b}]")
        out.append(x)
    return out


def cmd_matrix(args) -> int:
    doc = load_document(args.input)
    cs = load_coefficient_set(doc)
    size = 2 * cs.n + 1
    fmt = _pick_format(args, "json", {"json", "text"})
    if args.pattern or args.x is None:
        pattern = sparsity_pattern(cs.n)
        entries = [
            {"row": row, "col": col, "kind": str(kind)}
            for (row, col), kind in sorted(pattern.items())
        ]
        if fmt == "json":
            _emit_json(args, {"n": cs.n, "size": size, "entries": entries})
        else:
            names = [["Zero"] * size for _ in range(size)]
            for (row, col), kind in pattern.items():
                names[row - 1][col - 1] = str(kind)
            width = max(len(t) for r in names for t in r) + 2
            lines = ["".join(t.ljust(width) for t in row).rstrip() for row in names]
            _write(args, "\n".join(lines) + "\n")
        return EXIT_OK
    xs = _parse_xs(args.x, cs)
    m = shin_zettl_matrix(cs)
    points = []
    for x in xs:
        values = eval_matrix(m, x)
        points.append({"x": x, "matrix": [[_cnum(v) for v in row] for row in values]})
    if fmt == "json":
        _emit_json(args, {"n": cs.n, "size": size, "points": points})
    else:
        blocks = []
        for pt, x in zip(points, xs):
            values = np.array([[complex(c["re"], c["im"]) for c in row] for row in pt["matrix"]])
            rows = [
                "  ".join(f"{v.real:+.6g}{v.imag:+.6g}i" for v in row)
                for row in values
            ]
            blocks.append(f"x = {x}\n" + "\n".join(rows))
        _write(args, "\n\n".join(blocks) + "\n")
    return EXIT_OK


def cmd_apply(args) -> int:
    doc = load_document(args.input)
    cs = load_coefficient_set(doc)
    if "y" not in doc:
        raise SchemaError("apply task requires a 'y' expression")
    if not isinstance(doc["y"], str):
        raise SchemaError("'y' must be an expression string")
    y = SmoothFunction.parse(doc["y"])

    grid_spec = doc.get("grid", {})
    if not isinstance(grid_spec, dict):
        raise SchemaError("'grid' must be an object")
    _fail_unknown("grid", grid_spec, {"points", "margin"})
    points = _integer(grid_spec.get("points", 101), "grid.points", minimum=2)
    a, b = cs.interval
    h = quasi.chain_stencil_width(cs)
    default_margin = 2.5 * h if args.cross_check else 0.0
    margin = _number(grid_spec.get("margin", default_margin), "grid.margin")
    if margin < 0 or 2 * margin >= b - a:
        raise SchemaError(f"grid.margin {margin} does not fit inside [{a}, {b}]")
    xs = [float(v) for v in np.linspace(a + margin, b - margin, points)]

    expanded = [complex(v) for v in quasi.apply_tau(cs, y, xs, method="expanded")]
    chain = None
    if args.cross_check:
        chain = [complex(v) for v in quasi.apply_tau(cs, y, xs, method="chain")]
    max_dev = None
    if chain is not None:
        scale = max(1.0, max(abs(v) for v in expanded))
        max_dev = float(max(abs(e - c) for e, c in zip(expanded, chain)) / scale)

    fmt = _pick_format(args, "csv", {"csv", "json"})
    if fmt == "json":
        payload = {
            "points": [
                {"x": x, "tau": _cnum(e), **({"tau_chain": _cnum(c)} if chain else {})}
                for x, e, c in zip(xs, expanded, chain or expanded)
            ],
        }
        if max_dev is not None:
            payload["max_rel_deviation"] = max_dev
        _emit_json(args, payload)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        if chain is None:
            writer.writerow(["x", "re_tau", "im_tau"])
            for x, e in zip(xs, expanded):
                writer.writerow([repr(x), repr(e.real), repr(e.imag)])
        else:
            writer.writerow(["x", "re_tau_expanded", "im_tau_expanded",
                             "re_tau_chain", "im_tau_chain"])
            for x, e, c in zip(xs, expanded, chain):
                writer.writerow([repr(x), repr(e.real), repr(e.imag),
                                 repr(c.real), repr(c.imag)])
            writer.writerow(["max_rel_deviation", repr(max_dev), "", "", ""])
        _write(args, buf.getvalue())
    return EXIT_OK


def _document_ivp(doc: dict, cs: CoefficientSet):
    a, b = cs.interval
    spec = doc.get("ivp", {})
    if not isinstance(spec, dict):
        raise SchemaError("'ivp' must be an object")
    _fail_unknown("ivp", spec, {"u0", "lambda", "x0", "x1"})
    lam = parse_complex(spec.get("lambda", 0.0))
    x0 = _number(spec.get("x0", a), "ivp.x0")
    x1 = _number(spec.get("x1", b), "ivp.x1")
    if not (a <= x0 < x1 <= b):
        raise SchemaError(f"ivp range [{x0}, {x1}] must be increasing inside [{a}, {b}]")
    u0 = None
    if "u0" in spec:
        size = 2 * cs.n + 1
        raw = spec["u0"]
        if not isinstance(raw, list) or len(raw) != size:
            raise SchemaError(f"ivp.u0 must be a vector of length {size}")
        u0 = np.array([parse_complex(v) for v in raw], dtype=complex)
    return u0, lam, x0, x1


def cmd_solve(args) -> int:
    doc = load_document(args.input)
    cs = load_coefficient_set(doc)
    tols = document_tolerances(doc)
    u0, lam, x0, x1 = _document_ivp(doc, cs)
    fm = solver.fundamental_matrix(cs, lam, x0, x1, tols["rtol"], tols["atol"])
    expected = solver.liouville_expected(cs, x0, x1)
    det = fm.det()
    payload = {
        "n": cs.n,
        "lambda": _cnum(lam),
        "x0": x0,
        "x1": x1,
        "liouville_check": {
            "det": _cnum(det),
            "expected": _cnum(expected),
            "relative_error": abs(det / expected - 1.0),
        },
        "tolerance_achieved": fm.tolerance_achieved,
    }
    if u0 is not None:
        payload["endpoint_state"] = [_cnum(v) for v in fm.y @ u0]
    else:
        payload["fundamental_matrix"] = [[_cnum(v) for v in row] for row in fm.y]
    _pick_format(args, "json", {"json"})
    _emit_json(args, payload)
    return EXIT_OK


def cmd_eig(args) -> int:
    doc = load_document(args.input)
    cs = load_coefficient_set(doc)
    tols = document_tolerances(doc)
    bp = document_boundary(doc, cs)
    search = document_search(doc)
    result = solver.find_eigenvalues(
        bp, search,
        refine_tol=tols["refine_tol"], max_iter=tols["max_iter"],
        rtol=tols["rtol"], atol=tols["atol"], jobs=args.jobs,
    )
    lv = solver.liouville_check(cs, 0j, tols["rtol"], tols["atol"])
    payload = {
        "eigenvalues": [
            {"re": e.lam.real, "im": e.lam.imag, "residual": e.residual}
            for e in result.eigenvalues
        ],
        "warnings": result.warnings,
        "liouville_check": {
            "det": _cnum(lv["det"]),
            "expected": _cnum(lv["expected"]),
            "relative_error": lv["relative_error"],
        },
    }
    _pick_format(args, "json", {"json"})
    _emit_json(args, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing / entry point

class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="quasiode",
        description="Odd-order quasi-differential expressions: symbolic identity "
                    "verification, system matrices, numeric application, IVPs and "
                    "boundary eigenvalues.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, metavar="FILE",
                           help="problem document (JSON); '-' reads stdin")
        p.add_argument("--output", metavar="FILE", default=None,
                       help="write results here instead of stdout")
        p.add_argument("--format", choices=["json", "csv", "text"], default=None,
                       help="output format (default depends on the subcommand)")
        p.add_argument("--jobs", type=_positive_int, default=1, metavar="N",
                       help="worker threads for independent determinant evaluations")

    p_verify = sub.add_parser("verify",
                              help="check the regularization identity in exact arithmetic")
    p_verify.add_argument("--n-max", type=_positive_int, default=symbolic.VERIFY_CAP_DEFAULT,
                          help="verify orders n = 1..N_MAX (default %(default)s)")
    common(p_verify, needs_input=False)
    p_verify.set_defaults(func=cmd_verify)

    p_matrix = sub.add_parser("matrix",
                              help="print the system matrix pattern or numeric values")
    p_matrix.add_argument("--pattern", action="store_true",
                          help="print entry kinds instead of numeric values")
    p_matrix.add_argument("--x", metavar="X1,X2,...", default=None,
                          help="comma-separated evaluation points")
    common(p_matrix)
    p_matrix.set_defaults(func=cmd_matrix)

    p_apply = sub.add_parser("apply",
                             help="apply the differential expression to a test function")
    p_apply.add_argument("--cross-check", action="store_true",
                         help="also evaluate via the quasi-derivative chain and report "
                              "the maximal deviation")
    common(p_apply)
    p_apply.set_defaults(func=cmd_apply)

    p_solve = sub.add_parser("solve",
                             help="integrate the first-order system (IVP)")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_eig = sub.add_parser("eig",
                           help="locate eigenvalues of a boundary problem")
    common(p_eig)
    p_eig.set_defaults(func=cmd_eig)
    return parser


def _setup_logging():
    level_name = os.environ.get("QUASIODE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level_name, logging.ERROR))
    if level_name not in levels:
        log.error("QUASIODE_LOG=%r not in %s; using 'error'", level_name, sorted(levels))


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ParseError, CoefficientError) as e:
        log.error("%s", e)
        print(f"quasiode: schema error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except QuasiodeError as e:
        log.error("%s", e)
        print(f"quasiode: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"quasiode: i/o error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
