"""Command-line front end: ``hypersc <command> ...``.

Exit codes: 0 computed, 1 a requested check failed, 2 input error.
Reports are JSON with sorted keys (or flattened text with ``--format text``).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from hypersc import __version__
from hypersc.metric_core import InputError

SCHEMA = "hypersc.report/1"


class _Failed(Exception):
    """Raised by a command whose requested check failed; carries the report body."""


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    from hypersc.convexity import EMPTY

    if obj is EMPTY:
        return "empty"
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "infinite" if v > 0 else "-infinite"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {_key(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        items = [to_jsonable(v) for v in obj]
        return sorted(items, key=lambda v: json.dumps(v, sort_keys=True))
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    return str(obj)


def _key(k) -> str:
    if isinstance(k, str):
        return k
    return json.dumps(to_jsonable(k), sort_keys=True)


def dumps(report: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _flatten(obj: Any, prefix: str, out: List[str]) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(obj[k], f"{prefix}.{k}" if prefix else k, out)
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(v, f"{prefix}[{i}]", out)
    else:
        out.append(f"{prefix} = {json.dumps(obj, sort_keys=True)}")


def render_text(report: Dict[str, Any]) -> str:
    lines: List[str] = []
    _flatten(to_jsonable(report), "", lines)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# input helpers
# ---------------------------------------------------------------------------


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError("io", str(exc)) from None


def _read_json(path: str) -> Any:
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError("malformed", f"invalid JSON in {path}: {exc}") from None


def _resolve(vertices: Sequence, token: str):
    for v in vertices:
        if str(v) == token:
            return v
    try:
        val = json.loads(token)
    except json.JSONDecodeError:
        val = None
    if isinstance(val, list):
        val = tuple(val)
    if val is not None and val in vertices:
        return val
    raise InputError("unknown-point", f"no point named {token!r}")


def _split(s: Optional[str]) -> List[str]:
    return [t.strip() for t in s.split(",") if t.strip()] if s else []


def _number(s: str) -> float:
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise InputError("malformed", f"not a number: {s!r}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_delta(a) -> Dict[str, Any]:
    from hypersc.metric_core import hyperbolicity_delta, load_space

    S = load_space(_read_json(a.file), exact=a.exact)
    rep = hyperbolicity_delta(S, exact_cap=a.exact_cap, samples=a.samples, seed=a.seed)
    out = rep.as_dict()
    out["points"] = S.n
    return {"results": out, "certified": {"delta": rep.method == "exhaustive"}}


def cmd_gromov(a) -> Dict[str, Any]:
    from hypersc.metric_core import gromov_product, load_space

    S = load_space(_read_json(a.file), exact=a.exact)
    x, y, z = (_resolve(S.vertices, t) for t in (a.x, a.y, a.z))
    return {"results": {"product": gromov_product(S, x, y, z), "x": x, "y": y, "z": z}}


def cmd_qc(a) -> Dict[str, Any]:
    from hypersc.convexity import quasi_convexity_witness, strong_quasi_convexity_check
    from hypersc.metric_core import load_space

    S = load_space(_read_json(a.file), exact=a.exact)
    tokens = _split(a.subset)
    if len(tokens) == 1 and os.path.isfile(tokens[0]):
        doc = _read_json(tokens[0])
        if not isinstance(doc, dict) or not isinstance(doc.get("subset"), list):
            raise InputError("malformed", "subset file needs a 'subset' list")
        tokens = [json.dumps(v) if isinstance(v, list) else str(v) for v in doc["subset"]]
    Y = [_resolve(S.vertices, t) for t in tokens]
    if not Y:
        raise InputError("empty-subset", "--subset must name at least one point")
    alpha, wit = quasi_convexity_witness(S, Y)
    out: Dict[str, Any] = {"alpha": alpha, "witness": wit}
    if a.delta is not None:
        rep = strong_quasi_convexity_check(S, Y, a.delta)
        out["strong"] = rep
        if not rep.verdict:
            raise _Failed({"results": out})
    return {"results": out}


def cmd_cone(a) -> Dict[str, Any]:
    from hypersc.cone import BOLD_DELTA, ConeSpec, cone_delta_check, mu, mu_bounds_check, sample_cone_space
    from hypersc.metric_core import FiniteLengthSpace, load_space, triangle_defect

    rho = a.rho
    if not rho > 0:
        raise InputError("malformed", "--rho must be positive")
    top = math.pi * math.sinh(rho)
    grid = np.linspace(0, 1.1 * top, a.grid)
    bounds = mu_bounds_check(rho, grid)
    plateau = abs(mu(top, rho) - 2 * rho)
    if a.base:
        base = load_space(_read_json(a.base))
    else:
        m = a.circle
        if m < 3:
            raise InputError("malformed", "--circle needs at least 3 points")
        step = 2 * top / m
        names = list(range(m))
        base = FiniteLengthSpace(names, [(i, (i + 1) % m, step) for i in names])
    spec = ConeSpec(base, rho)
    S = sample_cone_space(spec, a.levels)
    defect, _ = triangle_defect(S.raw)
    ok_bounds = min(bounds["lower"], bounds["upper"], bounds["sine"]) >= -1e-9 and plateau <= 1e-9
    results = {
        "rho": rho,
        "mu_bounds": bounds,
        "mu_plateau_error": plateau,
        "cone": {"points": S.n, "triangle_defect": float(defect)},
        "bold_delta": BOLD_DELTA,
    }
    delta_ok = True
    if a.delta_check:
        dcheck = cone_delta_check(spec, a.levels, BOLD_DELTA)
        results["cone"]["delta"] = dcheck
        delta_ok = dcheck["holds"]
    if a.plot_dir:
        from hypersc.plotting import plot_mu

        results["figures"] = [plot_mu(rho, os.path.join(a.plot_dir, f"mu_rho{rho:g}.png"))]
    body = {"results": results}
    if not (ok_bounds and delta_ok and float(defect) <= 1e-9):
        raise _Failed(body)
    return body


def cmd_coneoff(a) -> Dict[str, Any]:
    from hypersc.coneoff import ConeOffSpace, greedy_subchain, sample_coneoff, sandwich_check
    from hypersc.metric_core import hyperbolicity_delta

    C = ConeOffSpace.from_document(_read_json(a.file))
    results: Dict[str, Any] = {"rho": C.rho, "attachments": len(C.attachments), "points": C.base.n}
    failed = False
    if a.query:
        u, v = (_resolve(C.base.vertices, t) for t in a.query)
        results["query"] = {"u": u, "v": v, "base": float(C.base.d(u, v)), "coned": C.dot_dist(u, v)}
    if a.sandwich_check or not (a.query or a.delta or a.chain):
        results["sandwich"] = sandwich_check(C)
        failed = not results["sandwich"]["holds"]
    if a.delta:
        levels = [_number(t) for t in _split(a.levels)] or 1
        S, _ = sample_coneoff(C, levels)
        results["sampled"] = {"points": S.n, "delta": hyperbolicity_delta(S, seed=a.seed).as_dict()}
    if a.chain:
        chain = [_resolve(C.base.vertices, t) for t in _split(a.chain)]
        g = greedy_subchain(C, chain, a.eta)
        results["greedy"] = g
        failed = failed or not (g.length_ok and g.count_ok)
    body = {"results": results}
    if failed:
        raise _Failed(body)
    return body


def _words(s: Sequence[str]) -> List[str]:
    from hypersc.group_actions import reduce

    return [reduce(w) for part in s for w in _split(part)]


def cmd_axes(a) -> Dict[str, Any]:
    from hypersc.group_actions import CayleyBall, axis, axis_distance_bound, is_hyperbolic, stable_length, translation_length

    model = CayleyBall(a.rank, a.radius, a.unit)
    rows = []
    for w in _words(a.words):
        row: Dict[str, Any] = {"word": w, "hyperbolic": is_hyperbolic(w)}
        row["translation_length"] = translation_length(w, model)
        row["stable_length"] = stable_length(w, model).value
        A = axis(w, model, a.delta)
        row["axis_size"] = len(A)
        row["axis_distance_slack"] = axis_distance_bound(w, model, a.delta)["worst_slack"] if row["hyperbolic"] else None
        rows.append(row)
    return {"results": {"rank": a.rank, "radius": a.radius, "points": model.n, "words": rows}}


def cmd_invariant_a(a) -> Dict[str, Any]:
    from hypersc.group_actions import CayleyBall, invariant_A, rinj

    model = CayleyBall(a.rank, a.radius, a.unit)
    words = _words(a.words)
    inv = invariant_A(model, words, delta=a.delta)
    return {"results": {"A": inv, "rinj": rinj(words, model), "points": model.n}}


def cmd_sc_check(a) -> Dict[str, Any]:
    from hypersc.small_cancellation import Presentation, check_small_cancellation, piece_axis_equivalence

    P = Presentation.parse(_read_bytes(a.file).decode("utf-8", errors="replace"))
    v = check_small_cancellation(P, a.lam, a.variant)
    results = {"presentation": {"generators": P.generators, "relators": P.relators}, "verdict": v}
    if a.axes:
        results["axis_equivalence"] = piece_axis_equivalence(P)
    body = {"results": results}
    if not v.holds:
        raise _Failed(body)
    return body


def cmd_graph_sc(a) -> Dict[str, Any]:
    from hypersc.small_cancellation import LabelledGraph, graph_girth, graph_max_piece

    G = LabelledGraph.from_document(_read_json(a.file))
    girth = graph_girth(G)
    piece = graph_max_piece(G, a.cap)
    results: Dict[str, Any] = {"girth": girth, "max_piece": piece, "cap": a.cap}
    certified = piece.status != "indeterminate"
    body = {"results": results, "certified": {"max_piece": certified}}
    if a.lam is not None:
        lam = Fraction(a.lam)
        holds = certified and piece.length <= lam * girth
        results["condition"] = {"lambda": lam, "holds": holds}
        if not holds:
            raise _Failed(body)
    return body


def cmd_rotation(a) -> Dict[str, Any]:
    from hypersc import rotation_family as rf

    if a.file:
        spec = rf.family_from_document(_read_json(a.file))
    elif a.model == "torus":
        spec = rf.torus_model()
    else:
        spec = rf.prism_model()
    checks = {"axioms", "fundamental", "stabilizer", "local", "small-product", "quotient-ball"} if a.check == "all" else set(_split(a.check))
    enum = rf.enumerate_k_ball(spec, a.budget_words, a.budget_displacement)
    results: Dict[str, Any] = {
        "points": spec.ambient.n,
        "pairs": len(spec.pairs),
        "sigma": spec.sigma,
        "K": {"elements": len(enum), "complete": enum.complete, "pruned": enum.pruned, "truncated": enum.truncated},
    }
    failed = False
    if "axioms" in checks:
        ax = rf.verify_rotation_axioms(spec)
        results["axioms"] = ax
        failed |= not all(v["holds"] for v in ax.values())
    if "fundamental" in checks:
        ft = rf.fundamental_theorem_check(spec, enum)
        big = rf.enumerate_k_ball(spec, 2 * a.budget_words, None if a.budget_displacement is None else 2 * a.budget_displacement)
        ft2 = rf.fundamental_theorem_check(spec, big, ft["delta"]["product"])
        ft["stable_under_doubling"] = (not ft["certified"]) or (ft2["certified"] and ft2["min_displacement"] == ft["min_displacement"] and ft2["scanned"] == ft["scanned"])
        results["fundamental"] = ft
        failed |= not (ft["holds"] and ft["stable_under_doubling"])
    if "stabilizer" in checks:
        st = [rf.stabilizer_check(spec, enum, k) for k in range(len(spec.pairs))]
        results["stabilizer"] = st
        failed |= not all(s["holds"] for s in st)
    if "local" in checks:
        x = spec.ambient.vertices[0]
        results["local"] = rf.local_isometry_check(spec, enum, x, spec.sigma / 40)
        failed |= results["local"]["holds"] is False
    if "small-product" in checks:
        results["small_product"] = rf.small_product_check(spec)
    if "quotient-ball" in checks:
        results["quotient_ball"] = [rf.quotient_ball_delta(spec, enum, k) for k in range(len(spec.pairs))]
    body = {"results": results, "certified": {"K": enum.complete}}
    if failed:
        raise _Failed(body)
    return body


def cmd_burnside(a) -> Dict[str, Any]:
    from hypersc.small_cancellation import critical_exponent_search

    p = critical_exponent_search(a.rho0, a.delta0, a.Delta0, a.bold_delta)
    warnings = [] if p.certified else ["n0 too large to materialise; only log10(n0) is reported"]
    return {"results": p, "certified": {"n0": p.certified}, "warnings": warnings}


def cmd_gm_bounds(a) -> Dict[str, Any]:
    from hypersc.small_cancellation import gm_embedding_bounds, gm_remark_factor

    b = gm_embedding_bounds(a.rho, a.T, a.k, a.l, a.diam)
    results: Dict[str, Any] = {"R": b.R, "coefficient": b.coefficient, "k": b.k, "l": b.l, "remark_factor": gm_remark_factor()}
    if a.distance is not None:
        results["lower_bound_at_distance"] = b.lower_bound(a.distance)
    return {"results": results}


def cmd_cartan_hadamard(a) -> Dict[str, Any]:
    from hypersc.metric_core import load_space, local_delta_profile

    S = load_space(_read_json(a.file), exact=a.exact)
    prof = local_delta_profile(S, a.sigma, seed=a.seed)
    results: Dict[str, Any] = {
        "sigma": prof.sigma,
        "local_delta": prof.local_delta,
        "global": prof.global_report.as_dict(),
        "prediction_holds": prof.prediction_holds,
        "hypothesis": prof.hypothesis,
        "balls": prof.balls,
        "notes": prof.notes,
    }
    if a.plot_dir:
        from hypersc.plotting import plot_local_profile

        path = os.path.join(a.plot_dir, "local_delta.png")
        results["figures"] = [plot_local_profile(prof.balls, prof.global_report.delta_four_point, prof.sigma, path)]
    body = {"results": results}
    if prof.hypothesis == "holds" and not prof.prediction_holds:
        raise _Failed(body)
    return body


COMMANDS = {
    "delta": cmd_delta,
    "gromov": cmd_gromov,
    "qc": cmd_qc,
    "cone": cmd_cone,
    "coneoff": cmd_coneoff,
    "axes": cmd_axes,
    "invariant-a": cmd_invariant_a,
    "sc-check": cmd_sc_check,
    "graph-sc": cmd_graph_sc,
    "rotation": cmd_rotation,
    "burnside-params": cmd_burnside,
    "gm-bounds": cmd_gm_bounds,
    "cartan-hadamard": cmd_cartan_hadamard,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["json", "text"], default="json")
    common.add_argument("--seed", type=int, default=0, help="seed for any sampling")
    p = _Parser(prog="hypersc", description="Hyperbolicity, cone-off and small cancellation tools.")
    p.add_argument("--version", action="version", version=f"hypersc {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    s = cmd("delta", "four-point and Gromov-product hyperbolicity constants")
    s.add_argument("file")
    s.add_argument("--exact", action="store_true", help="read decimal weights as exact rationals")
    s.add_argument("--exact-cap", type=int, default=256)
    s.add_argument("--sample", "--samples", dest="samples", type=int, default=200_000, help="quadruples sampled above --exact-cap points")

    s = cmd("gromov", "Gromov product <x, y>_z")
    s.add_argument("file")
    s.add_argument("x")
    s.add_argument("y")
    s.add_argument("z")
    s.add_argument("--exact", action="store_true")

    s = cmd("qc", "quasi-convexity constant of a subset")
    s.add_argument("file")
    s.add_argument("--subset", required=True, help="comma separated point names, or a JSON file with a 'subset' list")
    s.add_argument("--delta", default=None, help="also run the strong quasi-convexity check")
    s.add_argument("--exact", action="store_true")

    s = cmd("cone", "comparison map bounds and sampled cone checks")
    s.add_argument("--rho", type=_number, default=5.0)
    s.add_argument("--circle", type=int, default=24, help="points on the base circle")
    s.add_argument("--base", default=None, help="base space file instead of a circle")
    s.add_argument("--levels", type=int, default=6)
    s.add_argument("--grid", type=int, default=10_000)
    s.add_argument("--delta-check", action="store_true", help="four-point delta of the sampled cone against 2 BOLD_DELTA + 0.05")
    s.add_argument("--plot-dir", default=None)

    s = cmd("coneoff", "cone-off sandwich, sampled delta and greedy subchains")
    s.add_argument("file")
    s.add_argument("--query", nargs=2, metavar=("U", "V"), default=None, help="cone-off distance between two base points")
    s.add_argument("--sandwich-check", action="store_true", help="mu(d_X) <= coned distance <= d_X on all pairs")
    s.add_argument("--delta", action="store_true", help="four-point delta of a sampled cone-off")
    s.add_argument("--levels", default=None, help="comma separated radii of sampled cone points")
    s.add_argument("--chain", default=None, help="comma separated base points")
    s.add_argument("--eta", type=_number, default=0.5)

    for name, help_ in (("axes", "translation lengths and axes of free group words"), ("invariant-a", "invariant A and injectivity radius")):
        s = cmd(name, help_)
        s.add_argument("--rank", type=int, default=2)
        s.add_argument("--radius", type=int, default=4)
        s.add_argument("--word", "--words", dest="words", action="append", required=True, help="word (repeatable, or comma separated)")
        s.add_argument("--delta", default="0")
        s.add_argument("--unit", default="1", help="edge length of the Cayley tree")

    s = cmd("sc-check", "C'(lambda) or C''(lambda) for a presentation")
    s.add_argument("file")
    s.add_argument("--lambda", dest="lam", default="1/6")
    s.add_argument("--variant", choices=["cprime", "cdouble"], default="cprime")
    s.add_argument("--axes", action="store_true", help="also compare pieces with axis overlaps")

    s = cmd("graph-sc", "girth and pieces of a labelled graph")
    s.add_argument("file")
    s.add_argument("--cap", type=int, default=64)
    s.add_argument("--lambda", dest="lam", default=None)

    s = cmd("rotation", "rotation family checks on a finite cone-off model")
    s.add_argument("file", nargs="?")
    s.add_argument("--model", choices=["prism", "torus"], default="prism")
    s.add_argument("--budget-words", type=int, default=8)
    s.add_argument("--budget-displacement", type=_number, default=None)
    s.add_argument("--check", default="all")

    s = cmd("burnside-params", "critical exponent of the periodic quotient induction")
    s.add_argument("--rho0", type=_number, required=True)
    s.add_argument("--delta0", type=_number, required=True)
    s.add_argument("--Delta0", type=_number, required=True)
    s.add_argument("--bold-delta", type=_number, default=None)

    s = cmd("gm-bounds", "embedding radius and distortion of graphical small cancellation")
    s.add_argument("--rho", type=_number, required=True)
    s.add_argument("--T", type=_number, required=True)
    s.add_argument("--k", type=_number, default=1.0)
    s.add_argument("--l", type=_number, default=0.0)
    s.add_argument("--diam", type=_number, default=1.0)
    s.add_argument("--distance", type=_number, default=None)

    s = cmd("cartan-hadamard", "local delta at scale sigma against the global constant")
    s.add_argument("file")
    s.add_argument("--sigma", required=True)
    s.add_argument("--exact", action="store_true")
    s.add_argument("--plot-dir", default=None)
    return p


def _digest(a: argparse.Namespace) -> str:
    h = hashlib.sha256()
    args = {k: v for k, v in sorted(vars(a).items()) if k != "format"}
    h.update(json.dumps(to_jsonable(args), sort_keys=True).encode())
    for key in ("file", "base"):
        path = getattr(a, key, None)
        if path:
            h.update(_read_bytes(path))
    return h.hexdigest()


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    fmt = "text" if "--format" in argv and argv[argv.index("--format") + 1 : argv.index("--format") + 2] == ["text"] else "json"
    report: Dict[str, Any] = {"schema": SCHEMA, "version": __version__}
    code = 0
    try:
        a = build_parser().parse_args(argv)
        if a.command is None:
            raise InputError("usage", "missing command")
        fmt = a.format
        report["command"] = a.command
        report["inputs"] = {"args": {k: v for k, v in vars(a).items() if k not in ("format", "command")}, "digest": _digest(a)}
        try:
            body = COMMANDS[a.command](a)
            report["status"] = "ok"
        except _Failed as f:
            body = f.args[0]
            report["status"] = "check-failed"
            code = 1
        report["results"] = body.get("results", {})
        report["warnings"] = body.get("warnings", [])
        report["certified"] = body.get("certified", {})
    except InputError as exc:
        report["status"] = "input-error"
        report["error"] = {"code": exc.code, "message": str(exc)}
        print(f"hypersc: {exc.code}: {exc}", file=sys.stderr)
        code = 2
    text = render_text(report) if fmt == "text" else dumps(report)
    stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
