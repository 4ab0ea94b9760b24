"""Rotation families on finite cone-off models.

A family is a list of (H, v) pairs on a finite metric space: H a finite
group of isometries fixing the apex v.  K, the group generated by all the
H, is explored as permutations of the points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from hypersc.coneoff import ConeOffSpace, sample_coneoff
from hypersc.group_actions import FiniteIsometry, group_closure
from hypersc.metric_core import TOL, FiniteLengthSpace, InputError, four_point_gap, hyperbolicity_delta

DEFAULT_LEVELS = (0.5, 1.5, 2.5)


@dataclass
class RotationPair:
    subgroup: List[FiniteIsometry]
    apex: Hashable


@dataclass
class RotationFamilySpec:
    ambient: FiniteLengthSpace
    pairs: List[RotationPair]
    sigma: float
    conjugators: List[FiniteIsometry] = field(default_factory=list)
    coneoff: Optional[ConeOffSpace] = None

    def __post_init__(self):
        self.sigma = float(self.sigma)
        if not self.sigma > 0:
            raise InputError("malformed", "sigma must be positive")
        for k, p in enumerate(self.pairs):
            self.ambient.index(p.apex)
            gens = [h if h.space is self.ambient else FiniteIsometry(self.ambient, h.perm) for h in p.subgroup]
            p.subgroup = group_closure(gens, self.ambient)
            for h in p.subgroup:
                if h(p.apex) != p.apex:
                    raise InputError("malformed", f"subgroup {k} does not fix its apex {p.apex!r}")

    @property
    def D(self) -> np.ndarray:
        return np.asarray(self.ambient.raw, dtype=float) / (self.ambient.denom or 1)

    def apices(self) -> List[int]:
        return sorted({self.ambient.index(p.apex) for p in self.pairs})


# ---------------------------------------------------------------------------
# building families from cone-off models
# ---------------------------------------------------------------------------


def lift_base_isometry(C: ConeOffSpace, sampled: FiniteLengthSpace, base_map: Dict[Hashable, Hashable]) -> FiniteIsometry:
    """Extend a base isometry permuting the attached subsets to the sampled cone-off."""
    subsets = {frozenset(a.subset): i for i, a in enumerate(C.attachments)}
    cone_image = {}
    for i, a in enumerate(C.attachments):
        img = frozenset(base_map.get(y, y) for y in a.subset)
        if img not in subsets:
            raise InputError("not-an-isometry", f"base map does not permute the attached subsets (attachment {i})")
        cone_image[i] = subsets[img]
    mapping = {}
    for name in sampled.vertices:
        kind = name[0]
        if kind == "x":
            mapping[name] = ("x", base_map.get(name[1], name[1]))
        elif kind == "v":
            mapping[name] = ("v", cone_image[name[1]])
        else:
            _, i, y, k = name
            mapping[name] = ("c", cone_image[i], base_map.get(y, y), k)
    return FiniteIsometry(sampled, mapping)


def family_from_coneoff(C: ConeOffSpace, pairs: Sequence[Tuple[int, Sequence[Dict]]], sigma, conjugators: Sequence[Dict] = (),
                        radial_levels=DEFAULT_LEVELS) -> RotationFamilySpec:
    """Pairs are (attachment index, generating base maps); apices are the cone points."""
    S, _ = sample_coneoff(C, list(radial_levels))
    out = []
    for i, gens in pairs:
        if not 0 <= i < len(C.attachments):
            raise InputError("unknown-point", f"no attachment {i}")
        out.append(RotationPair([lift_base_isometry(C, S, g) for g in gens], ("v", i)))
    conj = [lift_base_isometry(C, S, g) for g in conjugators]
    return RotationFamilySpec(S, out, sigma, conj, C)


def _cycle_edges(names, w):
    m = len(names)
    return [(names[i], names[(i + 1) % m], w) for i in range(m)]


def prism_model(m: int = 8, edge=8, rung=2, rho=3.0, radial_levels=DEFAULT_LEVELS) -> RotationFamilySpec:
    """Two cones over the two cycles of a prism, both rotated by the half-turn.

    The half-turn fixes both apices and moves each cycle by half its
    circumference; sigma = 2 rho.
    """
    if m % 2:
        raise InputError("malformed", "prism needs an even cycle length")
    outer = [f"o{i}" for i in range(m)]
    inner = [f"i{i}" for i in range(m)]
    edges = _cycle_edges(outer, edge) + _cycle_edges(inner, edge) + [(outer[i], inner[i], rung) for i in range(m)]
    base = FiniteLengthSpace(outer + inner, edges)
    C = ConeOffSpace(base, rho, [outer, inner])
    half = {f"{s}{i}": f"{s}{(i + m // 2) % m}" for s in "oi" for i in range(m)}
    step = {f"{s}{i}": f"{s}{(i + 1) % m}" for s in "oi" for i in range(m)}
    swap = {f"o{i}": f"i{i}" for i in range(m)} | {f"i{i}": f"o{i}" for i in range(m)}
    return family_from_coneoff(C, [(0, [half]), (1, [half])], 2 * rho, [step, swap], radial_levels)


def torus_model(n: int = 4, edge=16, rho=3.0, radial_levels=DEFAULT_LEVELS) -> RotationFamilySpec:
    """Cones over every row and column of the n x n torus grid.

    Row cones are rotated by the shift (n/2, 0), column cones by (0, n/2);
    the product of the two shifts lies in no rotation group.
    """
    if n % 2:
        raise InputError("malformed", "torus needs an even side")
    V = [(i, j) for j in range(n) for i in range(n)]
    edges = [((i, j), ((i + 1) % n, j), edge) for i, j in V] + [((i, j), (i, (j + 1) % n), edge) for i, j in V]
    base = FiniteLengthSpace(V, edges)
    rows = [[(i, j) for i in range(n)] for j in range(n)]
    cols = [[(i, j) for j in range(n)] for i in range(n)]
    C = ConeOffSpace(base, rho, rows + cols)
    shift = lambda a, b: {(i, j): ((i + a) % n, (j + b) % n) for i, j in V}
    h1, h2 = shift(n // 2, 0), shift(0, n // 2)
    pairs = [(k, [h1]) for k in range(n)] + [(n + k, [h2]) for k in range(n)]
    transpose = {(i, j): (j, i) for i, j in V}
    return family_from_coneoff(C, pairs, 2 * rho, [shift(1, 0), shift(0, 1), transpose], radial_levels)


def family_from_document(doc: Dict[str, Any]) -> RotationFamilySpec:
    """{"space": <cone-off>, "sigma": s, "pairs": [{"apex": i, "subgroup": [perm, ...]}],
    "conjugators": [perm, ...], "radial_levels": [...]}; a perm lists the images of
    the base vertices in their declared order."""
    if not isinstance(doc, dict) or not {"space", "sigma", "pairs"} <= set(doc):
        raise InputError("malformed", "family needs 'space', 'sigma' and 'pairs'")
    C = ConeOffSpace.from_document(doc["space"])
    V = C.base.vertices
    fix = lambda v: tuple(v) if isinstance(v, list) else v

    def as_map(perm):
        if not isinstance(perm, list) or len(perm) != len(V):
            raise InputError("malformed", "a permutation lists one image per base vertex")
        return {a: fix(b) for a, b in zip(V, perm)}

    pairs = []
    for p in doc["pairs"]:
        if not isinstance(p, dict) or "apex" not in p:
            raise InputError("malformed", "each pair needs an 'apex'")
        pairs.append((int(p["apex"]), [as_map(g) for g in p.get("subgroup", [])]))
    conj = [as_map(g) for g in doc.get("conjugators", [])]
    levels = doc.get("radial_levels", list(DEFAULT_LEVELS))
    return family_from_coneoff(C, pairs, float(doc["sigma"]), conj, levels)


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------


def _same_pair(a: RotationPair, b: RotationPair) -> bool:
    return a.apex == b.apex and {h.key() for h in a.subgroup} == {h.key() for h in b.subgroup}


def verify_rotation_axioms(spec: RotationFamilySpec) -> Dict[str, Dict[str, Any]]:
    """R1 on B(v, sigma/10), R2 over all pairs, R3 on the conjugators."""
    S, D = spec.ambient, spec.D
    worst, wit1 = 0.0, None
    for k, p in enumerate(spec.pairs):
        v = S.index(p.apex)
        near = np.nonzero(D[v] <= spec.sigma / 10 + TOL)[0]
        for h in p.subgroup:
            if h.is_identity():
                continue
            err = np.abs(D[near, h.perm[near]] - 2 * D[v, near])
            if err.size and err.max() > worst:
                worst = float(err.max())
                wit1 = (k, S.vertices[int(near[int(np.argmax(err))])])
    r1 = {"holds": worst <= TOL, "worst_error": worst, "witness": wit1}
    best, wit2 = math.inf, None
    for a in range(len(spec.pairs)):
        for b in range(a + 1, len(spec.pairs)):
            d = D[S.index(spec.pairs[a].apex), S.index(spec.pairs[b].apex)]
            if d < best:
                best, wit2 = float(d), (a, b)
    r2 = {"holds": best >= spec.sigma - TOL, "min_apex_distance": best, "witness": wit2 if best < spec.sigma - TOL else None}
    wit3 = None
    for ci, c in enumerate(spec.conjugators):
        cinv = c.inverse()
        for k, p in enumerate(spec.pairs):
            img = RotationPair([c * h * cinv for h in p.subgroup], c(p.apex))
            if not any(_same_pair(img, q) for q in spec.pairs):
                wit3 = (ci, k)
                break
        if wit3:
            break
    r3 = {"holds": wit3 is None, "witness": wit3, "generators": len(spec.conjugators)}
    return {"R1": r1, "R2": r2, "R3": r3}


# ---------------------------------------------------------------------------
# the group K
# ---------------------------------------------------------------------------


@dataclass
class GroupBallEnumeration:
    elements: List[FiniteIsometry]
    word_length: List[int]
    min_displacement: List[float]
    word_budget: int
    displacement_budget: Optional[float]
    pruned: int
    truncated: bool

    @property
    def complete(self) -> bool:
        """True when the enumeration reached a closure fixpoint: it is all of K."""
        return not self.truncated and self.pruned == 0

    def __len__(self) -> int:
        return len(self.elements)


def enumerate_k_ball(spec: RotationFamilySpec, word_budget: int = 8, displacement_budget: Optional[float] = None) -> GroupBallEnumeration:
    """Breadth-first products of rotation elements, deduplicated by permutation.

    An element is not expanded when its minimal displacement minus the most
    the remaining letters can lower it still exceeds the displacement
    budget.  Each letter h changes a displacement by at most max_x d(hx, x).
    """
    S, D = spec.ambient, spec.D
    gens: Dict[bytes, FiniteIsometry] = {}
    for p in spec.pairs:
        for h in p.subgroup:
            if not h.is_identity():
                gens.setdefault(h.key(), h)
    letters = list(gens.values())
    idx = np.arange(S.n)
    gain = max((float(D[idx, h.perm].max()) for h in letters), default=0.0)
    e = FiniteIsometry.identity(S)
    elements, lengths, disp = [e], [0], [0.0]
    seen = {e.key()}
    frontier = [e]
    pruned = 0
    length = 0
    truncated = False
    while frontier:
        if length >= word_budget:
            truncated = True
            break
        nxt = []
        for g in frontier:
            md = float(D[idx, g.perm].min())
            if displacement_budget is not None and md - (word_budget - length) * gain > displacement_budget:
                pruned += 1
                continue
            for h in letters:
                gh = h * g
                if gh.key() in seen:
                    continue
                seen.add(gh.key())
                elements.append(gh)
                lengths.append(length + 1)
                disp.append(float(D[idx, gh.perm].min()))
                nxt.append(gh)
        frontier = nxt
        length += 1
    return GroupBallEnumeration(elements, lengths, disp, word_budget, displacement_budget, pruned, truncated)


@dataclass
class QuotientValue:
    value: float
    certified: bool
    element: int


def quotient_distance(spec: RotationFamilySpec, enum: GroupBallEnumeration, x, x2) -> QuotientValue:
    """min over enumerated g of d(gx, x2); certified only when the enumeration is all of K."""
    S, D = spec.ambient, spec.D
    i, j = S.index(x), S.index(x2)
    vals = [D[g.perm[i], j] for g in enum.elements]
    k = int(np.argmin(vals))
    return QuotientValue(float(vals[k]), enum.complete, k)


def quotient_matrix(spec: RotationFamilySpec, enum: GroupBallEnumeration, points: Sequence[int]) -> np.ndarray:
    D = spec.D
    pts = np.asarray(points, dtype=np.intp)
    out = np.full((len(pts), len(pts)), np.inf)
    for g in enum.elements:
        out = np.minimum(out, D[np.ix_(g.perm[pts], pts)])
    return np.minimum(out, out.T)


def _rotation_keys(spec: RotationFamilySpec) -> set:
    return {h.key() for p in spec.pairs for h in p.subgroup}


def fundamental_theorem_check(spec: RotationFamilySpec, enum: GroupBallEnumeration, delta=None) -> Dict[str, Any]:
    """Min displacement of enumerated g in K outside every rotation group versus
    sigma - 166 delta, and d(gx, x) >= min(2l, sigma/10) for nontrivial g at points
    l away from all apices."""
    S, D = spec.ambient, spec.D
    if delta is None:
        rep = hyperbolicity_delta(S)
        deltas = {"four_point": float(rep.delta_four_point), "product": float(rep.delta_product)}
    else:
        deltas = {"four_point": float(delta), "product": float(delta)}
    rot = _rotation_keys(spec)
    idx = np.arange(S.n)
    outside = [g for g in enum.elements if g.key() not in rot]
    mins = [float(D[idx, g.perm].min()) for g in outside]
    m = min(mins) if mins else math.inf
    verdicts = {k: {"bound": spec.sigma - 166 * d, "holds": m >= spec.sigma - 166 * d - TOL} for k, d in deltas.items()}
    ap = spec.apices()
    l = D[:, ap].min(axis=1) if ap else np.full(S.n, np.inf)
    need = np.minimum(2 * l, spec.sigma / 10)
    worst, wit = math.inf, None
    for g in enum.elements:
        if g.is_identity():
            continue
        slack = D[idx, g.perm] - need
        k = int(np.argmin(slack))
        if slack[k] < worst:
            worst, wit = float(slack[k]), S.vertices[k]
    return {
        "scanned": len(outside),
        "min_displacement": m,
        "delta": deltas,
        "sigma": spec.sigma,
        "verdict": verdicts,
        "holds": verdicts["product"]["holds"],
        "vacuous": not outside,
        "certified": enum.complete,
        "free_outside_apices": {"worst_slack": worst, "holds": worst >= -TOL, "witness": wit},
    }


def stabilizer_check(spec: RotationFamilySpec, enum: GroupBallEnumeration, pair: int = 0, subgroup: Optional[Sequence[FiniteIsometry]] = None) -> Dict[str, Any]:
    """stab(v) & K = H on the enumeration, and d(gx, x) > 3 sigma/5 for
    x in B(v, sigma/5) and enumerated g outside H.  ``subgroup`` overrides H."""
    S, D = spec.ambient, spec.D
    p = spec.pairs[pair]
    H = {h.key() for h in (subgroup if subgroup is not None else p.subgroup)}
    v = S.index(p.apex)
    extra = [g for g in enum.elements if g.perm[v] == v and g.key() not in H]
    near = np.nonzero(D[v] <= spec.sigma / 5 + TOL)[0]
    worst, wit = math.inf, None
    for g in enum.elements:
        if g.key() in H:
            continue
        vals = D[near, g.perm[near]]
        k = int(np.argmin(vals))
        if vals[k] < worst:
            worst, wit = float(vals[k]), S.vertices[int(near[k])]
    quant = worst > 3 * spec.sigma / 5
    return {
        "stabilizer_in_H": not extra,
        "extra_elements": len(extra),
        "extra_witness": None if not extra else {str(a): str(b) for a, b in extra[0].as_dict().items() if a != b},
        "min_displacement_near_apex": worst,
        "threshold": 3 * spec.sigma / 5,
        "quantitative": quant,
        "witness": wit if not quant else None,
        "holds": bool(not extra and quant),
        "certified": enum.complete,
    }


def local_isometry_check(spec: RotationFamilySpec, enum: GroupBallEnumeration, x, r) -> Dict[str, Any]:
    """For r <= sigma/40 and x at least 2r from every apex, the quotient map is
    an isometry on B(x, r)."""
    S, D = spec.ambient, spec.D
    r = float(r)
    i = S.index(x)
    ap = spec.apices()
    far = float(D[i, ap].min()) if ap else math.inf
    problems = []
    if r > spec.sigma / 40 + TOL:
        problems.append("radius above sigma/40")
    if far < 2 * r - TOL:
        problems.append("center within 2r of an apex")
    if problems:
        return {"hypothesis": False, "problems": problems, "holds": None}
    ball = np.nonzero(D[i] <= r + TOL)[0]
    Q = quotient_matrix(spec, enum, ball)
    err = float(np.max(np.abs(Q - D[np.ix_(ball, ball)]))) if len(ball) else 0.0
    return {"hypothesis": True, "problems": [], "points": int(len(ball)), "max_error": err, "holds": err <= TOL, "certified": enum.complete}


def small_product_check(spec: RotationFamilySpec, delta=None) -> Dict[str, Any]:
    """<x, hx>_v <= 2 delta for every pair, h in H minus 1 and every point x."""
    S, D = spec.ambient, spec.D
    if delta is None:
        delta = float(hyperbolicity_delta(S).delta_product)
    idx = np.arange(S.n)
    worst, wit = -math.inf, None
    for k, p in enumerate(spec.pairs):
        v = S.index(p.apex)
        for h in p.subgroup:
            if h.is_identity():
                continue
            prod = (D[v, idx] + D[v, h.perm] - D[idx, h.perm]) / 2
            j = int(np.argmax(prod))
            if prod[j] > worst:
                worst, wit = float(prod[j]), (k, S.vertices[j])
    return {"delta": float(delta), "worst_product": worst, "bound": 2 * float(delta), "holds": worst <= 2 * float(delta) + TOL, "witness": wit}


def quotient_ball_delta(spec: RotationFamilySpec, enum: GroupBallEnumeration, pair: int = 0, delta=None) -> Dict[str, Any]:
    """Four-point delta of the quotient metric on B(v, sigma/5), against 2 delta."""
    S, D = spec.ambient, spec.D
    if delta is None:
        delta = float(hyperbolicity_delta(S).delta_product)
    v = S.index(spec.pairs[pair].apex)
    ball = [int(i) for i in np.nonzero(D[v] <= spec.sigma / 5 + TOL)[0]]
    Q = quotient_matrix(spec, enum, ball)
    # one representative per orbit
    keep = [a for a in range(len(ball)) if not any(Q[a, b] <= TOL for b in range(a))]
    Qk = Q[np.ix_(keep, keep)]
    gap, _ = four_point_gap(Qk)
    qd = float(gap) / 2
    return {"points": len(keep), "quotient_delta": qd, "bound": 2 * float(delta), "holds": qd <= 2 * float(delta) + TOL, "certified": enum.complete}
