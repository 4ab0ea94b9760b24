"""Cone-off spaces: cones of radius rho glued to a base space along subsets.

The distance on base vertices is the infimum of chain lengths.  Interior
chain points may be taken in the base, so it equals the shortest-path
metric of the complete graph on base vertices weighted by

    w(u, v) = min(d_X(u, v), min over cones containing u, v of mu(d_Y(u, v))),

where d_Y is the path metric of the subgraph induced on the attached subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from hypersc.cone import ConePoint, ConeSpec, cone_distance, cone_formula, mu, mu_coefficient
from hypersc.convexity import EMPTY, diam_intersection
from hypersc.metric_core import TOL, FiniteLengthSpace, InputError, Length, hyperbolicity_delta, load_space

INFINITE = math.inf


@dataclass(frozen=True)
class AttachedPoint:
    """The point (y, r) of the cone glued along attachment ``cone``; y None is the apex."""

    cone: int
    base_point: Optional[Hashable]
    r: float


@dataclass
class Attachment:
    subset: Tuple[Hashable, ...]
    idx: np.ndarray
    induced: FiniteLengthSpace
    cone: ConeSpec


class ConeOffSpace:
    """A base space with cones of a common radius attached along subsets."""

    def __init__(self, base: FiniteLengthSpace, rho, subsets: Iterable[Iterable[Hashable]] = ()):
        self.base = base
        self.rho = float(rho)
        if not self.rho > 0:
            raise InputError("malformed", "cone radius must be positive")
        self.attachments: List[Attachment] = []
        DX = np.asarray(base.raw, dtype=float) / (base.denom or 1)
        self.base_dist = DX
        W = DX.copy()
        for k, Y in enumerate(subsets):
            Y = list(dict.fromkeys(Y))
            if not Y:
                raise InputError("empty-subset", f"attachment {k} is empty")
            idx = base.indices(Y)
            order = np.argsort(idx)
            idx = idx[order]
            Y = [Y[i] for i in order]
            try:
                induced = base.induced_subspace(Y)
            except InputError as exc:
                if exc.code == "disconnected":
                    raise InputError("attachment-disconnected", f"attachment {k} is not path-connected") from None
                raise
            DY = np.asarray(induced.raw, dtype=float) / (induced.denom or 1)
            boundary = mu(DY, self.rho)
            # the family inequality mu(d_X) <= d_Z on the boundary
            if np.any(mu(DX[np.ix_(idx, idx)], self.rho) > boundary + TOL):
                raise InputError("attachment-invalid", f"attachment {k} violates mu(d_X) <= d_Z")
            W[np.ix_(idx, idx)] = np.minimum(W[np.ix_(idx, idx)], boundary)
            self.attachments.append(Attachment(tuple(Y), idx, induced, ConeSpec(induced, self.rho)))
        self.weights = W
        self.dot = floyd_warshall(W)
        self.dot.setflags(write=False)

    @classmethod
    def from_document(cls, doc: Dict[str, Any]) -> "ConeOffSpace":
        if not isinstance(doc, dict) or "base" not in doc or "rho" not in doc:
            raise InputError("malformed", "cone-off document needs 'base' and 'rho'")
        base = load_space(doc["base"])
        subsets = []
        for a in doc.get("attachments", []):
            if not isinstance(a, dict) or "subset" not in a:
                raise InputError("malformed", "each attachment needs a 'subset'")
            subsets.append([tuple(v) if isinstance(v, list) else v for v in a["subset"]])
        try:
            rho = float(doc["rho"])
        except (TypeError, ValueError):
            raise InputError("malformed", "rho must be a number") from None
        return cls(base, rho, subsets)

    @property
    def a(self) -> float:
        return mu_coefficient(self.rho)

    def dot_dist(self, u, v) -> float:
        return float(self.dot[self.base.index(u), self.base.index(v)])

    # -- points -------------------------------------------------------------

    def normalize(self, p):
        """Boundary cone points become base vertices; others are validated."""
        if isinstance(p, AttachedPoint):
            if not 0 <= p.cone < len(self.attachments):
                raise InputError("unknown-point", f"no attachment {p.cone}")
            att = self.attachments[p.cone]
            if not -TOL <= p.r <= self.rho + TOL:
                raise InputError("malformed", f"radius {p.r} outside [0, {self.rho}]")
            if p.base_point is None or p.r <= 0:
                return AttachedPoint(p.cone, None, 0.0)
            att.induced.index(p.base_point)
            if p.r >= self.rho - TOL:
                return p.base_point
            return p
        self.base.index(p)
        return p

    def _cone_point(self, p: AttachedPoint) -> ConePoint:
        return ConePoint(p.base_point, p.r)

    def exits(self, p) -> np.ndarray:
        """Distance from p to each base vertex without passing through the base."""
        p = self.normalize(p)
        out = np.full(self.base.n, INFINITE)
        if not isinstance(p, AttachedPoint):
            out[self.base.index(p)] = 0.0
            return out
        att = self.attachments[p.cone]
        if p.base_point is None:
            out[att.idx] = self.rho
            return out
        j = att.induced.index(p.base_point)
        dY = np.asarray(att.induced.raw[j], dtype=float) / (att.induced.denom or 1)
        out[att.idx] = cone_formula(p.r, self.rho, dY, att.cone.sinh_rho)
        return out


def floyd_warshall(W: np.ndarray) -> np.ndarray:
    D = np.array(W, dtype=float)
    for k in range(D.shape[0]):
        np.minimum(D, D[:, k][:, None] + D[k, :][None, :], out=D)
    return D


def d_sc(space: ConeOffSpace, p, q) -> float:
    """Distance in the disjoint union of the base and the cones, with
    boundary points identified to their base vertex (min over representatives).
    Points in different components get ``math.inf``."""
    p, q = space.normalize(p), space.normalize(q)
    pa, qa = isinstance(p, AttachedPoint), isinstance(q, AttachedPoint)
    if not pa and not qa:
        return float(space.weights[space.base.index(p), space.base.index(q)])
    if pa and qa:
        if p.cone != q.cone:
            return INFINITE
        return cone_distance(space.attachments[p.cone].cone, space._cone_point(p), space._cone_point(q))
    if qa:
        p, q = q, p
    att = space.attachments[p.cone]
    if q not in att.subset:
        return INFINITE
    return cone_distance(att.cone, space._cone_point(p), ConePoint(q, space.rho))


def chain_length(space: ConeOffSpace, chain: Sequence) -> float:
    return float(sum(d_sc(space, a, b) for a, b in zip(chain, chain[1:])))


def coneoff_distance(space: ConeOffSpace, p, q) -> float:
    """Cone-off distance between any two points (base, cone interior or apex)."""
    p, q = space.normalize(p), space.normalize(q)
    if p == q:
        return 0.0
    ep, eq = space.exits(p), space.exits(q)
    reach = np.min(ep[:, None] + space.dot, axis=0)
    best = float(np.min(reach + eq))
    if isinstance(p, AttachedPoint) and isinstance(q, AttachedPoint) and p.cone == q.cone:
        best = min(best, d_sc(space, p, q))
    return best


def sandwich_check(space: ConeOffSpace) -> Dict[str, Any]:
    """Worst slack of mu(d_X) <= dot <= d_X over all base pairs."""
    DX = space.base_dist
    lower = float(np.min(space.dot - mu(DX, space.rho))) if DX.size else 0.0
    upper = float(np.min(DX - space.dot)) if DX.size else 0.0
    return {"lower_slack": lower, "upper_slack": upper, "holds": bool(lower >= -TOL and upper >= -TOL)}


def sample_coneoff(space: ConeOffSpace, radial_levels=1) -> Tuple[FiniteLengthSpace, List[Any]]:
    """Base vertices, apices and interior cone points as a finite metric space.

    Returns the space and the underlying points; ids are ``("x", v)``,
    ``("v", i)`` and ``("c", i, y, k)``.
    """
    if isinstance(radial_levels, int):
        radii = [space.rho * k / radial_levels for k in range(1, radial_levels)]
    else:
        radii = sorted(float(r) for r in radial_levels if 0 < float(r) < space.rho)
    names: List[Hashable] = []
    points: List[Any] = []
    for v in space.base.vertices:
        names.append(("x", v))
        points.append(v)
    for i, att in enumerate(space.attachments):
        names.append(("v", i))
        points.append(AttachedPoint(i, None, 0.0))
        for y in att.subset:
            for k, r in enumerate(radii):
                names.append(("c", i, y, k))
                points.append(AttachedPoint(i, y, r))
    E = np.stack([space.exits(p) for p in points])  # [point, base]
    R = np.min(E[:, :, None] + space.dot[None, :, :], axis=1)  # reach
    D = np.min(R[:, None, :] + E[None, :, :], axis=2)
    cone_of = [p.cone if isinstance(p, AttachedPoint) else -1 for p in points]
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if cone_of[i] >= 0 and cone_of[i] == cone_of[j]:
                D[i, j] = D[j, i] = min(D[i, j], d_sc(space, points[i], points[j]))
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return FiniteLengthSpace.from_matrix(names, D, exact=False), points


# ---------------------------------------------------------------------------
# greedy subchains
# ---------------------------------------------------------------------------


@dataclass
class GreedyReport:
    indices: List[int]
    subchain: List[Hashable]
    length: float
    sub_length: float
    n: int
    length_bound: float
    count_bound: float
    length_ok: bool
    count_ok: bool


def greedy_subchain(space: ConeOffSpace, chain: Sequence[Hashable], eta: float, a: Optional[float] = None) -> GreedyReport:
    """Thin a chain of base points at scale eta and check the two bounds.

    From the current index, step to the next point when it is more than
    2 eta away (base metric); otherwise jump to the last point within 2 eta.
    Bounds: l(C_eta) <= l(C) + 8 a n eta^3 and n <= 4 (l(C)/eta + 1).
    """
    if a is None:
        a = space.a
    eta = float(eta)
    if not 0 < eta < math.sqrt(1 / (10 * a)):
        raise InputError("eta-out-of-range", f"need 0 < eta < sqrt(1/(10a)) = {math.sqrt(1 / (10 * a))}")
    if not chain:
        raise InputError("malformed", "empty chain")
    idx = space.base.indices(chain)
    DX = space.base_dist
    m = len(chain)
    picked = [0]
    j = 0
    while j < m - 1:
        if DX[idx[j + 1], idx[j]] > 2 * eta:
            j = j + 1
        else:
            within = np.nonzero(DX[idx[j + 1:], idx[j]] <= 2 * eta)[0]
            j = j + 1 + int(within[-1])
        picked.append(j)
    full = chain_length(space, list(chain))
    sub = [chain[i] for i in picked]
    sub_len = chain_length(space, sub)
    n = len(picked)
    lb = full + 8 * a * n * eta**3
    cb = 4 * (full / eta + 1)
    return GreedyReport(picked, sub, full, sub_len, n, lb, cb, sub_len <= lb + TOL, n <= cb)


# ---------------------------------------------------------------------------
# families of (subgroup, subset) pairs
# ---------------------------------------------------------------------------


@dataclass
class FamilyMember:
    subgroup: Hashable
    subset: frozenset
    elements: Tuple[Any, ...] = ()


QFamily = List[FamilyMember]


@dataclass
class FamilyDelta:
    value: Length
    witness: Optional[Tuple[int, int]]
    pairs_met: int
    thickening: Length


def delta_of_family(space: FiniteLengthSpace, Q: Sequence[FamilyMember], delta, variant: str = "5delta") -> FamilyDelta:
    """sup over distinct pairs of diam(Y1^{+A} & Y2^{+A}), A = 5 delta (or 12 delta).

    Pairs that do not meet are skipped; no meeting pair gives 0.
    """
    delta = space.coerce(delta)
    if variant not in ("5delta", "12delta"):
        raise InputError("malformed", f"unknown variant {variant!r}")
    A = (5 if variant == "5delta" else 12) * delta
    best = space.to_length(0)
    wit = None
    met = 0
    for i in range(len(Q)):
        for j in range(i + 1, len(Q)):
            if (Q[i].subgroup, Q[i].subset) == (Q[j].subgroup, Q[j].subset):
                continue
            dia = diam_intersection(space, Q[i].subset, A, Q[j].subset, A)
            if dia is EMPTY:
                continue
            met += 1
            if wit is None or dia > best:
                best, wit = dia, (i, j)
    return FamilyDelta(best, wit, met, A)


def t_of_family(Q: Sequence[FamilyMember], translation_length_fn: Callable[[Any], Length]) -> Length:
    """Least translation length over the listed nontrivial subgroup elements; +inf if none."""
    best = INFINITE
    for m in Q:
        for h in m.elements:
            v = translation_length_fn(h)
            if v < best:
                best = v
    return best


@dataclass
class SCReport:
    clauses: Dict[str, Dict[str, Any]]
    verdict: bool


def sc_hypothesis_report(space: FiniteLengthSpace, Q: Sequence[FamilyMember], rho, delta0, Delta0,
                         translation_length_fn: Optional[Callable] = None, delta=None, T=None) -> SCReport:
    """Evaluate delta <= delta0, Delta(Q) <= Delta0 and T(Q) >= pi sinh rho."""
    if delta is None:
        delta = hyperbolicity_delta(space).delta_product
    delta = space.coerce(delta)
    Dq = delta_of_family(space, Q, delta).value
    if T is None:
        if translation_length_fn is None:
            raise InputError("malformed", "need T or a translation length function")
        T = t_of_family(Q, translation_length_fn)
    need_T = math.pi * math.sinh(float(rho))
    delta0 = float(delta0) if not isinstance(delta0, (int,)) else delta0
    clauses = {
        "delta": {"value": delta, "bound": delta0, "holds": bool(float(delta) <= float(delta0) + TOL)},
        "Delta": {"value": Dq, "bound": Delta0, "holds": bool(float(Dq) <= float(Delta0) + TOL)},
        "T": {"value": T, "bound": need_T, "holds": bool(float(T) >= need_T - TOL)},
    }
    return SCReport(clauses, all(c["holds"] for c in clauses.values()))
