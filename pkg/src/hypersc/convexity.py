"""Quasi-geodesics, quasi-convexity, projections, neighborhoods and hulls."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from hypersc.metric_core import FiniteLengthSpace, InputError, Length, parse_length


class _Empty:
    """Marker for the diameter of an empty set (distinct from 0)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "EMPTY"

    def __bool__(self) -> bool:
        return False


EMPTY = _Empty()


def members(S: FiniteLengthSpace, Y: Iterable[Hashable]) -> np.ndarray:
    """Sorted, deduplicated index array of a nonempty subset."""
    idx = np.unique(S.indices(Y))
    if idx.size == 0:
        raise InputError("empty-subset", "subset must be nonempty")
    return idx


def _subset(S: FiniteLengthSpace, idx: np.ndarray) -> frozenset:
    return frozenset(S.vertices[i] for i in idx)


def _scalar(S: FiniteLengthSpace, value) -> Any:
    """A dimensionless coefficient in the space's number system."""
    return parse_length(value, True) if S.exact else float(value)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass
class PathCheck:
    holds: bool
    worst_excess: Length
    witness: Optional[Tuple[int, int]]


def path_cumlen(S: FiniteLengthSpace, points: Sequence[Hashable]) -> np.ndarray:
    """Cumulative arclength (raw units) along consecutive hops."""
    adj = S.adjacency()
    cum = [0]
    for a, b in zip(points, points[1:]):
        S.index(a), S.index(b)
        if a == b:
            step = 0
        elif b in adj[a]:
            step = S.to_raw(adj[a][b])
        else:
            raise InputError("not-a-path", f"{a!r} and {b!r} are not adjacent")
        cum.append(cum[-1] + step)
    if S.exact:
        return np.array([int(c) for c in cum], dtype=object)
    return np.array(cum, dtype=float)


def _qg_excess(S, points, k, l):
    idx = S.indices(points)
    t = path_cumlen(S, points)
    dt = np.abs(t[:, None] - t[None, :])
    D = S.raw[np.ix_(idx, idx)]
    if S.exact:
        D = D.astype(object)
    return dt, dt - _scalar(S, k) * D - S.to_raw(l)


def _verdict(S, excess, mask=None) -> PathCheck:
    if mask is not None:
        if not mask.any():
            return PathCheck(True, S.to_length(0), None)
        excess = np.where(mask, excess, excess.min() if excess.size else 0)
    if excess.size == 0:
        return PathCheck(True, S.to_length(0), None)
    flat = int(np.argmax(excess))
    i, j = divmod(flat, excess.shape[1])
    worst = excess[i, j]
    return PathCheck(bool(worst <= S.tol), S.to_length(worst), (int(i), int(j)))


def is_quasi_geodesic(S: FiniteLengthSpace, points: Sequence[Hashable], k=1, l=0) -> PathCheck:
    """Check |t - t'| <= k d(p(t), p(t')) + l for every pair of path indices."""
    if _scalar(S, k) < 1 or S.coerce(l) < 0:
        raise InputError("malformed", "need k >= 1 and l >= 0")
    _, excess = _qg_excess(S, points, k, l)
    return _verdict(S, excess)


def is_local_quasi_geodesic(S: FiniteLengthSpace, points: Sequence[Hashable], L, k=1, l=0) -> PathCheck:
    """The (k, l) test restricted to sub-paths of arclength at most L."""
    dt, excess = _qg_excess(S, points, k, l)
    mask = dt <= S.to_raw(L) + S.tol
    return _verdict(S, excess, mask)


# ---------------------------------------------------------------------------
# quasi-convexity
# ---------------------------------------------------------------------------


def _qc_raw(D: np.ndarray, idx: np.ndarray):
    """Twice the quasi-convexity constant (raw) and an (x, y, y') witness."""
    n = D.shape[0]
    DY = D[:, idx]
    dY = DY.min(axis=1)
    DYY = D[np.ix_(idx, idx)]
    m = len(idx)
    best, wit = None, None
    block = max(1, 4_000_000 // max(1, m * m))
    for x0 in range(0, n, block):
        rows = DY[x0:x0 + block]
        g2 = rows[:, :, None] + rows[:, None, :] - DYY[None, :, :]
        flat = g2.reshape(len(rows), -1)
        amin = flat.argmin(axis=1)
        vals = 2 * dY[x0:x0 + block] - flat[np.arange(len(rows)), amin]
        k = int(np.argmax(vals))
        if best is None or vals[k] > best:
            a, b = divmod(int(amin[k]), m)
            best, wit = vals[k], (x0 + k, int(idx[a]), int(idx[b]))
    return best, wit


def quasi_convexity_constant(S: FiniteLengthSpace, Y: Iterable[Hashable]) -> Length:
    """Smallest alpha with d(x, Y) <= <y, y'>_x + alpha for all x, y, y'."""
    val, _ = _qc_raw(S.raw, members(S, Y))
    return S.half(max(val, 0))


def quasi_convexity_witness(S: FiniteLengthSpace, Y: Iterable[Hashable]):
    val, (x, y, y2) = _qc_raw(S.raw, members(S, Y))
    return S.half(max(val, 0)), (S.vertices[x], S.vertices[y], S.vertices[y2])


def distance_to_set(S: FiniteLengthSpace, x, Y: Iterable[Hashable]) -> Length:
    return S.to_length(S.raw[S.index(x), members(S, Y)].min())


def projection(S: FiniteLengthSpace, x, Y: Iterable[Hashable], eta=0) -> frozenset:
    """All eta-projections of x on Y."""
    idx = members(S, Y)
    row = S.raw[S.index(x), idx]
    keep = row <= row.min() + S.to_raw(eta) + S.tol
    return _subset(S, idx[keep])


def _nbhd_mask(S: FiniteLengthSpace, idx: np.ndarray, A) -> np.ndarray:
    return S.raw[:, idx].min(axis=1) <= S.to_raw(A) + S.tol


def neighborhood(S: FiniteLengthSpace, Y: Iterable[Hashable], A) -> frozenset:
    """Y^{+A} = {x : d(x, Y) <= A}."""
    if S.coerce(A) < 0:
        raise InputError("malformed", "neighborhood radius must be nonnegative")
    return _subset(S, np.nonzero(_nbhd_mask(S, members(S, Y), A))[0])


def hull(S: FiniteLengthSpace, Y: Iterable[Hashable], slack=0) -> frozenset:
    """Vertices v with d(y, v) + d(v, y') <= d(y, y') + slack for some y, y' in Y.

    These are exactly the vertices on paths between points of Y whose
    length exceeds the distance of their endpoints by at most ``slack``.
    """
    idx = members(S, Y)
    s = S.to_raw(slack) + S.tol
    DY = S.raw[idx]  # [y, v]
    DYY = S.raw[np.ix_(idx, idx)]
    inside = np.zeros(S.n, dtype=bool)
    for a in range(len(idx)):
        lhs = DY[a][None, :] + DY  # [y', v]
        ok = lhs <= DYY[a][:, None] + s
        inside |= ok.any(axis=0)
    return _subset(S, np.nonzero(inside)[0])


def diameter(S: FiniteLengthSpace, Y: Iterable[Hashable]):
    Y = list(Y)
    if not Y:
        return EMPTY
    idx = members(S, Y)
    return S.to_length(S.raw[np.ix_(idx, idx)].max())


def diam_intersection(S: FiniteLengthSpace, Y1, A1, Y2, A2):
    """Diameter of Y1^{+A1} & Y2^{+A2}, or EMPTY when they do not meet."""
    m1 = _nbhd_mask(S, members(S, Y1), A1)
    m2 = _nbhd_mask(S, members(S, Y2), A2)
    both = np.nonzero(m1 & m2)[0]
    if both.size == 0:
        return EMPTY
    return S.to_length(S.raw[np.ix_(both, both)].max())


@dataclass
class StrongQCReport:
    path_connected: bool
    excess: Optional[Length]
    alpha: Length
    delta: Length
    verdict: bool


def strong_quasi_convexity_check(S: FiniteLengthSpace, Y: Iterable[Hashable], delta) -> StrongQCReport:
    """Compare the induced path metric of Y with the ambient one.

    Strongly quasi-convex here means: the induced subgraph is connected,
    d_Y <= d_X + 8 delta on Y, and the quasi-convexity constant is <= 2 delta.
    """
    idx = members(S, Y)
    pts = [S.vertices[i] for i in idx]
    delta = S.coerce(delta)
    alpha = quasi_convexity_constant(S, pts)
    try:
        sub = S.induced_subspace(pts)
    except InputError as exc:
        if exc.code != "disconnected":
            raise
        return StrongQCReport(False, None, alpha, delta, False)
    local = np.asarray([[sub.d(a, b) for b in pts] for a in pts], dtype=object)
    amb = np.asarray([[S.d(a, b) for b in pts] for a in pts], dtype=object)
    excess = max((local - amb).flat) if len(pts) else S.to_length(0)
    verdict = excess <= 8 * delta + S.tol and alpha <= 2 * delta + S.tol
    return StrongQCReport(True, excess, alpha, delta, bool(verdict))
