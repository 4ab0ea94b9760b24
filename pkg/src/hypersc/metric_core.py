"""Finite length spaces, Gromov products and exact hyperbolicity constants.

Distances are stored in *raw units*.  When every weight is rational the raw
table holds integers and ``denom`` converts them back to exact fractions, so
all kernels run on integer arrays.  Otherwise the raw table is float64 and
comparisons use the absolute tolerance ``TOL``.
"""

from __future__ import annotations

import heapq
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

TOL = 1e-9
DEFAULT_EXACT_CAP = 256
DEFAULT_PRODUCT_CAP = 96
DEFAULT_SAMPLES = 200_000

# int64 kernels add up to four distances; above this bound switch to Python ints
_INT_SAFE = 2**60


class InputError(ValueError):
    """Invalid input, tagged with a stable machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


Length = Any  # Fraction in exact mode, float otherwise


def parse_length(value, exact: bool = False):
    """Turn a JSON-ish length into a Fraction (rational) or a float.

    Integers, ``"p/q"`` strings, decimal strings and integral floats are
    rational.  Other floats stay floats unless ``exact`` is set, in which
    case their decimal literal is taken at face value.
    """
    if isinstance(value, bool):
        raise InputError("malformed", f"not a length: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError("malformed", f"cannot parse length {value!r}") from None
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise InputError("malformed", f"length must be finite, got {value!r}")
        if exact or value.is_integer():
            return Fraction(repr(value))
        return value
    raise InputError("malformed", f"not a length: {value!r}")


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _as_kernel_array(raw: np.ndarray) -> np.ndarray:
    if raw.dtype == object and raw.size and max(abs(int(v)) for v in raw.flat) < _INT_SAFE:
        return raw.astype(np.int64)
    if raw.dtype.kind == "i" and raw.size and int(np.abs(raw).max()) >= _INT_SAFE:
        return raw.astype(object)
    return raw


class FiniteLengthSpace:
    """A finite weighted graph together with its shortest-path metric."""

    def __init__(self, vertices: Iterable[Hashable], edges: Iterable[Sequence] = (), *, exact: bool = False):
        vertices = list(vertices)
        index: Dict[Hashable, int] = {}
        for v in vertices:
            if v in index:
                raise InputError("duplicate-vertex", f"vertex {v!r} listed twice")
            index[v] = len(index)

        parsed = []
        seen = set()
        for e in edges:
            if len(e) != 3:
                raise InputError("malformed", f"edge must be [u, v, weight], got {e!r}")
            u, v, w = e
            for p in (u, v):
                if p not in index:
                    raise InputError("unknown-vertex", f"edge endpoint {p!r} is not a vertex")
            if u == v:
                raise InputError("self-loop", f"self-loop at {u!r}")
            key = frozenset((index[u], index[v]))
            if key in seen:
                raise InputError("duplicate-edge", f"duplicate edge {u!r}-{v!r}")
            seen.add(key)
            w = parse_length(w, exact)
            if w <= 0:
                raise InputError("nonpositive-weight", f"edge {u!r}-{v!r} has weight {w}")
            parsed.append((u, v, w))

        rational = all(isinstance(w, Fraction) for _, _, w in parsed)
        if rational:
            denom = _lcm(w.denominator for _, _, w in parsed)
            raw_w = [int(w * denom) for _, _, w in parsed]
        else:
            denom = None
            parsed = [(u, v, float(w)) for u, v, w in parsed]
            raw_w = [w for _, _, w in parsed]

        n = len(vertices)
        ei = [index[u] for u, _, _ in parsed]
        ej = [index[v] for _, v, _ in parsed]
        raw = _all_pairs(n, ei, ej, raw_w, denom is not None)
        self._setup(vertices, index, parsed, raw, denom)

    def _setup(self, vertices, index, edges, raw, denom):
        self.vertices: Tuple[Hashable, ...] = tuple(vertices)
        self._index = index
        self.edges: Tuple[Tuple[Hashable, Hashable, Length], ...] = tuple(edges)
        self.denom: Optional[int] = denom
        self.raw: np.ndarray = _as_kernel_array(raw)
        self.raw.setflags(write=False)
        self._adj: Optional[Dict[Hashable, Dict[Hashable, Length]]] = None

    @classmethod
    def _from_raw(cls, vertices, raw, denom, edges=None) -> "FiniteLengthSpace":
        self = cls.__new__(cls)
        vertices = list(vertices)
        index = {v: i for i, v in enumerate(vertices)}
        if edges is None:
            edges = []
            for i in range(len(vertices)):
                for j in range(i + 1, len(vertices)):
                    w = raw[i, j]
                    edges.append((vertices[i], vertices[j], Fraction(int(w), denom) if denom else float(w)))
        self._setup(vertices, index, list(edges), np.array(raw), denom)
        return self

    @classmethod
    def from_matrix(cls, vertices: Iterable[Hashable], matrix, *, exact: Optional[bool] = None) -> "FiniteLengthSpace":
        """Build a space from a full distance table (the complete graph on it).

        The table must be symmetric, zero on the diagonal, positive off it,
        and satisfy the triangle inequality (exactly, or within TOL for floats).
        """
        vertices = list(vertices)
        n = len(vertices)
        if len(set(vertices)) != n:
            raise InputError("duplicate-vertex", "vertex ids must be distinct")
        rows = [list(r) for r in matrix] if n else []
        if len(rows) != n or any(len(r) != n for r in rows):
            raise InputError("malformed", "distance table must be square and match the vertex list")
        if exact is None:
            exact = all(isinstance(x, (int, Fraction, np.integer)) for r in rows for x in r)
        if exact:
            vals = [[parse_length(x, True) for x in r] for r in rows]
            denom = _lcm(x.denominator for r in vals for x in r)
            raw = np.array([[int(x * denom) for x in r] for r in vals], dtype=object).reshape(n, n)
            raw = _as_kernel_array(raw) if n else np.zeros((0, 0), dtype=np.int64)
        else:
            denom = None
            raw = np.array(rows, dtype=float).reshape(n, n)
        tol = 0 if exact else TOL
        if n:
            if np.any(raw != raw.T):
                if exact or np.max(np.abs(raw - raw.T)) > TOL:
                    raise InputError("malformed", "distance table is not symmetric")
                raw = (raw + raw.T) / 2
            if np.any(np.diagonal(raw) != 0):
                raise InputError("malformed", "distance table has a nonzero diagonal")
            off = raw[~np.eye(n, dtype=bool)]
            if off.size and np.min(off) <= 0:
                raise InputError("nonpositive-weight", "distinct points must be at positive distance")
            worst, _ = triangle_defect(raw)
            if worst > tol:
                raise InputError("not-a-metric", f"triangle inequality fails by {worst}")
        return cls._from_raw(vertices, raw, denom)

    # -- basic access -------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def exact(self) -> bool:
        return self.denom is not None

    @property
    def tol(self):
        return 0 if self.exact else TOL

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, v) -> bool:
        return v in self._index

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"FiniteLengthSpace(n={self.n}, edges={len(self.edges)}, {mode})"

    def index(self, v) -> int:
        try:
            return self._index[v]
        except (KeyError, TypeError):
            raise InputError("unknown-point", f"unknown point {v!r}") from None

    def indices(self, points: Iterable[Hashable]) -> np.ndarray:
        return np.array([self.index(p) for p in points], dtype=np.intp)

    def to_length(self, raw_value) -> Length:
        """Convert a raw-unit value into a public length."""
        if self.denom is None:
            return float(raw_value)
        if isinstance(raw_value, Fraction):
            return raw_value / self.denom
        if isinstance(raw_value, (float, np.floating)):
            raise TypeError("float value in exact space")
        return Fraction(int(raw_value), self.denom)

    def to_raw(self, value) -> Any:
        """Convert a public length into raw units (a Fraction in exact mode)."""
        if self.denom is None:
            return float(value)
        if isinstance(value, float) and math.isinf(value):
            return value
        return parse_length(value, True) * self.denom

    def coerce(self, value) -> Length:
        """A public length in this space's number system."""
        if isinstance(value, float) and math.isinf(value):
            return value
        return parse_length(value, True) if self.exact else float(value)

    def half(self, raw_value) -> Length:
        """Public length of half a raw value (Gromov products are halves)."""
        if self.denom is None:
            return float(raw_value) / 2
        return Fraction(int(raw_value), 2 * self.denom)

    def d(self, u, v) -> Length:
        return self.to_length(self.raw[self.index(u), self.index(v)])

    def adjacency(self) -> Dict[Hashable, Dict[Hashable, Length]]:
        if self._adj is None:
            adj: Dict[Hashable, Dict[Hashable, Length]] = {v: {} for v in self.vertices}
            for u, v, w in self.edges:
                adj[u][v] = w
                adj[v][u] = w
            self._adj = adj
        return self._adj

    def diameter(self) -> Length:
        if self.n == 0:
            return self.to_length(0)
        return self.to_length(self.raw.max())

    # -- derived spaces -----------------------------------------------------

    def rescaled(self, lam) -> "FiniteLengthSpace":
        """The space with every length multiplied by ``lam`` > 0."""
        if self.exact and not isinstance(lam, float):
            lam = parse_length(lam, True)
            if lam <= 0:
                raise InputError("malformed", "scale factor must be positive")
            raw = _as_kernel_array(np.array(self.raw, dtype=object) * lam.numerator)
            edges = [(u, v, w * lam) for u, v, w in self.edges]
            return FiniteLengthSpace._from_raw(self.vertices, raw, self.denom * lam.denominator, edges)
        lam = float(lam)
        if lam <= 0:
            raise InputError("malformed", "scale factor must be positive")
        raw = np.asarray(self.raw, dtype=float) / (self.denom or 1) * lam
        edges = [(u, v, float(w) * lam) for u, v, w in self.edges]
        return FiniteLengthSpace._from_raw(self.vertices, raw, None, edges)

    def restricted(self, points: Iterable[Hashable]) -> "FiniteLengthSpace":
        """The given points with the ambient distances (not a path metric)."""
        points = list(points)
        idx = self.indices(points)
        return FiniteLengthSpace._from_raw(points, self.raw[np.ix_(idx, idx)], self.denom)

    def induced_subspace(self, points: Iterable[Hashable]) -> "FiniteLengthSpace":
        """The induced subgraph on ``points`` with its own path metric."""
        points = list(points)
        keep = set(points)
        edges = [(u, v, w) for u, v, w in self.edges if u in keep and v in keep]
        return FiniteLengthSpace(points, edges)


def _all_pairs(n: int, ei: List[int], ej: List[int], w: List, exact: bool) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64 if exact else float)
    if exact and sum(w) >= 2**52:
        return _dijkstra_python(n, ei, ej, w)
    g = coo_matrix((np.array(w, dtype=float), (ei, ej)), shape=(n, n)).tocsr()
    dist = shortest_path(g, method="D", directed=False)
    if np.isinf(dist).any():
        raise InputError("disconnected", "the graph is not connected")
    if exact:
        return np.rint(dist).astype(np.int64)
    return dist


def _dijkstra_python(n, ei, ej, w) -> np.ndarray:
    adj: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
    for a, b, c in zip(ei, ej, w):
        adj[a].append((b, c))
        adj[b].append((a, c))
    out = np.empty((n, n), dtype=object)
    for s in range(n):
        dist: List[Optional[int]] = [None] * n
        heap = [(0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if dist[u] is not None:
                continue
            dist[u] = d
            for v, c in adj[u]:
                if dist[v] is None:
                    heapq.heappush(heap, (d + c, v))
        if any(x is None for x in dist):
            raise InputError("disconnected", "the graph is not connected")
        out[s] = dist
    return out


def triangle_defect(raw: np.ndarray) -> Tuple[Any, Optional[Tuple[int, int, int]]]:
    """Largest d(i,j) - d(i,k) - d(k,j) over all triples, with a witness."""
    n = raw.shape[0]
    worst, wit = 0, None
    for k in range(n):
        excess = raw - (raw[:, k][:, None] + raw[k, :][None, :])
        flat = int(np.argmax(excess))
        val = excess.flat[flat]
        if val > worst:
            worst, wit = val, (flat // n, flat % n, k)
    return worst, wit


def load_space(document, *, exact: bool = False) -> FiniteLengthSpace:
    """Load a space from a parsed JSON document or a path to a JSON file."""
    if isinstance(document, (str, os.PathLike)):
        try:
            with open(document) as fh:
                document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError("malformed", f"invalid JSON: {exc}") from None
        except OSError as exc:
            raise InputError("io", str(exc)) from None
    if not isinstance(document, dict) or "vertices" not in document:
        raise InputError("malformed", "space document needs a 'vertices' list")
    vertices = document["vertices"]
    edges = document.get("edges", [])
    if not isinstance(vertices, list) or not isinstance(edges, list):
        raise InputError("malformed", "'vertices' and 'edges' must be lists")
    return FiniteLengthSpace([_hashable(v) for v in vertices], [tuple(_hashable(x) for x in e[:2]) + tuple(e[2:]) for e in edges], exact=exact)


def _hashable(v):
    return tuple(_hashable(x) for x in v) if isinstance(v, list) else v


# ---------------------------------------------------------------------------
# Gromov products and four-point constants
# ---------------------------------------------------------------------------


def gromov_product(S: FiniteLengthSpace, x, y, z) -> Length:
    """<x, y>_z = (d(x,z) + d(y,z) - d(x,y)) / 2."""
    i, j, k = S.index(x), S.index(y), S.index(z)
    D = S.raw
    return S.half(D[i, k] + D[j, k] - D[i, j])


@dataclass
class DeltaReport:
    delta_four_point: Length
    delta_product: Length
    witness: Optional[Tuple[Hashable, Hashable, Hashable, Hashable]]
    exact: bool
    method: str = "exhaustive"
    samples: Optional[int] = None
    product_method: str = "gromov-products"

    def as_dict(self) -> Dict[str, Any]:
        return {
            "delta_four_point": self.delta_four_point,
            "delta_product": self.delta_product,
            "witness": list(self.witness) if self.witness else None,
            "exact": self.exact,
            "method": self.method,
            "samples": self.samples,
            "product_method": self.product_method,
        }


@lru_cache(maxsize=8)
def _ordered_triples(n: int):
    """All y < z < t, sorted by y, plus the offset of the first triple per y."""
    if n < 3:
        e = np.zeros(0, dtype=np.int32)
        return e, e, e, np.zeros(n + 2, dtype=np.int64)
    zs, ts = np.triu_indices(n, 1)
    pair_start = np.concatenate([[0], np.cumsum(np.arange(n - 1, 0, -1))])
    ys, zz, tt = [], [], []
    for y in range(n - 2):
        s = pair_start[y + 1]
        ys.append(np.full(len(zs) - s, y, dtype=np.int32))
        zz.append(zs[s:].astype(np.int32))
        tt.append(ts[s:].astype(np.int32))
    Y, Z, T = np.concatenate(ys), np.concatenate(zz), np.concatenate(tt)
    start = np.searchsorted(Y, np.arange(n + 2))
    for a in (Y, Z, T):
        a.setflags(write=False)
    return Y, Z, T, start


def four_point_gap(D: np.ndarray) -> Tuple[Any, Optional[Tuple[int, int, int, int]]]:
    """Max over 4-point subsets of (largest pair-sum - second largest).

    Returns the raw gap (twice the four-point delta) and an index witness.
    Degenerate quadruples always give 0, so distinct 4-subsets suffice.
    """
    n = D.shape[0]
    if n < 4:
        return 0, None
    Y, Z, T, start = _ordered_triples(n)
    dyz, dyt, dzt = D[Y, Z], D[Y, T], D[Z, T]
    best, wit = None, None
    for x in range(n - 3):
        s = start[x + 1]
        row = D[x]
        a = row[Y[s:]] + dzt[s:]
        b = row[Z[s:]] + dyt[s:]
        c = row[T[s:]] + dyz[s:]
        hi = np.maximum(np.maximum(a, b), c)
        lo = np.minimum(np.minimum(a, b), c)
        gap = 2 * hi + lo - a - b - c
        k = int(np.argmax(gap))
        if best is None or gap[k] > best:
            best = gap[k]
            wit = (x, int(Y[s + k]), int(Z[s + k]), int(T[s + k]))
    return best, wit


def sampled_four_point_gap(D: np.ndarray, samples: int, rng: np.random.Generator):
    """Uniform-sampling lower estimate of ``four_point_gap``."""
    n = D.shape[0]
    best, wit = 0, None
    chunk = 100_000
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        q = rng.integers(0, n, size=(m, 4))
        x, y, z, t = q.T
        a = D[x, y] + D[z, t]
        b = D[x, z] + D[y, t]
        c = D[x, t] + D[y, z]
        gap = 2 * np.maximum(np.maximum(a, b), c) + np.minimum(np.minimum(a, b), c) - a - b - c
        k = int(np.argmax(gap))
        if gap[k] > best:
            best, wit = gap[k], tuple(int(v) for v in q[k])
        done += m
    return best, wit


def _product_excess_at(D: np.ndarray, t: int):
    """max over x,y,z of min(G[x,y], G[y,z]) - G[x,z] with G = 2<.,.>_t."""
    col = D[:, t]
    G = col[:, None] + col[None, :] - D
    n = D.shape[0]
    best, wit = None, None
    block = max(1, 2_000_000 // max(1, n * n))
    for x0 in range(0, n, block):
        xs = slice(x0, min(n, x0 + block))
        M = np.minimum(G[xs, :, None], G[None, :, :])  # [x, y, z]
        ybest = M.argmax(axis=1)
        val = np.take_along_axis(M, ybest[:, None, :], axis=1)[:, 0, :] - G[xs, :]
        k = int(np.argmax(val))
        xi, zi = divmod(k, n)
        v = val[xi, zi]
        if best is None or v > best:
            best, wit = v, (x0 + xi, int(ybest[xi, zi]), zi)
    return best, wit


def product_excess(D: np.ndarray):
    """Twice the smallest delta making the basepoint product condition hold everywhere."""
    n = D.shape[0]
    best, wit = 0, None
    for t in range(n):
        v, (x, y, z) = _product_excess_at(D, t)
        if v > best:
            best, wit = v, (x, y, z, t)
    return best, wit


def hyperbolicity_delta(
    S: FiniteLengthSpace,
    *,
    exact_cap: int = DEFAULT_EXACT_CAP,
    product_cap: int = DEFAULT_PRODUCT_CAP,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> DeltaReport:
    """Both four-point constants of ``S``.

    Up to ``exact_cap`` points every quadruple is examined.  Beyond it a
    seeded uniform sample of quadruples gives a lower estimate.  The
    basepoint-product constant is computed from Gromov products up to
    ``product_cap`` points; quantified over all quadruples it coincides with
    the four-point constant, which is used above that size.
    """
    D = S.raw
    n = S.n
    if n > exact_cap:
        gap, wit = sampled_four_point_gap(D, samples, np.random.default_rng(seed))
        method, nsamp = "sampled", samples
    else:
        gap, wit = four_point_gap(D)
        method, nsamp = "exhaustive", None
    delta4 = S.half(max(gap, 0))
    if n <= product_cap and method == "exhaustive":
        pgap, _ = product_excess(D)
        delta_p = S.half(max(pgap, 0))
        pmethod = "gromov-products"
    else:
        delta_p = delta4
        pmethod = "identity"
    witness = tuple(S.vertices[i] for i in wit) if wit else None
    return DeltaReport(delta4, delta_p, witness, S.exact, method, nsamp, pmethod)


def four_point_value(S: FiniteLengthSpace, quad) -> Length:
    """Half the sum-gap of one quadruple (used to re-evaluate witnesses)."""
    x, y, z, t = (S.index(p) for p in quad)
    D = S.raw
    sums = sorted([D[x, y] + D[z, t], D[x, z] + D[y, t], D[x, t] + D[y, z]])
    return S.half(sums[2] - sums[1])


@dataclass
class BasepointReport:
    holds: bool
    worst_slack: Length
    witness: Optional[Tuple[Hashable, Hashable, Hashable]]


def check_basepoint_criterion(S: FiniteLengthSpace, t, delta) -> BasepointReport:
    """Check <x,z>_t >= min(<x,y>_t, <y,z>_t) - delta for every triple.

    ``worst_slack`` is the largest value of min(...) - <x,z>_t - delta; the
    criterion holds iff it is <= 0 (within TOL for float spaces).
    """
    ti = S.index(t)
    v, (x, y, z) = _product_excess_at(S.raw, ti)
    slack = S.half(v) - S.coerce(delta)
    holds = slack <= S.tol
    return BasepointReport(bool(holds), slack, (S.vertices[x], S.vertices[y], S.vertices[z]))


@dataclass
class LocalProfile:
    sigma: Length
    balls: List[Dict[str, Any]]
    local_delta: Length
    global_report: DeltaReport
    prediction_holds: bool
    hypothesis: str
    notes: List[str] = field(default_factory=list)


def local_delta_profile(S: FiniteLengthSpace, sigma, **kw) -> LocalProfile:
    """Per-ball four-point deltas on B(c, sigma) compared with the global delta.

    The report flags whether global <= 300 * local.  The scale hypothesis
    sigma > 10^7 * local is reported as "holds", "violated", or "vacuous"
    when every ball is 0-hyperbolic (the inequality then carries no
    information).  Simple connectivity at scale sigma is not checked.
    """
    sig_raw = S.to_raw(sigma)
    if sig_raw <= 0:
        raise InputError("malformed", "sigma must be positive")
    balls = []
    local = S.to_length(0)
    for c in range(S.n):
        members = np.nonzero(S.raw[c] <= sig_raw + S.tol)[0]
        sub = S.raw[np.ix_(members, members)]
        gap, _ = four_point_gap(sub)
        dl = S.half(max(gap, 0))
        balls.append({"center": S.vertices[c], "size": int(len(members)), "delta": dl})
        if dl > local:
            local = dl
    glob = hyperbolicity_delta(S, **kw)
    g = glob.delta_four_point
    prediction = bool(g <= 300 * local + S.tol)
    sig = S.to_length(sig_raw)
    if local == 0:
        hyp = "vacuous"
    elif sig > 10**7 * local:
        hyp = "holds"
    else:
        hyp = "violated"
    notes = ["simple connectivity at scale sigma is not checked on graph models"]
    return LocalProfile(sig, balls, local, glob, prediction, hyp, notes)
