"""Free-group words, Cayley trees, isometries of finite models, axes and related sets."""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from hypersc.convexity import EMPTY, diam_intersection, members, neighborhood, quasi_convexity_constant
from hypersc.metric_core import FiniteLengthSpace, InputError, Length

INFINITE = math.inf

_LETTERS = re.compile(r"^[a-zA-Z]*$")


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------


def _check_word(w: str) -> str:
    if not isinstance(w, str) or not _LETTERS.match(w):
        raise InputError("malformed-word", f"words use letters a-z and A-Z only, got {w!r}")
    return w


def inverse(w: str) -> str:
    return _check_word(w)[::-1].swapcase()


def reduce(w: str) -> str:
    """Free reduction: cancel every adjacent x X pair."""
    out: List[str] = []
    for c in _check_word(w):
        if out and out[-1] == c.swapcase():
            out.pop()
        else:
            out.append(c)
    return "".join(out)


def multiply(*words: str) -> str:
    return reduce("".join(words))


def conjugator_split(w: str) -> Tuple[str, str]:
    """Write reduce(w) = u c u^-1 with c cyclically reduced; returns (u, c)."""
    w = reduce(w)
    i = 0
    while i < len(w) - 1 - i and w[i] == w[len(w) - 1 - i].swapcase():
        i += 1
    return w[:i], w[i:len(w) - i]


def cyclic_reduce(w: str) -> str:
    return conjugator_split(w)[1]


def _period(c: str) -> int:
    n = len(c)
    for p in range(1, n + 1):
        if n % p == 0 and c[:p] * (n // p) == c:
            return p
    return n


def primitive_root(w: str) -> str:
    """The element u, not a proper power, with w = u^k for some k >= 1.

    For a cyclically reduced word this is its shortest period; otherwise the
    root of the cyclic core is conjugated back.  The trivial word is its own root.
    """
    u, c = conjugator_split(w)
    if not c:
        return ""
    return u + c[:_period(c)] + inverse(u)


def power(w: str, k: int) -> str:
    if k < 0:
        return power(inverse(w), -k)
    return reduce(w * k)


def cyclic_conjugates(w: str) -> List[str]:
    c = cyclic_reduce(w)
    return [c[i:] + c[:i] for i in range(len(c))] if c else []


def word_length(w: str) -> int:
    return len(reduce(w))


def tree_distance(u: str, v: str) -> int:
    """Distance between two group elements in the Cayley tree."""
    return len(reduce(inverse(u) + v))


def tree_displacement(g: str, x: str) -> int:
    """d(gx, x) = |x^-1 g x| in the Cayley tree."""
    return len(reduce(inverse(x) + g + x))


def elementary_test_free(g: str, h: str) -> bool:
    """True iff g and h lie in a common cyclic subgroup of the free group."""
    rg, rh = primitive_root(g), primitive_root(h)
    if not rg or not rh:
        return True
    return rg == rh or rg == inverse(rh)


def alphabet(rank: int) -> str:
    if not 1 <= rank <= 26:
        raise InputError("malformed", "rank must be between 1 and 26")
    letters = "abcdefghijklmnopqrstuvwxyz"[:rank]
    return letters + letters.upper()


def reduced_words(rank: int, radius: int) -> List[str]:
    """All reduced words of length <= radius in BFS (shortlex) order."""
    gens = alphabet(rank)
    out = [""]
    layer = [""]
    for _ in range(radius):
        nxt = []
        for w in layer:
            for c in gens:
                if w and w[-1] == c.swapcase():
                    continue
                nxt.append(w + c)
        out.extend(nxt)
        layer = nxt
    return out


class CayleyBall(FiniteLengthSpace):
    """Ball of radius R in the Cayley tree of the free group of given rank.

    ``unit`` is the length of an edge; rescaled copies keep the word action.
    """

    def __init__(self, rank: int, radius: int, unit=1):
        if radius < 0:
            raise InputError("malformed", "radius must be nonnegative")
        words = reduced_words(rank, radius)
        edges = [(w[:-1], w, unit) for w in words if w]
        super().__init__(words, edges)
        self.rank = rank
        self.radius = radius
        self.unit = self.edges[0][2] if self.edges else self.coerce(unit)

    def rescaled(self, lam) -> "CayleyBall":
        base = super().rescaled(lam)
        out = CayleyBall.__new__(CayleyBall)
        out.__dict__.update(base.__dict__)
        out.rank, out.radius = self.rank, self.radius
        out.unit = out.edges[0][2] if out.edges else self.unit * lam
        return out


def expected_ball_size(rank: int, radius: int) -> int:
    return 1 + sum(2 * rank * (2 * rank - 1) ** (k - 1) for k in range(1, radius + 1))


# ---------------------------------------------------------------------------
# isometries of finite models
# ---------------------------------------------------------------------------


class FiniteIsometry:
    """A distance-preserving permutation of the vertices of a finite space."""

    def __init__(self, space: FiniteLengthSpace, mapping, *, validate: bool = True):
        self.space = space
        if isinstance(mapping, dict):
            perm = [None] * space.n
            for a, b in mapping.items():
                perm[space.index(a)] = space.index(b)
            # unmapped points are fixed
            perm = [i if p is None else p for i, p in enumerate(perm)]
        else:
            perm = [int(p) for p in mapping]
        self.perm = np.array(perm, dtype=np.intp)
        if validate:
            self._validate()

    def _validate(self) -> None:
        n = self.space.n
        if len(self.perm) != n or sorted(self.perm.tolist()) != list(range(n)):
            raise InputError("not-an-isometry", "mapping is not a bijection of the vertices")
        D = self.space.raw
        moved = D[np.ix_(self.perm, self.perm)]
        if self.space.exact:
            bad = np.any(moved != D)
        else:
            bad = np.max(np.abs(moved - D)) > 1e-9 if n else False
        if bad:
            raise InputError("not-an-isometry", "mapping does not preserve distances")

    @classmethod
    def identity(cls, space: FiniteLengthSpace) -> "FiniteIsometry":
        return cls(space, range(space.n), validate=False)

    def __call__(self, x):
        return self.space.vertices[self.perm[self.space.index(x)]]

    def __mul__(self, other: "FiniteIsometry") -> "FiniteIsometry":
        # (g * h)(x) = g(h(x))
        return FiniteIsometry(self.space, self.perm[other.perm], validate=False)

    def inverse(self) -> "FiniteIsometry":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return FiniteIsometry(self.space, inv, validate=False)

    def __pow__(self, k: int) -> "FiniteIsometry":
        g = self if k >= 0 else self.inverse()
        out = FiniteIsometry.identity(self.space)
        for _ in range(abs(k)):
            out = g * out
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteIsometry) and np.array_equal(self.perm, other.perm)

    def __hash__(self) -> int:
        return hash(self.perm.tobytes())

    def key(self) -> bytes:
        return self.perm.tobytes()

    def is_identity(self) -> bool:
        return bool(np.all(self.perm == np.arange(len(self.perm))))

    def order(self) -> int:
        k, g = 1, self
        while not g.is_identity():
            g = self * g
            k += 1
        return k

    def displacements(self) -> np.ndarray:
        """Raw d(gx, x) for every vertex x."""
        idx = np.arange(self.space.n)
        return self.space.raw[idx, self.perm]

    def as_dict(self) -> Dict[Hashable, Hashable]:
        V = self.space.vertices
        return {V[i]: V[int(p)] for i, p in enumerate(self.perm)}

    def __repr__(self) -> str:
        return f"FiniteIsometry({self.perm.tolist()})"


def group_closure(gens: Sequence[FiniteIsometry], space: Optional[FiniteLengthSpace] = None, limit: int = 100_000) -> List[FiniteIsometry]:
    """All elements of the group generated by ``gens`` (BFS order, identity first)."""
    if space is None:
        if not gens:
            raise InputError("malformed", "need a space or at least one generator")
        space = gens[0].space
    e = FiniteIsometry.identity(space)
    seen = {e.key(): e}
    order = [e]
    queue = deque([e])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = s * g
            if h.key() not in seen:
                if len(seen) >= limit:
                    raise InputError("too-large", f"group has more than {limit} elements")
                seen[h.key()] = h
                order.append(h)
                queue.append(h)
    return order


def all_isometries(space: FiniteLengthSpace, limit: int = 50_000) -> List[FiniteIsometry]:
    """Every isometry of a finite space, by backtracking over distance rows."""
    n = space.n
    D = space.raw
    if n == 0:
        return []
    sig = [tuple(sorted(D[i].tolist())) for i in range(n)]
    out: List[FiniteIsometry] = []
    perm = [-1] * n
    used = [False] * n

    def extend(i):
        if len(out) >= limit:
            raise InputError("too-large", f"more than {limit} isometries")
        if i == n:
            out.append(FiniteIsometry(space, list(perm), validate=False))
            return
        for j in range(n):
            if used[j] or sig[j] != sig[i]:
                continue
            if all(D[i, k] == D[j, perm[k]] for k in range(i)):
                perm[i], used[j] = j, True
                extend(i + 1)
                used[j] = False
        perm[i] = -1

    extend(0)
    return out


# ---------------------------------------------------------------------------
# displacement, translation length, axes
# ---------------------------------------------------------------------------

Element = Union[str, FiniteIsometry]


def displacements(g: Element, model: FiniteLengthSpace) -> np.ndarray:
    """Raw d(gx, x) over the vertices of ``model``."""
    if isinstance(g, str):
        if not isinstance(model, CayleyBall):
            raise InputError("malformed", "words act on a CayleyBall model")
        unit = model.to_raw(model.unit)
        vals = [tree_displacement(g, x) * unit for x in model.vertices]
        if model.exact:
            return np.array([int(v) for v in vals], dtype=np.int64)
        return np.array(vals, dtype=float)
    if g.space is not model:
        raise InputError("malformed", "isometry belongs to a different model")
    return g.displacements()


def translation_length(g: Element, model: Optional[FiniteLengthSpace] = None) -> Length:
    """inf_x d(gx, x).

    For a word with no model this is the cyclically reduced length (the
    exact value on the whole Cayley tree).  On a finite model it is the
    minimum displacement over its vertices.
    """
    if isinstance(g, str) and model is None:
        return len(cyclic_reduce(g))
    return model.to_length(displacements(g, model).min())


@dataclass
class StableLength:
    value: Length
    exact: bool
    estimates: List[Length] = field(default_factory=list)
    monotone: bool = True
    note: str = ""


def stable_length(g: Element, model: Optional[FiniteLengthSpace] = None, budget: int = 16) -> StableLength:
    """lim d(g^n x, x) / n.

    Words: the cyclically reduced length times the edge length (exact).
    Finite isometries have finite order m, so g^m = 1 and the limit is 0;
    the budget estimates d(g^n x, x)/n at the minimally displaced vertex
    are returned as diagnostics.
    """
    if isinstance(g, str):
        c = len(cyclic_reduce(g))
        unit = model.unit if isinstance(model, CayleyBall) else 1
        return StableLength(c * unit, True, [], True, "cyclically reduced length")
    x = int(np.argmin(g.displacements()))
    ests = []
    h = g
    for k in range(1, budget + 1):
        ests.append(g.space.to_length(g.space.raw[x, h.perm[x]]) / k)
        h = g * h
    mono = all(b <= a + g.space.tol for a, b in zip(ests, ests[1:]))
    zero = g.space.to_length(0)
    return StableLength(zero, True, ests, mono, f"finite order {g.order()}")


def axis(g: Element, model: FiniteLengthSpace, delta=0) -> frozenset:
    """A_g = {x : d(gx, x) <= max(l(g), 8 delta)}."""
    disp = displacements(g, model)
    thr = max(disp.min(), model.to_raw(8 * model.coerce(delta)))
    return frozenset(model.vertices[i] for i in np.nonzero(disp <= thr + model.tol)[0])


def axis_distance_bound(g: Element, model: FiniteLengthSpace, delta) -> Dict[str, Length]:
    """Worst slack of d(gx,x) >= 2 d(x, A_g) + l(g) - 14 delta over all x."""
    disp = displacements(g, model)
    A = members(model, axis(g, model, delta))
    dA = model.raw[:, A].min(axis=1)
    delta = model.coerce(delta)
    slack = disp - 2 * dA - disp.min() + model.to_raw(14 * delta)
    k = int(np.argmin(slack))
    return {"worst_slack": model.to_length(slack[k]), "witness": model.vertices[k]}


def nerve(g: FiniteIsometry, model: FiniteLengthSpace) -> frozenset:
    """A g-invariant union of geodesics through a minimally displaced vertex."""
    disp = g.displacements()
    x0 = int(np.argmin(disp))
    seg = _geodesic(model, x0, int(g.perm[x0]))
    pts = set()
    h = FiniteIsometry.identity(model)
    for _ in range(g.order()):
        pts.update(int(h.perm[i]) for i in seg)
        h = g * h
    return frozenset(model.vertices[i] for i in pts)


def _geodesic(model: FiniteLengthSpace, a: int, b: int) -> List[int]:
    D = model.raw
    adj = model.adjacency()
    V = model.vertices
    path = [a]
    cur = a
    while cur != b:
        steps = sorted((model.index(v), model.to_raw(w)) for v, w in adj[V[cur]].items())
        for j, w in steps:
            if abs(w + D[j, b] - D[cur, b]) <= model.tol:
                path.append(j)
                cur = j
                break
        else:
            raise InputError("malformed", "no geodesic step found")
    return path


def is_hyperbolic(g: Element, model: Optional[FiniteLengthSpace] = None) -> bool:
    """Words: nontrivial.  Finite models (where every isometry has finite
    order): no fixed vertex, i.e. positive translation length."""
    if isinstance(g, str):
        return bool(cyclic_reduce(g))
    return bool(g.displacements().min() > 0)


def tree_axis(w: str, radius: int, rank: Optional[int] = None) -> frozenset:
    """The axis of a word inside the radius-R ball of the Cayley tree.

    Found geometrically: starting from a minimally displaced vertex, walk
    the tree keeping only vertices whose displacement equals the
    translation length.  Every generator of ``rank`` is explored (default:
    enough generators to spell ``w``).
    """
    u, c = conjugator_split(w)
    if not c:
        raise InputError("not-hyperbolic", "trivial element has no axis")
    ell = len(c)
    if rank is None:
        rank = max(ord(ch) - ord("a") + 1 for ch in w.lower())
    if len(u) > radius:
        return frozenset()
    gens = alphabet(rank)
    seen = {u}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for s in gens:
            y = reduce(x + s)
            if len(y) > radius or y in seen:
                continue
            if tree_displacement(w, y) == ell:
                seen.add(y)
                queue.append(y)
    return frozenset(seen)


def set_tree_diameter(points: Iterable[str]):
    pts = list(points)
    if not pts:
        return EMPTY
    return max(tree_distance(a, b) for a in pts for b in pts)


def cylinder(g: Element, model: FiniteLengthSpace, delta=0) -> frozenset:
    """Finite stand-in for the cylinder of a hyperbolic element.

    Tree words with delta = 0: the axis line itself.  Otherwise the
    10 delta-neighborhood of a g-invariant chain of geodesic segments
    through a minimally displaced vertex.
    """
    if not is_hyperbolic(g, model):
        raise InputError("not-hyperbolic", "cylinder needs a hyperbolic element")
    delta = model.coerce(delta)
    if isinstance(g, str):
        line = axis(g, model, 0)
        return neighborhood(model, line, 10 * delta) if delta else line
    return neighborhood(model, nerve(g, model), 10 * delta)


# ---------------------------------------------------------------------------
# invariants A and rinj, characteristic sets
# ---------------------------------------------------------------------------


@dataclass
class InvariantA:
    value: Length
    pairs_considered: int
    witness: Optional[Tuple[str, str]]
    note: str = ""


def invariant_A(model: FiniteLengthSpace, elements: Sequence[Element], elementary_test: Optional[Callable] = None, delta=0) -> InvariantA:
    """sup of diam(A_g^{+17 delta} & A_h^{+17 delta}) over non-elementary pairs
    of elements with translation length <= 1000 delta.

    An empty admissible pair set gives 0.  Without an elementary test the
    free-group test is used for words; finite isometries require one.
    """
    delta = model.coerce(delta)
    if elementary_test is None:
        if any(not isinstance(g, str) for g in elements):
            raise InputError("malformed", "an elementary test must be supplied for non-word elements")
        elementary_test = elementary_test_free
    short = []
    for g in elements:
        disp = displacements(g, model)
        if model.to_length(disp.min()) <= 1000 * delta:
            short.append((g, axis(g, model, delta)))
    best = model.to_length(0)
    wit = None
    count = 0
    thick = 17 * delta
    for i in range(len(short)):
        for j in range(i + 1, len(short)):
            g, Ag = short[i]
            h, Ah = short[j]
            if elementary_test(g, h):
                continue
            count += 1
            dia = diam_intersection(model, Ag, thick, Ah, thick)
            if dia is not EMPTY and dia > best:
                best, wit = dia, (str(g), str(h))
            elif dia is not EMPTY and wit is None:
                wit = (str(g), str(h))
    note = "no admissible pair: sup over the empty set taken as 0" if count == 0 else ""
    return InvariantA(best, count, wit, note)


def rinj(words: Iterable[str], model: Optional[FiniteLengthSpace] = None) -> Length:
    """Least stable length among hyperbolic elements; +inf if there is none."""
    best = INFINITE
    for w in words:
        s = stable_length(w, model).value if isinstance(w, str) else None
        if isinstance(w, str) and cyclic_reduce(w) and s < best:
            best = s
    return best


@dataclass
class CharacteristicSet:
    points: frozenset
    worst_midpoint_defect: Length
    worst_midpoint_distance: Length


def characteristic_set(model: FiniteLengthSpace, F: Sequence[FiniteIsometry], delta) -> CharacteristicSet:
    """C_F = {x : d(gx, x) <= 10 delta for all g in F}, plus a midpoint check.

    ``F`` is closed under composition first.  For every x and the g in F
    moving it most, a vertex m minimising max(d(x,m), d(gx,m)) is chosen;
    the report gives the worst excess of that max over d(x,gx)/2 and the
    worst distance from such m to C_F.
    """
    delta = model.coerce(delta)
    group = group_closure(list(F), model) if F else [FiniteIsometry.identity(model)]
    disp = np.stack([g.displacements() for g in group])  # [g, x]
    worst = disp.max(axis=0)
    inside = worst <= model.to_raw(10 * delta) + model.tol
    C = frozenset(model.vertices[i] for i in np.nonzero(inside)[0])
    D = model.raw
    zero = model.to_length(0)
    if not C:
        return CharacteristicSet(C, zero, math.inf)
    cidx = np.nonzero(inside)[0]
    dC = D[:, cidx].min(axis=1)
    worst_def, worst_dist = zero, zero
    for x in range(model.n):
        gi = int(np.argmax(disp[:, x]))
        gx = int(group[gi].perm[x])
        far = np.maximum(D[x], D[gx])
        m = int(np.argmin(far))
        defect = model.to_length(far[m]) - model.half(D[x, gx])
        worst_def = max(worst_def, defect)
        worst_dist = max(worst_dist, model.to_length(dC[m]))
    return CharacteristicSet(C, worst_def, worst_dist)


def displacement_convexity_slack(g: FiniteIsometry, delta) -> Length:
    """Worst slack of d(gy,y) <= max(d(gx,x), d(gx',x')) + 2<x,x'>_y + 6 delta."""
    S = g.space
    D = S.raw
    disp = g.displacements()
    delta = S.coerce(delta)
    best = None
    six = S.to_raw(6 * delta)
    M = np.maximum(disp[:, None], disp[None, :])
    for y in range(S.n):
        G2 = D[:, y][:, None] + D[y, :][None, :] - D  # 2<x,x'>_y
        slack = M + G2 + six - disp[y]
        v = slack.min()
        if best is None or v < best:
            best = v
    return S.to_length(best)
