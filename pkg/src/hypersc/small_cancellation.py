"""Presentations and labelled graphs: pieces, small cancellation conditions,
the families attached to relators, and the parameter arithmetic of the
periodic-quotient induction and the graphical embedding bounds."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import mpmath

from hypersc.coneoff import FamilyMember, delta_of_family
from hypersc.group_actions import (
    CayleyBall,
    axis,
    cyclic_conjugates as _rotations,
    cyclic_reduce,
    inverse,
    is_hyperbolic,
    primitive_root,
    reduce,
    set_tree_diameter,
    stable_length,
    tree_axis,
)
from hypersc.metric_core import InputError, parse_length

INFINITE = math.inf


# ---------------------------------------------------------------------------
# presentations
# ---------------------------------------------------------------------------


@dataclass
class Presentation:
    generators: str
    relators: List[str]

    def __post_init__(self):
        gens = self.generators
        if not gens or not gens.isalpha() or not gens.islower() or len(set(gens)) != len(gens):
            raise InputError("malformed", "generators must be distinct lowercase letters")
        allowed = set(gens) | set(gens.upper())
        out = []
        for r in self.relators:
            if not isinstance(r, str) or not set(r) <= allowed:
                raise InputError("malformed-word", f"relator {r!r} uses letters outside {gens}")
            c = cyclic_reduce(r)
            if not c:
                raise InputError("malformed-word", f"relator {r!r} is trivial")
            out.append(c)
        self.relators = out

    @property
    def rank(self) -> int:
        return len(self.generators)

    @classmethod
    def parse(cls, text: str) -> "Presentation":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
        if not lines:
            raise InputError("malformed", "presentation file is empty")
        return cls(lines[0], lines[1:])


def _as_presentation(P) -> Presentation:
    if isinstance(P, Presentation):
        return P
    relators = list(P)
    letters = sorted({c.lower() for r in relators for c in r}) or ["a"]
    return Presentation("".join(letters), relators)


def cyclic_conjugates(P) -> List[str]:
    """R*: all cyclic conjugates of relators and their inverses, sorted, deduplicated."""
    P = _as_presentation(P)
    out = set()
    for r in P.relators:
        out.update(_rotations(r))
        out.update(_rotations(inverse(r)))
    return sorted(out)


def lcp(u: str, v: str) -> int:
    k = 0
    for a, b in zip(u, v):
        if a != b:
            break
        k += 1
    return k


@dataclass
class PieceReport:
    length: int
    witness: Optional[Tuple[str, str]]


def max_piece_naive(P) -> PieceReport:
    R = cyclic_conjugates(P)
    best, wit = 0, None
    for i in range(len(R)):
        for j in range(i + 1, len(R)):
            k = lcp(R[i], R[j])
            if k > best:
                best, wit = k, (R[i], R[j])
    return PieceReport(best, wit)


def max_piece(P) -> PieceReport:
    """Longest common prefix of two distinct elements of R*.

    In sorted order the longest common prefix of any pair is attained by
    an adjacent pair, so one linear pass suffices.
    """
    R = cyclic_conjugates(P)
    best, wit = 0, None
    for u, v in zip(R, R[1:]):
        k = lcp(u, v)
        if k > best:
            best, wit = k, (u, v)
    return PieceReport(best, wit)


@dataclass
class SCVerdict:
    variant: str
    lam: Fraction
    holds: bool
    max_piece: int
    min_relator: Optional[int]
    violations: List[Dict[str, Any]] = field(default_factory=list)
    violation_count: int = 0


def _parse_lambda(lam) -> Fraction:
    v = parse_length(lam, True) if not isinstance(lam, Fraction) else lam
    if not isinstance(v, Fraction):
        v = Fraction(v)
    if v < 0:
        raise InputError("malformed", "lambda must be nonnegative")
    return v


def check_small_cancellation(P, lam, variant: str = "cprime", max_listed: int = 20) -> SCVerdict:
    """C'(lam): every piece u of r has |u| <= lam |r|.
    C''(lam): max piece <= lam * shortest relator."""
    P = _as_presentation(P)
    lam = _parse_lambda(lam)
    key = variant.lower().replace("′", "prime").replace("″", "double")
    if key in ("cprime", "c'", "prime"):
        variant = "cprime"
    elif key in ("cdouble", "cdoubleprime", "c''", "double"):
        variant = "cdouble"
    else:
        raise InputError("malformed", f"unknown variant {variant!r}")
    R = cyclic_conjugates(P)
    mp = max_piece(P)
    shortest = min((len(r) for r in P.relators), default=None)
    viol: List[Dict[str, Any]] = []
    count = 0
    if variant == "cprime":
        for i in range(len(R)):
            for j in range(i + 1, len(R)):
                k = lcp(R[i], R[j])
                if k == 0:
                    continue
                for r in (R[i], R[j]):
                    if k > lam * len(r):
                        count += 1
                        if len(viol) < max_listed:
                            viol.append({"piece": R[i][:k], "relator": r, "other": R[j] if r == R[i] else R[i]})
                        break
    else:
        if shortest is not None and mp.length > lam * shortest:
            count = 1
            viol.append({"piece": mp.witness[0][:mp.length], "pair": list(mp.witness), "bound": str(lam * shortest)})
    return SCVerdict(variant, lam, count == 0, mp.length, shortest, viol, count)


# ---------------------------------------------------------------------------
# relator axes in the Cayley tree
# ---------------------------------------------------------------------------


def _periodic_lcp(r: str, s: str) -> Optional[int]:
    """lcp(r^inf, s^inf), or None when the two infinite words agree (same root)."""
    cap = len(r) + len(s)
    k = 0
    while k < cap and r[k % len(r)] == s[k % len(s)]:
        k += 1
    return None if k >= cap else k


def overlap(r: str, s: str):
    """Length of the common segment of the axes of r and s through the identity
    (both cyclically reduced); infinite when the axes coincide.

    The segment is read either with both orientations agreeing or with
    s reversed; at most one of the two readings is nonzero.
    """
    ri, si = inverse(r), inverse(s)
    best = 0
    for a, b in ((s, si), (si, s)):
        fwd = _periodic_lcp(r, a)
        back = _periodic_lcp(ri, b)
        if fwd is None or back is None:
            return INFINITE
        best = max(best, fwd + back)
    return best


def _member_key(w: str) -> frozenset:
    return frozenset((w, inverse(w)))


@dataclass
class EquivalenceReport:
    pairs_checked: int
    max_discrepancy: int
    max_overlap: Any
    witness: Optional[Tuple[str, str]]


def piece_axis_equivalence(P, radius: Optional[int] = None) -> EquivalenceReport:
    """Compare the string overlap of every pair of R* elements with distinct axes
    against diam(axis_r & axis_s) computed by walking the Cayley tree."""
    P = _as_presentation(P)
    R = cyclic_conjugates(P)
    if radius is None:
        radius = 2 * max((len(r) for r in R), default=0) + 1
    axes = {r: tree_axis(r, radius, P.rank) for r in R}
    worst, best, wit, pairs = 0, 0, None, 0
    for i in range(len(R)):
        for j in range(i + 1, len(R)):
            r, s = R[i], R[j]
            ov = overlap(r, s)
            if ov == INFINITE:
                continue  # same axis
            pairs += 1
            common = axes[r] & axes[s]
            geo = set_tree_diameter(common) if common else 0
            # the common segment always contains the identity
            worst = max(worst, abs(geo - ov))
            if ov > best:
                best, wit = ov, (r, s)
    return EquivalenceReport(pairs, worst, best, wit)


@dataclass
class RelatorFamily:
    members: List[str]
    Delta: Any
    T: int
    witness: Optional[Tuple[str, str]]
    lam: Optional[Fraction] = None
    c_double: Optional[bool] = None
    family_bound: Optional[bool] = None

    @property
    def agree(self) -> Optional[bool]:
        if self.c_double is None:
            return None
        return self.c_double == self.family_bound


def q_family_from_relators(P, lam=None) -> RelatorFamily:
    """The family {(<u r u^-1>, u Y_r)} for the tree, up to translation.

    Members through the identity are the elements of R* with r and r^-1
    identified.  Delta(Q) is the largest axis overlap over distinct
    members (infinite if two distinct subgroups share an axis) and T(Q)
    the shortest relator.
    """
    P = _as_presentation(P)
    R = cyclic_conjugates(P)
    T = min((len(r) for r in P.relators), default=INFINITE)
    best, wit = 0, None
    for i in range(len(R)):
        for j in range(i + 1, len(R)):
            r, s = R[i], R[j]
            if _member_key(r) == _member_key(s):
                continue
            ov = overlap(r, s)
            if ov > best:
                best, wit = ov, (r, s)
    fam = RelatorFamily(R, best, T, wit)
    if lam is not None:
        lam = _parse_lambda(lam)
        fam.lam = lam
        fam.c_double = check_small_cancellation(P, lam, "cdouble").holds
        fam.family_bound = bool(best <= lam * T) if T != INFINITE else True
    return fam


# ---------------------------------------------------------------------------
# labelled graphs
# ---------------------------------------------------------------------------


@dataclass
class LabelledGraph:
    vertices: List[Hashable]
    edges: List[Tuple[Hashable, Hashable, str]]

    def __post_init__(self):
        if not self.vertices:
            raise InputError("malformed", "graph has no vertices")
        if len(set(self.vertices)) != len(self.vertices):
            raise InputError("duplicate-vertex", "vertex ids must be unique")
        vs = set(self.vertices)
        deg = {v: 0 for v in self.vertices}
        for e in self.edges:
            if len(e) != 3:
                raise InputError("malformed", f"edge {e!r} must be [u, v, letter]")
            u, v, a = e
            if u not in vs or v not in vs:
                raise InputError("unknown-vertex", f"edge {e!r} uses an unknown vertex")
            if not isinstance(a, str) or len(a) != 1 or not a.isalpha() or not a.islower():
                raise InputError("malformed", f"edge label {a!r} must be a lowercase letter")
            deg[u] += 1
            deg[v] += 1
        low = [v for v, d in deg.items() if d == 1]
        if low:
            raise InputError("malformed", f"vertex {low[0]!r} has degree 1")
        if len(self.vertices) > 1:
            adj = {v: set() for v in self.vertices}
            for u, v, _ in self.edges:
                adj[u].add(v)
                adj[v].add(u)
            seen = {self.vertices[0]}
            stack = [self.vertices[0]]
            while stack:
                x = stack.pop()
                for y in adj[x] - seen:
                    seen.add(y)
                    stack.append(y)
            if len(seen) != len(self.vertices):
                raise InputError("disconnected", "labelled graph must be connected")

    @classmethod
    def from_document(cls, doc) -> "LabelledGraph":
        if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
            raise InputError("malformed", "graph needs 'vertices' and 'edges'")
        fix = lambda v: tuple(v) if isinstance(v, list) else v
        return cls([fix(v) for v in doc["vertices"]], [tuple(fix(x) for x in e) if isinstance(e, list) else e for e in doc["edges"]])

    def darts(self) -> List[Tuple[Hashable, Hashable, str, int]]:
        """Oriented edges (tail, head, letter, edge index); dart 2k reads the
        label forwards, dart 2k+1 reads its inverse backwards."""
        out = []
        for k, (u, v, a) in enumerate(self.edges):
            out.append((u, v, a, k))
            out.append((v, u, a.upper(), k))
        return out


def graph_girth(G: LabelledGraph):
    """Shortest cycle of the underlying multigraph; loops count 1, double edges 2."""
    best = INFINITE
    adj: Dict[Hashable, List[Tuple[Hashable, int]]] = {v: [] for v in G.vertices}
    for k, (u, v, _) in enumerate(G.edges):
        if u == v:
            return 1
        adj[u].append((v, k))
        adj[v].append((u, k))
    for k, (u, v, _) in enumerate(G.edges):
        # shortest u-v path avoiding edge k, closed up by edge k
        dist = {u: 0}
        q = deque([u])
        while q and v not in dist:
            x = q.popleft()
            for y, e in adj[x]:
                if e != k and y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        if v in dist:
            best = min(best, dist[v] + 1)
    return best


@dataclass
class GraphPiece:
    length: Any  # int, or math.inf when unbounded
    status: str  # "exact", "unbounded" or "indeterminate"
    witness: Optional[str]


def graph_max_piece(G: LabelledGraph, cap: int = 64) -> GraphPiece:
    """Longest word read along two distinct reduced edge paths.

    Paths are (start vertex, dart sequence); reduced means no dart is
    followed by its reverse.  Pairs of paths reading the same word are
    tracked as states (last dart, last dart, differ-so-far flag), layer by
    layer.  A differing state surviving past the number of states lies on
    a cycle of the state graph, so pieces are then unbounded.
    """
    if cap < 1:
        raise InputError("malformed", "cap must be positive")
    D = G.darts()
    out: Dict[Hashable, List[int]] = {}
    for i, (t, h, a, k) in enumerate(D):
        out.setdefault(t, []).append(i)
    rev = lambda i: i ^ 1

    def nexts(i):
        return [j for j in out.get(D[i][1], []) if j != rev(i)]

    layer: Dict[Tuple[int, int, bool], str] = {}
    for i in range(len(D)):
        for j in range(len(D)):
            if D[i][2] == D[j][2]:
                layer[(i, j, i != j)] = D[i][2]
    states = 2 * len(D) ** 2
    best, word = 0, None
    L = 1
    while layer:
        diff = [w for (i, j, f), w in layer.items() if f]
        if diff:
            best, word = L, min(diff)
        if L >= cap:
            break
        nxt: Dict[Tuple[int, int, bool], str] = {}
        for (i, j, f), w in layer.items():
            for i2 in nexts(i):
                for j2 in nexts(j):
                    if D[i2][2] == D[j2][2]:
                        key = (i2, j2, f or i2 != j2)
                        w2 = w + D[i2][2]
                        if key not in nxt or w2 < nxt[key]:
                            nxt[key] = w2
        layer = nxt
        L += 1
    if best >= cap:
        if cap > states:
            return GraphPiece(INFINITE, "unbounded", word)
        return GraphPiece(best, "indeterminate", word)
    return GraphPiece(best, "exact", word)


# ---------------------------------------------------------------------------
# power families
# ---------------------------------------------------------------------------


@dataclass
class PowerFamily:
    n: int
    pool: List[str]
    T: Any
    Delta: Any
    members: List[FamilyMember]


def power_family(pool: Iterable[str], n: int, delta, model: Optional[CayleyBall] = None) -> PowerFamily:
    """Q_n = {(<r^n>, Y_r)} for primitive hyperbolic r with l(r) <= 1000 delta.

    Lengths are measured in ``model`` (a possibly rescaled Cayley ball); its
    edge length scales translation lengths.  Delta is the 5 delta overlap
    of the axes inside the model ball; T = n * min stable length.
    """
    if n < 1:
        raise InputError("malformed", "n must be positive")
    delta = float(delta)
    unit = float(model.unit) if model is not None else 1.0
    kept: List[str] = []
    seen = set()
    for r in pool:
        c = cyclic_reduce(reduce(r))
        if not is_hyperbolic(c) or primitive_root(c) != c:
            continue
        if len(c) * unit > 1000 * delta:
            continue
        for w in _rotations(c):
            key = _member_key(w)
            if key not in seen:
                seen.add(key)
                kept.append(w)
    if not kept:
        return PowerFamily(n, [], INFINITE, 0, [])
    T = n * min(float(stable_length(r, model).value) for r in kept)
    members: List[FamilyMember] = []
    Delta: Any = 0
    if model is not None:
        for r in kept:
            Y = axis(r, model)
            if Y:
                members.append(FamilyMember(r, frozenset(Y), (r * n,)))
        if len(members) > 1:
            Delta = delta_of_family(model, members, model.coerce(delta) if model.exact else delta).value
    else:
        best = 0
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                best = max(best, overlap(kept[i], kept[j]))
        Delta = best
    return PowerFamily(n, kept, T, Delta, members)


# ---------------------------------------------------------------------------
# periodic quotient induction arithmetic
# ---------------------------------------------------------------------------


@dataclass
class BurnsideParams:
    rho0: float
    delta0: float
    Delta0: float
    bold_delta: float
    delta1: float
    C: Any  # lambda_n = C / sqrt(n)
    bounds: Dict[str, str]  # each lambda_n <= bound, 15 significant digits
    n0: Optional[int]
    log10_n0: float
    certified: bool
    n1_threshold: Optional[int]  # smallest n1 with c(n1) < 1
    log10_n1_threshold: float
    table: List[Tuple[int, float]]


def _mp_terms(rho0, delta1):
    sh = mpmath.sinh(mpmath.mpf(10) ** 4 * delta1)
    C = mpmath.pi * mpmath.sinh(rho0) / (5 * mpmath.sqrt(rho0 * delta1))
    return sh, C


def lambda_n(n, rho0, delta1):
    """pi sinh rho0 / (5 sqrt(n rho0 delta1))."""
    rho0, delta1 = mpmath.mpf(rho0), mpmath.mpf(delta1)
    return mpmath.pi * mpmath.sinh(rho0) / (5 * mpmath.sqrt(mpmath.mpf(n) * rho0 * delta1))


def induction_inequalities(n, rho0, delta0, Delta0, delta1) -> Dict[str, bool]:
    """The four conditions on lambda_n used by the induction step."""
    rho0, delta0, Delta0, delta1 = (mpmath.mpf(v) for v in (rho0, delta0, Delta0, delta1))
    lam = lambda_n(n, rho0, delta1)
    sh = mpmath.sinh(mpmath.mpf(10) ** 4 * delta1)
    return {
        "delta": bool(lam * delta1 <= delta0),
        "Delta": bool(lam * (2 * mpmath.pi * sh + 86 * delta1) <= min(Delta0, mpmath.pi * sh)),
        "rinj": bool(100 * lam * rho0 * delta1 / (mpmath.pi * mpmath.sinh(rho0)) <= delta1),
        "non_elementary": bool(lam * rho0 <= rho0),
    }


def c_constant(n1, rho0, delta1):
    """c = (1/sqrt(n1)) pi sinh rho0 / (5 sqrt(rho0 delta1))."""
    return lambda_n(n1, rho0, delta1)


def _first_true(pred, guess: int) -> int:
    """Smallest n >= 1 with pred(n), for a monotone predicate, searching
    outwards from a guess and then bisecting."""
    step = 1
    if pred(guess):
        lo, hi = guess - 1, guess
        while lo >= 1 and pred(lo):
            hi, lo, step = lo, max(0, lo - step), 2 * step
        lo = max(lo, 0)
    else:
        lo, hi = guess, guess + 1
        while not pred(hi):
            lo, hi, step = hi, hi + step, 2 * step
    # pred(hi) holds, pred(lo) fails (or lo == 0)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def critical_exponent_search(rho0, delta0, Delta0, bold_delta=None, max_digits: int = 2000, table_size: int = 8) -> BurnsideParams:
    """Smallest n0 with all four inequalities for every n >= n0.

    lambda_n = C / sqrt(n) decreases, so each inequality reads
    lambda_n <= B_i, i.e. n >= (C / B_i)^2.  The candidate is the ceiling of
    the largest threshold and is re-checked at n0 and n0 - 1 with enough
    working precision; when n0 has more than ``max_digits`` digits only its
    base-10 logarithm is reported and ``certified`` is False.
    """
    if bold_delta is None:
        from hypersc.cone import BOLD_DELTA

        bold_delta = BOLD_DELTA
    rho0, delta0, Delta0, bold_delta = (float(v) for v in (rho0, delta0, Delta0, bold_delta))
    if not (rho0 > 0 and delta0 > 0 and Delta0 > 0 and bold_delta > 0):
        raise InputError("malformed", "rho0, delta0, Delta0 and the curvature scale must be positive")
    delta1 = 64e4 * bold_delta

    def thresholds():
        d1 = mpmath.mpf(delta1)
        sh, C = _mp_terms(mpmath.mpf(rho0), d1)
        bounds = {
            "delta": mpmath.mpf(delta0) / d1,
            "Delta": min(mpmath.mpf(Delta0), mpmath.pi * sh) / (2 * mpmath.pi * sh + 86 * d1),
            "rinj": mpmath.pi * mpmath.sinh(rho0) / (100 * mpmath.mpf(rho0)),
            "non_elementary": mpmath.mpf(1),
        }
        return C, bounds, min(bounds.values())

    with mpmath.workdps(60):
        C, bounds, B = thresholds()
        x = (C / B) ** 2
        log10_n0 = float(mpmath.log10(x)) if x > 1 else 0.0
        log10_n1 = float(mpmath.log10(C**2)) if C**2 > 1 else 0.0
        shown = {k: mpmath.nstr(v, 15) for k, v in bounds.items()}
    n0: Optional[int] = None
    n1: Optional[int] = None
    certified = False
    if log10_n0 < max_digits:
        with mpmath.workdps(int(log10_n0) + 60):
            C_hi, _, B_hi = thresholds()
            n0 = max(1, int(mpmath.ceil((C_hi / B_hi) ** 2)))
            ok = lambda n: all(induction_inequalities(n, rho0, delta0, Delta0, delta1).values())
            n0 = _first_true(ok, n0)
            certified = ok(n0) and (n0 == 1 or not ok(n0 - 1))
    if log10_n1 < max_digits:
        with mpmath.workdps(int(log10_n1) + 60):
            C_hi = thresholds()[0]
            n1 = _first_true(lambda n: c_constant(n, rho0, delta1) < 1, int(mpmath.floor(C_hi**2)) + 1)
    table = []
    with mpmath.workdps(30):
        for k in range(table_size):
            n = 10**k
            table.append((n, float(lambda_n(n, rho0, delta1))))
    return BurnsideParams(
        rho0, delta0, Delta0, bold_delta, delta1, float(C),
        shown, n0, log10_n0, certified, n1, log10_n1, table,
    )


# ---------------------------------------------------------------------------
# graphical small cancellation embedding bounds
# ---------------------------------------------------------------------------


@dataclass
class GMBounds:
    R: float
    coefficient: float
    k: float
    l: float

    def lower_bound(self, d: float) -> float:
        """coefficient * (d / (2k) - l)."""
        return self.coefficient * (d / (2 * self.k) - self.l)


def gm_embedding_bounds(rho, T, k=1, l=0, diam_theta=1) -> GMBounds:
    """R = rho T / (20 pi sinh rho) and the distortion coefficient
    (1/500)(T / diam Theta)(rho / (pi sinh rho))."""
    rho, T, k, l, diam_theta = float(rho), float(T), float(k), float(l), float(diam_theta)
    if rho <= 0 or T < 0 or k < 1 or l < 0 or diam_theta <= 0:
        raise InputError("malformed", "need rho > 0, T >= 0, k >= 1, l >= 0, diam > 0")
    ratio = rho / (math.pi * math.sinh(rho)) if rho < 700 else float(mpmath.mpf(rho) / (mpmath.pi * mpmath.sinh(rho)))
    return GMBounds(ratio * T / 20, ratio * T / (500 * diam_theta), k, l)


def gm_remark_factor(rho_over_bold=1e20, delta0_over_bold=1e-10) -> float:
    """F with R >= F delta / 20 under delta / T <= delta0 / (pi sinh rho).

    R = rho T / (20 pi sinh rho) >= rho delta / (20 delta0), so F = rho / delta0,
    both measured in units of the curvature scale.
    """
    return float(rho_over_bold) / float(delta0_over_bold)
