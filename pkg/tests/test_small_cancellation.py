import itertools
import math
import random
from fractions import Fraction

import mpmath
import pytest

from hypersc.group_actions import CayleyBall, cyclic_reduce, inverse, reduce, tree_axis, set_tree_diameter
from hypersc.metric_core import InputError
from hypersc.small_cancellation import (
    LabelledGraph,
    Presentation,
    c_constant,
    check_small_cancellation,
    critical_exponent_search,
    cyclic_conjugates,
    gm_embedding_bounds,
    gm_remark_factor,
    graph_girth,
    graph_max_piece,
    induction_inequalities,
    lambda_n,
    max_piece,
    max_piece_naive,
    overlap,
    piece_axis_equivalence,
    power_family,
    q_family_from_relators,
)


def random_relator(rng, rank, lo=1, hi=12):
    letters = "abc"[:rank] + "ABC"[:rank]
    while True:
        w = cyclic_reduce(reduce("".join(rng.choice(letters) for _ in range(rng.randint(lo, hi)))))
        if w:
            return w


def test_presentation_parse_and_reduce():
    P = Presentation.parse("ab\n# comment\naBAb\nabAB\n")
    assert P.generators == "ab" and P.rank == 2
    assert P.relators == ["aBAb", "abAB"]
    with pytest.raises(InputError):
        Presentation("ab", ["aA"])
    with pytest.raises(InputError):
        Presentation("ab", ["abc"])
    with pytest.raises(InputError):
        Presentation("aa", [])
    with pytest.raises(InputError):
        Presentation.parse("\n\n")


def test_cyclic_conjugates_symmetrised():
    R = cyclic_conjugates(["ab"])
    assert R == sorted({"ab", "ba", "BA", "AB"})


@pytest.mark.parametrize("rels, piece", [(["aaabbb"], 2), (["abAB"], 1), (["a"], 0), (["abABcdCD"], 1), ([], 0)])
def test_max_piece_frozen(rels, piece):
    assert max_piece(rels).length == piece == max_piece_naive(rels).length


def test_max_piece_matches_naive(rng):
    for _ in range(200):
        rels = [random_relator(rng, rng.randint(1, 3)) for _ in range(rng.randint(1, 3))]
        assert max_piece(rels).length == max_piece_naive(rels).length


def test_cprime_examples():
    v = check_small_cancellation(["aaabbb"], "1/6")
    assert not v.holds and v.max_piece == 2 and v.violation_count == 4
    assert v.violations[0]["piece"] in ("aa", "bb", "AA", "BB")
    assert check_small_cancellation(Presentation("abcd", ["abABcdCD"]), Fraction(1, 7)).holds
    assert check_small_cancellation(Presentation("ab", []), "1/6").holds
    assert check_small_cancellation(["aaabbb"], "1/3").holds


def test_cdouble_and_variant_names():
    v = check_small_cancellation(["aaabbb"], "1/6", "cdouble")
    assert not v.holds and v.violations[0]["bound"] == "1"
    assert check_small_cancellation(["aaabbb"], "1/3", "C''").holds
    with pytest.raises(InputError):
        check_small_cancellation(["ab"], "1/6", "c3")
    with pytest.raises(InputError):
        check_small_cancellation(["ab"], "-1")


def test_overlap_through_identity():
    assert overlap("ab", "ab") == math.inf
    assert overlap("ab", "abab") == math.inf
    assert overlap("ab", "aB") == 1
    assert overlap("abc", "aBC") == 1
    assert overlap("aab", "abA") == overlap("abA", "aab")


def test_overlap_equals_tree_axis_intersection(rng):
    for _ in range(60):
        r, s = random_relator(rng, 2, 1, 6), random_relator(rng, 2, 1, 6)
        ov = overlap(r, s)
        if ov == math.inf:
            continue
        R = 2 * max(len(r), len(s)) + 1
        common = tree_axis(r, R, 2) & tree_axis(s, R, 2)
        assert set_tree_diameter(common) == ov


def test_piece_axis_equivalence_examples():
    for rels in (["aab", "aba"], ["aaabbb"], ["abAB", "aabbABAB"]):
        assert piece_axis_equivalence(rels).max_discrepancy == 0


def test_q_family():
    f = q_family_from_relators(["abAB"], "1/6")
    assert f.Delta == 1 and f.T == 4 and f.agree and not f.c_double
    g = q_family_from_relators(["aaabbb"], "1/2")
    assert g.Delta == 2 and g.T == 6 and g.agree and g.c_double
    same_axis = q_family_from_relators(["ab", "abab"], "1/2")
    assert same_axis.Delta == math.inf and same_axis.agree


def test_labelled_graph_validation():
    with pytest.raises(InputError):
        LabelledGraph([0, 1], [(0, 1, "a")])  # degree 1
    with pytest.raises(InputError):
        LabelledGraph([0, 1, 2, 3], [(0, 1, "a"), (1, 0, "b"), (2, 3, "a"), (3, 2, "b")])
    with pytest.raises(InputError):
        LabelledGraph([0], [(0, 0, "A")])
    G = LabelledGraph.from_document({"vertices": [0, 1], "edges": [[0, 1, "a"], [1, 0, "b"]]})
    assert len(G.darts()) == 4


def brute_force_piece(G, max_len):
    """Longest word (up to max_len) read along two distinct reduced paths."""
    D = G.darts()
    paths = [((i,), D[i][2]) for i in range(len(D))]
    best = 0
    for L in range(1, max_len + 1):
        words = {}
        for p, w in paths:
            words.setdefault(w, set()).add(p)
        if any(len(v) > 1 for v in words.values()):
            best = L
        nxt = []
        for p, w in paths:
            last = p[-1]
            for j, (t, h, a, k) in enumerate(D):
                if t == D[last][1] and j != last ^ 1:
                    nxt.append((p + (j,), w + a))
        paths = nxt
    return best


def cycle_graph(word):
    n = len(word)
    return LabelledGraph(list(range(n)), [(i, (i + 1) % n, word[i]) for i in range(n)])


@pytest.mark.parametrize(
    "G, girth, piece, status",
    [
        (cycle_graph("abc"), 3, 0, "exact"),
        (LabelledGraph([0], [(0, 0, "a")]), 1, 0, "exact"),
        (cycle_graph("aabb"), 4, 1, "exact"),
        (cycle_graph("abcabd"), 6, 2, "exact"),
    ],
)
def test_graph_pieces_frozen(G, girth, piece, status):
    assert graph_girth(G) == girth
    r = graph_max_piece(G)
    assert (r.length, r.status) == (piece, status)
    assert brute_force_piece(G, 8) == piece


def test_graph_piece_unbounded_and_indeterminate():
    G = LabelledGraph([0, 1], [(0, 1, "a"), (1, 0, "a")])
    assert graph_girth(G) == 2
    assert graph_max_piece(G, 8).status == "indeterminate"
    r = graph_max_piece(G, 64)
    assert r.status == "unbounded" and r.length == math.inf
    periodic = cycle_graph("ababab")
    assert graph_max_piece(periodic, 8).status == "indeterminate"
    with pytest.raises(InputError):
        graph_max_piece(periodic, 0)


def test_graph_piece_matches_brute_force(rng):
    for _ in range(20):
        n = rng.randint(2, 5)
        edges = [(i, (i + 1) % n, rng.choice("ab")) for i in range(n)]
        if rng.random() < 0.5:
            edges.append((0, rng.randrange(n), rng.choice("abc")))
        G = LabelledGraph(list(range(n)), edges)
        r = graph_max_piece(G, 12)
        if r.status == "exact":
            assert r.length == brute_force_piece(G, 12)


def test_graph_girth_double_edge():
    G = LabelledGraph([0, 1, 2], [(0, 1, "a"), (1, 0, "b"), (1, 2, "c"), (2, 1, "d")])
    assert graph_girth(G) == 2
    assert graph_girth(cycle_graph("abcde")) == 5


def test_power_family():
    f = power_family(["a", "b", "ab"], 3, 0)
    assert f.T == math.inf and f.pool == []
    g = power_family(["a", "b", "aa"], 3, 0.01, CayleyBall(2, 3))
    assert g.T == 3 and sorted(g.pool) == ["a", "b"]
    assert power_family(["a", "b"], 6, 0.01, CayleyBall(2, 3)).T == 6
    h = power_family(["ab", "aB"], 2, 1)
    assert h.Delta == 1 and h.T == 4
    with pytest.raises(InputError):
        power_family(["a"], 0, 1)


def test_lambda_and_c_constant():
    rho0, d1 = 5, mpmath.mpf("0.00064")
    assert c_constant(1, rho0, d1) == lambda_n(1, rho0, d1)
    assert lambda_n(4, rho0, d1) == pytest.approx(float(lambda_n(1, rho0, d1)) / 2)


@pytest.mark.parametrize(
    "args, n0",
    [
        ((5, 1e-3, 1e-3, 1e-9), 2428550571407814574),
        ((1, 1, 1, 1e-12), 625000000),
    ],
)
def test_critical_exponent_frozen(args, n0):
    p = critical_exponent_search(*args)
    assert p.certified and p.n0 == n0
    ok = lambda n: all(induction_inequalities(n, *args[:3], p.delta1).values())
    with mpmath.workdps(80):
        assert ok(n0) and not ok(n0 - 1)


def test_critical_exponent_threshold_c():
    p = critical_exponent_search(5, 1e-3, 1e-3, 1e-9)
    with mpmath.workdps(60):
        assert c_constant(p.n1_threshold, 5, p.delta1) < 1
        assert c_constant(p.n1_threshold - 1, 5, p.delta1) >= 1


def test_critical_exponent_at_curvature_scale_is_not_materialised():
    p = critical_exponent_search(20, 1e-19, 1e-19)
    assert not p.certified and p.n0 is None
    assert 3.8e9 < p.log10_n0 < 3.9e9


def test_critical_exponent_rejects_nonpositive():
    with pytest.raises(InputError):
        critical_exponent_search(0, 1, 1)


def test_gm_bounds():
    b = gm_embedding_bounds(10, 100, 2, 1, 5)
    ratio = 10 / (math.pi * math.sinh(10))
    assert b.R == pytest.approx(ratio * 100 / 20)
    assert b.coefficient == pytest.approx(ratio * 100 / 2500)
    assert b.lower_bound(10) == pytest.approx(b.coefficient * (10 / 4 - 1))
    assert gm_embedding_bounds(1000, 50).R == pytest.approx(float(mpmath.mpf(1000) / (mpmath.pi * mpmath.sinh(1000))) * 50 / 20)
    with pytest.raises(InputError):
        gm_embedding_bounds(1, 1, k=0.5)


def test_gm_remark_factor():
    # rho = 10^20 bold, delta0 = 10^-10 bold gives R >= 10^30 delta / 20
    assert gm_remark_factor() == pytest.approx(1e30)
