import json
import math
import random
from fractions import Fraction

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import as_lists, naive_four_point, naive_product_delta, random_graph, random_tree
from hypersc.cli import dumps
from hypersc.cone import mu, mu_coefficient
from hypersc.group_actions import cyclic_reduce, inverse, multiply, reduce, translation_length
from hypersc.metric_core import gromov_product, hyperbolicity_delta
from hypersc.small_cancellation import max_piece, max_piece_naive

fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)
words = st.text(alphabet="aAbB", max_size=12)


@fast
@given(seeds, st.integers(2, 30))
def test_trees_are_zero_hyperbolic(seed, n):
    rep = hyperbolicity_delta(random_tree(random.Random(seed), n))
    assert rep.delta_four_point == 0 and rep.delta_product == 0


@fast
@given(seeds, st.integers(4, 11), st.floats(0.1, 0.7))
def test_four_point_matches_oracle(seed, n, p):
    S = random_graph(random.Random(seed), n, p)
    D = as_lists(S)
    rep = hyperbolicity_delta(S)
    assert rep.delta_four_point == Fraction(naive_four_point(D)) / 2
    assert rep.delta_product == Fraction(naive_product_delta(D)) / 2


@fast
@given(seeds, st.integers(4, 10), st.fractions(Fraction(1, 5), 7))
def test_delta_scales_linearly(seed, n, lam):
    S = random_graph(random.Random(seed), n)
    a, b = hyperbolicity_delta(S), hyperbolicity_delta(S.rescaled(lam))
    assert b.delta_four_point == lam * a.delta_four_point
    assert b.delta_product == lam * a.delta_product


@fast
@given(seeds, st.integers(3, 10))
def test_gromov_product_bounds(seed, n):
    rng = random.Random(seed)
    S = random_graph(rng, n)
    x, y, z = (rng.randrange(n) for _ in range(3))
    g = gromov_product(S, x, y, z)
    assert 0 <= g <= min(S.d(x, z), S.d(y, z))
    assert g == gromov_product(S, y, x, z)


@fast
@given(st.floats(0.05, 12), st.floats(0, 1))
def test_mu_bounds(rho, frac):
    top = math.pi * math.sinh(rho)
    t = frac * top
    m = mu(t, rho)
    assert -1e-9 <= m <= t + 1e-9
    assert m <= 2 * rho + 1e-9
    assert m >= t - mu_coefficient(rho) * t**3 - 1e-7 * max(1.0, t)


@fast
@given(words, words)
def test_word_reduction_laws(u, v):
    r = reduce(u)
    assert reduce(r) == r
    assert all(a != b.swapcase() for a, b in zip(r, r[1:]))
    assert reduce(multiply(u, inverse(u))) == ""
    assert multiply(multiply(u, v), inverse(v)) == reduce(u)
    c = cyclic_reduce(u)
    assert len(c) <= len(r) and len(c) % 2 == len(r) % 2


@fast
@given(words)
def test_translation_length_is_cyclic_length(u):
    assert translation_length(u) == len(cyclic_reduce(reduce(u)))


@settings(max_examples=60, deadline=None)
@given(st.lists(words.map(lambda w: cyclic_reduce(reduce(w))).filter(bool), min_size=1, max_size=3))
def test_max_piece_matches_naive(rels):
    assert max_piece(rels).length == max_piece_naive(rels).length


@fast
@given(st.recursive(
    st.one_of(st.integers(-5, 5), st.fractions(max_denominator=9), st.just(math.inf), st.text(max_size=4)),
    lambda inner: st.one_of(st.lists(inner, max_size=3), st.dictionaries(st.text(max_size=3), inner, max_size=3)),
    max_leaves=12,
))
def test_report_serialisation_is_deterministic(obj):
    a = dumps({"results": obj})
    assert a == dumps(json.loads(json.dumps({"results": json.loads(a)["results"]})))
    assert "NaN" not in a and "Infinity" not in a
