import math
import random

import mpmath
import numpy as np
import pytest

from conftest import cycle, dijkstra_dense, naive_four_point, random_coneoff, random_graph
from hypersc.cone import mu
from hypersc.coneoff import (
    AttachedPoint,
    ConeOffSpace,
    FamilyMember,
    chain_length,
    coneoff_distance,
    d_sc,
    delta_of_family,
    greedy_subchain,
    sample_coneoff,
    sandwich_check,
    sc_hypothesis_report,
    t_of_family,
)
from hypersc.metric_core import FiniteLengthSpace, InputError, hyperbolicity_delta, triangle_defect


def boundary_distance(dY, rho):
    """cosh d = cosh^2 rho - sinh^2 rho cos(min(pi, dY / sinh rho)), 40 digits."""
    with mpmath.workdps(40):
        th = min(mpmath.pi, mpmath.mpf(dY) / mpmath.sinh(rho))
        return float(mpmath.acosh(mpmath.cosh(rho) ** 2 - mpmath.sinh(rho) ** 2 * mpmath.cos(th)))


def oracle_dot(C: ConeOffSpace):
    """Shortest paths in the base graph plus one chord per pair of boundary
    points of each cone, every table built from scratch."""
    S = C.base
    n = S.n
    W = [[math.inf] * n for _ in range(n)]
    for i in range(n):
        W[i][i] = 0.0
    for u, v, w in S.edges:
        i, j = S.index(u), S.index(v)
        W[i][j] = W[j][i] = min(W[i][j], float(w))
    for att in C.attachments:
        keep = set(att.subset)
        sub = [[math.inf] * len(att.subset) for _ in att.subset]
        pos = {v: k for k, v in enumerate(att.subset)}
        for k in range(len(sub)):
            sub[k][k] = 0.0
        for u, v, w in S.edges:
            if u in keep and v in keep:
                sub[pos[u]][pos[v]] = sub[pos[v]][pos[u]] = float(w)
        dY = dijkstra_dense(sub)
        for a in att.subset:
            for b in att.subset:
                if a != b:
                    i, j = S.index(a), S.index(b)
                    W[i][j] = min(W[i][j], boundary_distance(dY[pos[a]][pos[b]], C.rho))
    return dijkstra_dense(W)


def test_dot_distance_matches_oracle(rng):
    for _ in range(8):
        C = random_coneoff(rng)
        ref = oracle_dot(C)
        assert np.allclose(C.dot, np.array(ref), atol=1e-9)


def test_full_cone_over_cycle():
    # coning off all of C12 with rho = 1: opposite points are 2 rho apart
    C = ConeOffSpace(cycle(12), 1.0, [range(12)])
    assert C.dot_dist(0, 6) == pytest.approx(min(6.0, mu(6.0, 1.0)))
    assert C.dot_dist(0, 6) <= 2.0 + 1e-12
    assert coneoff_distance(C, AttachedPoint(0, None, 0.0), 5) == pytest.approx(1.0)


def test_sandwich_on_random_instances(rng):
    for _ in range(10):
        r = sandwich_check(random_coneoff(rng))
        assert r["holds"]


def test_no_attachments_is_base():
    S = random_graph(random.Random(3), 8)
    C = ConeOffSpace(S, 1.0, [])
    assert np.allclose(C.dot, C.base_dist)
    r = sandwich_check(C)
    assert r["upper_slack"] == 0


@pytest.mark.parametrize(
    "subsets, code",
    [([[]], "empty-subset"), ([[0, 6]], "attachment-disconnected"), ([[0, 99]], "unknown-point")],
)
def test_attachment_errors(subsets, code):
    with pytest.raises(InputError) as exc:
        ConeOffSpace(cycle(12), 1.0, subsets)
    assert exc.value.code == code


def test_from_document_errors():
    with pytest.raises(InputError):
        ConeOffSpace.from_document({"rho": 1})
    with pytest.raises(InputError):
        ConeOffSpace.from_document({"base": {"vertices": [0, 1], "edges": [[0, 1, 1]]}, "rho": "x"})
    with pytest.raises(InputError):
        ConeOffSpace(cycle(4), 0, [])


def test_points_and_normalisation():
    C = ConeOffSpace(cycle(12), 1.0, [[0, 1, 2, 3]])
    assert C.normalize(AttachedPoint(0, 2, 1.0)) == 2
    assert C.normalize(AttachedPoint(0, 2, 0.0)) == AttachedPoint(0, None, 0.0)
    with pytest.raises(InputError):
        C.normalize(AttachedPoint(0, 7, 0.5))
    with pytest.raises(InputError):
        C.normalize(AttachedPoint(3, 0, 0.5))
    apex = AttachedPoint(0, None, 0.0)
    assert d_sc(C, apex, 3) == pytest.approx(1.0)
    assert d_sc(C, apex, 7) == math.inf
    mid = AttachedPoint(0, 1, 0.5)
    assert coneoff_distance(C, mid, apex) == pytest.approx(0.5)
    assert coneoff_distance(C, mid, mid) == 0.0


def test_sampled_coneoff_is_a_metric(rng):
    for _ in range(3):
        C = random_coneoff(rng, n_range=(5, 9), max_cones=2)
        S, pts = sample_coneoff(C, 3)
        worst, _ = triangle_defect(S.raw)
        assert worst <= 1e-9
        for i, p in enumerate(pts):
            for j in range(0, len(pts), 5):
                assert S.raw[i, j] == pytest.approx(coneoff_distance(C, p, pts[j]), abs=1e-9)


def test_sampled_coneoff_frozen_delta():
    C = ConeOffSpace(cycle(12), 1.0, [range(6), [6, 7, 8]])
    assert sandwich_check(C)["lower_slack"] == pytest.approx(0, abs=1e-12)
    # frozen values, each confirmed by the naive quadruple loop
    for levels, points, delta in [(1, 14, 1.7644416325415642), (3, 32, 2.0)]:
        S, _ = sample_coneoff(C, levels)
        assert S.n == points
        assert hyperbolicity_delta(S).delta_four_point == pytest.approx(delta, abs=1e-12)
        assert naive_four_point(S.raw.tolist()) / 2 == pytest.approx(delta, abs=1e-12)


def test_greedy_subchain_bounds(rng):
    for _ in range(50):
        C = random_coneoff(rng)
        chain = [rng.choice(C.base.vertices) for _ in range(rng.randint(1, 15))]
        eta = rng.uniform(0.01, 0.99) * math.sqrt(1 / (10 * C.a))
        r = greedy_subchain(C, chain, eta)
        assert r.length_ok and r.count_ok
        assert r.indices[0] == 0 and r.indices[-1] == len(chain) - 1


def test_greedy_subchain_eta_range():
    C = ConeOffSpace(cycle(6), 1.0, [[0, 1]])
    with pytest.raises(InputError) as exc:
        greedy_subchain(C, [0, 1], math.sqrt(1 / (10 * C.a)))
    assert exc.value.code == "eta-out-of-range"


def test_chain_length_uses_cone_shortcuts():
    C = ConeOffSpace(cycle(12), 1.0, [range(12)])
    assert chain_length(C, [0, 6]) == pytest.approx(mu(6.0, 1.0))


def test_family_delta_and_T():
    S = cycle(12)
    Q = [
        FamilyMember("H1", frozenset({0, 1, 2, 3}), ("h1",)),
        FamilyMember("H2", frozenset({3, 4, 5}), ("h2",)),
        FamilyMember("H3", frozenset({9}), ()),
    ]
    d = delta_of_family(S, Q, 0)
    assert d.value == 0 and d.pairs_met == 1 and d.witness == (0, 1)
    thick = delta_of_family(S, Q, 1, "12delta")
    assert thick.thickening == 12 and thick.value == 6
    assert t_of_family(Q, {"h1": 5, "h2": 3}.get) == 3
    assert t_of_family([], len) == math.inf
    with pytest.raises(InputError):
        delta_of_family(S, Q, 0, "3delta")


def test_sc_hypothesis_report():
    S = cycle(12)
    Q = [FamilyMember("H", frozenset({0, 1}), ("h",))]
    r = sc_hypothesis_report(S, Q, rho=1.0, delta0=5, Delta0=1, T=100)
    assert r.verdict and set(r.clauses) == {"delta", "Delta", "T"}
    bad = sc_hypothesis_report(S, Q, rho=1.0, delta0=1, Delta0=1, T=1)
    assert not bad.verdict and not bad.clauses["delta"]["holds"] and not bad.clauses["T"]["holds"]
    with pytest.raises(InputError):
        sc_hypothesis_report(S, Q, 1.0, 1, 1)
