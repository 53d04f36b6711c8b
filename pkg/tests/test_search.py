import itertools
import logging
import math

import numpy as np
import pytest

from ktreebn.dataset import CategoricalTable
from ktreebn.exact import brute_force_learn, exact_learn
from ktreebn.graph import Dag, is_moral_subgraph, verify_treewidth_le
from ktreebn.scoring import bic, build_cache
from ktreebn.search import (_suffix_bounds, anytime_learn, best_remaining, canonical_key,
                            equivalence_classes, init_structure, kastar_learn, kg_learn,
                            sample_order)

from conftest import random_table
from oracles import clique_dfs_best, linear_best


@pytest.fixture(scope="module")
def cache9():
    rng = np.random.default_rng(7)
    return build_cache(random_table(rng, 9, 800), 2)


def _check_output(dag, cache, k):
    assert verify_treewidth_le(dag, k).ok
    assert dag.ktree is not None and is_moral_subgraph(dag, dag.ktree)
    for v in range(cache.n):
        assert cache.score_of(v, dag.parents[v]) == dag.scores[v]


# -- orders -----------------------------------------------------------------


def test_canonical_key_equivalence():
    assert canonical_key((1, 0, 2, 3), 2) == canonical_key((0, 1, 2, 3), 2)
    assert canonical_key((0, 1, 3, 2), 2) != canonical_key((0, 1, 2, 3), 2)


class _FixedRng:
    def __init__(self, perms):
        self.perms = list(perms)

    def permutation(self, n):
        return np.array(self.perms.pop(0))


def test_sample_order_skips_equivalent():
    seen = set()
    rng = _FixedRng([(1, 0, 2, 3), (0, 1, 2, 3), (0, 1, 3, 2)])
    assert sample_order(rng, 4, 2, seen) == [1, 0, 2, 3]
    assert sample_order(rng, 4, 2, seen) is None
    assert sample_order(rng, 4, 2, seen) == [0, 1, 3, 2]


def test_equivalence_class_count():
    keys = {canonical_key(p, 2) for p in itertools.permutations(range(4))}
    assert len(keys) == 4 == equivalence_classes(4, 2)
    keys = {canonical_key(p, 1) for p in itertools.permutations(range(5))}
    assert len(keys) == equivalence_classes(5, 1) == 60


def test_anytime_stops_when_classes_exhausted():
    rng = np.random.default_rng(0)
    c = build_cache(random_table(rng, 4, 200), 2)
    reg = anytime_learn("kg", c, 2, max_iterations=100, rng=rng)
    assert reg.iterations == 4


# -- initialisation and bounds ----------------------------------------------


def test_init_structure_matches_brute_force(rng):
    for _ in range(5):
        c = build_cache(random_table(rng, 6, 300), 2)
        order = [int(v) for v in rng.permutation(6)]
        dag, kt = init_structure(order, c, 2)
        bf = brute_force_learn(c, order[:3])
        assert dag.total_score == bf.total_score
        assert is_moral_subgraph(dag, kt)
        assert sorted(kt.order) == sorted(order[:3])


def test_init_structure_independent_empty(rng):
    c = build_cache(CategoricalTable(rng.integers(0, 2, (50000, 5))), 2)
    dag, _ = init_structure([4, 2, 0, 1, 3], c, 2)
    assert dag.arcs() == []


def test_init_structure_needs_room(rng):
    c = build_cache(random_table(rng, 3, 50), 2)
    with pytest.raises(ValueError):
        init_structure([0, 1, 2], c, 2)


def test_best_remaining(cache9, rng):
    X = 4
    assert best_remaining(cache9, X, []) == cache9.empty_score(X)
    others = [v for v in range(9) if v != X]
    assert best_remaining(cache9, X, others) == cache9.sets[X][0].score
    for _ in range(30):
        preds = [v for v in others if rng.random() < 0.5]
        assert best_remaining(cache9, X, preds) == linear_best(cache9, X, preds).score


# -- k-G --------------------------------------------------------------------


def _chain_network_data(rng, n, N):
    """Each node depends strongly on its two predecessors (treewidth 2)."""
    cells = np.zeros((N, n), dtype=int)
    cells[:, 0] = rng.integers(0, 2, N)
    cells[:, 1] = cells[:, 0] ^ (rng.random(N) < 0.2)
    for j in range(2, n):
        noise = rng.random(N) < 0.1
        cells[:, j] = (cells[:, j - 1] ^ cells[:, j - 2]) ^ noise
    return CategoricalTable(cells), [()] + [(0,)] + [(j - 2, j - 1) for j in range(2, n)]


def test_kg_recovers_generator_score(rng):
    t, parents = _chain_network_data(rng, 8, 10000)
    c = build_cache(t, 2)
    gen = math.fsum(bic(t, v, ps) for v, ps in enumerate(parents))
    dag = kg_learn(list(range(8)), c, 2)
    assert dag.total_score >= gen - 1e-6
    _check_output(dag, c, 2)


def test_kg_independent_empty(rng):
    c = build_cache(CategoricalTable(rng.integers(0, 2, (50000, 6))), 2)
    for _ in range(3):
        assert kg_learn(rng.permutation(6), c, 2).arcs() == []


def test_large_k_reduces_to_exact(rng):
    c = build_cache(random_table(rng, 5, 300), 4)
    reg = anytime_learn("kg", c, 4, max_iterations=3, rng=rng)
    assert reg.best_score == exact_learn(c).total_score
    with pytest.raises(ValueError):
        kg_learn(list(range(5)), c, 4)


# -- k-A* -------------------------------------------------------------------


def test_kastar_matches_dfs_oracle(rng):
    for _ in range(8):
        n = int(rng.integers(5, 9))
        c = build_cache(random_table(rng, n, int(rng.integers(100, 1000))), 2)
        order = [int(v) for v in rng.permutation(n)]
        init = brute_force_learn(c, order[:3])
        want = clique_dfs_best(order, c, 2, init.parents, init.scores)
        got = kastar_learn(order, c, 2, debug=True)
        assert got.info["optimal"]
        assert got.total_score == want
        _check_output(got, c, 2)


def test_kastar_not_worse_than_kg(cache9, rng):
    for _ in range(10):
        o = rng.permutation(9)
        a, g = kastar_learn(o, cache9, 2), kg_learn(o, cache9, 2)
        assert a.total_score >= g.total_score


def test_kastar_single_chain_equals_greedy(rng):
    # with n = k + 2 the only choice is which k-clique the last vertex joins
    c = build_cache(random_table(rng, 5, 400), 3)
    o = list(rng.permutation(5))
    assert kastar_learn(o, c, 3).total_score == kg_learn(o, c, 3).total_score


def test_kastar_budget_exhaustion(cache9, rng):
    o = rng.permutation(9)
    dag = kastar_learn(o, cache9, 2, node_budget=3)
    _check_output(dag, cache9, 2)
    full = kastar_learn(o, cache9, 2)
    assert dag.total_score <= full.total_score
    assert dag.total_score >= kg_learn(o, cache9, 2).total_score
    if not dag.info["optimal"]:
        assert dag.info["generated"] >= 3


def test_heuristic_admissible_on_replay(cache9, rng):
    for _ in range(10):
        order = [int(v) for v in rng.permutation(9)]
        dag = kastar_learn(order, cache9, 2)
        h, _ = _suffix_bounds(order, cache9, 2)
        rest = order[3:]
        for i in range(len(rest) + 1):
            achieved = -math.fsum(dag.scores[v] for v in rest[i:])
            assert h[i] <= achieved + 1e-9


def test_order_equivalence_of_head(cache9, rng):
    for _ in range(5):
        o = [int(v) for v in rng.permutation(9)]
        head = o[:3]
        for perm in itertools.permutations(head):
            o2 = list(perm) + o[3:]
            assert kg_learn(o2, cache9, 2).total_score == kg_learn(o, cache9, 2).total_score
            assert kastar_learn(o2, cache9, 2).total_score == kastar_learn(o, cache9, 2).total_score


# -- anytime loop -----------------------------------------------------------


@pytest.mark.parametrize("method", ["kg", "kastar"])
def test_anytime_deterministic(cache9, method):
    a = anytime_learn(method, cache9, 2, max_iterations=15, rng=np.random.default_rng(3))
    b = anytime_learn(method, cache9, 2, max_iterations=15, rng=np.random.default_rng(3))
    assert a.best_dag == b.best_dag and a.scores == b.scores


def test_anytime_register_invariants(cache9):
    reg = anytime_learn("kg", cache9, 2, max_iterations=40, rng=np.random.default_rng(1))
    assert reg.iterations == 40 == len(reg.scores)
    assert all(x <= y for x, y in zip(reg.history, reg.history[1:]))
    assert reg.median <= reg.max <= reg.best_score
    assert reg.best_score == max(reg.scores)
    _check_output(reg.best_dag, cache9, 2)


def test_anytime_workers_match_serial(cache9):
    a = anytime_learn("kg", cache9, 2, max_iterations=12, rng=np.random.default_rng(5))
    b = anytime_learn("kg", cache9, 2, max_iterations=12, rng=np.random.default_rng(5), workers=2)
    assert a.scores == b.scores and a.best_dag == b.best_dag


def test_anytime_zero_budget(cache9, caplog):
    with caplog.at_level(logging.WARNING):
        reg = anytime_learn("kg", cache9, 2, time_budget=0.0)
    assert reg.iterations == 0
    assert reg.best_dag.arcs() == []
    assert "empty DAG" in caplog.text


def test_anytime_rejects_bad_args(cache9):
    with pytest.raises(ValueError):
        anytime_learn("kg", cache9, 2)
    with pytest.raises(ValueError):
        anytime_learn("nope", cache9, 2, max_iterations=1)


def test_kg_outpaces_kastar_per_second():
    rng = np.random.default_rng(11)
    c = build_cache(random_table(rng, 40, 1000), 2)
    kg = anytime_learn("kg", c, 2, time_budget=1.0, rng=np.random.default_rng(0))
    ka = anytime_learn("kastar", c, 2, time_budget=1.0, rng=np.random.default_rng(0),
                       node_budget=10 ** 5)
    assert kg.iterations > ka.iterations
