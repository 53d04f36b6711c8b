import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktreebn.baseline import (_acceptance, _mi_clique, dag_in_ktree, greedy_ktree, i_score,
                              informative_score, pairwise_mi_matrix, s2_learn, s2plus_learn,
                              s_l, s_mi, sample_ktree)
from ktreebn.dataset import CategoricalTable
from ktreebn.exact import brute_force_learn, exact_learn
from ktreebn.graph import is_moral_subgraph, ktree_add, ktree_init, verify_treewidth_le
from ktreebn.scoring import ScoreCache, build_cache

from conftest import random_table
from oracles import histogram_mi


def _is_clique(kt, vs):
    return all(b in kt.adj[a] for a, b in itertools.combinations(vs, 2))


def _s_l_oracle(kt, cache):
    return math.fsum(max(sp.score for sp in cache.sets[v] if _is_clique(kt, (v,) + sp.parents))
                     for v in range(cache.n))


def _feasible_cache(kt, cache):
    return ScoreCache([[sp for sp in cache.sets[v] if _is_clique(kt, (v,) + sp.parents)]
                       for v in range(cache.n)])


@pytest.fixture(scope="module")
def cache7():
    rng = np.random.default_rng(21)
    return build_cache(random_table(rng, 7, 600), 3)


def test_mi_matrix(cache7, small_table):
    mi = pairwise_mi_matrix(cache7)
    assert np.allclose(mi, mi.T)
    assert np.all(np.diag(mi) == 0)
    assert np.all(mi >= -1e-9)
    c = build_cache(small_table, 2)
    mi = pairwise_mi_matrix(c)
    for a, b in itertools.combinations(range(small_table.n), 2):
        assert mi[a, b] == pytest.approx(histogram_mi(small_table, a, b), abs=1e-7)


def test_mi_matrix_needs_statistics(cache7):
    bare = ScoreCache(cache7.sets)
    with pytest.raises(ValueError):
        pairwise_mi_matrix(bare)


def test_s_mi_and_s_l_against_oracles(cache7, rng):
    mi = pairwise_mi_matrix(cache7)
    for k in (1, 2, 3):
        for _ in range(10):
            kt = sample_ktree(rng, 7, k)
            want = math.fsum(mi[a, b] for a, b in itertools.combinations(range(7), 2) if b in kt.adj[a])
            assert s_mi(kt, mi) == pytest.approx(want, rel=1e-12)
            assert s_l(kt, cache7) == pytest.approx(_s_l_oracle(kt, cache7), rel=1e-12)


def test_i_score_values():
    assert i_score(5.0, -10.0) == 0.5
    assert i_score(5.0, 0.0) == 0.0


@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_sample_ktree_invariants(n, k, seed):
    if n < k + 1:
        return
    kt = sample_ktree(np.random.default_rng(seed), n, k)
    assert sorted(kt.vertices) == list(range(n))
    assert len(kt.edges()) == k * (k + 1) // 2 + (n - k - 1) * k
    # every registered k-clique and every big clique is complete
    assert all(_is_clique(kt, c) for c in kt.cliques)
    assert all(_is_clique(kt, c) for c in kt.big)


def test_sample_ktree_covers_several_trees():
    rng = np.random.default_rng(0)
    seen = {frozenset(sample_ktree(rng, 6, 2).edges()) for _ in range(200)}
    assert len(seen) > 20


def test_dag_in_ktree_matches_brute_force(rng):
    for _ in range(10):
        c = build_cache(random_table(rng, 5, 400), 3)
        kt = sample_ktree(rng, 5, 2)
        dag = dag_in_ktree(kt, c)
        want = brute_force_learn(_feasible_cache(kt, c))
        assert dag.total_score == want.total_score
        assert is_moral_subgraph(dag, kt)
        assert verify_treewidth_le(dag, 2).ok


def test_dag_in_ktree_order_mode(cache7, rng):
    kt = sample_ktree(rng, 7, 2)
    exact = dag_in_ktree(kt, cache7)
    approx = dag_in_ktree(kt, cache7, budget=4, rng=rng, exact_threshold=3)
    assert approx.info["method"] == "orders"
    assert approx.total_score <= exact.total_score
    assert is_moral_subgraph(approx, kt)
    assert verify_treewidth_le(approx, 2).ok


def test_complete_ktree_equals_exact(rng):
    c = build_cache(random_table(rng, 5, 500), 4)
    kt = ktree_init(range(5))
    assert dag_in_ktree(kt, c).total_score == exact_learn(c).total_score


def test_greedy_ktree_beats_random():
    rng = np.random.default_rng(3)
    wins = 0
    for _ in range(100):
        c = build_cache(random_table(rng, 7, 300), 2)
        mi = pairwise_mi_matrix(c)
        _, parts = greedy_ktree(c, 2, _mi_clique(mi, 2), mi)
        rand = informative_score(sample_ktree(rng, 7, 2), c, mi)
        wins += parts.i_score >= rand.i_score
    assert wins >= 90


def test_greedy_ktree_parts_consistent(cache7):
    mi = pairwise_mi_matrix(cache7)
    kt, parts = greedy_ktree(cache7, 2, [0, 1, 2], mi)
    again = informative_score(kt, cache7, mi)
    assert parts.s_mi == pytest.approx(again.s_mi, rel=1e-12)
    assert parts.s_l == pytest.approx(again.s_l, rel=1e-12)


def test_acceptance_rule():
    assert _acceptance(0.3, None) == 1.0
    assert _acceptance(0.3, 0.6) == 0.5
    assert _acceptance(0.9, 0.6) == 1.0
    assert _acceptance(0.3, 0.0) == 1.0


def test_informative_score_relabel_invariant(rng):
    t = random_table(rng, 6, 400)
    perm = rng.permutation(6)
    t2 = CategoricalTable(t.cells[:, np.argsort(perm)])  # new column perm[i] holds old i
    c, c2 = build_cache(t, 2), build_cache(t2, 2)
    kt = sample_ktree(rng, 6, 2)
    kt2 = ktree_init([int(perm[v]) for v in kt.order[:3]], capacity=6)
    for v, cl in zip(kt.order[3:], kt.attach):
        kt2 = ktree_add(kt2, int(perm[v]), tuple(sorted(int(perm[a]) for a in cl)))
    a, b = informative_score(kt, c), informative_score(kt2, c2)
    assert a.s_mi == pytest.approx(b.s_mi, rel=1e-12)
    assert a.s_l == pytest.approx(b.s_l, rel=1e-12)


@pytest.mark.parametrize("fn", [s2_learn, s2plus_learn])
def test_baselines_deterministic_and_bounded(cache7, fn):
    a = fn(cache7, 2, max_iterations=6, rng=np.random.default_rng(4))
    b = fn(cache7, 2, max_iterations=6, rng=np.random.default_rng(4))
    assert a.iterations == 6
    assert a.best_dag == b.best_dag and a.scores == b.scores
    assert 1 <= a.accepted <= 6 and len(a.scores) == a.accepted
    assert verify_treewidth_le(a.best_dag, 2).ok
    assert is_moral_subgraph(a.best_dag, a.best_dag.ktree)


def test_s2_workers_match_serial(cache7):
    a = s2_learn(cache7, 2, max_iterations=10, rng=np.random.default_rng(8))
    b = s2_learn(cache7, 2, max_iterations=10, rng=np.random.default_rng(8), workers=2)
    assert a.scores == b.scores


def test_baseline_zero_budget(cache7):
    reg = s2_learn(cache7, 2, time_budget=0.0)
    assert reg.iterations == 0 and reg.best_dag.arcs() == []
    with pytest.raises(ValueError):
        s2plus_learn(cache7, 2)
