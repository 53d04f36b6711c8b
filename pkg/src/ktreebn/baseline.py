"""k-tree-first baselines: sample or grow a k-tree, then fit a DAG inside it.

Both rank k-trees by the informative score IS = S_mi / |S_l|, where S_mi
sums pairwise mutual information over k-tree edges and S_l is the best
acyclicity-relaxed score whose parent sets respect the k-tree.
"""

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple

import numpy as np

from . import _backend
from .exact import exact_from_lists, exact_learn
from .graph import Dag, ktree_add, ktree_init
from .search import BestRegister, _finish

EXACT_THRESHOLD = 18
DEFAULT_DAG_ORDERS = 8


class InformativeScoreParts(NamedTuple):
    s_mi: float
    s_l: float
    i_score: float


def pairwise_mi_matrix(cache):
    if cache.mi is None:
        raise ValueError("cache carries no pairwise statistics; rebuild it from data")
    mi = np.asarray(cache.mi, dtype=np.float64)
    out = (mi + mi.T) / 2.0
    np.fill_diagonal(out, 0.0)
    return out


def s_mi(ktree, mi):
    """Sum of I_ij over k-tree edges, each unordered pair once."""
    return math.fsum(mi[u, v] for u, v in ktree.edges())


def _first_flagged(packed, flags):
    vptr = packed.var_ptr
    out = []
    for v in range(len(vptr) - 1):
        seg = flags[vptr[v]:vptr[v + 1]]
        out.append(int(vptr[v] + np.argmax(seg)))
    return out


def s_l(ktree, cache):
    """Sum over variables of the best cached score whose parents, together with
    the variable, form a clique of the k-tree."""
    packed = cache.packed
    flags = _backend.impl.feasible_flags(packed, ktree, ktree.k)
    return math.fsum(float(packed.scores[i]) for i in _first_flagged(packed, flags))


def i_score(s_mi_value, s_l_value):
    if s_l_value == 0.0:
        return 0.0
    return s_mi_value / abs(s_l_value)


def informative_score(ktree, cache, mi=None):
    mi = pairwise_mi_matrix(cache) if mi is None else mi
    a, b = s_mi(ktree, mi), s_l(ktree, cache)
    return InformativeScoreParts(a, b, i_score(a, b))


def sample_ktree(rng, n, k):
    """Random initial (k+1)-set, then each remaining vertex (random order)
    attached to a uniformly drawn registered k-clique.  Not uniform over
    k-trees."""
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} vertices, got {n}")
    perm = [int(v) for v in rng.permutation(n)]
    t = ktree_init(perm[:k + 1], capacity=n)
    for z in perm[k + 1:]:
        t = ktree_add(t, z, t.cliques[int(rng.integers(len(t.cliques)))])
    return t


def dag_in_ktree(ktree, cache, budget=DEFAULT_DAG_ORDERS, rng=None,
                 exact_threshold=EXACT_THRESHOLD):
    """Best DAG whose moral graph lies inside ``ktree``.

    Exact (subset DP over feasible sets) up to ``exact_threshold`` variables;
    beyond that, the best of ``budget`` random orders where each variable
    takes its best feasible set among its predecessors.
    """
    n = cache.n
    packed = cache.packed
    impl = _backend.impl
    flags = impl.feasible_flags(packed, ktree, ktree.k)
    if n <= exact_threshold:
        lists = [[sp for sp, ok in zip(cache.sets[v], flags[packed.var_ptr[v]:packed.var_ptr[v + 1]])
                  if ok] for v in range(n)]
        dag = exact_from_lists(n, lists, range(n), max_vars=max(exact_threshold, 1))
        dag.certificate = ktree.elimination_order()
        dag.ktree = ktree
        dag.info["method"] = "exact"
        return dag
    rng = rng if rng is not None else np.random.default_rng(0)
    best = None
    for _ in range(max(1, budget)):
        order = rng.permutation(n)
        mask = bytearray(n)
        parents = [()] * n
        scores = [0.0] * n
        for v in order:
            v = int(v)
            i = impl.first_subset(packed, int(packed.var_ptr[v]), int(packed.var_ptr[v + 1]),
                                  mask, flags)
            parents[v], scores[v] = packed.py_sets[i], float(packed.scores[i])
            mask[v] = 1
        total = math.fsum(scores)
        if best is None or total > best[0]:
            best = (total, parents, scores)
    dag = Dag(best[1], best[2], certificate=ktree.elimination_order())
    dag.ktree = ktree
    dag.info["method"] = "orders"
    return dag


def _acceptance(is_value, is_best):
    if is_best is None or is_best <= 0.0:
        return 1.0
    return min(1.0, is_value / is_best)


def _dag_job(args):
    ktree, cache, budget, seed, threshold = args
    return dag_in_ktree(ktree, cache, budget, np.random.default_rng(seed), threshold)


class _Runner:
    """Runs dag_in_ktree inline or on a pool; results come back in submission order."""

    def __init__(self, cache, workers, budget, threshold):
        self.cache, self.budget, self.threshold = cache, budget, threshold
        self.pool = ProcessPoolExecutor(workers) if workers > 1 else None
        self.pending = []
        self.batch = workers * 4

    def submit(self, ktree, seed):
        self.pending.append((ktree, self.cache, self.budget, seed, self.threshold))
        if self.pool is None or len(self.pending) >= self.batch:
            return self.flush()
        return []

    def flush(self):
        jobs, self.pending = self.pending, []
        if not jobs:
            return []
        if self.pool is None:
            return [_dag_job(j) for j in jobs]
        return list(self.pool.map(_dag_job, jobs))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _record(reg, dags, method, on_solution):
    for d in dags:
        d.info["method"] = method
        reg.update(d, count=False)
        if on_solution:
            on_solution(d)


def _tiny(cache, method, reg, on_solution):
    dag = exact_learn(cache)
    reg.iterations += 1
    _record(reg, [dag], method, on_solution)


def s2_learn(cache, k, time_budget=None, max_iterations=None, rng=None, workers=1,
             dag_budget=DEFAULT_DAG_ORDERS, exact_threshold=EXACT_THRESHOLD, on_solution=None):
    """Sample k-trees; accept each with probability min(1, IS / IS*) against
    the best IS seen so far and fit a DAG inside accepted ones.

    ``iterations`` in the returned register counts sampled k-trees.
    """
    if time_budget is None and max_iterations is None:
        raise ValueError("need a time or iteration budget")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = cache.n
    mi = pairwise_mi_matrix(cache)
    reg = BestRegister()
    start = time.monotonic()

    def out_of_budget():
        if max_iterations is not None and reg.iterations >= max_iterations:
            return True
        return time_budget is not None and time.monotonic() - start >= time_budget

    if n <= k + 1:
        if not out_of_budget():
            _tiny(cache, "s2", reg, on_solution)
        return _finish(reg, cache, start)

    runner = _Runner(cache, workers, dag_budget, exact_threshold)
    is_best = None
    accepted = 0
    try:
        while not out_of_budget():
            t = sample_ktree(rng, n, k)
            reg.iterations += 1
            val = informative_score(t, cache, mi).i_score
            alpha = _acceptance(val, is_best)
            if alpha < 1.0 and rng.random() >= alpha:
                continue
            if is_best is None or val > is_best:
                is_best = val
            accepted += 1
            _record(reg, runner.submit(t, int(rng.integers(2 ** 63))), "s2", on_solution)
        _record(reg, runner.flush(), "s2", on_solution)
    finally:
        runner.close()
    reg.accepted = accepted
    return _finish(reg, cache, start)


# ---------------------------------------------------------------------------
# S2+: greedy informative-score growth


def _mi_clique(mi, k):
    """k+1 variables with large pairwise MI: best pair, then greedy additions."""
    n = mi.shape[0]
    iu = np.triu_indices(n, 1)
    j = int(np.argmax(mi[iu]))
    chosen = [int(iu[0][j]), int(iu[1][j])]
    while len(chosen) < k + 1:
        gain = mi[:, chosen].sum(axis=1)
        gain[chosen] = -np.inf
        chosen.append(int(np.argmax(gain)))
    return sorted(chosen)


def greedy_ktree(cache, k, first_clique, mi=None):
    """Grow a k-tree from ``first_clique`` by repeatedly adding the (vertex,
    k-clique) pair that maximises the informative score of the result.

    Returns ``(ktree, InformativeScoreParts)``.
    """
    mi = pairwise_mi_matrix(cache) if mi is None else mi
    n = cache.n
    memo = {}
    mask = bytearray(n)

    def best(x, allowed):
        key = (x, allowed)
        r = memo.get(key)
        if r is None:
            for a in allowed:
                mask[a] = 1
            r = cache.best_within(x, mask).score
            for a in allowed:
                mask[a] = 0
            memo[key] = r
        return r

    t = ktree_init(first_clique, capacity=n)
    clique = t.big[0]
    cur = {c: best(c, tuple(a for a in clique if a != c)) for c in clique}
    smi = math.fsum(mi[a, b] for a, b in itertools.combinations(clique, 2))
    sl = math.fsum(cur.values())
    remaining = [v for v in range(n) if not t.present[v]]
    while remaining:
        rem = np.asarray(remaining)
        top = None
        for C in t.cliques:
            dmi = mi[rem][:, list(C)].sum(axis=1)
            for j, v in enumerate(remaining):
                dv = best(v, C)
                dc = 0.0
                for c in C:
                    allowed = tuple(sorted(set(C) - {c} | {v}))
                    gain = best(c, allowed) - cur[c]
                    if gain > 0:
                        dc += gain
                new_l = sl + dv + dc
                val = i_score(smi + float(dmi[j]), new_l)
                if top is None or val > top[0]:
                    top = (val, v, C, float(dmi[j]), dv)
        _, v, C, dmi_v, dv = top
        ktree_add(t, v, C)
        for c in C:
            cur[c] = max(cur[c], best(c, tuple(sorted(set(C) - {c} | {v}))))
        cur[v] = dv
        smi += dmi_v
        sl = math.fsum(cur.values())
        remaining.remove(v)
    return t, InformativeScoreParts(smi, sl, i_score(smi, sl))


def s2plus_learn(cache, k, time_budget=None, max_iterations=None, rng=None, workers=1,
                 dag_budget=DEFAULT_DAG_ORDERS, exact_threshold=EXACT_THRESHOLD, on_solution=None):
    """First k-tree grown greedily from a high-MI clique, later ones from
    random initial cliques; same acceptance rule and DAG fitting as S2.

    ``iterations`` counts constructed k-trees.
    """
    if time_budget is None and max_iterations is None:
        raise ValueError("need a time or iteration budget")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = cache.n
    mi = pairwise_mi_matrix(cache)
    reg = BestRegister()
    start = time.monotonic()

    def out_of_budget():
        if max_iterations is not None and reg.iterations >= max_iterations:
            return True
        return time_budget is not None and time.monotonic() - start >= time_budget

    if n <= k + 1:
        if not out_of_budget():
            _tiny(cache, "s2plus", reg, on_solution)
        return _finish(reg, cache, start)

    runner = _Runner(cache, workers, dag_budget, exact_threshold)
    is_best = None
    accepted = 0
    try:
        while not out_of_budget():
            if reg.iterations == 0:
                first = _mi_clique(mi, k)
            else:
                first = sorted(int(v) for v in rng.choice(n, k + 1, replace=False))
            t, parts = greedy_ktree(cache, k, first, mi)
            reg.iterations += 1
            alpha = _acceptance(parts.i_score, is_best)
            if alpha < 1.0 and rng.random() >= alpha:
                continue
            if is_best is None or parts.i_score > is_best:
                is_best = parts.i_score
            accepted += 1
            _record(reg, runner.submit(t, int(rng.integers(2 ** 63))), "s2plus", on_solution)
        _record(reg, runner.flush(), "s2plus", on_solution)
    finally:
        runner.close()
    reg.accepted = accepted
    return _finish(reg, cache, start)
