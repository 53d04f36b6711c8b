"""Order-sampling anytime search with the k-G and k-A* inner optimisers.

For a sampled order the first k+1 variables are solved exactly and form the
initial clique; each later variable gets a parent set inside one registered
k-clique of the growing k-tree and is attached to that clique.
"""

import hashlib
import heapq
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .exact import exact_learn
from .graph import Dag, ktree_add, ktree_init
from .scoring import exact_int

log = logging.getLogger(__name__)

DEFAULT_NODE_BUDGET = 10 ** 6
DEFAULT_COMPLETIONS = 64


# ---------------------------------------------------------------------------
# Orders


def canonical_key(order, k):
    order = list(order)
    return tuple(sorted(order[:k + 1])) + tuple(order[k + 1:])


def _digest(key):
    return hashlib.blake2b(np.asarray(key, dtype=np.int64).tobytes(), digest_size=16).digest()


def equivalence_classes(n, k):
    """Number of distinct orders once the first k+1 positions are unordered."""
    if n <= k + 1:
        return 1
    return math.factorial(n) // math.factorial(k + 1)


def sample_order(rng, n, k, seen):
    """Uniform random permutation, or None if its class was already seen."""
    order = [int(v) for v in rng.permutation(n)]
    d = _digest(canonical_key(order, k))
    if d in seen:
        return None
    seen.add(d)
    return order


# ---------------------------------------------------------------------------
# Shared pieces


def init_structure(order, cache, k, memo=None):
    """Exact DAG over the first k+1 variables and their clique k-tree."""
    head = tuple(sorted(order[:k + 1]))
    if len(order) < k + 2:
        raise ValueError("all variables fit in the initial clique; solve exactly instead")
    dag = memo.get(head) if memo is not None else None
    if dag is None:
        dag = exact_learn(cache, head)
        if memo is not None:
            if len(memo) > 4096:
                memo.clear()
            memo[head] = dag
    return dag, ktree_init(head, capacity=cache.n)


def best_remaining(cache, X, predecessors):
    mask = bytearray(cache.n)
    for p in predecessors:
        mask[p] = 1
    return cache.best_within(X, mask).score


def _suffix_bounds(order, cache, k):
    """h[i]: summed negated best scores of order[k+1+i:], order-constrained only."""
    n = len(order)
    mask = bytearray(n)
    for v in order[:k + 1]:
        mask[v] = 1
    best = []
    for v in order[k + 1:]:
        best.append(-cache.best_within(v, mask).score)
        mask[v] = 1
    h = [0.0] * (len(best) + 1)
    for i in range(len(best) - 1, -1, -1):
        h[i] = h[i + 1] + best[i]
    return h, best


def _assemble(order, cache, k, init_dag, chosen, ktree):
    parents = list(init_dag.parents)
    scores = [init_dag.scores[v] for v in range(cache.n)]
    for v, sp in chosen:
        parents[v] = sp.parents
        scores[v] = sp.score
    dag = Dag(parents, scores, certificate=tuple(reversed(order)))
    dag.ktree = ktree
    return dag


def _greedy_extend(order, cache, k, start, ktree):
    """k-G from position ``start`` of ``order`` on ``ktree`` (mutated)."""
    packed = cache.packed
    impl = _backend.impl
    chosen = []
    for v in order[start:]:
        i = impl.first_clique(packed, int(packed.var_ptr[v]), int(packed.var_ptr[v + 1]),
                              ktree, -1, k)
        ps = packed.py_sets[i]
        chosen.append((v, _SP(ps, float(packed.scores[i]))))
        ktree_add(ktree, v, ktree.clique_containing(ps))
    return chosen


class _SP:
    __slots__ = ("parents", "score")

    def __init__(self, parents, score):
        self.parents, self.score = parents, score


# ---------------------------------------------------------------------------
# k-G


def kg_learn(order, cache, k, memo=None):
    """Greedy: each variable takes its best cached set lying in a registered
    k-clique, then joins the first such clique in roster order."""
    order = [int(v) for v in order]
    init_dag, ktree = init_structure(order, cache, k, memo)
    chosen = _greedy_extend(order, cache, k, k + 1, ktree)
    dag = _assemble(order, cache, k, init_dag, chosen, ktree)
    dag.info["method"] = "kg"
    return dag


# ---------------------------------------------------------------------------
# k-A*


class _Node:
    __slots__ = ("parent", "depth", "g", "clique", "sp")

    def __init__(self, parent, depth, g, clique, sp):
        self.parent, self.depth, self.g = parent, depth, g
        self.clique, self.sp = clique, sp


def _path(node):
    out = []
    while node is not None and node.clique is not None:
        out.append(node)
        node = node.parent
    out.reverse()
    return out


def _replay(path, rest, ktree0):
    kt = ktree0.copy()
    chosen = []
    for p in path:
        v = rest[p.depth - 1]
        chosen.append((v, p.sp))
        ktree_add(kt, v, p.clique)
    return chosen, kt


def kastar_learn(order, cache, k, node_budget=DEFAULT_NODE_BUDGET, memo=None, debug=False,
                 completions=DEFAULT_COMPLETIONS):
    """Best-first search over k-clique choices for a fixed order.

    Costs are negated local scores; the heuristic sums each remaining
    variable's best set among its predecessors, ignoring the clique
    constraint, so it is admissible and consistent.  The k-G solution seeds
    an incumbent: states whose f cannot beat it are not queued.  Once
    ``node_budget`` states have been queued, the ``completions`` best open
    states are completed greedily, the best result is kept and
    ``dag.info["optimal"]`` is False.
    """
    order = [int(v) for v in order]
    n = cache.n
    init_dag, ktree0 = init_structure(order, cache, k, memo)
    rest = order[k + 1:]
    # integer costs make path sums exact, so near-ties between equivalent
    # rosters are resolved the same way a correctly rounded total would be
    _, bests = _suffix_bounds(order, cache, k)
    h = [0] * (len(bests) + 1)
    for i in range(len(bests) - 1, -1, -1):
        h[i] = h[i + 1] + exact_int(bests[i])

    greedy_kt = ktree0.copy()
    greedy = _greedy_extend(order, cache, k, k + 1, greedy_kt)
    U = sum(exact_int(-sp.score) for _, sp in greedy)
    best = (greedy, greedy_kt)

    roster0 = list(ktree0.cliques)
    mask = bytearray(n)
    best_memo = {}

    def best_in(depth, clique):
        key = (depth, clique)
        r = best_memo.get(key)
        if r is None:
            for c in clique:
                mask[c] = 1
            sp = cache.best_within(rest[depth], mask)
            for c in clique:
                mask[c] = 0
            r = best_memo[key] = (sp, exact_int(-sp.score))
        return r

    root = _Node(None, 0, 0, None, None)
    generated = 0
    expanded = 0
    heap = [(h[0], 0, 0, root)]
    optimal = True
    goal = None
    while heap:
        f, _, _, node = heap[0]
        if f >= U:
            break
        d = node.depth
        if d == len(rest):
            goal = node
            break
        if generated >= node_budget:
            optimal = False
            break
        heapq.heappop(heap)
        expanded += 1
        roster = list(roster0)
        for p in _path(node):
            z, cl = rest[p.depth - 1], p.clique
            roster.extend(tuple(sorted(cl[:j] + cl[j + 1:] + (z,))) for j in range(len(cl)))
        for clique in roster:
            sp, cost = best_in(d, clique)
            if debug and h[d] > h[d + 1] + cost:
                raise AssertionError("inconsistent heuristic")
            g2 = node.g + cost
            f2 = g2 + h[d + 1]
            if f2 >= U:
                continue
            generated += 1
            heapq.heappush(heap, (f2, -(d + 1), generated, _Node(node, d + 1, g2, clique, sp)))

    if goal is not None:
        best = _replay(_path(goal), rest, ktree0)
    elif not optimal:
        # budget exhausted: finish the most promising open states greedily
        for _, _, _, top in heapq.nsmallest(completions, heap):
            chosen, kt = _replay(_path(top), rest, ktree0)
            chosen += _greedy_extend(order, cache, k, k + 1 + top.depth, kt)
            cost = sum(exact_int(-sp.score) for _, sp in chosen)
            if cost < U:
                U, best = cost, (chosen, kt)
    dag = _assemble(order, cache, k, init_dag, best[0], best[1])
    dag.info.update(method="kastar", optimal=optimal, expanded=expanded, generated=generated)
    return dag


# ---------------------------------------------------------------------------
# Anytime loop


@dataclass
class BestRegister:
    """Best DAG so far plus the score of every proposed solution."""

    best_dag: Dag = None
    best_score: float = -math.inf
    iterations: int = 0
    scores: list = field(default_factory=list)
    skipped: int = 0
    wall_clock: float = 0.0
    history: list = field(default_factory=list)
    accepted: int = 0

    def update(self, dag, count=True):
        s = dag.total_score
        if count:
            self.iterations += 1
        self.scores.append(s)
        if s > self.best_score:
            self.best_score, self.best_dag = s, dag
        self.history.append(self.best_score)
        return s

    @property
    def median(self):
        return statistics.median(self.scores) if self.scores else math.nan

    @property
    def max(self):
        return max(self.scores) if self.scores else math.nan


def empty_dag(cache):
    return Dag([()] * cache.n, [cache.empty_score(v) for v in range(cache.n)],
               certificate=tuple(range(cache.n)))


_WORKER = {}


def _worker_init(cache, k, method, node_budget):
    _WORKER.update(cache=cache, k=k, method=method, node_budget=node_budget, memo={})


def _worker_run(order):
    w = _WORKER
    return _inner(w["method"], order, w["cache"], w["k"], w["node_budget"], w["memo"])


def _inner(method, order, cache, k, node_budget, memo):
    if method == "kg":
        return kg_learn(order, cache, k, memo)
    if method == "kastar":
        return kastar_learn(order, cache, k, node_budget, memo)
    raise ValueError(f"unknown method {method!r}")


def anytime_learn(method, cache, k, time_budget=None, max_iterations=None, rng=None,
                  workers=1, node_budget=DEFAULT_NODE_BUDGET, on_solution=None,
                  max_consecutive_skips=10000):
    """Sample orders and run ``method`` ("kg" or "kastar") until a budget ends.

    At least one of ``time_budget`` (seconds) and ``max_iterations`` must be
    set.  With an iteration budget and a fixed seed the result does not
    depend on timing or on ``workers``.
    """
    if time_budget is None and max_iterations is None:
        raise ValueError("need a time or iteration budget")
    if method not in ("kg", "kastar"):
        raise ValueError(f"unknown method {method!r}")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = cache.n
    reg = BestRegister()
    start = time.monotonic()

    def out_of_budget():
        if max_iterations is not None and reg.iterations >= max_iterations:
            return True
        return time_budget is not None and time.monotonic() - start >= time_budget

    if n <= k + 1:
        if not out_of_budget():
            dag = exact_learn(cache)
            dag.info["method"] = method
            reg.update(dag)
            if on_solution:
                on_solution(dag)
        return _finish(reg, cache, start)

    classes = equivalence_classes(n, k)
    seen = set()
    skips = 0
    memo = {}
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(workers, initializer=_worker_init,
                                   initargs=(cache, k, method, node_budget))
    try:
        while not out_of_budget():
            if len(seen) >= classes or skips >= max_consecutive_skips:
                break
            batch = []
            want = 1 if pool is None else workers * 4
            if max_iterations is not None:
                want = min(want, max_iterations - reg.iterations)
            while len(batch) < want and len(seen) < classes and skips < max_consecutive_skips:
                order = sample_order(rng, n, k, seen)
                if order is None:
                    skips += 1
                    reg.skipped += 1
                    continue
                skips = 0
                batch.append(order)
            if pool is None:
                dags = [_inner(method, o, cache, k, node_budget, memo) for o in batch]
            else:
                dags = list(pool.map(_worker_run, batch))
            for dag in dags:
                reg.update(dag)
                if on_solution:
                    on_solution(dag)
    finally:
        if pool is not None:
            pool.shutdown()
    return _finish(reg, cache, start)


def _finish(reg, cache, start):
    if reg.best_dag is None:
        log.warning("no iteration completed within the budget; returning the empty DAG")
        reg.best_dag = empty_dag(cache)
        reg.best_score = reg.best_dag.total_score
    reg.wall_clock = time.monotonic() - start
    return reg
