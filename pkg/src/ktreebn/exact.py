"""Exact structure optimisation over cached scores for small variable sets."""

import itertools

import numpy as np

from . import _backend
from ._fallback import best_tables
from .graph import Dag, find_cycle
from .scoring import exact_int

MAX_EXACT_VARS = 20
# up to this many variables the DP sums exact integers instead of doubles
EXACT_INT_VARS = 12


class TooManyVariables(ValueError):
    pass


def exact_from_lists(n, lists, V, max_vars=MAX_EXACT_VARS):
    """Best DAG over ``V`` where node ``x`` picks from ``lists[x]``.

    ``lists[x]`` is a preference-ordered sequence of ScoredParentSet; only
    sets inside ``V`` are usable and the empty set must be among them.
    Returns a Dag on ``n`` vertices covering ``V``.
    """
    V = sorted(V)
    m = len(V)
    if m > max_vars:
        raise TooManyVariables(f"exact learning is capped at {max_vars} variables, got {m}")
    if m == 0:
        raise ValueError("empty variable set")
    pos = {v: i for i, v in enumerate(V)}
    ptr = [0]
    masks, scores, sets = [], [], []
    for x in V:
        xi = pos[x]
        has_empty = False
        for sp in lists[x]:
            if any(p not in pos for p in sp.parents):
                continue
            mask = 0
            for p in sp.parents:
                pi = pos[p]
                mask |= 1 << (pi if pi < xi else pi - 1)
            masks.append(mask)
            scores.append(sp.score)
            sets.append(sp)
            has_empty |= not sp.parents
        if not has_empty:
            raise ValueError(f"variable {x} has no empty parent set")
        ptr.append(len(masks))
    ptr = np.asarray(ptr, dtype=np.int64)
    masks = np.asarray(masks, dtype=np.int64)
    if m <= EXACT_INT_VARS:
        choice, sinks = _int_dp(m, ptr, masks, scores)
    else:
        choice, sinks, _ = _backend.impl.exact_dp(m, ptr, masks, np.asarray(scores, dtype=np.float64))
    parents = [()] * n
    node_scores = [None] * n
    for i, x in enumerate(V):
        sp = sets[choice[i]]
        parents[x] = sp.parents
        node_scores[x] = sp.score
    outside = [v for v in range(n) if v not in pos]
    # sinks come out last-to-first: a reverse topological order over V
    certificate = outside + [V[i] for i in sinks]
    return Dag(parents, node_scores, nodes=V, certificate=certificate)


def _int_dp(m, ptr, masks, scores):
    """Subset DP over exact integer scores; same outputs as ``exact_dp``."""
    tbls = [t.tolist() for t in best_tables(m, ptr, masks)]
    ex = [exact_int(s) for s in scores]
    full = (1 << m) - 1
    best = [None] * (full + 1)
    sink = [-1] * (full + 1)
    best[0] = 0
    for S in sorted(range(1, full + 1), key=int.bit_count):
        b = None
        for x in range(m):
            bit = 1 << x
            if not S & bit:
                continue
            R = S ^ bit
            c = best[R] + ex[tbls[x][((R >> (x + 1)) << x) | (R & (bit - 1))]]
            if b is None or c > b:
                b, sink[S] = c, x
        best[S] = b
    choice = [0] * m
    sinks = []
    S = full
    while S:
        x = sink[S]
        bit = 1 << x
        R = S ^ bit
        choice[x] = tbls[x][((R >> (x + 1)) << x) | (R & (bit - 1))]
        sinks.append(x)
        S = R
    return choice, sinks


def exact_learn(cache, V=None, max_vars=MAX_EXACT_VARS):
    """Highest-scoring DAG over ``V`` (default: all variables) given the cache."""
    V = range(cache.n) if V is None else V
    return exact_from_lists(cache.n, cache.sets, V, max_vars)


def _dag_key(parents, V):
    return tuple(parents[v] for v in V)


def brute_force_learn(cache, V=None):
    """Enumerate every labelled DAG over ``V`` (|V| <= 5); test oracle only."""
    V = sorted(range(cache.n) if V is None else V)
    if len(V) > 5:
        raise TooManyVariables("brute force is limited to 5 variables")
    lookup = [{sp.parents: sp.score for sp in lst} for lst in cache.sets]
    pairs = list(itertools.combinations(V, 2))
    # compares exact sums so equivalent DAGs tie only when truly equal
    best, best_key, best_parents = None, None, None
    for orient in itertools.product((0, 1, 2), repeat=len(pairs)):
        ps = {v: [] for v in V}
        for (a, b), o in zip(pairs, orient):
            if o == 1:
                ps[b].append(a)
            elif o == 2:
                ps[a].append(b)
        local = []
        for v in V:
            s = lookup[v].get(tuple(sorted(ps[v])))
            if s is None:
                break
            local.append(s)
        else:
            parents = [()] * cache.n
            for v in V:
                parents[v] = tuple(sorted(ps[v]))
            if find_cycle(parents) is not None:
                continue
            total = sum(exact_int(s) for s in local)
            key = _dag_key(parents, V)
            if best is None or total > best or (total == best and key < best_key):
                best, best_key, best_parents = total, key, parents
    scores = [None] * cache.n
    for v in V:
        scores[v] = lookup[v][best_parents[v]]
    return Dag(best_parents, scores, nodes=V)
