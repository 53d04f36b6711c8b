"""Independent reference implementations used only by the tests."""

import itertools
import math
from collections import Counter


def naive_counts(table, target, parents):
    cells = table.cells
    out = Counter()
    for row in cells:
        out[(tuple(int(row[p]) for p in parents), int(row[target]))] += 1
    return out


def naive_ll(table, X, parents):
    joint = naive_counts(table, X, parents)
    marg = Counter()
    for (cfg, _), c in joint.items():
        marg[cfg] += c
    return math.fsum(c * math.log(c / marg[cfg]) for (cfg, _), c in joint.items())


def naive_pen(N, cx, parent_cards):
    q = 1
    for c in parent_cards:
        q *= c
    return -(math.log(N) / 2) * (cx - 1) * q


def naive_bic(table, X, parents):
    return naive_ll(table, X, parents) + naive_pen(table.N, table.cardinalities[X],
                                                   [table.cardinalities[p] for p in parents])


def histogram_mi(table, X, Y):
    """N times the empirical mutual information in nats."""
    N = table.N
    cells = table.cells
    pxy = Counter((int(r[X]), int(r[Y])) for r in cells)
    px = Counter(int(r[X]) for r in cells)
    py = Counter(int(r[Y]) for r in cells)
    return N * math.fsum((c / N) * math.log((c / N) / ((px[a] / N) * (py[b] / N)))
                         for (a, b), c in pxy.items())


def linear_best(cache, X, allowed):
    allowed = set(allowed)
    for sp in cache.sets[X]:
        if set(sp.parents) <= allowed:
            return sp
    raise AssertionError("no feasible set")


def clique_dfs_best(order, cache, k, init_parents, init_scores):
    """Exhaustive search over every k-clique choice sequence for ``order``.

    k-cliques are kept as frozensets in a plain list; each step tries every
    clique, gives the variable its best set inside it (linear scan) and
    registers the k new cliques.  Returns the best total score.
    """
    head = order[:k + 1]
    rest = order[k + 1:]
    base = [init_scores[v] for v in head]
    roster0 = [frozenset(c) for c in itertools.combinations(sorted(head), k)]
    best = [-math.inf]

    def rec(i, roster, acc):
        if i == len(rest):
            total = math.fsum(base + acc)
            if total > best[0]:
                best[0] = total
            return
        x = rest[i]
        for c in roster:
            sp = linear_best(cache, x, c)
            new = [frozenset(c - {m} | {x}) for m in c]
            rec(i + 1, roster + new, acc + [sp.score])

    rec(0, roster0, [])
    return best[0]
