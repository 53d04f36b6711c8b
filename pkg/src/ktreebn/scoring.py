"""BIC scores, pruning bounds and candidate parent-set enumeration.

All logarithms are natural.  Log-likelihoods are N-scaled:
``LL(X|P) = sum N_{x,pi} log(N_{x,pi}/N_pi)``, so mutual information and the
pruning weight ``w`` are in nats times N.
"""

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple

import numpy as np

from ._io import open_text
from . import _backend
from .dataset import DataError

log = logging.getLogger(__name__)

DEFAULT_MAX_SETS = 512


class ScoredParentSet(NamedTuple):
    parents: tuple
    score: float


EXACT_SHIFT = 1074


def exact_int(x):
    """A finite double as an exact integer multiple of 2**-1074.

    Sums of these never round, so optimisers comparing them agree on ties
    that float addition would break differently."""
    num, den = x.as_integer_ratio()
    return num << (EXACT_SHIFT - den.bit_length() + 1)


def _sort_key(sp):
    return (-sp.score, sp.parents)


# ---------------------------------------------------------------------------
# Local score components


def _ll(table, targets, parents):
    return _backend.impl.loglik(table.codes, list(targets), list(parents), table.cardinalities)


def log_likelihood(table, X, parents=()):
    parents = tuple(sorted(parents))
    if X in parents:
        raise ValueError(f"variable {X} cannot be its own parent")
    return _ll(table, (X,), parents)


def penalty(X, parents, N, cardinalities):
    """-(ln N / 2) * (|X| - 1) * prod(|parent|)."""
    q = math.prod(cardinalities[p] for p in parents)
    return -(math.log(N) / 2.0) * (cardinalities[X] - 1) * q


def bic(table, X, parents=()):
    return log_likelihood(table, X, parents) + penalty(X, parents, table.N, table.cardinalities)


def interaction_information(table, X, P1, P2):
    """Interaction information ii(X; P1; P2), per instance (divided by N).

    ``X`` may be a single variable or a collection treated as one joint
    variable, which makes the argument-order symmetry testable.
    """
    xs = (X,) if isinstance(X, (int, np.integer)) else tuple(X)
    P1, P2 = tuple(sorted(P1)), tuple(sorted(P2))
    if not P1 or not P2:
        raise ValueError("P1 and P2 must be non-empty")
    if set(P1) & set(P2) or set(xs) & (set(P1) | set(P2)):
        raise ValueError("X, P1 and P2 must be pairwise disjoint")
    both = tuple(sorted(P1 + P2))
    ll = _ll(table, xs, both) - _ll(table, xs, P1) - _ll(table, xs, P2) + _ll(table, xs, ())
    return ll / table.N


# ---------------------------------------------------------------------------
# Score cache


class PackedSets:
    """Flat CSR layout of every candidate list, consumed by the kernels."""

    def __init__(self, sets):
        self.var_ptr = np.zeros(len(sets) + 1, dtype=np.int64)
        self.py_sets = []
        scores = []
        for v, lst in enumerate(sets):
            self.var_ptr[v + 1] = self.var_ptr[v] + len(lst)
            for sp in lst:
                self.py_sets.append(sp.parents)
                scores.append(sp.score)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.set_ptr = np.zeros(len(self.py_sets) + 1, dtype=np.int64)
        np.cumsum([len(s) for s in self.py_sets], out=self.set_ptr[1:])
        self.flat = np.fromiter(itertools.chain.from_iterable(self.py_sets), dtype=np.int32,
                                count=int(self.set_ptr[-1]))


class ScoreCache:
    """Per-variable candidate parent sets plus pairwise statistics.

    ``sets[X]`` is sorted by descending score, ties broken by the
    lexicographically smaller parent tuple, and always contains ``()``.
    ``ll0``, ``mi`` and ``w`` are None for caches read from a score file.
    """

    def __init__(self, sets, names=None, N=None, cardinalities=None,
                 ll0=None, mi=None, w=None, prune_stats=None):
        self.sets = [sorted(lst, key=_sort_key) for lst in sets]
        for v, lst in enumerate(self.sets):
            if not any(sp.parents == () for sp in lst):
                raise DataError(f"variable {v} lacks the empty parent set")
        self.names = tuple(names) if names is not None else tuple(f"X{i}" for i in range(len(sets)))
        self.N = N
        self.cardinalities = tuple(cardinalities) if cardinalities is not None else None
        self.ll0, self.mi, self.w = ll0, mi, w
        self.prune_stats = prune_stats or {}
        self._packed = None
        self._lookup = None

    @property
    def n(self):
        return len(self.sets)

    @property
    def packed(self):
        if self._packed is None:
            self._packed = PackedSets(self.sets)
        return self._packed

    def score_of(self, X, parents):
        """Cached score of (X, parents); KeyError when the set is not cached."""
        if self._lookup is None:
            self._lookup = [{sp.parents: sp.score for sp in lst} for lst in self.sets]
        return self._lookup[X][tuple(sorted(parents))]

    def empty_score(self, X):
        return self.score_of(X, ())

    def best_within(self, X, mask):
        """Best cached set of X whose parents are all flagged in ``mask``."""
        p = self.packed
        i = _backend.impl.first_subset(p, int(p.var_ptr[X]), int(p.var_ptr[X + 1]), mask)
        return ScoredParentSet(p.py_sets[i], float(p.scores[i]))

    def max_set_size(self):
        return max(len(sp.parents) for lst in self.sets for sp in lst)

    def __repr__(self):
        return f"ScoreCache(n={self.n}, sets={sum(map(len, self.sets))})"


class PairStats(NamedTuple):
    ll0: np.ndarray
    ll1: np.ndarray  # ll1[X, Y] = LL(X | Y)
    mi: np.ndarray
    w: np.ndarray


def pair_statistics(table):
    """LL(X), LL(X|Y), MI(X,Y) = LL(X|Y) - LL(X) and w(X,Y) for all pairs."""
    n = table.n
    ll0 = np.array([_ll(table, (x,), ()) for x in range(n)])
    ll1 = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            if x != y:
                ll1[x, y] = _ll(table, (x,), (y,))
    mi = ll1 - ll0[:, None]
    np.fill_diagonal(mi, 0.0)
    w = mi - np.maximum(ll0[:, None], ll0[None, :])
    np.fill_diagonal(w, 0.0)
    return PairStats(ll0, ll1, mi, w)


def w_value(mi, ll_x, ll_y):
    """w = MI(X,Y) - max(LL(X), LL(Y)): bound on the LL gain from adding Y."""
    return mi - max(ll_x, ll_y)


def mutual_information_term(cache, X, Y):
    if X == Y:
        raise ValueError("MI needs two distinct variables")
    return float(cache.mi[X, Y])


def w_bound(cache, X, Y):
    return float(cache.w[X, Y])


# ---------------------------------------------------------------------------
# Pruning


def theorem1_prune(cache, X, base, candidate, remaining=None):
    """True when ``base + {candidate}`` and all its supersets can be skipped.

    ``cache`` needs ``w``, ``N`` and ``cardinalities``.  ``remaining`` are
    the variables that may still extend the set; by default every variable
    outside ``base + {candidate}`` and X.
    """
    base = tuple(sorted(base))
    if not base:
        raise ValueError("the bound needs a non-empty base parent set")
    if candidate in base or candidate == X:
        raise ValueError("candidate must extend the base set")
    N, cards, w = cache.N, cache.cardinalities, cache.w
    grown = base + (candidate,)
    pen_base = penalty(X, base, N, cards)
    if w[X, candidate] + penalty(X, grown, N, cards) > pen_base:
        return False
    if remaining is None:
        excluded = set(grown) | {X}
        remaining = [y for y in range(len(cards)) if y not in excluded]
    best = max((w[X, y] + pen_base * cards[y] for y in remaining), default=-math.inf)
    return best <= 0.0


def max_parents_cap(N, child_cardinality):
    """Largest parent-set size that can still be optimal under BIC.

    Smallest p such that every set of p binary parents satisfies
    ``log|P| >= log(2 log|X| / (|X|-1)) + log((N+1) / log N)``; strict
    supersets of such sets are dominated, so sets of size p are the largest
    worth scoring.  Returns None when N <= 1 (no bound).
    """
    if N <= 1:
        return None
    if child_cardinality <= 1:
        return 0
    c = child_cardinality
    thr = math.log(2 * math.log(c) / (c - 1)) + math.log((N + 1) / math.log(N))
    p = max(0, math.ceil(thr / math.log(2)))
    while p > 0 and (p - 1) * math.log(2) >= thr:
        p -= 1
    while p * math.log(2) < thr:
        p += 1
    return p


# ---------------------------------------------------------------------------
# Enumeration


def _effective_cap(table, X, k, max_parents):
    caps = [k, table.n - 1]
    cor = max_parents_cap(table.N, table.cardinalities[X])
    if cor is not None:
        caps.append(cor)
    if max_parents is not None:
        caps.append(max_parents)
    return min(caps)


def explore_parent_sets(table, X, k, max_sets=DEFAULT_MAX_SETS, time_budget=None,
                        stats=None, max_parents=None, record_pruned=False):
    """Breadth-first scoring of X's parent sets with bound-based pruning.

    Sets are generated by increasing size up to min(k, the parent-count cap,
    max_parents).  A set is generated only if all its immediate subsets
    survived; it is discarded with its supersets when the bound fires for
    some decomposition ``base + {Y0}``.  A surviving set scoring strictly
    below one of its subsets is still expanded but left out of the output,
    since the subset is feasible wherever it is.

    Returns ``(sets, info)``: descending list of ScoredParentSet (always
    containing the empty set) and a dict of counters.
    """
    if k < 1:
        raise ValueError("treewidth bound must be >= 1")
    if stats is None:
        stats = pair_statistics(table)
    start = time.monotonic()
    n, N, cards = table.n, table.N, table.cardinalities
    c_pen = math.log(N) / 2.0 * (cards[X] - 1)
    w = stats.w[X]
    cap = _effective_cap(table, X, k, max_parents)
    info = {"evaluated": 1, "pruned": 0, "dominated": 0, "capped": 0, "timed_out": False, "cap": cap}
    pruned_roots = [] if record_pruned else None

    s0 = float(stats.ll0[X]) - c_pen
    survivors = {(): s0}
    best_sub = {(): s0}
    out = [ScoredParentSet((), s0)]
    level = []
    for y in range(n):
        if y == X:
            continue
        s = float(stats.ll1[X, y]) - c_pen * cards[y]
        info["evaluated"] += 1
        survivors[(y,)] = s
        best_sub[(y,)] = max(s, s0)
        level.append((y,))
        if s >= s0:
            out.append(ScoredParentSet((y,), s))
        else:
            info["dominated"] += 1
    if cap < 1:
        out = [out[0]]
        level = []

    # top-2 of w(X,Y) + Pen(X, base + {Y}) per base, for the Y' condition
    top2_memo = {}

    def top2(base, qbase):
        t = top2_memo.get(base)
        if t is None:
            vals = [(w[y] - c_pen * qbase * cards[y], y) for y in range(n)
                    if y != X and y not in base]
            vals.sort(reverse=True)
            t = (vals + [(-math.inf, -1), (-math.inf, -1)])[:2]
            top2_memo[base] = t
        return t

    size = 1
    while level and size < cap:
        size += 1
        nxt = []
        for S in level:
            for y in range(S[-1] + 1, n):
                if y == X:
                    continue
                cand = S + (y,)
                subs = [cand[:i] + cand[i + 1:] for i in range(size)]
                if any(s not in survivors for s in subs):
                    continue
                q = math.prod(cards[p] for p in cand)
                pen_c = -c_pen * q
                pruned = False
                for i, base in enumerate(subs):
                    y0 = cand[i]
                    qbase = q // cards[y0]
                    pen_b = -c_pen * qbase
                    if w[y0] + pen_c > pen_b:
                        continue
                    (v1, y1), (v2, _) = top2(base, qbase)
                    # Y' ranges over variables outside cand; base is already excluded
                    if (v2 if y1 == y0 else v1) <= 0.0:
                        pruned = True
                        break
                if pruned:
                    info["pruned"] += 1
                    if pruned_roots is not None:
                        pruned_roots.append(cand)
                    continue
                s = log_likelihood(table, X, cand) + pen_c
                info["evaluated"] += 1
                survivors[cand] = s
                b = max(best_sub[t] for t in subs)
                best_sub[cand] = max(s, b)
                nxt.append(cand)
                if s >= b:
                    out.append(ScoredParentSet(cand, s))
                else:
                    info["dominated"] += 1
                if time_budget is not None and time.monotonic() - start > time_budget:
                    info["timed_out"] = True
                    break
            if info["timed_out"]:
                break
        if info["timed_out"]:
            break
        level = nxt
    if not info["timed_out"] and size >= cap:
        info["capped"] = len(level)

    out.sort(key=_sort_key)
    if len(out) > max_sets:
        out = out[:max_sets]
        if not any(sp.parents == () for sp in out):
            out[-1] = ScoredParentSet((), s0)
            out.sort(key=_sort_key)
    if pruned_roots is not None:
        info["pruned_roots"] = pruned_roots
    return out, info


def _explore_worker(args):
    table, X, k, max_sets, budget, stats, max_parents = args
    return explore_parent_sets(table, X, k, max_sets, budget, stats, max_parents)


def build_cache(table, k, max_sets=DEFAULT_MAX_SETS, time_budget=None, max_parents=None,
                workers=1):
    """Score every variable's candidate parent sets and freeze them in a cache."""
    if k < 1:
        raise ValueError("treewidth bound must be >= 1")
    stats = pair_statistics(table)
    per_var_budget = None if time_budget is None else time_budget / table.n
    jobs = [(table, x, k, max_sets, per_var_budget, stats, max_parents) for x in range(table.n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_explore_worker, jobs))
    else:
        results = [_explore_worker(j) for j in jobs]
    totals = {"evaluated": 0, "pruned": 0, "dominated": 0, "capped": 0, "timed_out": False}
    for _, info in results:
        for key in ("evaluated", "pruned", "dominated", "capped"):
            totals[key] += info[key]
        totals["timed_out"] |= info["timed_out"]
    if totals["timed_out"]:
        log.warning("score enumeration hit its time budget; high-order sets may be missing")
    return ScoreCache([r[0] for r in results], table.names, table.N, table.cardinalities,
                      stats.ll0, stats.mi, stats.w, totals)


def exhaustive_parent_sets(table, X, max_size=None):
    """Every parent set of X up to ``max_size``, scored, unpruned."""
    others = [y for y in range(table.n) if y != X]
    top = len(others) if max_size is None else min(max_size, len(others))
    out = []
    for s in range(top + 1):
        for P in itertools.combinations(others, s):
            out.append(ScoredParentSet(P, bic(table, X, P)))
    out.sort(key=_sort_key)
    return out


# ---------------------------------------------------------------------------
# Score files


def _clean_name(name):
    return "_".join(str(name).split()) or "_"


def write_scores(cache, path):
    """Text format: ``n``, then per variable ``name index count`` followed by
    ``count`` lines ``score size p1 .. pk`` (scores with 6 decimals)."""
    with open_text(path) as fh:
        fh.write(f"{cache.n}\n")
        for v, lst in enumerate(cache.sets):
            fh.write(f"{_clean_name(cache.names[v])} {v} {len(lst)}\n")
            for sp in lst:
                ps = " ".join(str(p) for p in sp.parents)
                fh.write(f"{sp.score:.6f} {len(sp.parents)}{' ' + ps if ps else ''}\n")


def read_scores(path):
    with open(path, encoding="utf-8") as fh:
        toks = fh.read().split()
    pos = 0

    def take(kind, what):
        nonlocal pos
        if pos >= len(toks):
            raise DataError(f"{path}: unexpected end of file while reading {what}")
        tok = toks[pos]
        pos += 1
        try:
            return kind(tok)
        except ValueError:
            raise DataError(f"{path}: bad {what} {tok!r}") from None

    n = take(int, "variable count")
    if n < 1:
        raise DataError(f"{path}: malformed header (n={n})")
    sets = [None] * n
    names = [None] * n
    for b in range(n):
        if pos >= len(toks):
            raise DataError(f"{path}: declares {n} variables but contains {b} blocks")
        name = take(str, "variable name")
        idx = take(int, "variable index")
        cnt = take(int, "set count")
        if not 0 <= idx < n:
            raise DataError(f"{path}: variable index {idx} out of range")
        if sets[idx] is not None:
            raise DataError(f"{path}: duplicate block for variable {idx}")
        lst = []
        for _ in range(cnt):
            score = take(float, "score")
            size = take(int, "parent count")
            ps = tuple(sorted(take(int, "parent id") for _ in range(size)))
            for p in ps:
                if not 0 <= p < n or p == idx:
                    raise DataError(f"{path}: parent id {p} invalid for variable {idx}")
            lst.append(ScoredParentSet(ps, score))
        sets[idx], names[idx] = lst, name
    if pos != len(toks):
        raise DataError(f"{path}: trailing content after {n} blocks")
    return ScoreCache(sets, names)
