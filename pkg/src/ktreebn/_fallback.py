"""Pure-Python / numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

DENSE_LIMIT = 1 << 22


def loglik(codes, targets, parents, cards):
    N = codes.shape[1]
    T = 1
    tx = np.zeros(N, dtype=np.int64)
    for t in targets:
        tx += codes[t].astype(np.int64) * T
        T *= int(cards[t])
    P = 1
    px = np.zeros(N, dtype=np.int64)
    for p in parents:
        px += codes[p].astype(np.int64) * P
        P *= int(cards[p])
    keys = px * T + tx
    if T * P <= DENSE_LIMIT:
        counts = np.bincount(keys, minlength=T * P).reshape(P, T)
        tot = counts.sum(axis=1)
        pi, xi = np.nonzero(counts)
        c = counts[pi, xi].astype(np.float64)
        return float(np.sum(c * np.log(c / tot[pi])))
    uniq, c = np.unique(keys, return_counts=True)
    _, inv = np.unique(uniq // T, return_inverse=True)
    rows = np.bincount(inv, weights=c)
    c = c.astype(np.float64)
    return float(np.sum(c * np.log(c / rows[inv])))


def first_subset(packed, lo, hi, mask, flags=None):
    sets = packed.py_sets
    for i in range(lo, hi):
        if flags is not None and not flags[i]:
            continue
        for p in sets[i]:
            if not mask[p]:
                break
        else:
            return i
    return -1


def _is_clique(s, adj, present, anchor, max_size):
    if len(s) > max_size:
        return False
    for a, p in enumerate(s):
        if not present[p]:
            return False
        if anchor >= 0 and p not in adj[anchor]:
            return False
        nb = adj[p]
        for q in s[a + 1:]:
            if q not in nb:
                return False
    return True


def first_clique(packed, lo, hi, ktree, anchor, max_size):
    sets = packed.py_sets
    adj, present = ktree.adj, ktree.present
    for i in range(lo, hi):
        if _is_clique(sets[i], adj, present, anchor, max_size):
            return i
    return -1


def feasible_flags(packed, ktree, max_size):
    sets = packed.py_sets
    adj, present = ktree.adj, ktree.present
    out = np.zeros(len(sets), dtype=np.uint8)
    vptr = packed.var_ptr
    for v in range(len(vptr) - 1):
        for i in range(vptr[v], vptr[v + 1]):
            out[i] = _is_clique(sets[i], adj, present, v, max_size)
    return out


def best_tables(m, cand_ptr, cand_mask):
    """tbl[x][comp]: first (preferred) candidate of x whose mask lies in comp."""
    half = 1 << (m - 1)
    cand_mask = np.asarray(cand_mask, dtype=np.int64)
    tbls = []
    for x in range(m):
        lo, hi = cand_ptr[x], cand_ptr[x + 1]
        tbl = np.full(half, np.iinfo(np.int32).max, dtype=np.int32)
        # reverse so the earliest (preferred) candidate wins a shared mask
        idx = np.arange(hi - 1, lo - 1, -1)
        ms = cand_mask[idx]
        keep = ms < half
        tbl[ms[keep]] = idx[keep]
        for b in range(m - 1):
            view = tbl.reshape(-1, 2, 1 << b)
            np.minimum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
        tbls.append(tbl)
    return tbls


def exact_dp(m, cand_ptr, cand_mask, cand_score):
    full = (1 << m) - 1
    cand_score = np.asarray(cand_score, dtype=np.float64)
    tbls = best_tables(m, cand_ptr, cand_mask)

    subsets = np.arange(full + 1, dtype=np.int64)
    pop = np.zeros(full + 1, dtype=np.int64)
    for b in range(m):
        pop += (subsets >> b) & 1
    best = np.full(full + 1, -np.inf)
    sink = np.full(full + 1, -1, dtype=np.int32)
    best[0] = 0.0
    layers = [subsets[pop == L] for L in range(m + 1)]
    for L in range(1, m + 1):
        layer = layers[L]
        for x in range(m):
            bit = 1 << x
            S = layer[(layer & bit) != 0]
            if S.size == 0:
                continue
            R = S ^ bit
            comp = ((R >> (x + 1)) << x) | (R & (bit - 1))
            c = best[R] + cand_score[tbls[x][comp]]
            upd = c > best[S]
            best[S[upd]] = c[upd]
            sink[S[upd]] = x
    choice = [0] * m
    sinks = []
    S = full
    while S:
        x = int(sink[S])
        bit = 1 << x
        R = S ^ bit
        comp = ((R >> (x + 1)) << x) | (R & (bit - 1))
        choice[x] = int(tbls[x][comp])
        sinks.append(x)
        S = R
    return choice, sinks, float(best[full])
