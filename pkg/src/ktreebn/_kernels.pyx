# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a pure-Python twin in ``_fallback`` with the same
signature and semantics; ``_backend`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY
from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

cnp.import_array()

DENSE_LIMIT = 1 << 22


def loglik(const int32_t[:, ::1] codes, targets, parents, cards):
    """Sum of N_{x,pi} * log(N_{x,pi} / N_pi) over observed cells."""
    cdef Py_ssize_t N = codes.shape[1]
    cdef Py_ssize_t nt = len(targets), npar = len(parents), j, r
    cdef int64_t T = 1, P = 1
    cdef int64_t[::1] tcols = np.asarray(targets, dtype=np.int64)
    cdef int64_t[::1] pcols = np.asarray(parents, dtype=np.int64)
    cdef int64_t[::1] tstr = np.empty(nt, dtype=np.int64)
    cdef int64_t[::1] pstr = np.empty(max(npar, 1), dtype=np.int64)
    for j in range(nt):
        tstr[j] = T
        T *= <int64_t>cards[tcols[j]]
    for j in range(npar):
        pstr[j] = P
        P *= <int64_t>cards[pcols[j]]
    cdef int64_t space = T * P
    cdef int64_t[::1] keys = np.empty(N, dtype=np.int64)
    cdef int64_t tx, px
    for r in range(N):
        tx = 0
        for j in range(nt):
            tx += codes[tcols[j], r] * tstr[j]
        px = 0
        for j in range(npar):
            px += codes[pcols[j], r] * pstr[j]
        keys[r] = px * T + tx
    if space <= DENSE_LIMIT:
        return _ll_dense(keys, T, P)
    return _ll_sorted(np.sort(np.asarray(keys)), T)


cdef double _ll_dense(int64_t[::1] keys, int64_t T, int64_t P):
    cdef int64_t[::1] counts = np.zeros(T * P, dtype=np.int64)
    cdef Py_ssize_t r, N = keys.shape[0]
    cdef int64_t px, t, c, tot
    cdef double ll = 0.0
    for r in range(N):
        counts[keys[r]] += 1
    for px in range(P):
        tot = 0
        for t in range(T):
            tot += counts[px * T + t]
        if tot == 0:
            continue
        for t in range(T):
            c = counts[px * T + t]
            if c > 0:
                ll += c * log(<double>c / <double>tot)
    return ll


cdef double _ll_sorted(int64_t[::1] keys, int64_t T):
    cdef Py_ssize_t N = keys.shape[0], a = 0, b, r
    cdef int64_t px, tot, c
    cdef double ll = 0.0
    while a < N:
        px = keys[a] // T
        b = a
        while b < N and keys[b] // T == px:
            b += 1
        tot = b - a
        r = a
        while r < b:
            c = 1
            while r + c < b and keys[r + c] == keys[r]:
                c += 1
            ll += c * log(<double>c / <double>tot)
            r += c
        a = b
    return ll


def first_subset(packed, Py_ssize_t lo, Py_ssize_t hi, const uint8_t[::1] mask,
                 const uint8_t[::1] flags=None):
    """Index of the first candidate in [lo, hi) whose parents are all masked, or -1.

    When ``flags`` is given, candidates with a zero flag are skipped.
    """
    cdef const int64_t[::1] ptr = packed.set_ptr
    cdef const int32_t[::1] flat = packed.flat
    cdef Py_ssize_t i
    cdef int64_t a
    cdef bint ok
    cdef bint filtered = flags is not None
    for i in range(lo, hi):
        if filtered and not flags[i]:
            continue
        ok = True
        for a in range(ptr[i], ptr[i + 1]):
            if not mask[flat[a]]:
                ok = False
                break
        if ok:
            return i
    return -1


cdef inline bint _bit(const uint64_t[:, ::1] bits, int64_t u, int64_t v) nogil:
    return (bits[u, v >> 6] >> (v & 63)) & 1


cdef bint _is_clique(const int64_t[::1] ptr, const int32_t[::1] flat, Py_ssize_t i,
                     const uint64_t[:, ::1] bits, int64_t anchor, int64_t max_size) nogil:
    cdef int64_t a, b, p
    if ptr[i + 1] - ptr[i] > max_size:
        return False
    for a in range(ptr[i], ptr[i + 1]):
        p = flat[a]
        if not _bit(bits, p, p):
            return False
        if anchor >= 0 and not _bit(bits, anchor, p):
            return False
        for b in range(a + 1, ptr[i + 1]):
            if not _bit(bits, p, flat[b]):
                return False
    return True


def first_clique(packed, Py_ssize_t lo, Py_ssize_t hi, ktree, int64_t anchor, int64_t max_size):
    """Index of the first candidate in [lo, hi) forming a clique of the k-tree
    (together with ``anchor`` when it is >= 0), or -1."""
    cdef const int64_t[::1] ptr = packed.set_ptr
    cdef const int32_t[::1] flat = packed.flat
    cdef const uint64_t[:, ::1] bits = ktree.bits
    cdef Py_ssize_t i
    for i in range(lo, hi):
        if _is_clique(ptr, flat, i, bits, anchor, max_size):
            return i
    return -1


def feasible_flags(packed, ktree, int64_t max_size):
    """Per-candidate flag: parents plus owning variable form a k-tree clique."""
    cdef const int64_t[::1] ptr = packed.set_ptr
    cdef const int32_t[::1] flat = packed.flat
    cdef const int64_t[::1] vptr = packed.var_ptr
    cdef const uint64_t[:, ::1] bits = ktree.bits
    cdef Py_ssize_t n = vptr.shape[0] - 1, v, i
    out = np.zeros(ptr.shape[0] - 1, dtype=np.uint8)
    cdef uint8_t[::1] o = out
    for v in range(n):
        for i in range(vptr[v], vptr[v + 1]):
            o[i] = _is_clique(ptr, flat, i, bits, v, max_size)
    return out


def exact_dp(Py_ssize_t m, const int64_t[::1] cand_ptr, const int64_t[::1] cand_mask,
             const double[::1] cand_score):
    """Sink-based subset DP over ``m`` local variables.

    ``cand_mask`` holds parent sets in the compressed (m-1)-bit space of each
    variable (own bit removed); per variable, candidates are listed in
    preference order and the empty set must be present.  Returns
    (chosen candidate per variable, elimination of sinks as a list, score).
    """
    cdef int64_t half = (<int64_t>1) << (m - 1) if m > 0 else 1
    cdef int64_t full = ((<int64_t>1) << m) - 1
    cdef int32_t[:, ::1] tbl = np.full((m, half), 2147483647, dtype=np.int32)
    cdef Py_ssize_t x, j, b
    cdef int64_t S, R, lowmask, comp, bit
    cdef int32_t cur, other
    for x in range(m):
        for j in range(cand_ptr[x + 1] - 1, cand_ptr[x] - 1, -1):
            if cand_mask[j] < half:
                tbl[x, cand_mask[j]] = <int32_t>j
        for b in range(m - 1):
            bit = (<int64_t>1) << b
            for S in range(half):
                if S & bit:
                    other = tbl[x, S ^ bit]
                    if other < tbl[x, S]:
                        tbl[x, S] = other
    cdef double[::1] best = np.full(full + 1, -INFINITY, dtype=np.float64)
    cdef int32_t[::1] sink = np.full(full + 1, -1, dtype=np.int32)
    cdef double c
    best[0] = 0.0
    for S in range(1, full + 1):
        for x in range(m):
            bit = (<int64_t>1) << x
            if not (S & bit):
                continue
            R = S ^ bit
            lowmask = bit - 1
            comp = ((R >> (x + 1)) << x) | (R & lowmask)
            c = best[R] + cand_score[tbl[x, comp]]
            if c > best[S]:
                best[S] = c
                sink[S] = <int32_t>x
    choice = [0] * m
    sinks = []
    S = full
    while S:
        x = sink[S]
        bit = (<int64_t>1) << x
        R = S ^ bit
        comp = ((R >> (x + 1)) << x) | (R & (bit - 1))
        choice[x] = tbl[x, comp]
        sinks.append(x)
        S = R
    return choice, sinks, best[full]
