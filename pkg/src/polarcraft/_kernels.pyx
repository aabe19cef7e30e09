# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SC / SCL kernels. Mirrors ``_fallback`` exactly, one block at a time."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

cnp.import_array()

cdef double LLR_CLAMP = 40.0


cdef inline double _sign(double a) noexcept nogil:
    if a > 0:
        return 1.0
    if a < 0:
        return -1.0
    return 0.0


cdef inline double _f(double a, double b, bint minsum) noexcept nogil:
    cdef double m
    if not minsum:
        if a > LLR_CLAMP:
            a = LLR_CLAMP
        elif a < -LLR_CLAMP:
            a = -LLR_CLAMP
        if b > LLR_CLAMP:
            b = LLR_CLAMP
        elif b < -LLR_CLAMP:
            b = -LLR_CLAMP
    m = fabs(a)
    if fabs(b) < m:
        m = fabs(b)
    m = _sign(a) * _sign(b) * m
    if minsum:
        return m
    return m + log1p(exp(-fabs(a + b))) - log1p(exp(-fabs(a - b)))


cdef inline double _pen(double lam, int v, bint approx) noexcept nogil:
    cdef double t = -lam if v == 0 else lam
    if approx:
        return fabs(lam) if t > 0 else 0.0
    return (t if t > 0 else 0.0) + log1p(exp(-fabs(t)))


cdef inline int _parity(unsigned long long x) noexcept nogil:
    cdef int p = 0
    while x:
        p ^= 1
        x &= x - 1
    return p


cdef inline int _tz(int i) noexcept nogil:
    cdef int t = 0
    while not (i & 1):
        i >>= 1
        t += 1
    return t


cdef inline void _descend(double* alpha, unsigned char* ps, int i, int n, bint minsum) noexcept nogil:
    cdef int l, j
    if i == 0:
        l = n // 2
    else:
        l = 1 << _tz(i)
        for j in range(l):
            if ps[l + j]:
                alpha[l + j] = alpha[3 * l + j] - alpha[2 * l + j]
            else:
                alpha[l + j] = alpha[3 * l + j] + alpha[2 * l + j]
        l //= 2
    while l >= 1:
        for j in range(l):
            alpha[l + j] = _f(alpha[2 * l + j], alpha[3 * l + j], minsum)
        l //= 2


cdef inline void _ascend(unsigned char* ps, unsigned char* cur, int i, int n, unsigned char v) noexcept nogil:
    cdef int l = 1, j
    cur[0] = v
    while l < n:
        if not (i & l):
            memcpy(&ps[l], cur, l)
            return
        for j in range(l):
            cur[l + j] = cur[j]
            cur[j] ^= ps[l + j]
        l *= 2


def sc_decode_batch(llr, frozen, bint minsum=False):
    cdef double[:, ::1] L = np.ascontiguousarray(llr, dtype=np.float64)
    cdef const unsigned char[::1] fz = np.ascontiguousarray(frozen, dtype=np.uint8)
    cdef Py_ssize_t B = L.shape[0]
    cdef int n = L.shape[1]
    bits_arr = np.zeros((B, n), dtype=np.uint8)
    leaf_arr = np.zeros((B, n), dtype=np.float64)
    cdef unsigned char[:, ::1] bits = bits_arr
    cdef double[:, ::1] leaf = leaf_arr
    cdef double* alpha = <double*> malloc(2 * n * sizeof(double))
    cdef unsigned char* ps = <unsigned char*> malloc(2 * n)
    cdef unsigned char* cur = <unsigned char*> malloc(n)
    cdef Py_ssize_t b
    cdef int i
    cdef unsigned char v
    cdef double lam
    if alpha == NULL or ps == NULL or cur == NULL:
        free(alpha); free(ps); free(cur)
        raise MemoryError()
    try:
        with nogil:
            for b in range(B):
                memset(ps, 0, 2 * n)
                for i in range(n):
                    alpha[n + i] = L[b, i]
                for i in range(n):
                    _descend(alpha, ps, i, n, minsum)
                    lam = alpha[1]
                    leaf[b, i] = lam
                    v = 0 if fz[i] else (1 if lam < 0 else 0)
                    bits[b, i] = v
                    _ascend(ps, cur, i, n, v)
    finally:
        free(alpha); free(ps); free(cur)
    return bits_arr, leaf_arr


cdef struct Cand:
    double metric
    int idx


cdef inline bint _before(Cand* a, Cand* b) noexcept nogil:
    return a.metric < b.metric or (a.metric == b.metric and a.idx < b.idx)


cdef void _sort_cands(Cand* c, Cand* scratch, int count) noexcept nogil:
    """Bottom-up merge sort on (metric, idx); idx keys make it deterministic."""
    cdef int width = 1, lo, mid, hi, a, b, k
    cdef Cand* src = c
    cdef Cand* dst = scratch
    cdef Cand* t
    while width < count:
        lo = 0
        while lo < count:
            mid = lo + width
            if mid > count:
                mid = count
            hi = lo + 2 * width
            if hi > count:
                hi = count
            a = lo
            b = mid
            k = lo
            while a < mid and b < hi:
                if _before(&src[b], &src[a]):
                    dst[k] = src[b]
                    b += 1
                else:
                    dst[k] = src[a]
                    a += 1
                k += 1
            while a < mid:
                dst[k] = src[a]
                a += 1
                k += 1
            while b < hi:
                dst[k] = src[b]
                b += 1
                k += 1
            lo = hi
        t = src
        src = dst
        dst = t
        width *= 2
    if src != c:
        memcpy(c, src, count * sizeof(Cand))


def scl_decode_batch(llr, frozen, int list_size, bint approx_metric=False, bint minsum=False, taps=(1,)):
    cdef double[:, ::1] L = np.ascontiguousarray(llr, dtype=np.float64)
    cdef const unsigned char[::1] fz = np.ascontiguousarray(frozen, dtype=np.uint8)
    taps_arr = np.ascontiguousarray(taps, dtype=np.uint8)
    cdef Py_ssize_t B = L.shape[0]
    cdef int n = L.shape[1]
    cdef int mem = taps_arr.shape[0] - 1
    if mem > 63:
        raise ValueError("convolution kernels longer than 64 taps are not supported")
    if list_size < 1:
        raise ValueError("list size must be >= 1")
    cdef unsigned long long tap_mask = 0, reg_mask
    cdef int j
    for j in range(mem):
        if taps_arr[j + 1]:
            tap_mask |= (<unsigned long long> 1) << j
    reg_mask = ((<unsigned long long> 1) << mem) - 1

    cdef int info_count = int((np.asarray(frozen) == 0).sum())
    cdef int Lmax = list_size
    if info_count < 31 and (1 << info_count) < Lmax:
        Lmax = 1 << info_count

    paths_arr = np.zeros((B, Lmax, n), dtype=np.uint8)
    metrics_arr = np.full((B, Lmax), np.inf, dtype=np.float64)
    cdef unsigned char[:, :, ::1] paths = paths_arr
    cdef double[:, ::1] metrics = metrics_arr

    # buffer pool: each path slot points at one (alpha, ps, m) buffer triple
    cdef int W = 2 * n
    cdef double* alpha = <double*> malloc(Lmax * W * sizeof(double))
    cdef unsigned char* ps = <unsigned char*> malloc(Lmax * W)
    cdef unsigned char* mb = <unsigned char*> malloc(Lmax * n)
    cdef int* owner = <int*> malloc(2 * Lmax * sizeof(int))
    cdef int* free_ids = <int*> malloc(Lmax * sizeof(int))
    cdef int* kids = <int*> malloc(Lmax * sizeof(int))
    cdef unsigned char* used = <unsigned char*> malloc(Lmax)
    cdef unsigned long long* reg = <unsigned long long*> malloc(2 * Lmax * sizeof(unsigned long long))
    cdef double* met = <double*> malloc(2 * Lmax * sizeof(double))
    cdef int* sbit = <int*> malloc(Lmax * sizeof(int))
    cdef unsigned char* cur = <unsigned char*> malloc(n)
    cdef Cand* cand = <Cand*> malloc(2 * Lmax * sizeof(Cand))
    cdef Cand* scratch = <Cand*> malloc(2 * Lmax * sizeof(Cand))
    if (alpha == NULL or ps == NULL or mb == NULL or owner == NULL or free_ids == NULL
            or kids == NULL or used == NULL or reg == NULL or met == NULL or sbit == NULL or cur == NULL
            or cand == NULL or scratch == NULL):
        free(alpha); free(ps); free(mb); free(owner); free(free_ids); free(kids); free(used)
        free(reg); free(met); free(sbit); free(cur); free(cand); free(scratch)
        raise MemoryError()

    cdef int* own_cur
    cdef int* own_nxt
    cdef int* itmp
    cdef unsigned long long* r_cur
    cdef unsigned long long* r_nxt
    cdef unsigned long long* rtmp
    cdef double* mt_cur
    cdef double* mt_nxt
    cdef double* dtmp
    cdef Py_ssize_t b
    cdef int i, p, q, P, keep, par, mbit, nfree, bid
    cdef unsigned char v
    cdef double lam

    try:
        with nogil:
            for b in range(B):
                own_cur = owner
                own_nxt = owner + Lmax
                r_cur = reg
                r_nxt = reg + Lmax
                mt_cur = met
                mt_nxt = met + Lmax
                P = 1
                own_cur[0] = 0
                memset(ps, 0, W)
                memset(mb, 0, n)
                r_cur[0] = 0
                mt_cur[0] = 0.0
                for i in range(n):
                    alpha[n + i] = L[b, i]
                for i in range(n):
                    for p in range(P):
                        bid = own_cur[p]
                        _descend(alpha + bid * W, ps + bid * W, i, n, minsum)
                        sbit[p] = _parity(r_cur[p] & tap_mask)
                    if fz[i]:
                        for p in range(P):
                            bid = own_cur[p]
                            lam = alpha[bid * W + 1]
                            v = <unsigned char> sbit[p]
                            mt_cur[p] += _pen(lam, v, approx_metric)
                            mb[bid * n + i] = 0
                            r_cur[p] = (r_cur[p] << 1) & reg_mask
                            _ascend(ps + bid * W, cur, i, n, v)
                        continue
                    for p in range(P):
                        bid = own_cur[p]
                        lam = alpha[bid * W + 1]
                        cand[2 * p].metric = mt_cur[p] + _pen(lam, sbit[p], approx_metric)
                        cand[2 * p].idx = 2 * p
                        cand[2 * p + 1].metric = mt_cur[p] + _pen(lam, sbit[p] ^ 1, approx_metric)
                        cand[2 * p + 1].idx = 2 * p + 1
                    _sort_cands(cand, scratch, 2 * P)
                    keep = 2 * P
                    if keep > list_size:
                        keep = list_size
                    # first surviving child inherits the parent's buffers
                    for p in range(P):
                        kids[p] = 0
                    for q in range(keep):
                        par = cand[q].idx >> 1
                        if kids[par] == 0:
                            own_nxt[q] = own_cur[par]
                        else:
                            own_nxt[q] = -1
                        kids[par] += 1
                    # free buffers: those not owned by any parent that keeps a child
                    for bid in range(Lmax):
                        used[bid] = 0
                    for p in range(P):
                        if kids[p] > 0:
                            used[own_cur[p]] = 1
                    nfree = 0
                    for bid in range(Lmax):
                        if not used[bid]:
                            free_ids[nfree] = bid
                            nfree += 1
                    # forks copy from the untouched parent buffers before any update
                    for q in range(keep):
                        if own_nxt[q] < 0:
                            par = own_cur[cand[q].idx >> 1]
                            nfree -= 1
                            bid = free_ids[nfree]
                            own_nxt[q] = bid
                            memcpy(alpha + bid * W, alpha + par * W, W * sizeof(double))
                            memcpy(ps + bid * W, ps + par * W, W)
                            memcpy(mb + bid * n, mb + par * n, n)
                    for q in range(keep):
                        par = cand[q].idx >> 1
                        mbit = cand[q].idx & 1
                        bid = own_nxt[q]
                        mb[bid * n + i] = <unsigned char> mbit
                        r_nxt[q] = ((r_cur[par] << 1) | <unsigned long long> mbit) & reg_mask
                        mt_nxt[q] = cand[q].metric
                        v = <unsigned char> (sbit[par] ^ mbit)
                        _ascend(ps + bid * W, cur, i, n, v)
                    itmp = own_cur; own_cur = own_nxt; own_nxt = itmp
                    rtmp = r_cur; r_cur = r_nxt; r_nxt = rtmp
                    dtmp = mt_cur; mt_cur = mt_nxt; mt_nxt = dtmp
                    P = keep
                for p in range(P):
                    cand[p].metric = mt_cur[p]
                    cand[p].idx = p
                _sort_cands(cand, scratch, P)
                for q in range(P):
                    bid = own_cur[cand[q].idx]
                    metrics[b, q] = cand[q].metric
                    for i in range(n):
                        paths[b, q, i] = mb[bid * n + i]
    finally:
        free(alpha); free(ps); free(mb); free(owner); free(free_ids); free(kids); free(used)
        free(reg); free(met); free(sbit); free(cur); free(cand); free(scratch)
    return paths_arr, metrics_arr
