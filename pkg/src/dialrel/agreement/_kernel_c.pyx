# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring loops for the pairwise agreement metrics.

Mirror of ``_kernel_py``: same metric slots, same accumulation order, so
the two backends agree bit for bit.
"""

import numpy as np

from libc.stdint cimport int32_t, int64_t, uint64_t

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #  define DR_POPCOUNT64(x) __builtin_popcountll(x)
    #else
    static int DR_POPCOUNT64(unsigned long long x) {
        int n = 0;
        while (x) { x &= x - 1; ++n; }
        return n;
    }
    #endif
    """
    int DR_POPCOUNT64(unsigned long long x) nogil


DEF METRIC_COUNT = 6


cdef inline void _scores(uint64_t sa, uint64_t sb, int aug_mode, double* out) nogil:
    cdef int inter = DR_POPCOUNT64(sa & sb)
    cdef int na = DR_POPCOUNT64(sa)
    cdef int nb = DR_POPCOUNT64(sb)
    cdef int m
    cdef double soft = 1.0 if inter > 0 else 0.0
    out[0] = soft
    if aug_mode == 0:
        m = na if na >= nb else nb
        out[1] = (<double> inter) / m if m > 0 else 0.0
    else:
        out[1] = 2.0 * inter / (na + nb) if na + nb > 0 else 0.0
    out[2] = soft
    out[3] = (<double> inter) / nb if nb > 0 else 0.0
    out[4] = (<double> inter) / na if na > 0 else 0.0
    out[5] = 2.0 * inter / (na + nb) if na + nb > 0 else 0.0


cdef void _metrics(
    uint64_t[::1] masks,
    int32_t[::1] entry_a,
    int32_t[::1] entry_b,
    int32_t[::1] entry_pair,
    int64_t[::1] pair_sizes,
    int aug_mode,
    double[:, ::1] acc,
    double* out,
) nogil:
    cdef Py_ssize_t n_entries = entry_a.shape[0]
    cdef Py_ssize_t n_pairs = pair_sizes.shape[0]
    cdef Py_ssize_t e, p
    cdef int m
    cdef double s[METRIC_COUNT]
    for p in range(n_pairs):
        for m in range(METRIC_COUNT):
            acc[p, m] = 0.0
    for e in range(n_entries):
        _scores(masks[entry_a[e]], masks[entry_b[e]], aug_mode, s)
        p = entry_pair[e]
        for m in range(METRIC_COUNT):
            acc[p, m] += s[m]
    for m in range(METRIC_COUNT):
        out[m] = 0.0
    for p in range(n_pairs):
        for m in range(METRIC_COUNT):
            out[m] += acc[p, m] / pair_sizes[p]
    for m in range(METRIC_COUNT):
        out[m] /= n_pairs


def metrics_from_masks(masks, entry_a, entry_b, entry_pair, pair_sizes, aug_mode):
    """Six agreement means for one concrete assignment of cell label sets."""
    cdef uint64_t[::1] masks_v = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef int32_t[::1] ea = np.ascontiguousarray(entry_a, dtype=np.int32)
    cdef int32_t[::1] eb = np.ascontiguousarray(entry_b, dtype=np.int32)
    cdef int32_t[::1] ep = np.ascontiguousarray(entry_pair, dtype=np.int32)
    cdef int64_t[::1] sizes = np.ascontiguousarray(pair_sizes, dtype=np.int64)
    cdef double[:, ::1] acc = np.empty((sizes.shape[0], METRIC_COUNT), dtype=np.float64)
    cdef double out[METRIC_COUNT]
    cdef int mode = aug_mode
    with nogil:
        _metrics(masks_v, ea, eb, ep, sizes, mode, acc, out)
    return [out[m] for m in range(METRIC_COUNT)]


def bootstrap_accumulate(
    pool_masks, cell_base, idx, entry_a, entry_b, entry_pair, pair_sizes, aug_mode, sums, sumsqs
):
    """Score one chunk of resampling rounds; accumulate sums and squares in place."""
    cdef uint64_t[::1] pool = np.ascontiguousarray(pool_masks, dtype=np.uint64)
    cdef int64_t[::1] base = np.ascontiguousarray(cell_base, dtype=np.int64)
    cdef int64_t[:, ::1] rows = np.ascontiguousarray(idx, dtype=np.int64)
    cdef int32_t[::1] ea = np.ascontiguousarray(entry_a, dtype=np.int32)
    cdef int32_t[::1] eb = np.ascontiguousarray(entry_b, dtype=np.int32)
    cdef int32_t[::1] ep = np.ascontiguousarray(entry_pair, dtype=np.int32)
    cdef int64_t[::1] sizes = np.ascontiguousarray(pair_sizes, dtype=np.int64)
    cdef Py_ssize_t n_cells = base.shape[0]
    cdef Py_ssize_t n_rounds = rows.shape[0]
    cdef double[:, ::1] acc = np.empty((sizes.shape[0], METRIC_COUNT), dtype=np.float64)
    cdef uint64_t[::1] resampled = np.empty(n_cells, dtype=np.uint64)
    cdef double local_sums[METRIC_COUNT]
    cdef double local_sumsqs[METRIC_COUNT]
    cdef double out[METRIC_COUNT]
    cdef Py_ssize_t r, c
    cdef int m
    cdef int mode = aug_mode
    for m in range(METRIC_COUNT):
        local_sums[m] = 0.0
        local_sumsqs[m] = 0.0
    with nogil:
        for r in range(n_rounds):
            for c in range(n_cells):
                resampled[c] = pool[base[c] + rows[r, c]]
            _metrics(resampled, ea, eb, ep, sizes, mode, acc, out)
            for m in range(METRIC_COUNT):
                local_sums[m] += out[m]
                local_sumsqs[m] += out[m] * out[m]
    for m in range(METRIC_COUNT):
        sums[m] += local_sums[m]
        sumsqs[m] += local_sumsqs[m]
