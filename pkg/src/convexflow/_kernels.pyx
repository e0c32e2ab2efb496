# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sparse convolution of packed-key mode maps."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t, uint8_t

cnp.import_array()

# dense accumulation box, in complex entries
DEF DENSE_LIMIT = 1 << 22


cdef inline uint64_t _slot(int64_t key, uint64_t mask) nogil:
    cdef uint64_t h = (<uint64_t>key) * <uint64_t>0x9E3779B97F4A7C15ULL
    return (h ^ (h >> 29)) & mask


cdef int64_t _bandwidth(const int64_t[:] k, int64_t bias) nogil:
    cdef int64_t lo = (1 << 21) - 1, K = 0, c, v
    cdef Py_ssize_t i, axis
    for i in range(k.shape[0]):
        v = k[i]
        for axis in range(3):
            c = (v & lo) - bias
            if c < 0:
                c = -c
            if c > K:
                K = c
            v >>= 21
    return K


cdef void _offsets(const int64_t[:] k, int64_t bias, int64_t L, int64_t[::1] out) nogil:
    cdef int64_t lo = (1 << 21) - 1, v
    cdef Py_ssize_t i
    for i in range(k.shape[0]):
        v = k[i]
        out[i] = ((v >> 42) - bias) * L * L + (((v >> 21) & lo) - bias) * L + ((v & lo) - bias)


def _dense(const int64_t[:] k1, const double complex[:, :] c1,
           const int64_t[:] k2, const double complex[:, :] c2,
           const int[:, :] plan, const double complex[:] weight,
           int nout, int64_t bias, int64_t K):
    cdef int64_t L = 2 * K + 1
    cdef Py_ssize_t m1 = k1.shape[0], m2 = k2.shape[0], npl = plan.shape[0]
    o1_np = np.empty(m1, np.int64)
    o2_np = np.empty(m2, np.int64)
    cdef int64_t[::1] o1 = o1_np
    cdef int64_t[::1] o2 = o2_np
    _offsets(k1, bias, L, o1)
    _offsets(k2, bias, L, o2)
    cdef int64_t base = K * (L * L + L + 1)
    box_np = np.zeros((L * L * L, 2 * nout), np.float64)
    hit_np = np.zeros(L * L * L, np.uint8)
    # w * c1[i, a] per plan row, refreshed for each i
    wa_np = np.empty((npl, 2), np.float64)
    c2r_np = np.ascontiguousarray(np.asarray(c2).view(np.float64))
    cdef double[:, ::1] box = box_np
    cdef uint8_t[::1] hit = hit_np
    cdef double[:, ::1] wa = wa_np
    cdef const double[:, ::1] c2r = c2r_np
    cdef Py_ssize_t i, j, p, o, b
    cdef int64_t idx
    cdef double complex t
    cdef double xr, xi, yr, yi
    with nogil:
        for i in range(m1):
            for p in range(npl):
                t = weight[p] * c1[i, plan[p, 1]]
                wa[p, 0] = t.real
                wa[p, 1] = t.imag
            for j in range(m2):
                idx = o1[i] + o2[j] + base
                hit[idx] = 1
                for p in range(npl):
                    o = 2 * plan[p, 0]
                    b = 2 * plan[p, 2]
                    xr = wa[p, 0]
                    xi = wa[p, 1]
                    yr = c2r[j, b]
                    yi = c2r[j, b + 1]
                    box[idx, o] += xr * yr - xi * yi
                    box[idx, o + 1] += xr * yi + xi * yr
    where = np.flatnonzero(hit_np)
    x = where // (L * L) - K
    y = (where // L) % L - K
    z = where % L - K
    keys = ((x + bias) << 42) | ((y + bias) << 21) | (z + bias)
    return keys.astype(np.int64), box_np[where].view(np.complex128)


def sparse_convolve(const int64_t[:] k1, const double complex[:, :] c1,
                    const int64_t[:] k2, const double complex[:, :] c2,
                    const int[:, :] plan, const double complex[:] weight,
                    int nout, int64_t zero_key, Py_ssize_t max_out):
    """Accumulate sum_i sum_j w * c1[i, a] * c2[j, b] into key k1[i] + k2[j].

    Small output boxes are accumulated densely (rows sorted by key); larger
    ones go through a hash table with rows in first-touch order.
    """
    cdef Py_ssize_t m1 = k1.shape[0], m2 = k2.shape[0], npl = plan.shape[0]
    cdef int64_t bias = zero_key & ((1 << 21) - 1)
    cdef int64_t K
    if m1 and m2:
        K = _bandwidth(k1, bias) + _bandwidth(k2, bias)
        if (2 * K + 1) ** 3 * nout <= DENSE_LIMIT and (2 * K + 1) ** 3 <= 8 * m1 * m2:
            return _dense(k1, c1, k2, c2, plan, weight, nout, bias, K)
    cdef uint64_t cap = 1
    while cap < <uint64_t>(2 * max_out + 2):
        cap <<= 1
    cdef uint64_t mask = cap - 1
    table_np = np.full(cap, -1, dtype=np.int64)
    keys_np = np.empty(max_out, dtype=np.int64)
    out_np = np.zeros((max_out, nout), dtype=np.complex128)
    cdef int64_t[:] table = table_np
    cdef int64_t[:] keys = keys_np
    cdef double complex[:, :] out = out_np
    cdef Py_ssize_t i, j, p, nused = 0
    cdef int64_t key, slot_idx
    cdef uint64_t s
    cdef double complex a
    with nogil:
        for i in range(m1):
            for j in range(m2):
                key = k1[i] + k2[j] - zero_key
                s = _slot(key, mask)
                while True:
                    slot_idx = table[s]
                    if slot_idx < 0:
                        slot_idx = nused
                        table[s] = nused
                        keys[nused] = key
                        nused += 1
                        break
                    if keys[slot_idx] == key:
                        break
                    s = (s + 1) & mask
                for p in range(npl):
                    a = c1[i, plan[p, 1]] * c2[j, plan[p, 2]]
                    out[slot_idx, plan[p, 0]] += weight[p] * a
    return keys_np[:nused], out_np[:nused]
