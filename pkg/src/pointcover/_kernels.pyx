# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled codebook-scan kernels; see ``_kernels_py`` for the contract."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _splitmix(uint64_t key, uint64_t c) noexcept nogil:
    return _mix64(key + GAMMA * (c + 1))


cdef enum:
    BLOCK = 64


cdef inline int _block_survivors(uint64_t key, uint64_t thr, const int64_t[::1] pos,
                                 int64_t j0, int64_t stride, int nb, int64_t* out) noexcept nogil:
    """Codeword indices of the block ``j0, j0+stride, ...`` (``nb`` of them)
    that cover ``pos``, written to ``out`` in increasing order.

    Position-major order keeps ``nb`` independent hash chains in flight.
    """
    cdef uint64_t keys[BLOCK]
    cdef int64_t js[BLOCK]
    cdef int b, alive = nb, kept
    cdef Py_ssize_t t
    cdef uint64_t p
    for b in range(nb):
        js[b] = j0 + b * stride
        keys[b] = _splitmix(key, <uint64_t>js[b])
    for t in range(pos.shape[0]):
        p = <uint64_t>pos[t]
        kept = 0
        for b in range(alive):
            # branch-free compaction: survival is a coin flip, so a branch mispredicts
            keys[kept] = keys[b]
            js[kept] = js[b]
            kept += _splitmix(keys[b], p) < thr
        alive = kept
        if alive == 0:
            return 0
    for b in range(alive):
        out[b] = js[b]
    return alive


def first_cover(uint64_t key, uint64_t thr, positions, int64_t start, int64_t stop, int64_t stride=1):
    cdef const int64_t[::1] pos = np.ascontiguousarray(positions, dtype=np.int64)
    cdef int64_t j = start
    cdef int64_t found = -1
    cdef int64_t hits[BLOCK]
    cdef int64_t nb
    with nogil:
        while j < stop:
            nb = (stop - j + stride - 1) // stride
            if nb > BLOCK:
                nb = BLOCK
            if _block_survivors(key, thr, pos, j, stride, <int>nb, hits):
                found = hits[0]
                break
            j += nb * stride
    return found


def count_covers(uint64_t key, uint64_t thr, positions, int64_t start, int64_t stop, int64_t cap):
    cdef const int64_t[::1] pos = np.ascontiguousarray(positions, dtype=np.int64)
    cdef int64_t j = start
    cdef int64_t count = 0
    cdef int64_t first = -1
    cdef int64_t hits[BLOCK]
    cdef int64_t nb
    cdef int h, b
    with nogil:
        while j < stop:
            nb = stop - j
            if nb > BLOCK:
                nb = BLOCK
            h = _block_survivors(key, thr, pos, j, 1, <int>nb, hits)
            if h:
                if first < 0:
                    first = hits[0]
                count += h
                if count >= cap:
                    count = cap
                    break
            j += nb
    return count, first


def codeword_bits(uint64_t key, uint64_t thr, int64_t j, int64_t n):
    out = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef uint64_t kj = _splitmix(key, <uint64_t>j)
    cdef int64_t i
    with nogil:
        for i in range(n):
            o[i] = _splitmix(kj, <uint64_t>i) < thr
    return out


def packed_covers(z_words, c_words):
    cdef const uint64_t[::1] z = np.ascontiguousarray(z_words, dtype=np.uint64)
    cdef const uint64_t[::1] c = np.ascontiguousarray(c_words, dtype=np.uint64)
    cdef Py_ssize_t w
    for w in range(z.shape[0]):
        if z[w] & ~c[w]:
            return False
    return True
