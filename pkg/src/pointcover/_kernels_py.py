"""Pure numpy implementation of the codebook-scan kernels.

Same contract and bit-for-bit the same results as the compiled ``_kernels``
module.  Codeword ``j`` of a virtual codebook with key ``key`` covers a source
mask iff every one-position ``i`` of the source has
``splitmix(splitmix(key, j), i) < thr``.
"""

import numpy as np

from .rng import splitmix_array

CHUNK = 1 << 18

BACKEND = "python"


def _survivors(key, thr, positions, js):
    keys = splitmix_array(key, js)
    thr = np.uint64(thr)
    for p in positions:
        if js.size == 0:
            break
        hit = splitmix_array(keys, int(p)) < thr
        js = js[hit]
        keys = keys[hit]
    return js


def first_cover(key, thr, positions, start, stop, stride=1):
    """Smallest ``j`` in ``range(start, stop, stride)`` whose codeword covers
    ``positions``, or -1."""
    positions = np.asarray(positions, dtype=np.int64)
    span = CHUNK * stride
    for lo in range(start, stop, span):
        js = np.arange(lo, min(stop, lo + span), stride, dtype=np.uint64)
        hits = _survivors(key, thr, positions, js)
        if hits.size:
            return int(hits[0])
    return -1


def count_covers(key, thr, positions, start, stop, cap):
    """Count covering codewords in ``range(start, stop)``, stopping at ``cap``.

    Returns ``(count, first)``; ``first`` is -1 when ``count`` is 0.
    """
    positions = np.asarray(positions, dtype=np.int64)
    count, first = 0, -1
    for lo in range(start, stop, CHUNK):
        js = np.arange(lo, min(stop, lo + CHUNK), dtype=np.uint64)
        hits = _survivors(key, thr, positions, js)
        if hits.size:
            if first < 0:
                first = int(hits[0])
            count += int(hits.size)
            if count >= cap:
                return cap, first
    return count, first


def codeword_bits(key, thr, j, n):
    """All ``n`` bits of codeword ``j`` as a uint8 array."""
    kj = splitmix_array(key, j)
    return (splitmix_array(kj, np.arange(n, dtype=np.uint64)) < np.uint64(thr)).astype(np.uint8)


def packed_covers(z_words, c_words):
    """Wordwise cover test on packed masks: ``(z & ~c) == 0`` everywhere."""
    return not np.any(np.bitwise_and(z_words, np.invert(c_words)))
