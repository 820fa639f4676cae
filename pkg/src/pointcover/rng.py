"""Counter-based random streams.

Two generators are used, both keyed by ``(master_seed, labels...)``:

* Codebook bits come from SplitMix64.  The output at counter ``c`` of the
  stream keyed by ``k`` is ``mix64(k + GAMMA * (c + 1))``, so any codeword bit
  can be computed directly from its indices.  A codebook key ``K`` yields
  codeword keys ``K_j = splitmix(K, j)`` and codeword ``j`` has bit ``i`` set
  iff ``splitmix(K_j, i) < threshold(D)``.
* Everything else (pattern sampling, side-information splits) uses numpy's
  Philox4x32-10 bit generator with a 128-bit key derived from the same labels.

Both are defined on unsigned 64-bit integer arithmetic only, so a given
``(seed, labels)`` gives the same bits on every platform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def splitmix(key: int, counter: int) -> int:
    """Output ``counter`` (0-based) of the SplitMix64 stream seeded with ``key``."""
    return mix64((key + GAMMA * (counter + 1)) & MASK64)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def splitmix_array(keys, counters) -> np.ndarray:
    """Vectorised :func:`splitmix`; broadcasts ``keys`` against ``counters``."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(keys + np.uint64(GAMMA) * (counters + np.uint64(1)))


def bernoulli_threshold(p) -> int:
    """Integer threshold ``t`` with ``Pr[u < t] = floor(p * 2**64) / 2**64``.

    ``p`` must lie in ``[0, 1)``; it is read exactly (floats by their decimal
    repr), so dyadic probabilities such as 1/2 are hit exactly.
    """
    q = p if isinstance(p, Fraction) else Fraction(repr(p)) if isinstance(p, float) else Fraction(p)
    if not 0 <= q < 1:
        raise ValueError(f"Bernoulli parameter must lie in [0, 1), got {p}")
    return int(q * (1 << 64))


def label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & MASK64
    if isinstance(label, str):
        return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")
    raise TypeError(f"stream labels must be int or str, not {type(label).__name__}")


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus a path of stream labels.

    ``SeedSpec(7).child("codebook", 3)`` names the stream for codebook 3 under
    master seed 7.  Distinct label paths give unrelated streams.
    """

    master_seed: int
    labels: tuple = ()

    def child(self, *labels) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.labels + tuple(labels))

    def key(self) -> int:
        k = mix64(self.master_seed & MASK64)
        for lab in self.labels:
            k = splitmix(k, label_to_int(lab))
        return k

    def generator(self) -> np.random.Generator:
        k = self.key()
        return np.random.Generator(np.random.Philox(key=k | (splitmix(k, 0x5EED) << 64)))
