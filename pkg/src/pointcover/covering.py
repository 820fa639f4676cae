"""Random covering code with an all-one fallback codeword.

Codeword 1 is the all-one mask.  Codewords ``2..M`` are IID ``Ber(D)`` masks
regenerated on demand from a counter-based stream, so a codebook of a few
million codewords costs nothing to store.  The encoder sends the first
codeword (in index order) that covers every occupied slot of the source, or
``1`` if there is none.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .core import (BinaryMask, DomainError, Finite, PointPattern, continuous_distortion,
                   discretize, exact, mask_to_interval_set, num_slots)
from .rng import SeedSpec, bernoulli_threshold
from .sources import sample_general

DEFAULT_BUDGET = 1 << 25


class BudgetExceeded(RuntimeError):
    """The codebook would need more codewords than the search budget allows."""


def codebook_size(rate_bits, horizon) -> int:
    """``ceil(2**(T*R))`` as an integer (not clamped)."""
    exponent = float(exact(horizon)) * float(rate_bits)
    if exponent < 0:
        raise DomainError(f"rate must be >= 0, got {rate_bits}")
    if exponent > 62:
        return 1 << 63
    return math.ceil(2.0 ** exponent)


def check_budget(count: int, budget: int, what: str = "codebook"):
    if count > budget:
        raise BudgetExceeded(
            f"{what} needs {count} codewords, above the search budget of {budget} "
            f"(2^{math.log2(budget):.3g}); lower the rate or the horizon")


class VirtualCodebook:
    """IID ``Ber(D)`` codewords of length ``n`` indexed by ``j >= 0``."""

    def __init__(self, seed: SeedSpec, n: int, delta, D):
        self.seed = seed
        self.key = seed.key()
        self.thr = bernoulli_threshold(D)
        self.n = int(n)
        self.delta = exact(delta)

    def bits(self, j: int) -> np.ndarray:
        return kernels.codeword_bits(self.key, self.thr, j, self.n)

    def mask(self, j: int) -> BinaryMask:
        return BinaryMask(self.delta, self.bits(j))

    def first_cover(self, positions, start, stop, stride=1) -> int:
        return kernels.first_cover(self.key, self.thr, positions, start, stop, stride)

    def count_covers(self, positions, start, stop, cap) -> tuple:
        return kernels.count_covers(self.key, self.thr, positions, start, stop, cap)


class ExplicitCodebook:
    """A codebook given as a list of masks, indexed by ``j >= 0``."""

    def __init__(self, masks: Sequence[BinaryMask]):
        if not masks:
            raise DomainError("explicit codebook is empty")
        self.masks = list(masks)
        self.n = self.masks[0].n
        self.delta = self.masks[0].delta
        for m in self.masks:
            if m.n != self.n or m.delta != self.delta:
                raise DomainError("explicit codewords must share length and slot width")

    def bits(self, j: int) -> np.ndarray:
        return self.masks[j].bits

    def mask(self, j: int) -> BinaryMask:
        return self.masks[j]

    def _z(self, positions) -> BinaryMask:
        bits = np.zeros(self.n, dtype=np.uint8)
        bits[np.asarray(positions, dtype=np.int64)] = 1
        return BinaryMask(self.delta, bits)

    def first_cover(self, positions, start, stop, stride=1) -> int:
        z = self._z(positions)
        for j in range(start, min(stop, len(self.masks)), stride):
            if self.masks[j].covers(z):
                return j
        return -1

    def count_covers(self, positions, start, stop, cap) -> tuple:
        z = self._z(positions)
        count, first = 0, -1
        for j in range(start, min(stop, len(self.masks))):
            if self.masks[j].covers(z):
                first = j if first < 0 else first
                count += 1
                if count >= cap:
                    break
        return count, first


@dataclass(frozen=True)
class CodebookSpec:
    rate: float
    horizon: float
    delta: float
    D: float
    seed: SeedSpec = SeedSpec(0)
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not 0 < self.D < 1:
            raise DomainError(f"distortion budget must lie in (0, 1), got {self.D}")
        num_slots(self.horizon, self.delta)

    @property
    def M(self) -> int:
        return max(2, codebook_size(self.rate, self.horizon))

    @property
    def n(self) -> int:
        return num_slots(self.horizon, self.delta)


@dataclass(frozen=True)
class EncodeResult:
    index: int

    @property
    def fallback(self) -> bool:
        return self.index == 1


class CoveringCode:
    """Codewords indexed ``1..M``; index 1 is the all-one mask."""

    def __init__(self, spec: CodebookSpec):
        self.spec = spec
        self.M = spec.M
        check_budget(self.M, spec.budget)
        self.n = spec.n
        self.delta = exact(spec.delta)
        # virtual index j = m for m >= 2
        self.book = VirtualCodebook(spec.seed, self.n, spec.delta, spec.D)
        self._offset = 0

    @classmethod
    def from_codewords(cls, masks: Sequence[BinaryMask]) -> "CoveringCode":
        """Explicit code; ``masks[0]`` is codeword 1 and must be all-one."""
        self = cls.__new__(cls)
        book = ExplicitCodebook(masks)
        if not np.all(book.bits(0)):
            raise DomainError("codeword 1 must be the all-one mask")
        self.spec = None
        self.M = len(book.masks)
        self.n = book.n
        self.delta = book.delta
        self.book = book
        self._offset = -1
        return self

    def _j(self, m: int) -> int:
        return m + self._offset

    def codeword(self, m: int) -> BinaryMask:
        if not 1 <= m <= self.M:
            raise IndexError(f"codeword index {m} outside 1..{self.M}")
        if m == 1:
            return BinaryMask.ones(self.delta, self.n)
        return self.book.mask(self._j(m))

    def encode(self, z: BinaryMask) -> EncodeResult:
        if z.n != self.n or z.delta != self.delta:
            raise DomainError(f"source mask has geometry ({z.n}, {z.delta}), code has ({self.n}, {self.delta})")
        j = self.book.first_cover(z.ones_positions(), self._j(2), self._j(self.M) + 1)
        return EncodeResult(1 if j < 0 else j - self._offset)

    def decode(self, r: EncodeResult) -> BinaryMask:
        return self.codeword(r.index)


def _code(c) -> CoveringCode:
    return c if isinstance(c, CoveringCode) else CoveringCode(c)


def codeword(spec, m: int) -> BinaryMask:
    return _code(spec).codeword(m)


def encode(spec, z: BinaryMask) -> EncodeResult:
    return _code(spec).encode(z)


def decode(spec, r: EncodeResult) -> BinaryMask:
    return _code(spec).decode(r)


# -- analytic predictions -----------------------------------------------------


def cover_probability(k: int, D: float) -> float:
    """Probability that one ``Ber(D)`` codeword covers a mask with ``k`` ones."""
    if k < 0:
        raise DomainError(f"count must be >= 0, got {k}")
    return float(D) ** k


def expected_covered_distortion(mu: float, delta: float, D: float) -> float:
    """Mean distortion given a cover was found: ``D + (1-D) mu delta``.

    ``mu`` is a density in points per second, unlike ``k`` above.
    """
    if mu * delta > 1:
        raise DomainError(f"mu*delta={mu * delta} exceeds 1")
    return D + (1.0 - D) * mu * delta


def fallback_probability(k: int, D: float, M: int) -> float:
    """``(1 - D^k)^(M-1)``: none of the random codewords covers ``k`` ones."""
    c = cover_probability(k, D)
    if c >= 1.0:
        return 0.0
    return math.exp((M - 1) * math.log1p(-c))


def binomial_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    if p <= 0.0:
        return (k == 0).astype(float)
    if p >= 1.0:
        return (k == n).astype(float)
    logc = np.array([math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1) for i in k])
    return np.exp(logc + k * math.log(p) + (n - k) * math.log1p(-p))


def occupancy_pmf(points: int, n: int) -> np.ndarray:
    """Distribution of occupied slots when ``points`` uniform points fall in ``n`` slots."""
    pmf = np.zeros(min(points, n) + 1)
    pmf[0] = 1.0
    for _ in range(points):
        nxt = pmf * (np.arange(pmf.size) / n)
        nxt[1:] += pmf[:-1] * (1.0 - np.arange(pmf.size - 1) / n)
        pmf = nxt
    return pmf


def occupied_slots_pmf(source, delta) -> Optional[np.ndarray]:
    """Law of the number of occupied slots, where it has a closed form.

    Poisson: Binomial(n, 1 - exp(-lam delta)).  max_count: uniform
    occupancy.  Fixed patterns and grids: a point mass.  Otherwise None.
    """
    if isinstance(source, PointPattern):
        k = discretize(source, delta).popcount()
        return np.eye(k + 1)[k]
    n = num_slots(source.horizon, delta)
    if source.kind == "poisson":
        return binomial_pmf(n, -math.expm1(-source.lam * float(exact(delta))))
    if source.kind == "grid":
        k = discretize(sample_general(source, 0), delta).popcount()
        return np.eye(k + 1)[k]
    if source.kind == "max_count":
        return occupancy_pmf(math.floor(exact(source.lam) * exact(source.horizon)), n)
    return None


def predict_cover_run(k_pmf: np.ndarray, n: int, D: float, M: int) -> dict:
    """Fallback rate and mean distortion averaged over the law of ``k``."""
    fb = np.array([fallback_probability(k, D, M) for k in range(k_pmf.size)])
    cond = D + (1.0 - D) * np.arange(k_pmf.size) / n
    covered = k_pmf * (1.0 - fb)
    return {
        "fallback_rate": float(np.dot(k_pmf, fb)),
        "mean_distortion": float(np.dot(k_pmf, fb) + np.dot(covered, cond)),
        "covered_distortion": float(np.dot(covered, cond) / covered.sum()) if covered.sum() > 0 else float("nan"),
        "mean_k": float(np.dot(k_pmf, np.arange(k_pmf.size))),
    }


# -- Monte Carlo ----------------------------------------------------------------


@dataclass(frozen=True)
class CoverTrial:
    trial: int
    k_ones: int
    index: int
    distortion: Fraction

    @property
    def fallback(self) -> bool:
        return self.index == 1


@dataclass
class CoverRun:
    spec: CodebookSpec
    source: object
    records: list
    wall_time: float = 0.0
    prediction: Optional[dict] = None

    @property
    def trials(self) -> int:
        return len(self.records)

    @property
    def fallback_rate(self) -> float:
        return sum(r.fallback for r in self.records) / len(self.records)

    @property
    def mean_distortion(self) -> float:
        return float(sum(r.distortion for r in self.records) / len(self.records))

    def distortion_ci(self, z: float = 1.96) -> tuple:
        d = np.array([float(r.distortion) for r in self.records])
        half = z * d.std(ddof=1) / math.sqrt(d.size) if d.size > 1 else float("inf")
        return d.mean() - half, d.mean() + half

    @property
    def mean_k(self) -> float:
        return float(np.mean([r.k_ones for r in self.records]))


def _source_pattern(source, seed: SeedSpec, t: int) -> PointPattern:
    if isinstance(source, PointPattern):
        return source
    return sample_general(source, seed.child("source", t))


def run_covering_trials(spec: CodebookSpec, source, trials: int, seed=0,
                        workers: int = 1) -> CoverRun:
    """Sample, discretize, encode, decode and score ``trials`` independent runs.

    ``source`` is a :class:`SourceConfig` or a fixed :class:`PointPattern`
    (an adversarial pattern).  Every trial draws a fresh codebook from
    ``seed``; results do not depend on ``workers``.
    """
    master = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    check_budget(spec.M, spec.budget)
    horizon = source.horizon if isinstance(source, PointPattern) else exact(source.horizon)
    if horizon != exact(spec.horizon):
        raise DomainError(f"source horizon {horizon} differs from code horizon {spec.horizon}")

    def one(t: int) -> CoverTrial:
        p = _source_pattern(source, master, t)
        code = CoveringCode(CodebookSpec(spec.rate, spec.horizon, spec.delta, spec.D,
                                         master.child("codebook", t), spec.budget))
        z = discretize(p, spec.delta)
        r = code.encode(z)
        d = continuous_distortion(p, mask_to_interval_set(code.decode(r)))
        assert isinstance(d, Finite), "reconstruction failed to cover the pattern"
        return CoverTrial(t, z.popcount(), r.index, d.value)

    t0 = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            records = list(ex.map(one, range(trials)))
    else:
        records = [one(t) for t in range(trials)]
    wall = time.perf_counter() - t0

    pmf = occupied_slots_pmf(source, spec.delta)
    pred = predict_cover_run(pmf, spec.n, spec.D, spec.M) if pmf is not None else None
    return CoverRun(spec, source, records, wall, pred)
