"""Binned covering code for a decoder that already knows some of the points.

The codebook holds ``M * L`` IID ``Ber(D)`` codewords indexed by a bin ``m``
and a position ``l`` inside the bin.  The encoder finds the first codeword (in
``(m, l)`` order) covering the source mask and sends only ``m``, together with
the number of occupied slots.  The decoder searches bin ``m`` for codewords
that cover the slots of the points it knows; a unique match is the encoder's
codeword, anything else decodes to the all-one mask.

When the number of occupied slots is at most ``nu*T`` the side information is
ignored: only the first codeword of each bin is searched and the decoder
outputs it directly.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import (BinaryMask, DomainError, Finite, continuous_distortion,
                   discretize, exact, mask_to_interval_set, num_slots)
from .covering import (DEFAULT_BUDGET, ExplicitCodebook, VirtualCodebook, binomial_pmf,
                       check_budget, codebook_size)
from .rng import SeedSpec
from .sources import SourceConfig, sample_general, split_side_info

OK, AMBIGUOUS, ENC_FAIL = "ok", "ambiguous", "enc_fail"


@dataclass(frozen=True)
class WzSpec:
    rate: float
    bin_rate: float
    horizon: float
    delta: float
    D: float
    nu: float
    seed: SeedSpec = SeedSpec(0)
    count_cap: Optional[int] = None
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not 0 < self.D < 1:
            raise DomainError(f"distortion budget must lie in (0, 1), got {self.D}")
        if self.nu < 0:
            raise DomainError(f"nu must be >= 0, got {self.nu}")
        num_slots(self.horizon, self.delta)

    @property
    def M(self) -> int:
        return max(1, codebook_size(self.rate, self.horizon))

    @property
    def L(self) -> int:
        return max(1, codebook_size(self.bin_rate, self.horizon))

    @property
    def n(self) -> int:
        return num_slots(self.horizon, self.delta)

    @property
    def nu_count(self) -> Fraction:
        """Hidden-point budget over the horizon, ``nu * T``."""
        return exact(self.nu) * exact(self.horizon)

    @property
    def max_count(self) -> int:
        """Largest occupied-slot count the side message can carry."""
        return self.n if self.count_cap is None else min(self.count_cap, self.n)

    def charged_bits(self) -> float:
        """Bin index plus the all-one signal, and the slot count."""
        return math.log2(self.M + 1) + math.log2(self.max_count + 1)


@dataclass(frozen=True)
class WzMessage:
    """``index`` is the bin ``m`` (1-based), or None for the all-one signal."""

    index: Optional[int]
    count: int

    @property
    def all_one(self) -> bool:
        return self.index is None


class WzCode:
    def __init__(self, spec: WzSpec):
        self.spec = spec
        self.M, self.L, self.n = spec.M, spec.L, spec.n
        check_budget(self.M * self.L, spec.budget, "binned codebook")
        self.delta = exact(spec.delta)
        self.nu_count = spec.nu_count
        self.max_count = spec.max_count
        self.book = VirtualCodebook(spec.seed, self.n, spec.delta, spec.D)

    @classmethod
    def from_codewords(cls, bins, nu_count=0) -> "WzCode":
        """Explicit code from ``bins[m-1][l-1]`` masks (every bin the same size)."""
        self = cls.__new__(cls)
        self.spec = None
        self.M, self.L = len(bins), len(bins[0])
        if any(len(b) != self.L for b in bins):
            raise DomainError("every bin must hold the same number of codewords")
        self.book = ExplicitCodebook([c for b in bins for c in b])
        self.n, self.delta = self.book.n, self.book.delta
        self.nu_count = exact(nu_count)
        self.max_count = self.n
        return self

    def codeword(self, m: int, l: int) -> BinaryMask:
        if not (1 <= m <= self.M and 1 <= l <= self.L):
            raise IndexError(f"codeword ({m}, {l}) outside {self.M}x{self.L}")
        return self.book.mask((m - 1) * self.L + (l - 1))

    def _check(self, mask: BinaryMask):
        if mask.n != self.n or mask.delta != self.delta:
            raise DomainError(f"mask geometry ({mask.n}, {mask.delta}) differs from code ({self.n}, {self.delta})")

    def ignores_side_info(self, count: int) -> bool:
        return count <= self.nu_count

    def encode(self, z: BinaryMask) -> WzMessage:
        self._check(z)
        k = z.popcount()
        if k > self.max_count:
            return WzMessage(None, min(k, self.max_count))
        pos = z.ones_positions()
        total = self.M * self.L
        if self.ignores_side_info(k):
            j = self.book.first_cover(pos, 0, total, self.L)
        else:
            j = self.book.first_cover(pos, 0, total)
        if j < 0:
            return WzMessage(None, k)
        return WzMessage(j // self.L + 1, k)

    def decode_with_status(self, msg: WzMessage, s: BinaryMask):
        self._check(s)
        ones = BinaryMask.ones(self.delta, self.n)
        if msg.all_one:
            return ones, ENC_FAIL
        if not 1 <= msg.index <= self.M:
            raise IndexError(f"bin {msg.index} outside 1..{self.M}")
        start = (msg.index - 1) * self.L
        if self.ignores_side_info(msg.count):
            return self.book.mask(start), OK
        count, first = self.book.count_covers(s.ones_positions(), start, start + self.L, 2)
        if count == 1:
            return self.book.mask(first), OK
        # zero matches cannot follow an honest message; treat it like ambiguity
        return ones, AMBIGUOUS

    def decode(self, msg: WzMessage, s: BinaryMask) -> BinaryMask:
        return self.decode_with_status(msg, s)[0]


def _code(c) -> WzCode:
    return c if isinstance(c, WzCode) else WzCode(c)


def wz_encode(spec, z: BinaryMask) -> WzMessage:
    return _code(spec).encode(z)


def wz_decode(spec, msg: WzMessage, s: BinaryMask) -> BinaryMask:
    return _code(spec).decode(msg, s)


def wz_rate_bounds(mu_count: int, nu, horizon, D: float) -> tuple:
    """Total-bit thresholds over the horizon for a source with ``mu_count`` ones.

    Returns ``(min_sum_bits, max_bin_bits)``: the encoder needs
    ``T(R + R~) > min_sum_bits`` and the decoder needs ``T R~ < max_bin_bits``.
    """
    if mu_count < 0:
        raise DomainError(f"count must be >= 0, got {mu_count}")
    if not 0 < D < 1:
        raise DomainError(f"distortion must lie in (0, 1), got {D}")
    hidden = float(exact(nu) * exact(horizon))
    lg = -math.log2(D)
    return mu_count * lg, max(mu_count - hidden, 0.0) * lg


# -- predictions ------------------------------------------------------------------


def _ambiguity_given(k, s, D, L, c):
    """P(another codeword of the chosen bin covers s), given the encoder's
    first cover sits at a uniformly-distributed-in-law offset of the bin."""
    if L == 1:
        return 0.0
    ds = D ** s
    before = (ds - c) / (1.0 - c) if c < 1.0 else 0.0
    r = np.arange(L)
    # law of the within-bin offset of the first cover (geometric, folded by L)
    w = (1.0 - c) ** r
    w /= w.sum()
    p_clear = (1.0 - before) ** r * (1.0 - ds) ** (L - 1 - r)
    return float(1.0 - np.dot(w, p_clear))


def predict_wz_run(lam, p, spec: WzSpec) -> dict:
    """Outcome rates and mean distortion for a Poisson source, averaged over
    the joint law of occupied and known-occupied slots."""
    n, D, M, L = spec.n, spec.D, spec.M, spec.L
    x = lam * float(exact(spec.delta))
    p1 = -math.expm1(-x)
    known_given_one = (-math.expm1(-p * x)) / p1 if p1 > 0 else 0.0
    k_pmf = binomial_pmf(n, p1)
    kmax = int(np.nonzero(k_pmf > 1e-15)[0].max()) if k_pmf.any() else 0
    enc_fail = amb = dist = 0.0
    for k in range(kmax + 1):
        pk = k_pmf[k]
        if pk == 0.0:
            continue
        c = D ** k
        cond = D + (1.0 - D) * k / n
        if k > spec.max_count:
            enc_fail += pk
            dist += pk
            continue
        if k <= spec.nu_count:
            f = math.exp(M * math.log1p(-c)) if c < 1 else 0.0
            enc_fail += pk * f
            dist += pk * (f + (1 - f) * cond)
            continue
        f = math.exp(M * L * math.log1p(-c)) if c < 1 else 0.0
        s_pmf = binomial_pmf(k, known_given_one)
        a = sum(s_pmf[s] * _ambiguity_given(k, s, D, L, c) for s in range(k + 1))
        enc_fail += pk * f
        amb += pk * (1 - f) * a
        dist += pk * (f + (1 - f) * (a + (1 - a) * cond))
    return {"enc_fail_rate": float(enc_fail), "ambiguity_rate": float(amb),
            "failure_rate": float(enc_fail + amb), "mean_distortion": float(dist)}


# -- Monte Carlo -------------------------------------------------------------------


@dataclass(frozen=True)
class WzTrial:
    trial: int
    mu_count: int
    known_count: int
    unknown_points: int
    outcome: str
    distortion: Fraction
    eq14_ok: bool


@dataclass
class WzRun:
    spec: WzSpec
    lam: float
    p: float
    records: list
    wall_time: float = 0.0
    prediction: Optional[dict] = None

    def rate(self, outcome: str) -> float:
        return sum(r.outcome == outcome for r in self.records) / len(self.records)

    @property
    def failure_rate(self) -> float:
        return self.rate(AMBIGUOUS) + self.rate(ENC_FAIL)

    @property
    def mean_distortion(self) -> float:
        return float(sum(r.distortion for r in self.records) / len(self.records))


def default_nu(lam: float, p: float, margin: float = 0.1) -> float:
    """Hidden-point rate for a Poisson source: ``(1 - p) lam (1 + margin)``."""
    return (1.0 - p) * lam * (1.0 + margin)


def run_wz_trials(spec: WzSpec, lam: float, p: float, trials: int, seed=0,
                  workers: int = 1, source: Optional[SourceConfig] = None) -> WzRun:
    """Poisson (or ``source``) patterns, independent reveal w.p. ``p``, fresh
    codebook per trial; the reconstruction is scored against the full pattern."""
    master = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    check_budget(spec.M * spec.L, spec.budget, "binned codebook")
    src = source or SourceConfig(lam, spec.horizon)

    def one(t: int) -> WzTrial:
        pat = sample_general(src, master.child("source", t))
        known, unknown = split_side_info(pat, p, master.child("reveal", t))
        z = discretize(pat, spec.delta)
        s = discretize(known, spec.delta)
        eq14 = s.popcount() >= z.popcount() - len(unknown)
        code = WzCode(WzSpec(spec.rate, spec.bin_rate, spec.horizon, spec.delta, spec.D,
                             spec.nu, master.child("codebook", t), spec.count_cap, spec.budget))
        msg = code.encode(z)
        zhat, outcome = code.decode_with_status(msg, s)
        d = continuous_distortion(pat, mask_to_interval_set(zhat))
        assert isinstance(d, Finite), "reconstruction failed to cover the pattern"
        return WzTrial(t, z.popcount(), s.popcount(), len(unknown), outcome, d.value, eq14)

    t0 = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            records = list(ex.map(one, range(trials)))
    else:
        records = [one(t) for t in range(trials)]
    wall = time.perf_counter() - t0
    pred = predict_wz_run(lam, p, spec) if source is None or source.kind == "poisson" else None
    return WzRun(spec, lam, p, records, wall, pred)
