"""Point patterns, interval sets, slot masks and the two distortion measures.

Numeric conventions
-------------------
Horizons, slot widths and interval endpoints are held as exact
:class:`fractions.Fraction`.  Every float is read by its shortest decimal repr
(``0.01`` means 1/100), so ``T=16, delta=0.01`` gives exactly 1600 slots and the
point ``0.1`` falls in slot 1 for ``delta=0.1``.  The repr map is strictly
increasing on floats, so order is preserved.  Event times are stored as floats
and converted on comparison.  Slots are half-open ``((i-1)*delta, i*delta]``
and patterns live on ``(0, T]``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


def exact(x) -> Fraction:
    """Exact rational value of a parameter; floats are read by their repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise DomainError(f"non-finite value {x}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a number")


def num_slots(horizon, delta) -> int:
    """``ceil(T / delta)``: the horizon is padded up to a whole number of slots."""
    T, d = exact(horizon), exact(delta)
    if d <= 0:
        raise DomainError(f"slot width must be positive, got {delta}")
    if T <= 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    return math.ceil(T / d)


def slot_index(times: np.ndarray, delta: Fraction) -> np.ndarray:
    """1-based slot of each time: the ``i`` with ``(i-1)*delta < t <= i*delta``.

    A float estimate is corrected with exact arithmetic where it sits near a
    slot boundary.
    """
    times = np.asarray(times, dtype=np.float64)
    q = times / float(delta)
    idx = np.ceil(q).astype(np.int64)
    near = np.nonzero(np.abs(q - np.rint(q)) < 1e-6)[0]
    for j in near:
        idx[j] = math.ceil(exact(float(times[j])) / delta)
    return idx


# -- point patterns ---------------------------------------------------------


class PointPattern:
    """A finite set of event times on ``(0, T]``, strictly increasing."""

    __slots__ = ("horizon", "points")

    def __init__(self, horizon, points: Iterable[float] = ()):
        T = exact(horizon)
        if T <= 0:
            raise DomainError(f"horizon must be positive, got {horizon}")
        pts = np.array(sorted(float(t) for t in points), dtype=np.float64)
        if pts.size:
            if np.any(np.diff(pts) <= 0):
                raise DomainError("event times must be distinct")
            if pts[0] <= 0 or exact(float(pts[-1])) > T:
                raise DomainError(f"event times must lie in (0, {T}]")
        pts.setflags(write=False)
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("PointPattern is immutable")

    def __len__(self):
        return int(self.points.size)

    def __iter__(self):
        return iter(self.points.tolist())

    def __eq__(self, other):
        return (isinstance(other, PointPattern) and self.horizon == other.horizon
                and np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash((self.horizon, self.points.tobytes()))

    def __repr__(self):
        return f"PointPattern(T={self.horizon}, n={len(self)})"


def counting_function(p: PointPattern, t) -> int:
    """Number of points of ``p`` in ``(0, t]``."""
    tt = exact(t)
    if not 0 <= tt <= p.horizon:
        raise DomainError(f"t={t} outside [0, {p.horizon}]")
    return bisect.bisect_right([exact(x) for x in p.points.tolist()], tt)


# -- interval sets ----------------------------------------------------------


def _normalize(intervals) -> list:
    """Sort, drop empties and merge overlapping or exactly touching intervals."""
    ivs = sorted((a, b) for a, b in intervals if a < b)
    out = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


class IntervalSet:
    """A finite union of half-open intervals ``(a, b]`` inside ``[0, T]``.

    Endpoints are exact rationals; touching intervals are merged so the
    representation of a set is unique.
    """

    __slots__ = ("horizon", "intervals", "_rights", "_measure")

    def __init__(self, horizon, intervals: Iterable[Sequence] = ()):
        T = exact(horizon)
        if T <= 0:
            raise DomainError(f"horizon must be positive, got {horizon}")
        ivs = []
        for a, b in intervals:
            a, b = exact(a), exact(b)
            if a > b:
                raise DomainError(f"interval ({a}, {b}] has a > b")
            if a < 0 or b > T:
                raise DomainError(f"interval ({a}, {b}] not inside [0, {T}]")
            ivs.append((a, b))
        ivs = tuple(_normalize(ivs))
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "_rights", [b for _, b in ivs])
        object.__setattr__(self, "_measure", None)

    @classmethod
    def _trusted(cls, horizon: Fraction, ivs: tuple, total: Fraction) -> "IntervalSet":
        """Build from intervals already in normal form, with a known measure."""
        self = object.__new__(cls)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "_rights", [b for _, b in ivs])
        object.__setattr__(self, "_measure", total)
        return self

    def __setattr__(self, name, value):
        raise AttributeError("IntervalSet is immutable")

    @classmethod
    def empty(cls, horizon) -> "IntervalSet":
        return cls(horizon)

    def measure(self) -> Fraction:
        if self._measure is None:
            object.__setattr__(self, "_measure", sum((b - a for a, b in self.intervals), Fraction(0)))
        return self._measure

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def contains(self, t) -> bool:
        """Whether time ``t`` lies in the set."""
        t = exact(t)
        k = bisect.bisect_left(self._rights, t)
        return k < len(self.intervals) and self.intervals[k][0] < t

    def issubset(self, other: "IntervalSet") -> bool:
        return not difference(self, other)

    def __eq__(self, other):
        return (isinstance(other, IntervalSet) and self.horizon == other.horizon
                and self.intervals == other.intervals)

    def __hash__(self):
        return hash((self.horizon, self.intervals))

    def __repr__(self):
        body = ", ".join(f"({a}, {b}]" for a, b in self.intervals)
        return f"IntervalSet(T={self.horizon}, {{{body}}})"


def _same_horizon(a: IntervalSet, b: IntervalSet):
    if a.horizon != b.horizon:
        raise DomainError(f"horizon mismatch: {a.horizon} vs {b.horizon}")


def _sweep(a: IntervalSet, b: IntervalSet, keep) -> IntervalSet:
    """Boolean combination of two interval sets by a boundary sweep."""
    _same_horizon(a, b)
    cuts = sorted({x for iv in a.intervals + b.intervals for x in iv})
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        if keep(a.contains(hi), b.contains(hi)):
            out.append((lo, hi))
    return IntervalSet(a.horizon, out)


def union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    _same_horizon(a, b)
    return IntervalSet(a.horizon, a.intervals + b.intervals)


def intersection(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return _sweep(a, b, lambda x, y: x and y)


def difference(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return _sweep(a, b, lambda x, y: x and not y)


def symmetric_difference(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return _sweep(a, b, lambda x, y: x != y)


def measure(a: IntervalSet) -> Fraction:
    return a.measure()


# -- masks ------------------------------------------------------------------


class BinaryMask:
    """Length-``n`` bit vector over slots of width ``delta``.

    ``bits`` is a read-only uint8 array; ``words`` packs it into uint64 words
    for wordwise cover tests.
    """

    __slots__ = ("delta", "bits", "_words")

    def __init__(self, delta, bits):
        d = exact(delta)
        if d <= 0:
            raise DomainError(f"slot width must be positive, got {delta}")
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if np.any(arr > 1):
            raise DomainError("mask bits must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "bits", arr)
        object.__setattr__(self, "_words", None)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryMask is immutable")

    @classmethod
    def zeros(cls, delta, n):
        return cls(delta, np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, delta, n):
        return cls(delta, np.ones(n, dtype=np.uint8))

    def __len__(self):
        return int(self.bits.size)

    @property
    def n(self) -> int:
        return int(self.bits.size)

    @property
    def padded_horizon(self) -> Fraction:
        return self.n * self.delta

    def popcount(self) -> int:
        return int(self.bits.sum(dtype=np.int64))

    def ones_positions(self) -> np.ndarray:
        """0-based indices of set bits."""
        return np.flatnonzero(self.bits).astype(np.int64)

    @property
    def words(self) -> np.ndarray:
        if self._words is None:
            padded = np.zeros(-(-self.n // 64) * 64, dtype=np.uint8)
            padded[: self.n] = self.bits
            w = np.packbits(padded, bitorder="little").view("<u8").astype(np.uint64)
            object.__setattr__(self, "_words", w)
        return self._words

    def covers(self, other: "BinaryMask") -> bool:
        """True if every set bit of ``other`` is set here."""
        _same_geometry(self, other)
        from ._backend import kernels
        return kernels.packed_covers(other.words, self.words)

    def __eq__(self, other):
        return (isinstance(other, BinaryMask) and self.delta == other.delta
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.delta, self.bits.tobytes()))

    def __repr__(self):
        s = "".join(map(str, self.bits[:64].tolist()))
        return f"BinaryMask(delta={self.delta}, n={self.n}, {s}{'...' if self.n > 64 else ''})"


def _same_geometry(a: BinaryMask, b: BinaryMask):
    if a.n != b.n or a.delta != b.delta:
        raise DomainError(f"mask geometry mismatch: ({a.n}, {a.delta}) vs ({b.n}, {b.delta})")


def discretize(p: PointPattern, delta) -> BinaryMask:
    """Bit ``i`` is set iff ``p`` has a point in slot ``((i-1)delta, i*delta]``."""
    d = exact(delta)
    n = num_slots(p.horizon, d)
    bits = np.zeros(n, dtype=np.uint8)
    if len(p):
        bits[slot_index(p.points, d) - 1] = 1
    return BinaryMask(d, bits)


def mask_to_interval_set(m: BinaryMask) -> IntervalSet:
    """Union of the slots whose bit is set, on the padded horizon ``n*delta``."""
    b = np.concatenate(([0], m.bits.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(b)).tolist()
    d = m.delta
    # runs of ones are maximal, so the intervals are sorted, disjoint and not touching
    runs = tuple((s * d, e * d) for s, e in zip(edges[::2], edges[1::2]))
    return IntervalSet._trusted(m.padded_horizon, runs, m.popcount() * d)


# -- distortion -------------------------------------------------------------


@dataclass(frozen=True)
class Finite:
    """A finite distortion value (exact rational)."""

    value: Fraction

    def __float__(self):
        return float(self.value)

    is_miss = False


class Miss:
    """Some source point was left uncovered; the distortion is infinite."""

    _instance = None
    is_miss = True

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __float__(self):
        return math.inf

    def __repr__(self):
        return "MISS"


MISS = Miss()

Distortion = Union[Finite, Miss]


def continuous_distortion(p: PointPattern, s: IntervalSet) -> Distortion:
    """Normalized measure of ``s`` if it contains every point of ``p``, else MISS.

    ``s`` may live on a padded horizon ``>= p.horizon`` (a reconstruction built
    from slots); the normalization uses the horizon of ``s``.
    """
    if s.horizon < p.horizon:
        raise DomainError(f"horizon mismatch: pattern {p.horizon} vs set {s.horizon}")
    for t in p.points.tolist():
        if not s.contains(t):
            return MISS
    return Finite(s.measure() / s.horizon)


def discrete_distortion(z: BinaryMask, zhat: BinaryMask) -> Distortion:
    """Per-slot average of d'(0,0)=0, d'(0,1)=d'(1,1)=1, d'(1,0)=inf."""
    _same_geometry(z, zhat)
    if np.any(z.bits & (1 - zhat.bits)):
        return MISS
    return Finite(Fraction(zhat.popcount(), zhat.n))
