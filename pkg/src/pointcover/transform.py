"""Turning an interval-set code into a slotted code.

Each codeword (a finite union of intervals) is optionally replaced by an
approximation, then snapped outward to the slot grid.  Points falling in the
part of a codeword that the approximation dropped (the exception set) are
sent to an extra all-one codeword appended at index ``M + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import (BinaryMask, DomainError, IntervalSet, PointPattern,
                   difference, exact, num_slots, symmetric_difference, union)


class ApproximationError(DomainError):
    """An approximation is further from its codeword than allowed."""


@dataclass(frozen=True)
class ContinuousCode:
    horizon: Fraction
    codewords: tuple

    def __init__(self, horizon, codewords: Sequence[IntervalSet]):
        T = exact(horizon)
        for c in codewords:
            if c.horizon != T:
                raise DomainError(f"codeword horizon {c.horizon} differs from code horizon {T}")
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "codewords", tuple(codewords))

    @property
    def M(self) -> int:
        return len(self.codewords)

    @property
    def N(self) -> int:
        """Largest interval count over the codewords."""
        return max((len(c) for c in self.codewords), default=0)


def snap_to_grid(a: IntervalSet, delta) -> BinaryMask:
    """Set bit ``i`` iff slot ``((i-1)delta, i*delta]`` meets ``a``."""
    d = exact(delta)
    n = num_slots(a.horizon, d)
    bits = np.zeros(n, dtype=np.uint8)
    for lo, hi in a.intervals:
        first = math.floor(lo / d)     # 0-based index of the first slot hit
        last = math.ceil(hi / d)       # 1-based index of the last slot hit
        bits[first:last] = 1
    return BinaryMask(d, bits)


@dataclass(frozen=True)
class CodewordReport:
    index: int
    intervals: int
    measure_approx: Fraction
    measure_grid: Fraction
    bound: Fraction

    @property
    def inflation(self) -> Fraction:
        return self.measure_grid - self.measure_approx

    @property
    def ok(self) -> bool:
        return self.inflation <= self.bound


@dataclass(frozen=True)
class TransformedCode:
    delta: Fraction
    horizon: Fraction
    grid: tuple            # masks for indices 1..M
    approximations: tuple  # the sets the masks were snapped from
    exception: IntervalSet
    epsilon: Fraction

    @property
    def M(self) -> int:
        """Codeword count including the trailing all-one codeword."""
        return len(self.grid) + 1

    @property
    def n(self) -> int:
        return self.grid[0].n if self.grid else num_slots(self.horizon, self.delta)

    def codeword(self, m: int) -> BinaryMask:
        if m == self.M:
            return BinaryMask.ones(self.delta, self.n)
        if not 1 <= m < self.M:
            raise IndexError(f"codeword index {m} outside 1..{self.M}")
        return self.grid[m - 1]

    def reports(self) -> list:
        out = []
        for m, (a, w) in enumerate(zip(self.approximations, self.grid), start=1):
            out.append(CodewordReport(m, len(a), a.measure(), w.popcount() * self.delta,
                                      2 * len(a) * self.delta))
        return out


def check_approximation(codeword: IntervalSet, approx: IntervalSet, tol) -> Fraction:
    """Measure of the symmetric difference; raises if it exceeds ``tol``."""
    gap = symmetric_difference(codeword, approx).measure()
    if gap > tol:
        raise ApproximationError(f"approximation differs by measure {gap} > {tol}")
    return gap


def transform_code(code: ContinuousCode, delta, epsilon=0,
                   approximations: Optional[Sequence[IntervalSet]] = None) -> TransformedCode:
    """Snap every codeword (or its approximation) to the grid and build the
    exception set.

    Each approximation must be within ``epsilon / M`` of its codeword in
    symmetric-difference measure, which keeps the exception set below
    ``epsilon``.  Without approximations the codewords are used as they are and
    the exception set is empty.
    """
    d, eps = exact(delta), exact(epsilon)
    if eps < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    if approximations is None:
        approximations = code.codewords
    elif len(approximations) != code.M:
        raise DomainError(f"{len(approximations)} approximations for {code.M} codewords")
    tol = eps / code.M if code.M else eps
    exception = IntervalSet.empty(code.horizon)
    for c, a in zip(code.codewords, approximations):
        if a.horizon != code.horizon:
            raise DomainError("approximation horizon differs from the code horizon")
        check_approximation(c, a, tol)
        exception = union(exception, difference(c, a))
    grid = tuple(snap_to_grid(a, d) for a in approximations)
    return TransformedCode(d, code.horizon, grid, tuple(approximations), exception, eps)


def transformed_encode(tc: TransformedCode, assignment: Union[int, Callable], x: PointPattern) -> int:
    """The original encoder's index, unless ``x`` touches the exception set."""
    if any(tc.exception.contains(t) for t in x.points.tolist()):
        return tc.M
    m = assignment(x) if callable(assignment) else int(assignment)
    if not 1 <= m < tc.M:
        raise IndexError(f"original index {m} outside 1..{tc.M - 1}")
    return m


def distortion_gap_bound(N: int, delta, epsilon, M: int, horizon) -> Fraction:
    """Upper bound on ``d(x, grid_m) - d(x, codeword_m)`` for ``x`` clear of
    the exception set: ``(2 N delta + epsilon / M) / T``."""
    return (2 * N * exact(delta) + exact(epsilon) / M) / exact(horizon)


def shrink(a: IntervalSet, by) -> IntervalSet:
    """Pull each endpoint of every interval inward by ``by`` (drop what vanishes)."""
    b = exact(by)
    return IntervalSet(a.horizon, [(lo + b, hi - b) for lo, hi in a.intervals if hi - lo > 2 * b])


# -- code files -----------------------------------------------------------------------


def parse_code(text: str, horizon=None) -> ContinuousCode:
    """Parse ``a1,b1;a2,b2;...`` lines (one codeword each).

    An optional first line ``T=<value>`` gives the horizon; a line holding only
    ``-`` is an empty codeword.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if lines and lines[0].replace(" ", "").startswith("T="):
        horizon = lines.pop(0).split("=", 1)[1].strip()
    if horizon is None:
        raise DomainError("code file has no 'T=' header and no horizon was given")
    T = exact(horizon)
    words = []
    for lineno, ln in enumerate(lines, 1):
        ivs = []
        if ln != "-":
            for part in ln.split(";"):
                if not part.strip():
                    continue
                try:
                    a, b = part.split(",")
                    ivs.append((exact(a.strip()), exact(b.strip())))
                except ValueError:
                    raise DomainError(f"codeword {lineno}: bad interval {part.strip()!r}") from None
        words.append(IntervalSet(T, ivs))
    return ContinuousCode(T, words)


def format_code(code: ContinuousCode) -> str:
    out = [f"T={code.horizon}"]
    for c in code.codewords:
        out.append(";".join(f"{a},{b}" for a, b in c.intervals) or "-")
    return "\n".join(out) + "\n"
