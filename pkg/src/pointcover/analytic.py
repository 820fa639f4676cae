"""Rate-distortion functions for covering point patterns.

All rates are in bits (log base 2).  ``rd_discrete`` is the rate-distortion
function of the slotted source ``Ber(1 - exp(-lam*delta))`` under the covering
distortion; ``rd_oracle_blahut`` recomputes it numerically by alternating
minimization and is used to check the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DomainError


class InfeasibleError(DomainError):
    """No reconstruction meets the distortion budget at this slot width."""


@dataclass(frozen=True)
class TestChannel:
    p_hat1_given_0: float
    p_hat1_given_1: float

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class RdPoint:
    distortion: float
    rate: float


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def rd_poisson(D: float, lam: float) -> float:
    """``-lam * log2(D)`` bits per second for D < 1, zero beyond."""
    if D <= 0:
        raise DomainError(f"distortion must be positive, got {D}")
    if lam < 0:
        raise DomainError(f"intensity must be >= 0, got {lam}")
    if D >= 1:
        return 0.0
    return -lam * math.log2(D)


def _slot_one_prob(lam: float, delta: float) -> float:
    return -math.expm1(-lam * delta)


def _check_discrete(D, lam, delta):
    if D <= 0:
        raise DomainError(f"distortion must be positive, got {D}")
    if lam < 0:
        raise DomainError(f"intensity must be >= 0, got {lam}")
    if delta <= 0:
        raise DomainError(f"slot width must be positive, got {delta}")


def optimal_test_channel(D: float, lam: float, delta: float) -> TestChannel:
    """Minimizing channel for D in (0, 1): ``P(1|0) = 1 - (1-D) e^{lam delta}``, ``P(1|1) = 1``."""
    _check_discrete(D, lam, delta)
    if D >= 1:
        raise DomainError("the test channel is only defined for D in (0, 1)")
    p1 = _slot_one_prob(lam, delta)
    if D < p1 * (1 - 1e-12):
        raise InfeasibleError(
            f"D={D} is below the slot occupancy 1-exp(-lam*delta)={p1:.6g}; "
            "covering only the occupied slots already exceeds the budget")
    a = 1.0 - (1.0 - D) * math.exp(lam * delta)
    return TestChannel(min(max(a, 0.0), 1.0), 1.0)


def rd_discrete(D: float, lam: float, delta: float) -> float:
    """Bits per slot: ``Hb(D) - exp(-lam delta) Hb(1 - (1-D) exp(lam delta))``."""
    _check_discrete(D, lam, delta)
    if D >= 1:
        return 0.0
    a = optimal_test_channel(D, lam, delta).p_hat1_given_0
    return max(binary_entropy(D) - math.exp(-lam * delta) * binary_entropy(a), 0.0)


def channel_mutual_information(source_p1: float, ch: TestChannel) -> float:
    """I(Z; Zhat) in bits for a Bernoulli source through a binary channel."""
    p0 = 1.0 - source_p1
    q1 = p0 * ch.p_hat1_given_0 + source_p1 * ch.p_hat1_given_1
    return binary_entropy(q1) - p0 * binary_entropy(ch.p_hat1_given_0) \
        - source_p1 * binary_entropy(ch.p_hat1_given_1)


def channel_distortion(source_p1: float, ch: TestChannel) -> float:
    """Expected per-slot covering distortion: probability of outputting 1."""
    return (1.0 - source_p1) * ch.p_hat1_given_0 + source_p1 * ch.p_hat1_given_1


def rd_wyner_ziv(D: float, lam: float, p: float) -> float:
    """Rate with each point known at the decoder w.p. ``p``: R_Pois(D, (1-p) lam)."""
    if not 0 <= p <= 1:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    return rd_poisson(D, (1.0 - p) * lam)


# -- alternating-minimization oracle ----------------------------------------


def _ba_step(p1, w, q1):
    a = q1 * w / ((1.0 - q1) + q1 * w)
    return p1 + (1.0 - p1) * a, a


def _ba_point(p1, beta, q1, tol, max_iter):
    """Blahut-Arimoto at slope ``beta`` on the 2x2 problem.

    The 1 -> 0 transition has infinite cost and is pinned to zero, so the
    only free entry is ``P(1|0)``.  Near D = 1 the plain iteration contracts
    very slowly, so every pair of updates is followed by an Aitken
    extrapolation.  Returns ``(q1, P(1|0))`` at the fixed point.

    ``q1 = 1`` is always a fixed point and is the only stable one when
    ``beta <= -ln(1 - p1)``; otherwise iterating upward from ``q1 = p1``
    reaches the interior one.
    """
    if beta <= -math.log1p(-p1):
        return 1.0, 1.0
    w = math.exp(-beta)
    for _ in range(max_iter):
        q_a, _ = _ba_step(p1, w, q1)
        q_b, _ = _ba_step(p1, w, q_a)
        d1, d2 = q_a - q1, q_b - q_a
        denom = d2 - d1
        # Aitken's estimate of the remaining distance to the fixed point; the
        # raw step stalls at a rounding floor near 1e-15 when contraction is slow
        corr = -d2 * d2 / denom if denom != 0.0 else 0.0
        q1 = q_b + corr if p1 < q_b + corr < 1.0 else q_b
        if abs(corr) + abs(d2) < tol:
            break
    q1, _ = _ba_step(p1, w, q1)
    return q1, q1 * w / ((1.0 - q1) + q1 * w)


def rd_oracle_blahut(source_p1: float, D: float, tol: float = 1e-9,
                     max_iter: int = 200_000) -> float:
    """Rate-distortion of ``Ber(source_p1)`` under the covering distortion,
    computed by Blahut-Arimoto with a bisection on the slope to hit ``D``.
    """
    if not 0 < source_p1 < 1:
        raise DomainError(f"source probability must lie in (0, 1), got {source_p1}")
    if D <= 0:
        raise DomainError(f"distortion must be positive, got {D}")
    if D >= 1:
        return 0.0
    if D < source_p1 * (1 - 1e-12):
        raise InfeasibleError(f"D={D} below source probability {source_p1}")
    inner_tol = tol * 1e-3
    lo, hi = 0.0, 745.0  # exp(-745) underflows to 0: the boundary channel
    for _ in range(200):
        beta = 0.5 * (lo + hi)
        q1, a = _ba_point(source_p1, beta, source_p1, inner_tol, max_iter)
        if q1 > D:
            lo = beta
        else:
            hi = beta
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    q1, a = _ba_point(source_p1, hi, source_p1, inner_tol, max_iter)
    return channel_mutual_information(source_p1, TestChannel(a, 1.0))
