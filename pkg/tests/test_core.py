from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointcover.core import (MISS, BinaryMask, DomainError, Finite, IntervalSet, PointPattern,
                             continuous_distortion, counting_function, difference, discrete_distortion,
                             discretize, exact, intersection, mask_to_interval_set, measure, num_slots,
                             symmetric_difference, union)

Q = Fraction


def mask(bits, delta=0.25):
    return BinaryMask(delta, np.array(bits, dtype=np.uint8))


# -- examples ------------------------------------------------------------------


def test_counting_function_examples():
    p = PointPattern(1, [0.5, 0.9])
    assert counting_function(p, 0.7) == 1
    assert counting_function(p, 0.5) == 1
    assert counting_function(PointPattern(1), 1) == 0
    assert counting_function(p, 1) == 2


def test_counting_function_domain():
    with pytest.raises(DomainError):
        counting_function(PointPattern(1, [0.5]), 1.5)
    with pytest.raises(DomainError):
        counting_function(PointPattern(1, [0.5]), -0.1)


def test_pattern_invariants():
    with pytest.raises(DomainError):
        PointPattern(1, [0.0])
    with pytest.raises(DomainError):
        PointPattern(1, [1.2])
    with pytest.raises(DomainError):
        PointPattern(1, [0.3, 0.3])
    p = PointPattern(1, [0.9, 0.1])
    assert p.points.tolist() == [0.1, 0.9]
    with pytest.raises(ValueError):
        p.points[0] = 0.2


def test_continuous_distortion_examples():
    assert continuous_distortion(PointPattern(1, [0.5]), IntervalSet(1, [(0.4, 0.7)])) == Finite(Q(3, 10))
    assert continuous_distortion(PointPattern(1, [0.8]), IntervalSet(1, [(0, 0.5)])) is MISS
    assert continuous_distortion(PointPattern(1), IntervalSet.empty(1)) == Finite(Q(0))


def test_continuous_distortion_horizon_mismatch():
    with pytest.raises(DomainError):
        continuous_distortion(PointPattern(2, [0.5]), IntervalSet(1, [(0, 1)]))


def test_discretize_examples():
    assert discretize(PointPattern(1, [0.1, 0.3, 0.31, 0.9]), 0.25).bits.tolist() == [1, 1, 0, 1]
    assert discretize(PointPattern(1), 0.25).bits.tolist() == [0, 0, 0, 0]
    assert discretize(PointPattern(1, [0.25]), 0.25).bits.tolist() == [1, 0, 0, 0]


def test_slot_count_is_exact_in_decimal():
    assert num_slots(16, 0.01) == 1600
    assert num_slots(1, 0.1) == 10
    assert num_slots(1, 0.3) == 4
    # 0.3 lies on the 0.1 grid in decimal, so it ends slot 3, not slot 4
    assert discretize(PointPattern(1, [0.3]), 0.1).ones_positions().tolist() == [2]


def test_padding_rule():
    m = discretize(PointPattern(1, [0.95]), 0.3)
    assert m.n == 4 and m.padded_horizon == Q(6, 5)
    assert m.bits.tolist() == [0, 0, 0, 1]


def test_mask_to_interval_set_examples():
    s = mask_to_interval_set(mask([1, 1, 0, 1]))
    assert s.intervals == ((0, Q(1, 2)), (Q(3, 4), 1))
    assert not mask_to_interval_set(mask([0, 0, 0, 0]))
    full = mask_to_interval_set(mask([1, 1, 1, 1]))
    assert full.intervals == ((0, 1),) and full.measure() == 1


def test_discrete_distortion_examples():
    assert discrete_distortion(mask([1, 0, 0, 0]), mask([1, 0, 1, 0])) == Finite(Q(1, 2))
    assert discrete_distortion(mask([0, 1]), mask([1, 0])) is MISS
    assert discrete_distortion(mask([0, 0]), mask([0, 0])) == Finite(Q(0))
    with pytest.raises(DomainError):
        discrete_distortion(mask([0, 0]), mask([0, 0, 0]))


def test_interval_algebra_examples():
    a, b = IntervalSet(1, [(0, 0.5)]), IntervalSet(1, [(0.25, 0.75)])
    sd = symmetric_difference(a, b)
    assert sd.intervals == ((0, Q(1, 4)), (Q(1, 2), Q(3, 4))) and measure(sd) == Q(1, 2)
    assert measure(difference(a, a)) == 0 and not difference(a, a)
    assert IntervalSet(1, [(0, 0.5), (0.5, 1)]).intervals == ((0, 1),)
    assert union(IntervalSet(1, [(0, 0.5)]), IntervalSet(1, [(0.5, 1)])).intervals == ((0, 1),)
    with pytest.raises(DomainError):
        union(a, IntervalSet(2, [(0, 1)]))


def test_interval_half_open_membership():
    s = IntervalSet(1, [(0.2, 0.4)])
    assert not s.contains(0.2) and s.contains(0.4) and s.contains(0.3)


def test_miss_is_singleton_and_not_float_inf():
    from pointcover.core import Miss
    assert Miss() is MISS
    assert MISS.is_miss and not Finite(Q(0)).is_miss


def test_binary_mask_words_and_covers():
    a = mask([1, 0, 1, 1] * 20, 0.01)
    b = mask([1, 1, 1, 1] * 20, 0.01)
    assert b.covers(a) and not a.covers(b)
    words = a.words
    assert words.dtype == np.uint64 and words.size == 2
    unpacked = np.unpackbits(words.view(np.uint8), bitorder="little")[:80]
    assert unpacked.tolist() == a.bits.tolist()


# -- properties ----------------------------------------------------------------


def _grid_pattern(draw, n, delta):
    """Times drawn in decimal so that slot boundaries are hit now and then."""
    ticks = draw(st.lists(st.integers(1, n * 4), max_size=12, unique=True))
    T = exact(delta) * n
    return PointPattern(T, [float(Q(t, 4) * exact(delta)) for t in ticks])


@st.composite
def pattern_and_mask(draw):
    delta = draw(st.sampled_from([0.25, 0.1, 0.01, 0.3, 0.125]))
    n = draw(st.integers(1, 40))
    p = _grid_pattern(draw, n, delta)
    z = discretize(p, delta)
    bits = np.array(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.uint8)
    if draw(st.booleans()):
        bits = bits | z.bits  # bias toward covering masks
    return p, BinaryMask(delta, bits)


@settings(max_examples=300, deadline=None)
@given(pattern_and_mask())
def test_distortion_equivalence(pm):
    p, zhat = pm
    z = discretize(p, zhat.delta)
    assert continuous_distortion(p, mask_to_interval_set(zhat)) == discrete_distortion(z, zhat)


@settings(max_examples=200, deadline=None)
@given(pattern_and_mask())
def test_mask_measure_and_counts(pm):
    p, m = pm
    assert mask_to_interval_set(m).measure() == m.delta * m.popcount()
    assert counting_function(p, p.horizon) == len(p)
    assert discretize(p, m.delta).popcount() <= len(p)


@st.composite
def interval_sets(draw, horizon=Q(1)):
    k = draw(st.integers(0, 5))
    ends = sorted(draw(st.lists(st.integers(0, 64), min_size=2 * k, max_size=2 * k)))
    ivs = [(Q(ends[2 * i], 64), Q(ends[2 * i + 1], 64)) for i in range(k) if ends[2 * i] < ends[2 * i + 1]]
    return IntervalSet(horizon, ivs)


@settings(max_examples=300, deadline=None)
@given(interval_sets(), interval_sets())
def test_interval_algebra_identities(a, b):
    assert measure(symmetric_difference(a, b)) == measure(difference(a, b)) + measure(difference(b, a))
    u = measure(union(a, b))
    assert u <= measure(a) + measure(b)
    assert (u == measure(a) + measure(b)) == (measure(intersection(a, b)) == 0)
    assert a.issubset(union(a, b)) and intersection(a, b).issubset(a)
    # normalized form: sorted, disjoint, non-touching
    for s in (union(a, b), difference(a, b), symmetric_difference(a, b)):
        for (l1, h1), (l2, h2) in zip(s.intervals, s.intervals[1:]):
            assert l1 < h1 < l2 < h2
