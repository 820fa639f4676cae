import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from pointcover.core import BinaryMask, DomainError, Finite, PointPattern, continuous_distortion, \
    discrete_distortion, mask_to_interval_set
from pointcover.covering import (BudgetExceeded, CodebookSpec, CoveringCode, VirtualCodebook,
                                 binomial_pmf, codebook_size, codeword, cover_probability, decode, encode,
                                 expected_covered_distortion, fallback_probability, occupancy_pmf,
                                 occupied_slots_pmf, predict_cover_run, run_covering_trials)
from pointcover.rng import SeedSpec
from pointcover.sources import SourceConfig


def m(bits, delta=Fraction(1, 3)):
    return BinaryMask(delta, np.array(bits, dtype=np.uint8))


EXPLICIT = [m([1, 1, 1]), m([0, 1, 0]), m([1, 0, 1])]


def spec(rate=1.0, T=4, delta=0.25, D=0.5, seed=0, **kw):
    return CodebookSpec(rate, T, delta, D, SeedSpec(seed), **kw)


def test_codebook_size():
    assert spec(rate=1.3, T=16).M == 1_825_677 == math.ceil(2 ** 20.8)
    assert spec(rate=0.0).M == 2
    assert codebook_size(1, 4) == 16


def test_codeword_one_is_all_one():
    s = spec()
    assert codeword(s, 1).bits.all()
    with pytest.raises(IndexError):
        codeword(s, 0)
    with pytest.raises(IndexError):
        codeword(s, s.M + 1)


def test_codeword_is_deterministic():
    s = spec(rate=2, T=8, delta=0.01)
    assert codeword(s, 7) == codeword(s, 7)
    assert codeword(s, 7) != codeword(s, 8)
    assert codeword(spec(rate=2, T=8, delta=0.01, seed=1), 7) != codeword(s, 7)


def test_codeword_bit_frequency():
    D, n, M = 0.3, 40, 4001
    book = VirtualCodebook(SeedSpec(2), n, 0.1, D)
    freq = np.mean([book.bits(j) for j in range(2, M + 1)], axis=0)
    assert np.all(np.abs(freq - D) < 4 * math.sqrt(D * (1 - D) / (M - 1)))


def test_explicit_encode_decode_example():
    code = CoveringCode.from_codewords(EXPLICIT)
    r = code.encode(m([1, 0, 0]))
    assert r.index == 3 and not r.fallback
    out = code.decode(r)
    assert out.bits.tolist() == [1, 0, 1]
    assert discrete_distortion(m([1, 0, 0]), out) == Finite(Fraction(2, 3))
    assert code.encode(m([1, 1, 1])).fallback


def test_explicit_code_requires_all_one_first():
    with pytest.raises(DomainError):
        CoveringCode.from_codewords(EXPLICIT[1:])


def test_all_zero_source_takes_first_random_codeword():
    s = spec()
    assert encode(s, BinaryMask.zeros(0.25, 16)).index == 2


def test_all_one_source_falls_back():
    s = spec(rate=10 / 64, T=64, delta=1)
    assert s.M == 1024
    r = encode(s, BinaryMask.ones(1, 64))
    assert r.index == 1 and r.fallback
    assert decode(s, r).bits.all()


def test_encode_geometry_mismatch():
    with pytest.raises(DomainError):
        encode(spec(), BinaryMask.zeros(0.5, 8))


def test_encode_returns_first_cover():
    s = spec(rate=3, T=4, delta=0.25)
    rng = np.random.default_rng(1)
    code = CoveringCode(s)
    for _ in range(30):
        z = m(rng.random(16) < 0.15, 0.25)
        r = code.encode(z)
        later_fail = [not code.codeword(k).covers(z) for k in range(2, r.index)]
        assert all(later_fail)
        assert code.decode(r).covers(z)


def test_prefix_monotone():
    rng = np.random.default_rng(3)
    words = [m(rng.random(12) < 0.5, 0.25) for _ in range(60)]
    full = [BinaryMask.ones(0.25, 12)] + words
    for _ in range(40):
        z = m(rng.random(12) < 0.2, 0.25)
        idx = [CoveringCode.from_codewords(full[:k]).encode(z).index for k in range(2, len(full) + 1)]
        covered = [i for i in idx if i != 1]
        assert all(a >= b for a, b in zip(covered, covered[1:]))


def test_cover_probability_examples():
    assert cover_probability(0, 0.3) == 1.0
    assert cover_probability(16, 0.5) == pytest.approx(1.526e-5, rel=1e-3)
    assert cover_probability(16, 0.5) == 2.0 ** -16


def test_cover_frequency_monte_carlo():
    D, k, N = 0.5, 10, 1_000_000
    book = VirtualCodebook(SeedSpec(5, ("mc",)), 64, 1, D)
    count, _ = book.count_covers(np.arange(0, 60, 6), 0, N, N + 1)
    mean = N * D ** k
    assert abs(count - mean) < 4 * math.sqrt(N * D ** k * (1 - D ** k))


def test_expected_covered_distortion_examples():
    assert expected_covered_distortion(1, 0.01, 0.5) == pytest.approx(0.505)
    assert expected_covered_distortion(0, 0.01, 0.5) == 0.5
    for delta in (1e-2, 1e-4, 1e-6):
        assert abs(expected_covered_distortion(2, delta, 0.3) - 0.3) <= 2 * delta
    with pytest.raises(DomainError):
        expected_covered_distortion(200, 0.01, 0.5)


def test_fallback_law_for_fixed_source():
    """P(fallback) = (1 - D^k)^(M-1); compare across independent codebooks."""
    D, k, M, trials = 0.5, 6, 64, 3000
    z = m([1] * k + [0] * 10, 0.25)
    s0 = CodebookSpec(math.log2(M) / 4, 4, 0.25, D)
    assert s0.M == M
    fb = sum(CoveringCode(CodebookSpec(s0.rate, 4, 0.25, D, SeedSpec(9, ("fb", t)))).encode(z).fallback
             for t in range(trials))
    p = fallback_probability(k, D, M)
    assert abs(fb / trials - p) < 4 * math.sqrt(p * (1 - p) / trials)


def test_first_cover_free_positions_are_ber_d():
    """Free slots of the chosen codeword are IID Ber(D) given a cover."""
    D, trials = 0.4, 400
    z = m([1, 1, 0, 0, 1] + [0] * 35, 0.25)
    free = []
    for t in range(trials):
        code = CoveringCode(CodebookSpec(2.0, 10, 0.25, D, SeedSpec(4, ("free", t))))
        r = code.encode(z)
        if not r.fallback:
            free.append(code.decode(r).bits[z.bits == 0])
    free = np.concatenate(free)
    assert abs(free.mean() - D) < 4 * math.sqrt(D * (1 - D) / free.size)


def test_budget_refusal_names_cap():
    with pytest.raises(BudgetExceeded, match="33554432"):
        CoveringCode(spec(rate=2, T=16))
    with pytest.raises(BudgetExceeded):
        CoveringCode(spec(rate=1, T=8, budget=100))


def test_spec_validation():
    with pytest.raises(DomainError):
        spec(D=0)
    with pytest.raises(DomainError):
        spec(D=1)


def test_binomial_and_occupancy_pmfs():
    assert binomial_pmf(10, 0.3) == pytest.approx(stats.binom.pmf(np.arange(11), 10, 0.3), abs=1e-14)
    occ = occupancy_pmf(5, 8)
    rng = np.random.default_rng(0)
    draws = np.array([len(set(rng.integers(0, 8, 5))) for _ in range(20000)])
    emp = np.bincount(draws, minlength=6) / draws.size
    assert np.abs(emp - occ).max() < 0.01
    assert occ.sum() == pytest.approx(1.0)


def test_occupied_slots_pmf_poisson():
    pmf = occupied_slots_pmf(SourceConfig(1, 16), 0.01)
    assert pmf.size == 1601
    assert np.dot(pmf, np.arange(pmf.size)) == pytest.approx(1600 * -math.expm1(-0.01))
    assert occupied_slots_pmf(SourceConfig(1, 16, "renewal"), 0.01) is None
    grid = occupied_slots_pmf(SourceConfig(1, 16, "grid"), 0.01)
    assert grid[16] == 1.0


def test_prediction_exact_small_case():
    """Predicted fallback rate against brute-force enumeration of k."""
    n, D, M = 20, 0.5, 40
    pmf = binomial_pmf(n, 0.1)
    pred = predict_cover_run(pmf, n, D, M)
    fb = sum(pmf[k] * (1 - D ** k) ** (M - 1) for k in range(n + 1))
    assert pred["fallback_rate"] == pytest.approx(fb, rel=1e-12)


def test_run_never_misses_and_is_reproducible():
    s = spec(rate=2.5, T=6, delta=0.05, D=0.5)
    src = SourceConfig(1, 6)
    a = run_covering_trials(s, src, 30, seed=3)
    b = run_covering_trials(s, src, 30, seed=3, workers=4)
    assert [(r.k_ones, r.index, r.distortion) for r in a.records] == \
        [(r.k_ones, r.index, r.distortion) for r in b.records]
    assert all(isinstance(r.distortion, Fraction) for r in a.records)
    assert a.prediction is not None


def test_run_against_fixed_pattern():
    pat = PointPattern(4, [0.5, 1.5, 3.2])
    run = run_covering_trials(spec(rate=2, T=4, delta=0.25), pat, 10, seed=1)
    assert all(r.k_ones == 3 for r in run.records)
    for r in run.records:
        if r.fallback:
            assert r.distortion == 1


def test_run_matches_prediction_small_scale():
    s = spec(rate=1.5, T=8, delta=0.1, D=0.5)
    run = run_covering_trials(s, SourceConfig(1, 8), 400, seed=12)
    p = run.prediction
    se = math.sqrt(p["fallback_rate"] * (1 - p["fallback_rate"]) / 400)
    assert abs(run.fallback_rate - p["fallback_rate"]) < 4 * se + 1e-9
    d = np.array([float(r.distortion) for r in run.records])
    assert abs(d.mean() - p["mean_distortion"]) < 4 * d.std(ddof=1) / math.sqrt(d.size)


def test_horizon_mismatch_rejected():
    with pytest.raises(DomainError):
        run_covering_trials(spec(T=4), SourceConfig(1, 5), 1)


def test_fallback_distortion_is_one_on_padded_horizon():
    s = CodebookSpec(0.0, 1, 0.3, 0.5)
    code = CoveringCode(s)
    ones = code.codeword(1)
    assert continuous_distortion(PointPattern(1, [0.9]), mask_to_interval_set(ones)) == Finite(Fraction(1))
