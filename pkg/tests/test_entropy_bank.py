"""
test_entropy_bank.py — Unit tests for the entropy estimators.

Tests cover:
    - Coarse-graining arithmetic
    - Sample, permutation, dispersion and fluctuation dispersion entropy
      against naive enumeration oracles
    - Analytic bounds and invariances
    - Spectral and wavelet entropy normalization
    - Multiscale driver behavior on white and 1/f noise
"""

import math
import sys
from collections import Counter
from itertools import permutations
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.entropy_bank import (
    EntropyParams,
    Estimator,
    coarse_grain,
    dispersion_entropy,
    fluctuation_dispersion_entropy,
    multiscale,
    normalized_shannon,
    permutation_entropy,
    sample_entropy,
    spectral_entropy,
    wavelet_log_energy_entropy,
)
from src.errors import DegenerateSeriesError, UndefinedEntropyError


# ---------------------------------------------------------------------------
# Naive oracles
# ---------------------------------------------------------------------------

def _naive_sample_entropy(x: list[float], m: int, r: float) -> float:
    """Double-loop pair counter over the first N - m templates."""
    n = len(x)
    b = a = 0
    for i in range(n - m):
        for j in range(i + 1, n - m):
            if max(abs(x[i + k] - x[j + k]) for k in range(m)) < r:
                b += 1
                if abs(x[i + m] - x[j + m]) < r:
                    a += 1
    return -math.log(a / b)


def _entropy_of(counter: Counter) -> float:
    total = sum(counter.values())
    return -sum((c / total) * math.log(c / total) for c in counter.values())


def _naive_permutation_entropy(x: list[float], m: int, d: int) -> float:
    patterns = Counter()
    for i in range(len(x) - (m - 1) * d):
        vec = [x[i + k * d] for k in range(m)]
        patterns[tuple(sorted(range(m), key=lambda k: (vec[k], k)))] += 1
    return _entropy_of(patterns)


def _naive_classes(x: list[float], c: int) -> list[int]:
    mu = sum(x) / len(x)
    sigma = math.sqrt(sum((v - mu) ** 2 for v in x) / len(x))
    classes = []
    for v in x:
        y = 0.5 * (1.0 + math.erf((v - mu) / (sigma * math.sqrt(2.0))))
        classes.append(min(max(math.floor(c * y + 1.0), 1), c))
    return classes


def _naive_dispersion_entropy(x: list[float], m: int, c: int, d: int) -> float:
    z = _naive_classes(x, c)
    patterns = Counter(
        tuple(z[i + k * d] for k in range(m)) for i in range(len(z) - (m - 1) * d)
    )
    return _entropy_of(patterns)


def _naive_fluctuation_dispersion_entropy(x: list[float], m: int, c: int, d: int) -> float:
    z = _naive_classes(x, c)
    patterns = Counter()
    for i in range(len(z) - (m - 1) * d):
        digits = [z[i + k * d] for k in range(m)]
        patterns[tuple(digits[k + 1] - digits[k] for k in range(m - 1))] += 1
    return _entropy_of(patterns)


def _pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """1/f noise by spectral shaping of white noise."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n)
    freqs[0] = freqs[1]
    return np.fft.irfft(spectrum / np.sqrt(freqs), n)


# ---------------------------------------------------------------------------
# Coarse-graining
# ---------------------------------------------------------------------------

class TestCoarseGrain:
    """Tests for coarse_grain."""

    def test_scale_two_averages_pairs(self):
        assert coarse_grain([1, 2, 3, 4, 5, 6], 2).tolist() == [1.5, 3.5, 5.5]

    def test_scale_one_is_identity(self):
        x = np.random.default_rng(0).standard_normal(17)
        np.testing.assert_array_equal(coarse_grain(x, 1), x)

    def test_remainder_dropped(self):
        assert coarse_grain([1, 2, 3, 4, 5, 6, 7], 3).tolist() == [2.0, 5.0]

    def test_mean_preserved_over_covered_prefix(self):
        x = np.random.default_rng(1).standard_normal(103)
        coarse = coarse_grain(x, 7)
        assert len(coarse) == 103 // 7
        assert abs(coarse.mean() - x[: len(coarse) * 7].mean()) < 1e-12

    @pytest.mark.parametrize("tau", [0, 8])
    def test_out_of_range_scale_raises(self, tau):
        with pytest.raises(ValueError):
            coarse_grain([1.0] * 7, tau)


# ---------------------------------------------------------------------------
# Sample entropy
# ---------------------------------------------------------------------------

class TestSampleEntropy:
    """Tests for sample_entropy."""

    def test_constant_series_is_zero(self):
        assert sample_entropy(np.full(100, 3.0), 2, 0.2) == 0.0

    def test_ramp_without_matches_raises_with_counts(self):
        with pytest.raises(UndefinedEntropyError) as info:
            sample_entropy(np.arange(50, dtype=float), 2, 0.5)
        assert info.value.a == 0
        assert info.value.b == 0

    def test_matches_naive_counter_length_64(self):
        x = np.random.default_rng(7).standard_normal(64)
        r = 0.2 * float(np.std(x))
        expected = _naive_sample_entropy(x.tolist(), 2, r)
        assert sample_entropy(x, 2, r) == pytest.approx(expected, rel=1e-12)

    def test_matches_naive_counter_random_parameters(self):
        """Random lengths and tolerances; skip draws the oracle also leaves undefined."""
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(60):
            n = int(rng.integers(32, 200))
            m = int(rng.integers(1, 4))
            x = rng.standard_normal(n)
            r = float(rng.uniform(0.2, 0.6)) * float(np.std(x))
            try:
                expected = _naive_sample_entropy(x.tolist(), m, r)
            except (ValueError, ZeroDivisionError):
                with pytest.raises(UndefinedEntropyError):
                    sample_entropy(x, m, r)
                continue
            assert sample_entropy(x, m, r) == pytest.approx(expected, rel=1e-9)
            checked += 1
        assert checked >= 30

    def test_invalid_tolerance_raises(self):
        with pytest.raises(ValueError):
            sample_entropy([1.0, 2.0, 3.0, 4.0], 2, 0.0)

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            sample_entropy([1.0, 2.0, 3.0], 2, 0.5)


# ---------------------------------------------------------------------------
# Permutation entropy
# ---------------------------------------------------------------------------

class TestPermutationEntropy:
    """Tests for permutation_entropy."""

    def test_monotone_series_is_zero(self):
        assert permutation_entropy(np.arange(1, 11, dtype=float), 3, 1) == 0.0

    def test_hand_enumerated_example(self):
        value = permutation_entropy([4, 7, 9, 10, 6, 11, 3], 2, 1)
        expected = -(4 / 6) * math.log(4 / 6) - (2 / 6) * math.log(2 / 6)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_alternating_series_is_ln2(self):
        assert permutation_entropy([1, 2, 1, 2, 1], 2, 1) == pytest.approx(math.log(2))

    def test_matches_pattern_enumeration_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(32, 513))
            m = int(rng.integers(2, 6))
            d = int(rng.integers(1, 4))
            x = np.round(rng.standard_normal(n), 1)  # rounding forces ties
            expected = _naive_permutation_entropy(x.tolist(), m, d)
            assert permutation_entropy(x, m, d) == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            y = rng.standard_normal(int(rng.integers(20, 300)))
            assert permutation_entropy(y, 4, 1) == permutation_entropy(np.exp(y), 4, 1)

    def test_upper_bound(self):
        rng = np.random.default_rng(6)
        for m in (2, 3, 4, 5):
            value = permutation_entropy(rng.standard_normal(400), m, 1)
            assert 0.0 <= value <= math.log(math.factorial(m)) + 1e-12

    def test_all_patterns_counted(self):
        """Every permutation of length 3 appears in a crafted series."""
        series = []
        for perm in permutations(range(3)):
            series.extend(float(v) for v in perm)
            series.append(100.0)
        assert permutation_entropy(series, 3, 1) > 0.0

    def test_insufficient_length_raises(self):
        with pytest.raises(ValueError):
            permutation_entropy([1.0, 2.0, 3.0], 3, 1)


# ---------------------------------------------------------------------------
# Dispersion family
# ---------------------------------------------------------------------------

class TestDispersionEntropy:
    """Tests for dispersion_entropy."""

    def test_matches_enumeration_oracle_length_30(self):
        x = np.random.default_rng(21).standard_normal(30)
        expected = _naive_dispersion_entropy(x.tolist(), 2, 3, 1)
        assert dispersion_entropy(x, 2, 3, 1) == pytest.approx(expected, rel=1e-12)

    def test_matches_enumeration_oracle_random_parameters(self):
        rng = np.random.default_rng(22)
        for _ in range(200):
            n = int(rng.integers(32, 513))
            m = int(rng.integers(2, 5))
            c = int(rng.integers(2, 8))
            d = int(rng.integers(1, 3))
            x = rng.standard_normal(n)
            expected = _naive_dispersion_entropy(x.tolist(), m, c, d)
            assert dispersion_entropy(x, m, c, d) == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_upper_bound(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            x = rng.standard_normal(int(rng.integers(50, 400)))
            assert 0.0 <= dispersion_entropy(x, 3, 6, 1) <= math.log(6 ** 3) + 1e-12

    def test_affine_invariance_is_exact(self):
        rng = np.random.default_rng(24)
        for _ in range(100):
            y = rng.standard_normal(int(rng.integers(50, 400)))
            assert dispersion_entropy(2 * y + 3, 3, 6, 1) == dispersion_entropy(y, 3, 6, 1)

    def test_constant_series_raises(self):
        with pytest.raises(DegenerateSeriesError):
            dispersion_entropy(np.full(50, 1.5), 3, 6, 1)

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            dispersion_entropy(np.arange(50, dtype=float), 3, 1, 1)


class TestFluctuationDispersionEntropy:
    """Tests for fluctuation_dispersion_entropy."""

    def test_matches_enumeration_oracle_length_30(self):
        x = np.random.default_rng(31).standard_normal(30)
        expected = _naive_fluctuation_dispersion_entropy(x.tolist(), 3, 3, 1)
        assert fluctuation_dispersion_entropy(x, 3, 3, 1) == pytest.approx(expected, rel=1e-12)

    def test_matches_enumeration_oracle_random_parameters(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            n = int(rng.integers(32, 513))
            m = int(rng.integers(2, 5))
            c = int(rng.integers(2, 8))
            d = int(rng.integers(1, 3))
            x = rng.standard_normal(n)
            expected = _naive_fluctuation_dispersion_entropy(x.tolist(), m, c, d)
            value = fluctuation_dispersion_entropy(x, m, c, d)
            assert value == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_upper_bound(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            x = rng.standard_normal(int(rng.integers(50, 400)))
            value = fluctuation_dispersion_entropy(x, 3, 6, 1)
            assert 0.0 <= value <= 2 * math.log(11) + 1e-12

    def test_offset_invariance_is_exact(self):
        rng = np.random.default_rng(34)
        for _ in range(100):
            y = rng.standard_normal(int(rng.integers(50, 400)))
            assert fluctuation_dispersion_entropy(2 * y + 3, 3, 6, 1) == (
                fluctuation_dispersion_entropy(y, 3, 6, 1)
            )

    def test_embedding_dimension_one_raises(self):
        with pytest.raises(ValueError):
            fluctuation_dispersion_entropy(np.random.default_rng(0).standard_normal(40), 1, 6, 1)


# ---------------------------------------------------------------------------
# Spectral and wavelet entropy
# ---------------------------------------------------------------------------

class TestSpectralEntropy:
    """Tests for spectral_entropy and normalized_shannon."""

    def test_on_bin_sinusoid_rectangular_window_is_zero(self):
        fs = 128.0
        t = np.arange(1024) / fs
        y = np.sin(2 * np.pi * 16.0 * t)
        assert spectral_entropy(y, fs, window="boxcar") == pytest.approx(0.0, abs=1e-9)

    def test_uniform_noise_is_near_one(self):
        values = [
            spectral_entropy(np.random.default_rng(seed).uniform(-1, 1, 8192), 1000.0)
            for seed in range(20)
        ]
        assert np.mean(values) >= 0.95

    def test_two_equal_bins(self):
        power = np.zeros(40)
        power[[3, 17]] = 2.5
        assert normalized_shannon(power) == pytest.approx(math.log(2) / math.log(40))

    def test_band_restriction_and_range(self):
        y = np.random.default_rng(2).standard_normal(2000)
        value = spectral_entropy(y, 200.0, band=(8.0, 13.0))
        assert 0.0 <= value <= 1.0

    def test_empty_band_raises(self):
        y = np.random.default_rng(2).standard_normal(256)
        with pytest.raises(ValueError):
            spectral_entropy(y, 64.0, band=(10.2, 10.4))

    @pytest.mark.parametrize("band", [(0.0, 10.0), (-1.0, 10.0), (10.0, 60.0), (13.0, 8.0)])
    def test_band_outside_open_nyquist_range_raises(self, band):
        """Band edges must satisfy 0 < lo < hi <= fs/2."""
        y = np.random.default_rng(3).standard_normal(1000)
        with pytest.raises(ValueError, match="must lie within"):
            spectral_entropy(y, 100.0, band=band)

    def test_short_series_raises(self):
        with pytest.raises(ValueError):
            spectral_entropy(np.ones(8), 100.0)

    def test_zero_power_raises(self):
        with pytest.raises(DegenerateSeriesError):
            spectral_entropy(np.zeros(256), 128.0)


class TestWaveletLogEnergyEntropy:
    """Tests for wavelet_log_energy_entropy."""

    def test_single_nonzero_coefficient_is_zero(self):
        assert wavelet_log_energy_entropy([0.0, 0.0, 4.2, 0.0]) == 0.0

    def test_equal_magnitudes_is_one(self):
        assert wavelet_log_energy_entropy([1.0, -1.0, 1.0, -1.0, 1.0]) == pytest.approx(1.0)

    def test_three_four_hand_value(self):
        expected = (-(9 / 25) * math.log(9 / 25) - (16 / 25) * math.log(16 / 25)) / math.log(2)
        assert wavelet_log_energy_entropy([3.0, 4.0]) == pytest.approx(expected, rel=1e-12)
        assert wavelet_log_energy_entropy([3.0, 4.0]) == pytest.approx(0.942683, abs=1e-6)

    def test_all_zero_raises(self):
        with pytest.raises(DegenerateSeriesError):
            wavelet_log_energy_entropy(np.zeros(8))


# ---------------------------------------------------------------------------
# Multiscale driver
# ---------------------------------------------------------------------------

class TestMultiscale:
    """Tests for multiscale and EntropyParams."""

    def test_scale_one_equals_direct_estimator(self):
        x = np.random.default_rng(41).standard_normal(300)
        params = EntropyParams(scales=(1,))
        r = 0.15 * float(np.std(x))
        assert multiscale(Estimator.SAMPLE, x, params) == [(1, sample_entropy(x, 2, r))]
        assert multiscale("MPE", x, params) == [(1, permutation_entropy(x, 4, 1))]
        assert multiscale("MDE", x, params) == [(1, dispersion_entropy(x, 3, 6, 1))]
        assert multiscale("MFDE", x, params) == [(1, fluctuation_dispersion_entropy(x, 3, 6, 1))]

    def test_returns_one_entry_per_scale_in_order(self):
        x = np.random.default_rng(42).standard_normal(600)
        result = multiscale(Estimator.DISPERSION, x, EntropyParams(scales=(3, 1, 5)))
        assert [tau for tau, _ in result] == [3, 1, 5]

    def test_scale_too_large_raises(self):
        x = np.random.default_rng(43).standard_normal(100)
        with pytest.raises(ValueError, match="too large"):
            multiscale(Estimator.SAMPLE, x, EntropyParams(sampen_m=2, scales=(20,)))

    def test_undefined_sample_entropy_recorded_as_none(self):
        x = np.arange(400, dtype=float)
        result = multiscale(Estimator.SAMPLE, x, EntropyParams(r=0.5, scales=(1, 2)))
        assert result == [(1, None), (2, None)]

    def test_constant_series_is_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            multiscale(Estimator.SAMPLE, np.ones(400), EntropyParams(scales=(1,)))

    def test_white_noise_entropy_decreases_with_scale(self):
        params = EntropyParams(scales=(1, 20))
        first, last = [], []
        for seed in range(20):
            x = np.random.default_rng(seed).standard_normal(10000)
            (_, s1), (_, s20) = multiscale(Estimator.SAMPLE, x, params)
            first.append(s1)
            last.append(s20)
        assert np.mean(last) <= 0.7 * np.mean(first)

    def test_pink_noise_entropy_roughly_constant(self):
        params = EntropyParams(scales=(1, 20))
        first, last = [], []
        for seed in range(20):
            x = _pink_noise(10000, np.random.default_rng(100 + seed))
            (_, s1), (_, s20) = multiscale(Estimator.SAMPLE, x, params)
            first.append(s1)
            last.append(s20)
        assert np.mean(last) >= 0.85 * np.mean(first)

    def test_params_from_config_integer_scales(self):
        params = EntropyParams.from_config({"scales": 5, "classes": 4})
        assert params.scales == (1, 2, 3, 4, 5)
        assert params.classes == 4

    @pytest.mark.parametrize(
        "kwargs",
        [{"scales": ()}, {"scales": (0, 1)}, {"classes": 1}, {"disp_m": 1}, {"delay": 0}],
    )
    def test_invalid_params_raise(self, kwargs):
        with pytest.raises(ValueError):
            EntropyParams(**kwargs)
