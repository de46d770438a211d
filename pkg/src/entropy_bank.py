"""
entropy_bank.py — Entropy Estimators for EEG Epochs.

Implements every entropy estimator the feature bank draws on:

    Time domain (each with multiscale coarse-graining)
        MSE   — sample entropy
        MPE   — permutation entropy
        MDE   — dispersion entropy
        MFDE  — fluctuation-based dispersion entropy
    Frequency domain
        Spectral entropy of the Welch PSD, optionally restricted to a band
    Wavelet domain
        Normalized log-energy (Shannon) entropy of wavelet coefficients

All estimators are pure functions of their inputs: no module state, no
randomness, safe to call concurrently. Entropies are in nats.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import welch
from scipy.spatial import cKDTree
from scipy.stats import norm

from src.errors import DegenerateSeriesError, UndefinedEntropyError

logger = logging.getLogger(__name__)

DEFAULT_SCALES: tuple[int, ...] = tuple(range(1, 21))

# A coarse-grained series must yield at least this many embedded vectors
MIN_EMBEDDED_VECTORS = 10


class Estimator(str, Enum):
    """Multiscale estimators, valued by their feature-name prefix."""

    SAMPLE = "MSE"
    PERMUTATION = "MPE"
    DISPERSION = "MDE"
    FLUCTUATION_DISPERSION = "MFDE"


@dataclass(frozen=True)
class EntropyParams:
    """Parameters shared by the entropy estimators.

    Attributes:
        sampen_m: Embedding dimension for sample entropy.
        r_ratio: Sample-entropy tolerance as a fraction of the scale-1 SD.
        r: Absolute tolerance; overrides ``r_ratio`` when set.
        perm_m: Embedding dimension for permutation entropy.
        disp_m: Embedding dimension for the dispersion family.
        classes: Number of dispersion classes ``c``.
        delay: Time delay ``d`` for all embeddings.
        scales: Coarse-graining scale factors.
    """

    sampen_m: int = 2
    r_ratio: float = 0.15
    r: float | None = None
    perm_m: int = 4
    disp_m: int = 3
    classes: int = 6
    delay: int = 1
    scales: tuple[int, ...] = DEFAULT_SCALES

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        if not self.scales or min(self.scales) < 1:
            raise ValueError(f"scales must be positive integers, got {self.scales}")
        if len(set(self.scales)) != len(self.scales):
            raise ValueError(f"scales must be unique, got {self.scales}")
        if self.sampen_m < 1 or self.perm_m < 1:
            raise ValueError("embedding dimensions must be >= 1")
        if self.disp_m < 2:
            raise ValueError("dispersion embedding dimension must be >= 2 (FDE needs m >= 2)")
        if self.classes < 2:
            raise ValueError(f"classes must be >= 2, got {self.classes}")
        if self.delay < 1:
            raise ValueError(f"delay must be >= 1, got {self.delay}")
        if self.r_ratio <= 0 or (self.r is not None and self.r <= 0):
            raise ValueError("sample-entropy tolerance must be positive")

    @classmethod
    def from_config(cls, cfg: dict[str, Any]) -> "EntropyParams":
        """Build parameters from the ``entropy`` config section.

        ``scales`` may be an integer (meaning 1..n) or an explicit list.
        """
        scales = cfg.get("scales", len(DEFAULT_SCALES))
        if isinstance(scales, int):
            scales = tuple(range(1, scales + 1))
        return cls(
            sampen_m=int(cfg.get("sampen_m", 2)),
            r_ratio=float(cfg.get("r_ratio", 0.15)),
            r=None if cfg.get("r") is None else float(cfg["r"]),
            perm_m=int(cfg.get("perm_m", 4)),
            disp_m=int(cfg.get("disp_m", 3)),
            classes=int(cfg.get("classes", 6)),
            delay=int(cfg.get("delay", 1)),
            scales=tuple(scales),
        )

    def embedding_dimension(self, estimator: Estimator) -> int:
        """Return the embedding dimension used by ``estimator``."""
        estimator = Estimator(estimator)
        if estimator is Estimator.SAMPLE:
            return self.sampen_m
        if estimator is Estimator.PERMUTATION:
            return self.perm_m
        return self.disp_m


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _as_series(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Coerce to a finite, non-empty 1-D float64 array."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"series must be one-dimensional, got shape {x.shape}")
    if x.size == 0:
        raise ValueError("series must contain at least one value")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    return x


def _embed(x: np.ndarray, m: int, d: int) -> np.ndarray:
    """Delay-embed ``x`` into rows of ``m`` samples spaced ``d`` apart."""
    return sliding_window_view(x, (m - 1) * d + 1)[:, ::d]


def _check_embedding(n: int, m: int, d: int) -> None:
    if m < 1 or d < 1:
        raise ValueError(f"embedding needs m >= 1 and d >= 1, got m={m}, d={d}")
    if n < (m - 1) * d + 2:
        raise ValueError(
            f"series of length {n} too short for m={m}, d={d} "
            f"(need at least {(m - 1) * d + 2})"
        )


def _shannon(counts: np.ndarray) -> float:
    """Shannon entropy (nats) of a histogram of positive counts."""
    p = counts / counts.sum()
    h = float(-np.sum(p * np.log(p)))
    return h if h > 0.0 else 0.0


def _count_matching_pairs(templates: np.ndarray, radius: float) -> int:
    """Count unordered template pairs within Chebyshev ``radius``, no self-matches."""
    tree = cKDTree(templates)
    total = int(tree.count_neighbors(tree, radius, p=np.inf))
    return (total - len(templates)) // 2


def _resolve_ncdf(
    x: np.ndarray,
    mu: float | None,
    sigma: float | None,
) -> tuple[float, float]:
    """Return NCDF parameters, estimating any that are missing from ``x``."""
    mu = float(np.mean(x)) if mu is None else float(mu)
    sigma = float(np.std(x)) if sigma is None else float(sigma)
    if not sigma > 0.0:
        raise DegenerateSeriesError("zero standard deviation: NCDF mapping is degenerate")
    return mu, sigma


def _dispersion_classes(x: np.ndarray, classes: int, mu: float, sigma: float) -> np.ndarray:
    """Map amplitudes to classes 1..c via the NCDF and round(c*y + 0.5).

    Halves round up. Values landing on c + 1 at the y = 1 boundary are
    clamped to c.
    """
    y = norm.cdf(x, loc=mu, scale=sigma)
    z = np.floor(classes * y + 1.0)
    return np.clip(z, 1, classes).astype(np.int64)


# ---------------------------------------------------------------------------
# Coarse-graining
# ---------------------------------------------------------------------------

def coarse_grain(x: Sequence[float] | np.ndarray, tau: int) -> np.ndarray:
    """Average non-overlapping windows of length ``tau``.

    Args:
        x: Input series of length N.
        tau: Scale factor, 1 <= tau <= N.

    Returns:
        Series of length floor(N / tau). The trailing remainder is dropped.

    Raises:
        ValueError: If ``tau`` is out of range.
    """
    values = _as_series(x)
    tau = int(tau)
    if not 1 <= tau <= values.size:
        raise ValueError(f"scale {tau} out of range for series of length {values.size}")
    if tau == 1:
        return values.copy()
    n = values.size // tau
    return values[: n * tau].reshape(n, tau).mean(axis=1)


# ---------------------------------------------------------------------------
# Sample entropy
# ---------------------------------------------------------------------------

def sample_entropy(y: Sequence[float] | np.ndarray, m: int, r: float) -> float:
    """Sample entropy with Richman–Moorman pair counting.

    Both template lengths use the first N - m start indices. Two templates
    match when their Chebyshev distance is strictly below ``r``; self-matches
    are excluded. Pairs are counted with a KD-tree so long epochs stay
    tractable.

    Args:
        y: Input series, N >= m + 2.
        m: Embedding dimension.
        r: Matching tolerance (absolute units), r > 0.

    Returns:
        -ln(A / B).

    Raises:
        ValueError: On invalid parameters or a too-short series.
        UndefinedEntropyError: If A == 0 or B == 0.
    """
    x = _as_series(y)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if x.size < m + 2:
        raise ValueError(f"series of length {x.size} too short for m={m}")

    n_templates = x.size - m
    radius = float(np.nextafter(float(r), 0.0))  # strict "< r"
    b = _count_matching_pairs(sliding_window_view(x, m)[:n_templates], radius)
    a = _count_matching_pairs(sliding_window_view(x, m + 1), radius)
    if a == 0 or b == 0:
        raise UndefinedEntropyError(a, b)
    return float(np.log(b / a))


# ---------------------------------------------------------------------------
# Permutation entropy
# ---------------------------------------------------------------------------

def permutation_entropy(y: Sequence[float] | np.ndarray, m: int, d: int) -> float:
    """Shannon entropy of ordinal patterns of delay-embedded vectors.

    Ties are ranked by position (earlier sample first), so the result only
    depends on the ordering of the values.

    Returns:
        Entropy in [0, ln(m!)].
    """
    x = _as_series(y)
    _check_embedding(x.size, m, d)
    order = np.argsort(_embed(x, m, d), axis=1, kind="stable")
    codes = order @ (m ** np.arange(m, dtype=np.int64))
    _, counts = np.unique(codes, return_counts=True)
    return _shannon(counts)


# ---------------------------------------------------------------------------
# Dispersion family
# ---------------------------------------------------------------------------

def dispersion_entropy(
    y: Sequence[float] | np.ndarray,
    m: int,
    c: int,
    d: int,
    mu: float | None = None,
    sigma: float | None = None,
) -> float:
    """Dispersion entropy with the normal-CDF class mapping.

    Args:
        y: Input series.
        m: Embedding dimension.
        c: Number of classes, c >= 2.
        d: Time delay.
        mu: NCDF mean; estimated from ``y`` when omitted.
        sigma: NCDF standard deviation; estimated from ``y`` when omitted.

    Returns:
        Entropy in [0, ln(c^m)].

    Raises:
        DegenerateSeriesError: If the NCDF standard deviation is zero.
    """
    x = _as_series(y)
    _check_embedding(x.size, m, d)
    if c < 2:
        raise ValueError(f"c must be >= 2, got {c}")
    mu, sigma = _resolve_ncdf(x, mu, sigma)
    patterns = _embed(_dispersion_classes(x, c, mu, sigma), m, d) - 1
    codes = patterns @ (c ** np.arange(m, dtype=np.int64))
    _, counts = np.unique(codes, return_counts=True)
    return _shannon(counts)


def fluctuation_dispersion_entropy(
    y: Sequence[float] | np.ndarray,
    m: int,
    c: int,
    d: int,
    mu: float | None = None,
    sigma: float | None = None,
) -> float:
    """Fluctuation-based dispersion entropy.

    Same class mapping as :func:`dispersion_entropy`, but patterns are the
    m - 1 first differences of each dispersion pattern, each in
    [-c + 1, c - 1].

    Returns:
        Entropy in [0, (m - 1) * ln(2c - 1)].
    """
    if m < 2:
        raise ValueError(f"fluctuation dispersion entropy needs m >= 2, got {m}")
    x = _as_series(y)
    _check_embedding(x.size, m, d)
    if c < 2:
        raise ValueError(f"c must be >= 2, got {c}")
    mu, sigma = _resolve_ncdf(x, mu, sigma)
    patterns = _embed(_dispersion_classes(x, c, mu, sigma), m, d)
    fluctuations = np.diff(patterns, axis=1) + (c - 1)
    codes = fluctuations @ ((2 * c - 1) ** np.arange(m - 1, dtype=np.int64))
    _, counts = np.unique(codes, return_counts=True)
    return _shannon(counts)


# ---------------------------------------------------------------------------
# Spectral and wavelet entropy
# ---------------------------------------------------------------------------

def welch_psd(
    y: Sequence[float] | np.ndarray,
    fs: float,
    nperseg: int | None = None,
    window: str = "hann",
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Welch PSD with 50% overlap.

    Segments default to one second (``round(fs)`` samples), shortened to the
    series length when the series is shorter.
    """
    x = _as_series(y)
    if not fs > 0:
        raise ValueError(f"fs must be positive, got {fs}")
    seg = int(round(fs)) if nperseg is None else int(nperseg)
    seg = max(1, min(seg, x.size))
    return welch(x, fs=fs, window=window, nperseg=seg, noverlap=seg // 2, scaling="density")


def band_mask(freqs: np.ndarray, fs: float, band: tuple[float, float] | None) -> np.ndarray:
    """Select PSD bins in [lo, hi); ``None`` means every bin strictly inside (0, fs/2)."""
    if band is None:
        return (freqs > 0.0) & (freqs < fs / 2.0)
    lo, hi = float(band[0]), float(band[1])
    if not 0.0 < lo < hi <= fs / 2.0:
        raise ValueError(f"band [{lo}, {hi}) must lie within (0, {fs / 2.0}]")
    return (freqs >= lo) & (freqs < hi)


def normalized_shannon(power: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy of a nonnegative distribution, divided by ln(len).

    Raises:
        DegenerateSeriesError: If the total is zero.
    """
    p = np.asarray(power, dtype=np.float64)
    if p.size == 0:
        raise ValueError("distribution is empty")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("distribution must be finite and nonnegative")
    total = p.sum()
    if not total > 0.0:
        raise DegenerateSeriesError("distribution has zero total mass")
    if p.size == 1:
        return 0.0
    nz = p[p > 0.0] / total
    h = float(-np.sum(nz * np.log(nz)) / np.log(p.size))
    return min(max(h, 0.0), 1.0)


def spectral_entropy(
    y: Sequence[float] | np.ndarray,
    fs: float,
    band: tuple[float, float] | None = None,
    nperseg: int | None = None,
    window: str = "hann",
) -> float:
    """Normalized Shannon entropy of the Welch PSD restricted to ``band``.

    Returns:
        Entropy in [0, 1].

    Raises:
        ValueError: If N < 16 or the band holds no PSD bins.
        DegenerateSeriesError: If the band carries zero power.
    """
    x = _as_series(y)
    if x.size < 16:
        raise ValueError(f"spectral entropy needs N >= 16, got {x.size}")
    freqs, psd = welch_psd(x, fs, nperseg=nperseg, window=window)
    mask = band_mask(freqs, fs, band)
    if not mask.any():
        raise ValueError(f"band {band} is empty after discretization")
    return normalized_shannon(psd[mask])


def wavelet_log_energy_entropy(coeffs: Sequence[float] | np.ndarray) -> float:
    """Normalized Shannon entropy of squared wavelet coefficients.

    Raises:
        DegenerateSeriesError: If all coefficients are zero.
    """
    c = _as_series(coeffs)
    return normalized_shannon(c * c)


# ---------------------------------------------------------------------------
# Multiscale driver
# ---------------------------------------------------------------------------

def minimum_length(estimator: Estimator, m: int, d: int) -> int:
    """Shortest coarse series the multiscale driver accepts for ``estimator``."""
    if Estimator(estimator) is Estimator.SAMPLE:
        return m + MIN_EMBEDDED_VECTORS
    return (m - 1) * d + MIN_EMBEDDED_VECTORS


def multiscale(
    estimator: Estimator | str,
    x: Sequence[float] | np.ndarray,
    params: EntropyParams,
) -> list[tuple[int, float | None]]:
    """Apply coarse-graining then ``estimator`` at every scale in ``params``.

    Sample-entropy tolerance and the dispersion NCDF parameters are derived
    from the scale-1 series and held fixed across scales. A sample entropy
    with no template matches is recorded as ``None``.

    Args:
        estimator: One of :class:`Estimator` (or its string value).
        x: Input series.
        params: Estimator parameters and scale list.

    Returns:
        List of ``(scale, value_or_None)`` in ``params.scales`` order.

    Raises:
        ValueError: If the largest scale leaves too short a coarse series.
        DegenerateSeriesError: If the scale-1 series has zero spread.
    """
    estimator = Estimator(estimator)
    values = _as_series(x)
    m = params.embedding_dimension(estimator)
    d = params.delay
    needed = minimum_length(estimator, m, d)
    largest = max(params.scales)
    if values.size // largest < needed:
        raise ValueError(
            f"scale {largest} too large for series of length {values.size}: "
            f"coarse series would have {values.size // largest} samples, need {needed}"
        )

    if estimator is Estimator.SAMPLE:
        r = params.r if params.r is not None else params.r_ratio * float(np.std(values))
        if not r > 0.0:
            raise DegenerateSeriesError("zero standard deviation: sample-entropy tolerance is zero")
    elif estimator in (Estimator.DISPERSION, Estimator.FLUCTUATION_DISPERSION):
        mu, sigma = _resolve_ncdf(values, None, None)

    results: list[tuple[int, float | None]] = []
    for tau in params.scales:
        coarse = coarse_grain(values, tau)
        if estimator is Estimator.SAMPLE:
            try:
                value: float | None = sample_entropy(coarse, m, r)
            except UndefinedEntropyError as exc:
                logger.debug("MSE undefined at scale %d: %s", tau, exc)
                value = None
        elif estimator is Estimator.PERMUTATION:
            value = permutation_entropy(coarse, m, d)
        elif estimator is Estimator.DISPERSION:
            value = dispersion_entropy(coarse, m, params.classes, d, mu=mu, sigma=sigma)
        else:
            value = fluctuation_dispersion_entropy(
                coarse, m, params.classes, d, mu=mu, sigma=sigma
            )
        results.append((tau, value))
    return results
