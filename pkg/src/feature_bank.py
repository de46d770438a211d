"""
feature_bank.py — Per-Channel Feature Inventory and Feature Matrices.

Each epoch channel yields 424 features (404 without sample entropy):

    Family                      Count   Names
    Time statistics                 5   Mean, MeanPower, FirstDiff, SecondDiff, HjComp
    Band powers                     4   PSD_<band>
    Wavelet statistics             20   <SB>-WL-<MeanPower|Mean|STD|RAM>
    Multiscale entropies           80   <E>-<s>          E ∈ MSE, MPE, MDE, MFDE
    Spectral entropies              5   SpecEnt_<band>, SpecEnt_full
    Wavelet-domain entropies      310   <SB>-WL-Ent, <SB>-WL-SpecEnt, WL-<E>-<SB>-<s>

with bands theta/alpha/beta/gamma, sub-bands cA7/cD7/cD6/cD5/cD4 of a
7-level periodized db4 DWT and scales 1..20. Matrix columns are prefixed
with "<CHANNEL>_".

Undefined values (no template match, zero variance, zero power) are NaN in
channel vectors; extract_matrix replaces them per column with the largest
finite value observed in the dataset and records each replacement.
"""

import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd
import pywt
import yaml
from joblib import Parallel, delayed

from src.entropy_bank import (
    EntropyParams,
    Estimator,
    band_mask,
    multiscale,
    spectral_entropy,
    wavelet_log_energy_entropy,
    welch_psd,
)
from src.errors import DatasetError, DegenerateSeriesError, UndefinedValueError
from src.signal_model import SubjectDataset

logger = logging.getLogger(__name__)

BANDS: dict[str, tuple[float, float]] = {
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta":  (13.0, 30.0),
    "gamma": (30.0, 45.0),
}
FULL_BAND: tuple[float, float] = (0.1, 45.0)

WAVELET = "db4"
WAVELET_LEVEL = 7
WAVELET_MODE = "periodization"
SUB_BANDS = ("cA7", "cD7", "cD6", "cD5", "cD4")

TIME_STATS = ("Mean", "MeanPower", "FirstDiff", "SecondDiff", "HjComp")
WAVELET_STATS = ("MeanPower", "Mean", "STD", "RAM")
WAVELET_ESTIMATORS = (Estimator.PERMUTATION, Estimator.DISPERSION, Estimator.FLUCTUATION_DISPERSION)

CATEGORIES = (
    "basic/time", "basic/frequency", "basic/wavelet",
    "entropy/time", "entropy/frequency", "entropy/wavelet",
)

_SB = "|".join(SUB_BANDS)
_BAND = "|".join(BANDS)
_SUFFIX_PATTERNS: list[tuple[str, re.Pattern]] = [
    ("time_stat", re.compile(rf"(?P<stat>{'|'.join(TIME_STATS)})")),
    ("band_power", re.compile(rf"PSD_(?P<band>{_BAND})")),
    ("spectral_entropy", re.compile(rf"SpecEnt_(?P<band>{_BAND}|full)")),
    ("wavelet_stat", re.compile(rf"(?P<band>{_SB})-WL-(?P<stat>{'|'.join(WAVELET_STATS)})")),
    ("wavelet_entropy", re.compile(rf"(?P<band>{_SB})-WL-(?P<stat>Ent|SpecEnt)")),
    ("multiscale", re.compile(r"(?P<estimator>MSE|MPE|MDE|MFDE)-(?P<scale>[1-9]\d*)")),
    ("wavelet_multiscale", re.compile(rf"WL-(?P<estimator>MPE|MDE|MFDE)-(?P<band>{_SB})-(?P<scale>[1-9]\d*)")),
]

_CATEGORY_OF_FAMILY = {
    "time_stat": "basic/time",
    "band_power": "basic/frequency",
    "wavelet_stat": "basic/wavelet",
    "multiscale": "entropy/time",
    "spectral_entropy": "entropy/frequency",
    "wavelet_entropy": "entropy/wavelet",
    "wavelet_multiscale": "entropy/wavelet",
}


# ---------------------------------------------------------------------------
# Name grammar
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureName:
    """Parsed feature name. ``channel`` is None for unprefixed channel-vector names."""

    channel: str | None
    family: str
    stat: str | None = None
    band: str | None = None
    estimator: str | None = None
    scale: int | None = None

    @property
    def category(self) -> str:
        return _CATEGORY_OF_FAMILY[self.family]


def _parse_suffix(suffix: str) -> tuple[str, dict[str, Any]] | None:
    for family, pattern in _SUFFIX_PATTERNS:
        match = pattern.fullmatch(suffix)
        if match:
            parts = {k: v for k, v in match.groupdict().items() if v is not None}
            if "scale" in parts:
                parts["scale"] = int(parts["scale"])
            return family, parts
    return None


def parse_feature_name(name: str, prefixed: bool = True) -> FeatureName:
    """Parse a (channel-prefixed) feature name back into its parts.

    Channel names may contain underscores; the split is the last one that
    leaves a valid feature suffix.

    Raises:
        ValueError: If the name does not follow the grammar.
    """
    if not prefixed:
        parsed = _parse_suffix(name)
        if parsed is None:
            raise ValueError(f"Not a feature name: {name!r}")
        return FeatureName(channel=None, family=parsed[0], **parsed[1])

    # Try split points right to left so "FP2_PSD_theta" resolves to FP2 + PSD_theta
    positions = [i for i, ch in enumerate(name) if ch == "_" and i > 0]
    for pos in reversed(positions):
        parsed = _parse_suffix(name[pos + 1:])
        if parsed is not None:
            return FeatureName(channel=name[:pos], family=parsed[0], **parsed[1])
    raise ValueError(f"Not a feature name: {name!r}")


def feature_category(name: str, prefixed: bool = True) -> str:
    """One of ``CATEGORIES`` for a feature name."""
    return parse_feature_name(name, prefixed=prefixed).category


def feature_names(include_mse: bool = True, scales: Sequence[int] = tuple(range(1, 21))) -> list[str]:
    """Canonical unprefixed names of one channel vector, in extraction order."""
    estimators = [e for e in Estimator if include_mse or e is not Estimator.SAMPLE]
    names = list(TIME_STATS)
    names += [f"PSD_{band}" for band in BANDS]
    names += [f"{sb}-WL-{stat}" for sb in SUB_BANDS for stat in WAVELET_STATS]
    names += [f"{e.value}-{s}" for e in estimators for s in scales]
    names += [f"SpecEnt_{band}" for band in BANDS] + ["SpecEnt_full"]
    for sb in SUB_BANDS:
        names += [f"{sb}-WL-Ent", f"{sb}-WL-SpecEnt"]
        names += [f"WL-{e.value}-{sb}-{s}" for e in WAVELET_ESTIMATORS for s in scales]
    return names


# ---------------------------------------------------------------------------
# Basic statistics
# ---------------------------------------------------------------------------

def _series(y: Sequence[float] | np.ndarray, min_len: int) -> np.ndarray:
    x = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.size < min_len:
        raise ValueError(f"Need a 1-D series of at least {min_len} samples, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("Series contains non-finite values")
    return x


def hjorth_complexity(y: Sequence[float] | np.ndarray) -> float:
    """Mobility of the first difference divided by the mobility of the signal.

    Raises:
        DegenerateSeriesError: If the signal or its first difference is constant.
    """
    x = _series(y, 3)
    d1 = np.diff(x)
    d2 = np.diff(d1)
    sd0, sd1, sd2 = np.std(x), np.std(d1), np.std(d2)
    if sd0 == 0.0 or sd1 == 0.0:
        raise DegenerateSeriesError("Hjorth complexity undefined for zero-variance input")
    return float((sd2 / sd1) / (sd1 / sd0))


def time_stat_features(y: Sequence[float] | np.ndarray) -> dict[str, float]:
    """Mean, MeanPower, FirstDiff, SecondDiff and HjComp (NaN when undefined)."""
    x = _series(y, 3)
    try:
        hj = hjorth_complexity(x)
    except DegenerateSeriesError:
        hj = float("nan")
    return {
        "Mean": float(np.mean(x)),
        "MeanPower": float(np.mean(x * x)),
        "FirstDiff": float(np.mean(np.abs(np.diff(x)))),
        "SecondDiff": float(np.mean(np.abs(np.diff(x, n=2)))),
        "HjComp": hj,
    }


def band_power_features(y: Sequence[float] | np.ndarray, fs: float) -> dict[str, float]:
    """log10 of the mean Welch PSD in each EEG band (NaN for zero power).

    Raises:
        ValueError: If the series is shorter than one second or a band is empty.
    """
    x = _series(y, max(16, int(np.ceil(fs))))
    freqs, psd = welch_psd(x, fs)
    out = {}
    for band, edges in BANDS.items():
        mask = band_mask(freqs, fs, edges)
        if not mask.any():
            raise ValueError(f"Band {band} {edges} holds no PSD bins at fs={fs}")
        power = float(np.mean(psd[mask]))
        out[f"PSD_{band}"] = float(np.log10(power)) if power > 0 else float("nan")
    return out


# ---------------------------------------------------------------------------
# Wavelet decomposition
# ---------------------------------------------------------------------------

@dataclass
class WaveletDecomposition:
    """Full periodized DWT of one series.

    Attributes:
        coeffs: ``[cA7, cD7, cD6, ..., cD1]`` as returned by ``pywt.wavedec``.
        length: Length of the decomposed series.
    """

    coeffs: list[np.ndarray]
    length: int
    wavelet: str = WAVELET
    mode: str = WAVELET_MODE

    @property
    def sub_bands(self) -> list[tuple[str, np.ndarray]]:
        """The retained bands [cA7, cD7, cD6, cD5, cD4]."""
        return list(zip(SUB_BANDS, self.coeffs[: len(SUB_BANDS)]))

    def band(self, name: str) -> np.ndarray:
        return self.coeffs[SUB_BANDS.index(name)]

    def energy(self) -> float:
        return float(sum(np.sum(c * c) for c in self.coeffs))

    def reconstruct(self, name: str) -> np.ndarray:
        """Single-branch reconstruction of one retained band, length ``self.length``."""
        keep = SUB_BANDS.index(name)
        parts = [c if i == keep else np.zeros_like(c) for i, c in enumerate(self.coeffs)]
        return pywt.waverec(parts, self.wavelet, mode=self.mode)[: self.length]


def dwt_decompose(y: Sequence[float] | np.ndarray) -> WaveletDecomposition:
    """7-level db4 DWT with periodic boundary handling.

    Raises:
        ValueError: If the series is shorter than 2**7 samples.
    """
    x = _series(y, 2 ** WAVELET_LEVEL)
    coeffs = pywt.wavedec(x, WAVELET, mode=WAVELET_MODE, level=WAVELET_LEVEL)
    return WaveletDecomposition(coeffs=[np.asarray(c) for c in coeffs], length=x.size)


def wavelet_stat_features(w: WaveletDecomposition) -> dict[str, float]:
    """MeanPower, Mean, STD and RAM per retained band.

    RAM is mean|c_b| / mean|c_next| along cA7 → cD7 → cD6 → cD5 → cD4, with
    cD4 paired back to cD5; a zero denominator gives NaN.
    """
    bands = dict(w.sub_bands)
    abs_means = {name: float(np.mean(np.abs(c))) for name, c in bands.items()}
    out = {}
    for i, name in enumerate(SUB_BANDS):
        c = bands[name]
        partner = SUB_BANDS[i + 1] if i + 1 < len(SUB_BANDS) else SUB_BANDS[i - 1]
        denom = abs_means[partner]
        out[f"{name}-WL-MeanPower"] = float(np.mean(c * c))
        out[f"{name}-WL-Mean"] = float(np.mean(c))
        out[f"{name}-WL-STD"] = float(np.std(c))
        out[f"{name}-WL-RAM"] = abs_means[name] / denom if denom > 0 else float("nan")
    return out


# ---------------------------------------------------------------------------
# Channel vector
# ---------------------------------------------------------------------------

@dataclass
class FeatureVector:
    """Named feature values of one epoch channel."""

    names: list[str]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != self.values.size:
            raise ValueError(f"{len(self.names)} names for {self.values.size} values")
        if len(set(self.names)) != len(self.names):
            raise ValueError("Feature names must be unique")

    @property
    def undefined(self) -> list[str]:
        return [n for n, v in zip(self.names, self.values) if not np.isfinite(v)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def _multiscale_values(prefix: str, estimator: Estimator, y: np.ndarray, params: EntropyParams) -> dict[str, float]:
    names = [f"{prefix}-{s}" for s in params.scales]
    try:
        results = multiscale(estimator, y, params)
    except UndefinedValueError as exc:
        logger.debug("%s undefined on this epoch: %s", prefix, exc)
        return dict.fromkeys(names, float("nan"))
    return {
        name: float("nan") if value is None else value
        for name, (_, value) in zip(names, results)
    }


def _guarded(fn, *args, **kwargs) -> float:
    try:
        return fn(*args, **kwargs)
    except UndefinedValueError:
        return float("nan")


def extract_channel_features(
    y: Sequence[float] | np.ndarray,
    fs: float,
    include_mse: bool = True,
    params: EntropyParams | None = None,
) -> FeatureVector:
    """Compute the full feature vector of one preprocessed epoch channel.

    Wavelet-domain multiscale and spectral entropies are computed on the
    single-branch reconstruction of each retained sub-band; the wavelet
    log-energy entropy and statistics use the coefficients themselves.

    Returns:
        FeatureVector in :func:`feature_names` order; undefined entries are NaN.
    """
    params = params or EntropyParams()
    x = _series(y, 2 ** WAVELET_LEVEL)
    values: dict[str, float] = {}

    values.update(time_stat_features(x))
    values.update(band_power_features(x, fs))
    w = dwt_decompose(x)
    values.update(wavelet_stat_features(w))

    for estimator in Estimator:
        if estimator is Estimator.SAMPLE and not include_mse:
            continue
        values.update(_multiscale_values(estimator.value, estimator, x, params))

    for band, edges in BANDS.items():
        values[f"SpecEnt_{band}"] = _guarded(spectral_entropy, x, fs, band=edges)
    values["SpecEnt_full"] = _guarded(spectral_entropy, x, fs, band=FULL_BAND)

    for sb, coeffs in w.sub_bands:
        branch = w.reconstruct(sb)
        values[f"{sb}-WL-Ent"] = _guarded(wavelet_log_energy_entropy, coeffs)
        values[f"{sb}-WL-SpecEnt"] = _guarded(spectral_entropy, branch, fs)
        for estimator in WAVELET_ESTIMATORS:
            values.update(_multiscale_values(f"WL-{estimator.value}-{sb}", estimator, branch, params))

    names = feature_names(include_mse, params.scales)
    return FeatureVector(names=names, values=np.array([values[n] for n in names]))


# ---------------------------------------------------------------------------
# Feature matrix
# ---------------------------------------------------------------------------

@dataclass
class FeatureMatrix:
    """Epochs × named features with aligned labels and subject ids.

    Attributes:
        X: Feature frame; columns are "<CHANNEL>_<feature>" names.
        labels: Binary labels (1 = MW), one per row.
        subject_ids: Subject id per row.
        provenance: Extraction parameters and substitution events.
    """

    X: pd.DataFrame
    labels: np.ndarray
    subject_ids: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.X = self.X.reset_index(drop=True)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.subject_ids = np.asarray(self.subject_ids).astype(str).astype(object)
        n = len(self.X)
        if len(self.labels) != n or len(self.subject_ids) != n:
            raise ValueError(
                f"Misaligned matrix: {n} rows, {len(self.labels)} labels, "
                f"{len(self.subject_ids)} subject ids"
            )
        if self.X.columns.has_duplicates:
            raise ValueError("Feature names must be unique")

    @property
    def feature_names(self) -> list[str]:
        return list(self.X.columns)

    @property
    def values(self) -> np.ndarray:
        return self.X.to_numpy(dtype=np.float64)

    @property
    def n_rows(self) -> int:
        return len(self.X)

    def channel_map(self) -> dict[str, str]:
        """Feature name → channel."""
        return {name: parse_feature_name(name).channel for name in self.X.columns}

    @property
    def channels(self) -> list[str]:
        return list(dict.fromkeys(self.channel_map().values()))

    def select_columns(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [n for n in names if n not in self.X.columns]
        if missing:
            raise ValueError(f"Unknown feature names: {missing[:5]}")
        return FeatureMatrix(self.X[list(names)].copy(), self.labels, self.subject_ids, dict(self.provenance))

    def select_channels(self, channels: Sequence[str]) -> "FeatureMatrix":
        """Columns of the given channels, in channel order."""
        mapping = self.channel_map()
        unknown = [c for c in channels if c not in set(mapping.values())]
        if unknown:
            raise DatasetError(f"Unknown channels: {unknown}")
        by_channel: dict[str, list[str]] = {}
        for name, ch in mapping.items():
            by_channel.setdefault(ch, []).append(name)
        return self.select_columns([n for ch in channels for n in by_channel[ch]])

    def select_categories(self, categories: Iterable[str]) -> "FeatureMatrix":
        wanted = set(categories)
        return self.select_columns([n for n in self.X.columns if feature_category(n) in wanted])

    def take_rows(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(
            self.X.iloc[rows].copy(), self.labels[rows], self.subject_ids[rows], dict(self.provenance)
        )

    def save_csv(self, path: str | Path) -> Path:
        """Write ``subject_id,label,<features>`` plus ``<stem>.provenance.yaml``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.X.copy()
        frame.insert(0, "label", self.labels)
        frame.insert(0, "subject_id", self.subject_ids)
        frame.to_csv(path, index=False, float_format="%.17g")
        with open(provenance_path(path), "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.provenance, fh, sort_keys=False)
        logger.info("Feature matrix written to %s (%d rows × %d features)", path, self.n_rows, self.X.shape[1])
        return path

    @classmethod
    def load_csv(cls, path: str | Path) -> "FeatureMatrix":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Feature matrix not found: {path}")
        frame = pd.read_csv(path, float_precision="round_trip", dtype={"subject_id": str})
        if list(frame.columns[:2]) != ["subject_id", "label"]:
            raise DatasetError(f"{path} must start with columns subject_id,label")
        provenance = {}
        prov = provenance_path(path)
        if prov.exists():
            with open(prov, "r", encoding="utf-8") as fh:
                provenance = yaml.safe_load(fh) or {}
        return cls(
            X=frame.iloc[:, 2:].astype(np.float64),
            labels=frame["label"].to_numpy(),
            subject_ids=frame["subject_id"].to_numpy(),
            provenance=provenance,
        )


def provenance_path(matrix_path: str | Path) -> Path:
    path = Path(matrix_path)
    return path.with_name(f"{path.stem}.provenance.yaml")


def substitute_undefined(X: pd.DataFrame, subject_ids: np.ndarray) -> tuple[pd.DataFrame, list[dict[str, Any]]]:
    """Replace NaNs per column by the column's largest finite value (0.0 if none).

    Returns:
        The filled frame and one event per affected column.
    """
    X = X.copy()
    events = []
    mask = X.isna()
    for column in X.columns[mask.any(axis=0).to_numpy()]:
        rows = np.flatnonzero(mask[column].to_numpy())
        finite = X[column].dropna()
        value = float(finite.max()) if len(finite) else 0.0
        X.loc[rows, column] = value
        events.append({
            "column": column,
            "rows": [int(r) for r in rows],
            "subjects": sorted({str(subject_ids[r]) for r in rows}),
            "value": value,
        })
    return X, events


def extract_matrix(
    ds: SubjectDataset,
    channel_subset: Sequence[str] | None = None,
    include_mse: bool = True,
    params: EntropyParams | None = None,
    n_jobs: int = 1,
) -> FeatureMatrix:
    """Extract every epoch × channel vector and assemble the dataset matrix.

    Work is distributed over (epoch, channel) pairs with joblib; the result
    is identical for any ``n_jobs``.

    Raises:
        ValueError: If ``channel_subset`` is empty.
        DatasetError: If a requested channel is not in the dataset.
    """
    params = params or EntropyParams()
    channels = list(ds.channels) if channel_subset is None else list(channel_subset)
    if not channels:
        raise ValueError("Channel subset is empty")
    unknown = [c for c in channels if c not in ds.channels]
    if unknown:
        raise DatasetError(f"Unknown channels {unknown}; dataset has {ds.channels}")
    if len(set(channels)) != len(channels):
        raise ValueError(f"Duplicate channels in subset: {channels}")

    epochs = list(ds.epochs())
    index = [ds.channels.index(c) for c in channels]
    logger.info(
        "Extracting features: %d epochs × %d channels (include_mse=%s, scales=%d, n_jobs=%d)",
        len(epochs), len(channels), include_mse, len(params.scales), n_jobs,
    )
    vectors = Parallel(n_jobs=n_jobs)(
        delayed(extract_channel_features)(ep.window[ci], ds.fs, include_mse, params)
        for ep in epochs
        for ci in index
    )

    names = feature_names(include_mse, params.scales)
    columns = [f"{ch}_{name}" for ch in channels for name in names]
    values = np.vstack([v.values for v in vectors]).reshape(len(epochs), len(columns))
    subject_ids = np.array([ep.subject_id for ep in epochs], dtype=object)
    X, events = substitute_undefined(pd.DataFrame(values, columns=columns), subject_ids)
    if events:
        logger.warning(
            "Substituted undefined values in %d columns (%d cells)",
            len(events), sum(len(e["rows"]) for e in events),
        )

    provenance = {
        "include_mse": bool(include_mse),
        "entropy": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(params).items()},
        "fs": float(ds.fs),
        "window_s": float(ds.window_s),
        "channels": channels,
        "features_per_channel": len(names),
        "wavelet": {"family": WAVELET, "level": WAVELET_LEVEL, "mode": WAVELET_MODE,
                    "sub_bands": list(SUB_BANDS), "ram_order": list(SUB_BANDS) + ["cD5"]},
        "bands": {k: list(v) for k, v in BANDS.items()},
        "full_band": list(FULL_BAND),
        "substitutions": events,
        "dataset": dict(ds.provenance),
    }
    labels = np.array([int(ep.label) for ep in epochs], dtype=np.int64)
    logger.info("Feature matrix ready: %d rows × %d columns", len(epochs), len(columns))
    return FeatureMatrix(X=X, labels=labels, subject_ids=subject_ids, provenance=provenance)
