"""
signal_model.py — Recordings, Preprocessing, Epoching and Synthetic Data.

Turns continuous multichannel recordings with thought-probe annotations into
labelled pre-probe epochs, grouped by subject.

Pipeline per recording:
    1. Band-pass    — 4th-order Butterworth, forward-backward (zero phase)
    2. Re-reference — subtract the average of two reference channels
    3. Epoch        — the window_s seconds immediately preceding each probe
    4. Label        — rating <= 3 → MW, rating >= 5 → nonMW, rating 4 skipped

Subjects whose epochs all share one label are dropped afterwards.

On-disk layout (one directory per dataset):
    manifest.yaml        — fs, window_s, preprocessing, provenance, subjects
    <id>_signal.csv      — header = channel names, one row per sample (µV)
    <id>_events.csv      — columns time_s, rating
"""

import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np
import pandas as pd
import yaml
from scipy.signal import butter, lfilter, sosfiltfilt

from src.errors import DatasetError

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"

# 10-20 montage order used for synthetic channel names
STANDARD_CHANNELS = (
    "FP1", "FP2", "F7", "F3", "FZ", "F4", "F8", "FT7", "FC3", "FCZ",
    "FC4", "FT8", "T7", "C3", "CZ", "C4", "T8", "TP7", "CP3", "CPZ",
    "CP4", "TP8", "P7", "P3", "PZ", "P4", "P8", "O1", "OZ", "O2",
)


class Label(IntEnum):
    """Binary attention label. MW is the positive class."""

    NON_MW = 0
    MW = 1


@dataclass(frozen=True)
class ProbeEvent:
    """Thought probe: onset time and self-rated focus (1 = wandering, 7 = focused)."""

    time_s: float
    rating: int

    def __post_init__(self) -> None:
        try:
            valid = int(self.rating) == self.rating and 1 <= int(self.rating) <= 7
        except (TypeError, ValueError):
            valid = False
        if not valid:
            raise DatasetError(f"Unknown rating value {self.rating!r} (expected 1..7)")
        object.__setattr__(self, "rating", int(self.rating))
        object.__setattr__(self, "time_s", float(self.time_s))


@dataclass
class Recording:
    """Uniformly sampled multichannel signal of one subject.

    Attributes:
        subject_id: Opaque subject identifier.
        fs: Sampling rate in Hz.
        channels: Ordered, unique channel names.
        samples: Array of shape (n_channels, N) in microvolts.
        events: Probe events, strictly increasing in time.
    """

    subject_id: str
    fs: float
    channels: list[str]
    samples: np.ndarray
    events: list[ProbeEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.subject_id = str(self.subject_id)
        self.fs = float(self.fs)
        self.channels = [str(ch) for ch in self.channels]
        self.samples = np.asarray(self.samples, dtype=np.float64)

        if not self.fs > 0:
            raise DatasetError(f"Sampling rate must be positive, got {self.fs}")
        if self.samples.ndim != 2:
            raise DatasetError(f"samples must be (channels, N), got shape {self.samples.shape}")
        if self.samples.shape[0] != len(self.channels):
            raise DatasetError(
                f"Channel-count mismatch for subject {self.subject_id}: "
                f"{len(self.channels)} names, {self.samples.shape[0]} rows"
            )
        if self.samples.shape[1] < 1:
            raise DatasetError(f"Recording {self.subject_id} has no samples")
        if len(set(self.channels)) != len(self.channels):
            raise DatasetError(f"Duplicate channel names in {self.subject_id}: {self.channels}")
        if not np.all(np.isfinite(self.samples)):
            raise DatasetError(f"Non-finite samples in recording {self.subject_id}")

        duration = self.n_samples / self.fs
        times = [ev.time_s for ev in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DatasetError(f"Event times are not strictly increasing for {self.subject_id}")
        if times and (times[0] < 0 or times[-1] > duration):
            raise DatasetError(
                f"Event times for {self.subject_id} fall outside [0, {duration:g}] s"
            )

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[1])

    def channel_index(self, name: str) -> int:
        try:
            return self.channels.index(name)
        except ValueError:
            raise DatasetError(
                f"Channel {name!r} not present in recording {self.subject_id}"
            ) from None


@dataclass
class LabeledEpoch:
    """Pre-probe window with its binary label."""

    subject_id: str
    channels: list[str]
    window: np.ndarray
    label: Label
    source_probe_time_s: float


@dataclass
class SubjectDataset:
    """Labelled epochs grouped by subject, in subject order.

    Attributes:
        subjects: ``(subject_id, epochs)`` pairs.
        fs: Sampling rate shared by every epoch.
        window_s: Epoch length in seconds.
        channels: Channel names shared by every epoch.
        provenance: Seed and generator / ingestion metadata.
    """

    subjects: list[tuple[str, list[LabeledEpoch]]]
    fs: float
    window_s: float
    channels: list[str]
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def subject_ids(self) -> list[str]:
        return [sid for sid, _ in self.subjects]

    @property
    def n_epochs(self) -> int:
        return sum(len(epochs) for _, epochs in self.subjects)

    def epochs(self) -> Iterator[LabeledEpoch]:
        """Iterate every epoch in dataset order."""
        for _, epochs in self.subjects:
            yield from epochs

    def labels(self) -> np.ndarray:
        return np.array([int(ep.label) for ep in self.epochs()], dtype=np.int64)

    def groups(self) -> np.ndarray:
        return np.array([ep.subject_id for ep in self.epochs()], dtype=object)


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def bandpass(rec: Recording, lo_hz: float, hi_hz: float, order: int = 4) -> Recording:
    """Zero-phase Butterworth band-pass applied identically to every channel.

    The filter runs forward then backward (``sosfiltfilt``), so the output
    has no group delay and the same length as the input.

    Args:
        rec: Input recording.
        lo_hz: Lower cut-off in Hz.
        hi_hz: Upper cut-off in Hz.
        order: Butterworth prototype order.

    Returns:
        New recording with filtered samples; events and channels unchanged.

    Raises:
        ValueError: If the band edges do not satisfy 0 < lo < hi < fs/2.
    """
    if not 0 < lo_hz < hi_hz < rec.fs / 2:
        raise ValueError(
            f"Invalid band edges [{lo_hz}, {hi_hz}] Hz for fs={rec.fs} Hz "
            f"(need 0 < lo < hi < {rec.fs / 2})"
        )
    sos = butter(order, [lo_hz, hi_hz], btype="bandpass", output="sos", fs=rec.fs)
    filtered = sosfiltfilt(sos, rec.samples, axis=-1)
    return replace(rec, samples=filtered, channels=list(rec.channels), events=list(rec.events))


def rereference(rec: Recording, ref_a: str, ref_b: str) -> Recording:
    """Subtract the average of two reference channels and drop them.

    Raises:
        DatasetError: If a reference channel is missing.
    """
    ia = rec.channel_index(ref_a)
    ib = rec.channel_index(ref_b)
    reference = (rec.samples[ia] + rec.samples[ib]) / 2.0
    keep = [i for i, ch in enumerate(rec.channels) if ch not in (ref_a, ref_b)]
    return replace(
        rec,
        channels=[rec.channels[i] for i in keep],
        samples=rec.samples[keep] - reference,
        events=list(rec.events),
    )


def preprocess(
    rec: Recording,
    band: Sequence[float] | None = None,
    reference: Sequence[str] | None = None,
    order: int = 4,
) -> Recording:
    """Band-pass (if ``band``) then re-reference (if ``reference``)."""
    if band is not None:
        rec = bandpass(rec, float(band[0]), float(band[1]), order=order)
    if reference:
        if len(reference) != 2:
            raise DatasetError(f"Reference must name exactly two channels, got {reference}")
        rec = rereference(rec, reference[0], reference[1])
    return rec


# ---------------------------------------------------------------------------
# Epoching and labelling
# ---------------------------------------------------------------------------

def rating_to_label(rating: int) -> Label | None:
    """Map a 1..7 focus rating to a label; the neutral rating 4 maps to None."""
    if rating <= 3:
        return Label.MW
    if rating >= 5:
        return Label.NON_MW
    return None


def epoch_and_label(rec: Recording, window_s: float) -> list[LabeledEpoch]:
    """Cut one labelled epoch per usable probe.

    The epoch covers the ``window_s`` seconds immediately preceding the probe
    onset, i.e. samples [round(t·fs) - W, round(t·fs)) with
    W = round(window_s·fs). Rating-4 probes are skipped silently; probes
    without enough history are skipped with a warning.

    Raises:
        ValueError: If ``window_s`` is not positive.
    """
    if not window_s > 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    width = int(round(window_s * rec.fs))
    epochs: list[LabeledEpoch] = []

    for event in rec.events:
        label = rating_to_label(event.rating)
        if label is None:
            logger.debug("%s: probe at %.3f s rated 4, skipped", rec.subject_id, event.time_s)
            continue
        stop = int(round(event.time_s * rec.fs))
        start = stop - width
        if event.time_s < window_s or start < 0:
            logger.warning(
                "%s: probe at %.3f s has less than %.3f s of history, skipped",
                rec.subject_id, event.time_s, window_s,
            )
            continue
        epochs.append(
            LabeledEpoch(
                subject_id=rec.subject_id,
                channels=list(rec.channels),
                window=rec.samples[:, start:stop].copy(),
                label=label,
                source_probe_time_s=event.time_s,
            )
        )
    return epochs


def drop_single_class_subjects(ds: SubjectDataset) -> SubjectDataset:
    """Remove subjects whose epochs all carry the same label.

    Raises:
        DatasetError: If no subject survives.
    """
    kept = []
    for subject_id, epochs in ds.subjects:
        labels = {ep.label for ep in epochs}
        if len(labels) < 2:
            logger.warning(
                "Dropping subject %s: %d epochs, single class %s",
                subject_id, len(epochs), sorted(lab.name for lab in labels),
            )
            continue
        kept.append((subject_id, epochs))
    if not kept:
        raise DatasetError("No subject has epochs of both classes; dataset is empty")
    return replace(ds, subjects=kept, provenance=dict(ds.provenance))


def dataset_from_recordings(
    recordings: Sequence[Recording],
    window_s: float,
    band: Sequence[float] | None = None,
    reference: Sequence[str] | None = None,
    order: int = 4,
    provenance: dict[str, Any] | None = None,
) -> SubjectDataset:
    """Preprocess, epoch and label recordings, then drop single-class subjects."""
    if not recordings:
        raise DatasetError("No recordings supplied")
    fs = recordings[0].fs
    subjects: list[tuple[str, list[LabeledEpoch]]] = []
    channels: list[str] | None = None

    for rec in recordings:
        if rec.fs != fs:
            raise DatasetError(f"Mixed sampling rates: {rec.subject_id} at {rec.fs} Hz, expected {fs}")
        processed = preprocess(rec, band=band, reference=reference, order=order)
        if channels is None:
            channels = list(processed.channels)
        elif processed.channels != channels:
            raise DatasetError(
                f"Channel layout of {rec.subject_id} differs from the first recording"
            )
        epochs = epoch_and_label(processed, window_s)
        subjects.append((rec.subject_id, epochs))
        logger.debug("%s: %d epochs from %d probes", rec.subject_id, len(epochs), len(rec.events))

    ds = SubjectDataset(
        subjects=subjects,
        fs=fs,
        window_s=float(window_s),
        channels=channels or [],
        provenance=dict(provenance or {}),
    )
    ds = drop_single_class_subjects(ds)
    logger.info(
        "Dataset ready: %d subjects | %d epochs | %d channels | fs=%g Hz | window=%g s",
        len(ds.subjects), ds.n_epochs, len(ds.channels), ds.fs, ds.window_s,
    )
    return ds


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Synthetic dataset parameters.

    MW and nonMW epochs differ only on the informative channels: MW epochs
    have a higher AR(1) pole and a stronger 10 Hz rhythm, both scaled by
    ``separation`` (0 gives identically distributed classes).
    """

    n_subjects: int = 10
    epochs_per_subject: int = 40
    n_channels: int = 8
    informative_channels: tuple[int, ...] = (2, 5)
    separation: float = 1.0
    fs: float = 1000.0
    window_s: float = 10.0
    seed: int = 42
    gap_s: float = 1.0
    base_pole: float = 0.3
    pole_gain: float = 0.5
    rhythm_hz: float = 10.0
    rhythm_amplitude: float = 0.5
    rhythm_gain: float = 3.0
    noise_uv: float = 10.0
    subject_gain_sd: float = 0.2
    subject_pole_jitter: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "informative_channels", tuple(sorted({int(i) for i in self.informative_channels}))
        )
        if self.n_subjects < 2:
            raise ValueError(f"n_subjects must be >= 2, got {self.n_subjects}")
        if self.epochs_per_subject < 4:
            raise ValueError(f"epochs_per_subject must be >= 4, got {self.epochs_per_subject}")
        if self.n_channels < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")
        bad = [i for i in self.informative_channels if not 0 <= i < self.n_channels]
        if bad:
            raise ValueError(f"informative channel indices {bad} outside 0..{self.n_channels - 1}")
        if self.separation < 0:
            raise ValueError(f"separation must be >= 0, got {self.separation}")
        if not self.fs > 0 or not self.window_s > 0 or self.gap_s < 0:
            raise ValueError("fs and window_s must be positive, gap_s nonnegative")

    @classmethod
    def from_config(cls, cfg: dict[str, Any], seed: int) -> "SynthSpec":
        keys = {f for f in cls.__dataclass_fields__ if f != "seed"}
        unknown = set(cfg) - keys
        if unknown:
            raise ValueError(f"Unknown synth keys: {sorted(unknown)}")
        kwargs = dict(cfg)
        if "informative_channels" in kwargs:
            kwargs["informative_channels"] = tuple(kwargs["informative_channels"])
        return cls(seed=int(seed), **kwargs)

    @property
    def channel_names(self) -> list[str]:
        if self.n_channels <= len(STANDARD_CHANNELS):
            return list(STANDARD_CHANNELS[: self.n_channels])
        return [f"CH{i + 1:02d}" for i in range(self.n_channels)]

    def provenance(self) -> dict[str, Any]:
        names = self.channel_names
        return {
            "generator": "synth_dataset",
            "seed": self.seed,
            "n_subjects": self.n_subjects,
            "epochs_per_subject": self.epochs_per_subject,
            "n_channels": self.n_channels,
            "separation": float(self.separation),
            "informative_channels": [names[i] for i in self.informative_channels],
            "informative_indices": list(self.informative_channels),
            "fs": float(self.fs),
            "window_s": float(self.window_s),
            "gap_s": float(self.gap_s),
        }


def _ar1_block(
    rng: np.random.Generator,
    n: int,
    pole: float,
    rhythm_amp: float,
    spec: SynthSpec,
) -> np.ndarray:
    """AR(1) noise plus a random-phase sinusoid at the rhythm frequency."""
    burn_in = 200
    noise = rng.standard_normal(n + burn_in)
    ar = lfilter([1.0], [1.0, -pole], noise)[burn_in:]
    ar *= np.sqrt(1.0 - pole * pole)  # unit variance regardless of pole
    t = np.arange(n) / spec.fs
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return spec.noise_uv * (ar + rhythm_amp * np.sin(2.0 * np.pi * spec.rhythm_hz * t + phase))


def _synth_subject(spec: SynthSpec, index: int) -> Recording:
    """One subject's continuous recording: blocks of gap + window, probe at block end."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    gap = int(round(spec.gap_s * spec.fs))
    width = int(round(spec.window_s * spec.fs))
    block = gap + width

    gain = float(rng.lognormal(0.0, spec.subject_gain_sd))
    pole_offset = float(rng.uniform(-spec.subject_pole_jitter, spec.subject_pole_jitter))
    n_mw = spec.epochs_per_subject // 2
    labels = np.array([Label.MW] * n_mw + [Label.NON_MW] * (spec.epochs_per_subject - n_mw))
    rng.shuffle(labels)

    strength = min(spec.separation, 1.0)
    informative = set(spec.informative_channels)
    samples = np.empty((spec.n_channels, block * spec.epochs_per_subject))
    events = []
    for b, label in enumerate(labels):
        for ch in range(spec.n_channels):
            pole = spec.base_pole + pole_offset
            amp = spec.rhythm_amplitude
            if label == Label.MW and ch in informative:
                pole += spec.pole_gain * strength
                amp *= 1.0 + spec.rhythm_gain * spec.separation
            samples[ch, b * block:(b + 1) * block] = gain * _ar1_block(
                rng, block, min(pole, 0.98), amp, spec
            )
        if label == Label.MW:
            rating = int(rng.integers(1, 4))
        else:
            rating = int(rng.integers(5, 8))
        events.append(ProbeEvent(time_s=(b + 1) * block / spec.fs, rating=rating))

    return Recording(
        subject_id=f"S{index + 1:02d}",
        fs=spec.fs,
        channels=spec.channel_names,
        samples=samples,
        events=events,
    )


def synth_recordings(spec: SynthSpec) -> list[Recording]:
    """Generate one continuous recording per subject.

    Each subject draws from its own ``SeedSequence([seed, index])`` stream,
    so output is identical for any generation order.
    """
    recordings = [_synth_subject(spec, i) for i in range(spec.n_subjects)]
    logger.info(
        "Generated %d synthetic recordings (seed=%d, separation=%.2f, informative=%s)",
        len(recordings), spec.seed, spec.separation, list(spec.informative_channels),
    )
    return recordings


def synth_dataset(
    n_subjects: int,
    epochs_per_subject: int,
    n_channels: int,
    informative_channels: Sequence[int],
    separation: float,
    fs: float,
    window_s: float,
    seed: int,
    **options: Any,
) -> SubjectDataset:
    """Generate a labelled synthetic dataset without further preprocessing.

    Extra keyword options are forwarded to :class:`SynthSpec`.
    """
    spec = SynthSpec(
        n_subjects=n_subjects,
        epochs_per_subject=epochs_per_subject,
        n_channels=n_channels,
        informative_channels=tuple(informative_channels),
        separation=separation,
        fs=fs,
        window_s=window_s,
        seed=seed,
        **options,
    )
    return dataset_from_recordings(
        synth_recordings(spec), spec.window_s, provenance=spec.provenance()
    )


# ---------------------------------------------------------------------------
# On-disk format
# ---------------------------------------------------------------------------

def save_recordings(
    recordings: Sequence[Recording],
    out_dir: str | Path,
    window_s: float,
    band: Sequence[float] | None = None,
    reference: Sequence[str] | None = None,
    order: int = 4,
    provenance: dict[str, Any] | None = None,
) -> Path:
    """Write recordings plus a manifest; returns the manifest path.

    Floats are written with 17 significant digits so a reload is bit-exact.
    """
    if not recordings:
        raise DatasetError("No recordings to save")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    subjects = []
    for rec in recordings:
        signal_name = f"{rec.subject_id}_signal.csv"
        events_name = f"{rec.subject_id}_events.csv"
        pd.DataFrame(rec.samples.T, columns=rec.channels).to_csv(
            out / signal_name, index=False, float_format=FLOAT_FORMAT
        )
        pd.DataFrame(
            {
                "time_s": [ev.time_s for ev in rec.events],
                "rating": [ev.rating for ev in rec.events],
            }
        ).to_csv(out / events_name, index=False, float_format=FLOAT_FORMAT)
        subjects.append({"id": rec.subject_id, "signal": signal_name, "events": events_name})

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "fs": float(recordings[0].fs),
        "window_s": float(window_s),
        "channels": list(recordings[0].channels),
        "reference": list(reference) if reference else None,
        "bandpass": [float(band[0]), float(band[1])] if band is not None else None,
        "filter_order": int(order),
        "provenance": dict(provenance or {}),
        "subjects": subjects,
    }
    manifest_path = out / "manifest.yaml"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    logger.info("Wrote %d recordings and manifest to %s", len(recordings), out)
    return manifest_path


def _read_manifest(manifest_path: Path) -> dict[str, Any]:
    if not manifest_path.exists():
        raise FileNotFoundError(f"Manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = yaml.safe_load(fh)
    if not isinstance(manifest, dict):
        raise DatasetError(f"Manifest {manifest_path} is not a mapping")
    missing = {"fs", "window_s", "subjects"} - set(manifest)
    if missing:
        raise DatasetError(f"Manifest {manifest_path} missing keys: {sorted(missing)}")
    if int(manifest.get("schema_version", MANIFEST_SCHEMA_VERSION)) != MANIFEST_SCHEMA_VERSION:
        raise DatasetError(f"Unsupported manifest schema_version {manifest['schema_version']}")
    return manifest


def _load_recording(entry: dict[str, Any], base: Path, fs: float, channels: list[str] | None) -> Recording:
    signal_path = base / entry["signal"]
    events_path = base / entry["events"]
    for path in (signal_path, events_path):
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")

    signal = pd.read_csv(signal_path, float_precision="round_trip")
    if channels is not None and list(signal.columns) != list(channels):
        raise DatasetError(
            f"Channel-count mismatch in {signal_path}: header {list(signal.columns)}, "
            f"manifest {channels}"
        )
    try:
        samples = signal.to_numpy(dtype=np.float64).T
    except ValueError as exc:
        raise DatasetError(f"Non-numeric samples in {signal_path}: {exc}") from exc

    events_df = pd.read_csv(events_path, float_precision="round_trip")
    if list(events_df.columns) != ["time_s", "rating"]:
        raise DatasetError(f"{events_path} must have columns time_s,rating")
    events = [
        ProbeEvent(time_s=float(t), rating=r)
        for t, r in zip(events_df["time_s"], events_df["rating"])
    ]
    return Recording(
        subject_id=str(entry["id"]),
        fs=fs,
        channels=list(signal.columns),
        samples=samples,
        events=events,
    )


def dataset_files(manifest_path: str | Path) -> list[Path]:
    """The manifest followed by every signal and events file it references."""
    path = Path(manifest_path)
    manifest = _read_manifest(path)
    files = [path]
    for entry in manifest["subjects"]:
        files.extend(path.parent / entry[key] for key in ("signal", "events"))
    return files


def load_recordings(manifest_path: str | Path) -> tuple[list[Recording], dict[str, Any]]:
    """Read raw recordings and the manifest dict.

    Raises:
        FileNotFoundError: If the manifest or a referenced file is missing.
        DatasetError: On any format violation.
    """
    path = Path(manifest_path)
    manifest = _read_manifest(path)
    fs = float(manifest["fs"])
    channels = manifest.get("channels")
    recordings = [_load_recording(entry, path.parent, fs, channels) for entry in manifest["subjects"]]
    logger.info("Loaded %d recordings from %s", len(recordings), path)
    return recordings, manifest


def load_dataset(manifest_path: str | Path) -> SubjectDataset:
    """Load, preprocess, epoch and label the dataset described by a manifest.

    Raises:
        DatasetError: On a missing file (naming the path) or any format error.
    """
    try:
        recordings, manifest = load_recordings(manifest_path)
    except FileNotFoundError as exc:
        raise DatasetError(str(exc)) from exc
    provenance = dict(manifest.get("provenance") or {})
    provenance["manifest"] = str(manifest_path)
    return dataset_from_recordings(
        recordings,
        window_s=float(manifest["window_s"]),
        band=manifest.get("bandpass"),
        reference=manifest.get("reference"),
        order=int(manifest.get("filter_order", 4)),
        provenance=provenance,
    )
