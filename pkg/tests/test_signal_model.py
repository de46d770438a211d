"""
test_signal_model.py — Unit tests for preprocessing, epoching and datasets.

Tests cover:
    - Band-pass DC rejection, passband gain, stopband attenuation, linearity
    - Re-referencing arithmetic and symmetry
    - Epoch extraction boundaries and the rating → label map
    - Single-class subject removal
    - Synthetic generator determinism and class structure
    - Manifest save / load round trip and load errors
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import DatasetError
from src.signal_model import (
    Label,
    LabeledEpoch,
    ProbeEvent,
    Recording,
    SubjectDataset,
    SynthSpec,
    bandpass,
    drop_single_class_subjects,
    epoch_and_label,
    load_dataset,
    load_recordings,
    rating_to_label,
    rereference,
    save_recordings,
    synth_dataset,
    synth_recordings,
)


def _make_recording(samples, fs=100.0, channels=None, events=None, subject_id="S01") -> Recording:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if channels is None:
        channels = [f"C{i}" for i in range(samples.shape[0])]
    return Recording(subject_id, fs, channels, samples, events or [])


def _sine(freq: float, fs: float, seconds: float) -> np.ndarray:
    t = np.arange(int(seconds * fs)) / fs
    return np.sin(2 * np.pi * freq * t)


def _small_spec(**overrides) -> SynthSpec:
    kwargs = dict(
        n_subjects=3, epochs_per_subject=6, n_channels=4, informative_channels=(1,),
        separation=1.0, fs=128.0, window_s=2.0, seed=7, gap_s=0.5,
    )
    kwargs.update(overrides)
    return SynthSpec(**kwargs)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

class TestRecording:
    """Validation of Recording and ProbeEvent."""

    def test_unknown_rating_raises(self):
        with pytest.raises(DatasetError, match="rating"):
            ProbeEvent(1.0, 8)

    def test_non_monotone_events_raise(self):
        with pytest.raises(DatasetError, match="increasing"):
            _make_recording(np.zeros((1, 500)), events=[ProbeEvent(2.0, 1), ProbeEvent(2.0, 6)])

    def test_event_beyond_end_raises(self):
        with pytest.raises(DatasetError):
            _make_recording(np.zeros((1, 500)), events=[ProbeEvent(6.0, 1)])

    def test_channel_count_mismatch_raises(self):
        with pytest.raises(DatasetError, match="mismatch"):
            Recording("S01", 100.0, ["A", "B"], np.zeros((3, 10)))

    def test_non_finite_samples_raise(self):
        samples = np.zeros((1, 10))
        samples[0, 3] = np.nan
        with pytest.raises(DatasetError, match="Non-finite"):
            _make_recording(samples)

    def test_duplicate_channels_raise(self):
        with pytest.raises(DatasetError, match="Duplicate"):
            Recording("S01", 100.0, ["A", "A"], np.zeros((2, 10)))


# ---------------------------------------------------------------------------
# Band-pass
# ---------------------------------------------------------------------------

class TestBandpass:
    """Tests for the zero-phase Butterworth band-pass."""

    FS = 1000.0

    def _mid(self, rec: Recording, seconds: float = 10.0) -> np.ndarray:
        n = rec.n_samples
        half = int(seconds * self.FS / 2)
        return rec.samples[0, n // 2 - half:n // 2 + half]

    def test_dc_offset_removed(self):
        """A constant baseline is removed by the high-pass edge."""
        rec = _make_recording(np.full(20000, 5.0), fs=self.FS)
        out = bandpass(rec, 0.1, 45.0)
        edge = int(self.FS)
        assert np.max(np.abs(out.samples[0, edge:-edge])) < 1e-3

    def test_alpha_amplitude_preserved(self):
        rec = _make_recording(_sine(10.0, self.FS, 60.0), fs=self.FS)
        peak = np.max(np.abs(self._mid(bandpass(rec, 0.1, 45.0))))
        assert abs(peak - 1.0) <= 0.05

    def test_line_noise_attenuated_20db(self):
        rec = _make_recording(_sine(60.0, self.FS, 60.0), fs=self.FS)
        peak = np.max(np.abs(self._mid(bandpass(rec, 0.1, 45.0))))
        assert peak <= 0.1

    def test_zero_phase(self):
        """Peak locations of a passband sinusoid are unchanged."""
        x = _sine(10.0, self.FS, 60.0)
        out = bandpass(_make_recording(x, fs=self.FS), 0.1, 45.0).samples[0]
        mid = slice(25000, 35000)
        lag = np.argmax(np.correlate(out[mid], x[mid][50:-50], mode="valid")) - 50
        assert lag == 0

    def test_length_and_channels_preserved(self):
        rng = np.random.default_rng(0)
        rec = _make_recording(rng.standard_normal((3, 4000)), fs=200.0, channels=["A", "B", "C"])
        out = bandpass(rec, 1.0, 40.0)
        assert out.samples.shape == rec.samples.shape
        assert out.channels == ["A", "B", "C"]

    def test_linearity(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(5000)
        y = rng.standard_normal(5000)
        f = lambda s: bandpass(_make_recording(s, fs=250.0), 0.5, 45.0).samples[0]
        combined = f(2.5 * x - 0.7 * y)
        separate = 2.5 * f(x) - 0.7 * f(y)
        assert np.max(np.abs(combined - separate)) <= 1e-9 * np.max(np.abs(separate))

    @pytest.mark.parametrize("lo,hi", [(0.0, 45.0), (10.0, 5.0), (1.0, 500.0)])
    def test_invalid_edges_raise(self, lo, hi):
        rec = _make_recording(np.zeros(1000), fs=self.FS)
        with pytest.raises(ValueError, match="band edges"):
            bandpass(rec, lo, hi)


# ---------------------------------------------------------------------------
# Re-reference
# ---------------------------------------------------------------------------

class TestRereference:
    """Tests for the linked-mastoid style re-reference."""

    def test_zero_references_identity(self):
        rng = np.random.default_rng(2)
        data = rng.standard_normal((2, 50))
        rec = _make_recording(
            np.vstack([data, np.zeros((2, 50))]), channels=["T7", "FP2", "M1", "M2"]
        )
        out = rereference(rec, "M1", "M2")
        assert out.channels == ["T7", "FP2"]
        np.testing.assert_array_equal(out.samples, data)

    def test_direct_arithmetic(self):
        rec = _make_recording([[1, 1], [2, 2], [0, 0]], channels=["X", "M1", "M2"])
        assert rereference(rec, "M1", "M2").samples.tolist() == [[0.0, 0.0]]

    def test_swapped_references_identical(self):
        rng = np.random.default_rng(3)
        rec = _make_recording(rng.standard_normal((4, 80)), channels=["A", "B", "M1", "M2"])
        np.testing.assert_array_equal(
            rereference(rec, "M1", "M2").samples, rereference(rec, "M2", "M1").samples
        )

    def test_idempotent_with_zero_references(self):
        rng = np.random.default_rng(4)
        rec = _make_recording(rng.standard_normal((3, 40)), channels=["A", "M1", "M2"])
        once = rereference(rec, "M1", "M2")
        padded = Recording(
            "S01", once.fs, once.channels + ["Z1", "Z2"],
            np.vstack([once.samples, np.zeros((2, 40))]),
        )
        np.testing.assert_array_equal(rereference(padded, "Z1", "Z2").samples, once.samples)

    def test_missing_reference_raises(self):
        rec = _make_recording(np.zeros((2, 10)), channels=["A", "M1"])
        with pytest.raises(DatasetError, match="M2"):
            rereference(rec, "M1", "M2")


# ---------------------------------------------------------------------------
# Epoching and labels
# ---------------------------------------------------------------------------

class TestEpochAndLabel:
    """Tests for epoch_and_label and rating_to_label."""

    FS = 100.0

    def _recording(self, events) -> Recording:
        samples = np.arange(3000, dtype=float).reshape(1, -1)
        return _make_recording(samples, fs=self.FS, events=events)

    def test_label_map_total_except_four(self):
        assert [rating_to_label(r) for r in (1, 2, 3)] == [Label.MW] * 3
        assert [rating_to_label(r) for r in (5, 6, 7)] == [Label.NON_MW] * 3
        assert rating_to_label(4) is None

    def test_window_precedes_probe_exactly(self):
        epochs = epoch_and_label(self._recording([ProbeEvent(15.0, 2)]), 10.0)
        assert len(epochs) == 1
        epoch = epochs[0]
        assert epoch.label == Label.MW
        assert epoch.window.shape == (1, 1000)
        np.testing.assert_array_equal(epoch.window[0], np.arange(500, 1500, dtype=float))
        assert epoch.source_probe_time_s == 15.0

    def test_rating_four_skipped(self):
        assert epoch_and_label(self._recording([ProbeEvent(15.0, 4)]), 10.0) == []

    def test_insufficient_history_skipped_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            epochs = epoch_and_label(self._recording([ProbeEvent(6.0, 1), ProbeEvent(20.0, 6)]), 10.0)
        assert [ep.label for ep in epochs] == [Label.NON_MW]
        assert "history" in caplog.text

    def test_window_length_is_rounded(self):
        epochs = epoch_and_label(self._recording([ProbeEvent(20.0, 7)]), 2.345)
        assert epochs[0].window.shape[1] == round(2.345 * self.FS)

    def test_non_positive_window_raises(self):
        with pytest.raises(ValueError):
            epoch_and_label(self._recording([]), 0.0)


class TestDropSingleClassSubjects:
    """Tests for drop_single_class_subjects."""

    @staticmethod
    def _dataset(label_sets) -> SubjectDataset:
        subjects = []
        for i, labels in enumerate(label_sets):
            sid = f"S{i}"
            subjects.append(
                (sid, [LabeledEpoch(sid, ["A"], np.zeros((1, 4)), lab, float(j)) for j, lab in enumerate(labels)])
            )
        return SubjectDataset(subjects, 100.0, 0.04, ["A"])

    def test_single_class_removed_mixed_retained(self):
        ds = self._dataset([[Label.MW, Label.MW], [Label.MW, Label.NON_MW]])
        assert drop_single_class_subjects(ds).subject_ids == ["S1"]

    def test_all_single_class_raises(self):
        ds = self._dataset([[Label.MW], [Label.NON_MW, Label.NON_MW]])
        with pytest.raises(DatasetError):
            drop_single_class_subjects(ds)


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

class TestSynth:
    """Tests for the synthetic dataset generator."""

    def test_same_seed_bit_identical(self):
        a = synth_dataset(3, 6, 4, [1], 1.0, 128.0, 2.0, seed=11, gap_s=0.5)
        b = synth_dataset(3, 6, 4, [1], 1.0, 128.0, 2.0, seed=11, gap_s=0.5)
        for ea, eb in zip(a.epochs(), b.epochs()):
            np.testing.assert_array_equal(ea.window, eb.window)
            assert ea.label == eb.label

    def test_different_seed_differs(self):
        a = synth_recordings(_small_spec(seed=1))
        b = synth_recordings(_small_spec(seed=2))
        assert not np.array_equal(a[0].samples, b[0].samples)

    def test_counts_and_balance(self):
        ds = synth_dataset(4, 8, 5, [0, 3], 0.5, 128.0, 2.0, seed=3)
        assert len(ds.subjects) == 4
        assert ds.n_epochs == 32
        for _, epochs in ds.subjects:
            assert sum(ep.label == Label.MW for ep in epochs) == 4
        assert ds.channels == ["FP1", "FP2", "F7", "F3", "FZ"]
        assert ds.provenance["informative_channels"] == ["FP1", "F3"]

    def test_epoch_window_shape(self):
        ds = synth_dataset(2, 4, 3, [0], 1.0, 128.0, 2.0, seed=0)
        assert all(ep.window.shape == (3, 256) for ep in ds.epochs())

    def test_informative_channel_more_regular_for_mw(self):
        """Lag-1 autocorrelation is higher for MW on informative channels only."""
        ds = synth_dataset(3, 20, 2, [0], 1.0, 128.0, 4.0, seed=5)

        def lag1(x):
            x = x - x.mean()
            return float(np.dot(x[:-1], x[1:]) / np.dot(x, x))

        def mean_ac(label, ch):
            return np.mean([lag1(ep.window[ch]) for ep in ds.epochs() if ep.label == label])

        assert mean_ac(Label.MW, 0) > mean_ac(Label.NON_MW, 0) + 0.2
        assert abs(mean_ac(Label.MW, 1) - mean_ac(Label.NON_MW, 1)) < 0.1

    def test_ratings_follow_labels(self):
        for rec in synth_recordings(_small_spec()):
            assert all(ev.rating != 4 for ev in rec.events)

    @pytest.mark.parametrize(
        "overrides",
        [{"n_subjects": 1}, {"epochs_per_subject": 3}, {"informative_channels": (9,)}, {"separation": -1.0}],
    )
    def test_invalid_counts_raise(self, overrides):
        with pytest.raises(ValueError):
            _small_spec(**overrides)


# ---------------------------------------------------------------------------
# On-disk format
# ---------------------------------------------------------------------------

class TestPersistence:
    """Tests for save_recordings / load_recordings / load_dataset."""

    def test_round_trip_is_bit_identical(self, tmp_path):
        recordings = synth_recordings(_small_spec())
        manifest = save_recordings(recordings, tmp_path, window_s=2.0)
        loaded, meta = load_recordings(manifest)
        assert meta["fs"] == 128.0
        for original, reloaded in zip(recordings, loaded):
            assert reloaded.channels == original.channels
            np.testing.assert_array_equal(reloaded.samples, original.samples)
            assert reloaded.events == original.events

    def test_load_dataset_matches_in_memory_dataset(self, tmp_path):
        spec = _small_spec()
        manifest = save_recordings(synth_recordings(spec), tmp_path, window_s=spec.window_s)
        ds = load_dataset(manifest)
        assert ds.n_epochs == spec.n_subjects * spec.epochs_per_subject
        direct = synth_dataset(3, 6, 4, (1,), 1.0, 128.0, 2.0, seed=7, gap_s=0.5)
        for a, b in zip(ds.epochs(), direct.epochs()):
            np.testing.assert_array_equal(a.window, b.window)

    def test_rating_four_dropped_on_load(self, tmp_path):
        rng = np.random.default_rng(0)
        events = [ProbeEvent(float(t), r) for t, r in zip(range(3, 43, 1), [1, 4, 6, 4] * 10)]
        samples = rng.standard_normal((2, 4400))
        recordings = [
            _make_recording(samples, events=events, subject_id=sid) for sid in ("S01", "S02")
        ]
        ds = load_dataset(save_recordings(recordings, tmp_path, window_s=2.0))
        assert len(ds.subjects) == 2
        assert all(len(epochs) <= 40 for _, epochs in ds.subjects)
        assert ds.n_epochs == 40

    def test_missing_file_names_path(self, tmp_path):
        manifest = save_recordings(synth_recordings(_small_spec()), tmp_path, window_s=2.0)
        (tmp_path / "S02_signal.csv").unlink()
        with pytest.raises(DatasetError, match="S02_signal.csv"):
            load_dataset(manifest)

    def test_channel_mismatch_raises(self, tmp_path):
        manifest = save_recordings(synth_recordings(_small_spec()), tmp_path, window_s=2.0)
        path = tmp_path / "S01_signal.csv"
        df = pd.read_csv(path)
        df.drop(columns=[df.columns[-1]]).to_csv(path, index=False)
        with pytest.raises(DatasetError, match="mismatch"):
            load_dataset(manifest)

    def test_unknown_rating_raises(self, tmp_path):
        manifest = save_recordings(synth_recordings(_small_spec()), tmp_path, window_s=2.0)
        path = tmp_path / "S01_events.csv"
        df = pd.read_csv(path)
        df.loc[0, "rating"] = 9
        df.to_csv(path, index=False)
        with pytest.raises(DatasetError, match="rating"):
            load_dataset(manifest)

    def test_manifest_records_preprocessing(self, tmp_path):
        manifest = save_recordings(
            synth_recordings(_small_spec()), tmp_path, window_s=2.0, band=(0.5, 40.0),
            provenance={"seed": 7},
        )
        meta = yaml.safe_load(manifest.read_text())
        assert meta["bandpass"] == [0.5, 40.0]
        assert meta["reference"] is None
        assert meta["provenance"] == {"seed": 7}
        assert load_dataset(manifest).provenance["seed"] == 7
