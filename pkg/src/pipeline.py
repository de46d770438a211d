"""
pipeline.py — Configuration and Subcommand Operations.

One ``cmd_*`` function per CLI subcommand:

    cmd_synth            synthetic recordings + manifest on disk
    cmd_extract          feature matrix CSV + provenance
    cmd_train            whole-dataset fit and importance analysis
    cmd_evaluate         (random search →) LOSO for one or more classifiers
    cmd_select           channel ranking + curve and/or RFE / IFE / CIFE comparison
    cmd_bench            forest training time vs channels, features and trees

Every command except ``cmd_synth`` ends with a run report written through
:mod:`src.reporter`. This module is the only writer of output files.
"""

import copy
import logging
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
import yaml

from src.entropy_bank import EntropyParams
from src.errors import ConfigError, PipelineError
from src.feature_bank import FeatureMatrix, extract_matrix
from src.learn import (
    CLASSIFIER_KINDS,
    KNN_DEFAULTS,
    NB_DEFAULTS,
    ClassifierSpec,
    ForestParams,
    evaluate_categories,
    importance_summary,
    loso_cv,
    parse_search_space,
    random_search,
    train_random_forest,
)
from src.reporter import build_report, to_plain, write_run_outputs
from src.selection import (
    RANKING_METHODS,
    SELECTION_METHODS,
    FeatureSelection,
    channel_curve,
    cife,
    ife,
    rank_channels,
    rfe,
    salient_counts_by_category,
)
from src.signal_model import (
    SubjectDataset,
    SynthSpec,
    dataset_files,
    dataset_from_recordings,
    load_dataset,
    save_recordings,
    synth_recordings,
)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: dict[str, Any] = {
    "project": {"name": "Mind-Wandering Entropy Detector", "version": "1.0.0"},
    "paths": {
        "dataset_dir": "data/dataset",
        "features": "data/features/features.csv",
        "output_dir": "data/output",
        "log_dir": "logs",
    },
    "dataset": {"source": "synth", "manifest": None},
    "synth": {
        "n_subjects": 10,
        "epochs_per_subject": 40,
        "n_channels": 8,
        "informative_channels": [2, 5],
        "separation": 1.0,
        "fs": 1000.0,
        "window_s": 10.0,
    },
    "preprocessing": {"bandpass": [0.1, 45.0], "filter_order": 4, "reference": None},
    "entropy": {
        "sampen_m": 2,
        "r_ratio": 0.15,
        "perm_m": 4,
        "disp_m": 3,
        "classes": 6,
        "delay": 1,
        "scales": 20,
    },
    "features": {"include_mse": True, "channels": None, "reuse": True},
    "classifier": {
        "kind": "random_forest",
        "random_forest": {"n_trees": 700, "max_depth": 12, "max_features": "sqrt", "min_samples_leaf": 1},
        "knn": dict(KNN_DEFAULTS),
        "naive_bayes": dict(NB_DEFAULTS),
    },
    "search": {
        "enabled": False,
        "n_candidates": 100,
        "n_folds": 5,
        "space": {
            "n_trees": [100, 300, 500, 700],
            "max_depth": {"randint": [4, 21]},
            "max_features": ["sqrt", 0.1, 0.3],
            "min_samples_leaf": [1, 2, 4],
        },
    },
    "evaluation": {"compare_with": [], "per_category": False, "importance_top_k": 60},
    "selection": {
        "alpha": 0.05,
        "channel_methods": ["pvalue", "auc"],
        "curve_method": "pvalue",
        "k_max": 8,
        "n_folds": 5,
        "feature_methods": ["RFE", "IFE", "CIFE"],
        "k": [15, 40],
        "rho_thres": 0.9,
        "rfe_step": None,
        "evaluate": True,
    },
    "bench": {
        "n_rows": 400,
        "features_per_channel": 424,
        "channel_counts": [2, 8, 30],
        "feature_counts": [100, 400, 1600, 3200],
        "tree_counts": [100, 200, 400],
        "tree_channels": 8,
        "n_trees": 100,
        "repetitions": 5,
        "separation": 1.0,
    },
    "runtime": {"seed": 42, "threads": 1, "workbook": True},
}

# Mappings replaced wholesale on merge rather than merged key by key
_REPLACED_ON_MERGE = {"space"}

_SEARCHABLE = {
    "random_forest": {"n_trees", "max_depth", "max_features", "min_samples_leaf"},
    "knn": set(KNN_DEFAULTS),
    "naive_bayes": set(NB_DEFAULTS),
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping) and key not in _REPLACED_ON_MERGE:
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(
    path: str | Path | None = "config.yaml",
    overrides: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    """Read a YAML config, merge it over the defaults, apply overrides, validate.

    Precedence is ``overrides`` > file > :data:`DEFAULT_CONFIG`.

    Raises:
        FileNotFoundError: If ``path`` is given and does not exist.
        ConfigError: If the merged config is invalid.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Configuration file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                loaded = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"Malformed YAML in {path}: {exc}") from exc
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"{path} must contain a mapping at the top level")
        cfg = _deep_merge(cfg, loaded)
        logger.debug("Configuration loaded from %s", path)
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def cli_overrides(
    seed: int | None = None,
    threads: int | None = None,
    output_dir: str | None = None,
) -> dict[str, Any]:
    """Config overrides for the flags that were actually given."""
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides.setdefault("runtime", {})["seed"] = int(seed)
    if threads is not None:
        overrides.setdefault("runtime", {})["threads"] = int(threads)
    if output_dir is not None:
        overrides["paths"] = {"output_dir": str(output_dir)}
    return overrides


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _is_int(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def validate_config(cfg: Mapping[str, Any]) -> None:
    """Structural checks on a merged config.

    Channel subsets are checked against the dataset once it is loaded.

    Raises:
        ConfigError: Naming the first offending entry.
    """
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    _require(not unknown, f"Unknown config sections: {sorted(unknown)}")

    runtime = cfg["runtime"]
    _require(_is_int(runtime["seed"]), f"runtime.seed must be an integer, got {runtime['seed']!r}")
    _require(_is_int(runtime["threads"]) and runtime["threads"] >= 1,
             f"runtime.threads must be an integer >= 1, got {runtime['threads']!r}")

    source = cfg["dataset"]["source"]
    _require(source in ("synth", "path"), f"dataset.source must be 'synth' or 'path', got {source!r}")
    try:
        synth = SynthSpec.from_config(cfg["synth"], int(runtime["seed"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid synth section: {exc}") from exc

    pre = cfg["preprocessing"]
    band = pre["bandpass"]
    if band is not None:
        _require(isinstance(band, Sequence) and len(band) == 2, f"preprocessing.bandpass must be [lo, hi], got {band!r}")
        lo, hi = float(band[0]), float(band[1])
        _require(0 < lo < hi, f"preprocessing.bandpass needs 0 < lo < hi, got {band}")
        if source == "synth":
            _require(hi < synth.fs / 2, f"preprocessing.bandpass upper edge {hi} must be below fs/2 = {synth.fs / 2}")
    reference = pre["reference"]
    _require(reference is None or (isinstance(reference, Sequence) and len(reference) == 2),
             f"preprocessing.reference must be null or two channel names, got {reference!r}")
    _require(_is_int(pre["filter_order"]) and pre["filter_order"] >= 1, "preprocessing.filter_order must be >= 1")

    try:
        EntropyParams.from_config(cfg["entropy"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid entropy section: {exc}") from exc

    channels = cfg["features"]["channels"]
    _require(channels is None or (isinstance(channels, list) and channels),
             "features.channels must be null or a non-empty list")

    classifier = cfg["classifier"]
    _require(classifier["kind"] in CLASSIFIER_KINDS,
             f"classifier.kind must be one of {CLASSIFIER_KINDS}, got {classifier['kind']!r}")
    for kind in [classifier["kind"], *cfg["evaluation"]["compare_with"]]:
        _require(kind in CLASSIFIER_KINDS, f"Unknown classifier kind {kind!r}")
        ClassifierSpec.from_config(classifier, int(runtime["seed"]), kind=kind)

    search = cfg["search"]
    if search["enabled"]:
        space = parse_search_space(search["space"])
        bad = set(space) - _SEARCHABLE[classifier["kind"]]
        _require(not bad, f"search.space keys {sorted(bad)} are not {classifier['kind']} hyperparameters")
        _require(_is_int(search["n_candidates"]) and search["n_candidates"] >= 1, "search.n_candidates must be >= 1")
        _require(_is_int(search["n_folds"]) and search["n_folds"] >= 2, "search.n_folds must be >= 2")

    sel = cfg["selection"]
    _require(0 < float(sel["alpha"]) < 1, f"selection.alpha must lie in (0, 1), got {sel['alpha']}")
    bad = [m for m in [*sel["channel_methods"], sel["curve_method"]] if m not in RANKING_METHODS]
    _require(not bad, f"Unknown channel ranking methods {bad}; expected {RANKING_METHODS}")
    bad = [m for m in sel["feature_methods"] if m not in SELECTION_METHODS]
    _require(not bad, f"Unknown feature selection methods {bad}; expected {SELECTION_METHODS}")
    _require(float(sel["rho_thres"]) > 0, f"selection.rho_thres must be > 0, got {sel['rho_thres']}")
    _require(all(_is_int(k) and k >= 1 for k in sel["k"]), f"selection.k must be integers >= 1, got {sel['k']}")
    _require(_is_int(sel["k_max"]) and sel["k_max"] >= 1, "selection.k_max must be >= 1")
    _require(sel["rfe_step"] is None or (_is_int(sel["rfe_step"]) and sel["rfe_step"] >= 1),
             "selection.rfe_step must be null or >= 1")
    _require(_is_int(sel["n_folds"]) and sel["n_folds"] >= 2, "selection.n_folds must be >= 2")

    bench = cfg["bench"]
    _require(_is_int(bench["repetitions"]) and bench["repetitions"] >= 5,
             f"bench.repetitions must be >= 5, got {bench['repetitions']}")
    for key in ("channel_counts", "feature_counts", "tree_counts"):
        _require(all(_is_int(v) and v >= 1 for v in bench[key]), f"bench.{key} must be positive integers")
    _require(_is_int(bench["n_rows"]) and bench["n_rows"] >= 4, "bench.n_rows must be >= 4")


def _seed(cfg: Mapping[str, Any]) -> int:
    return int(cfg["runtime"]["seed"])


def _threads(cfg: Mapping[str, Any]) -> int:
    return int(cfg["runtime"]["threads"])


def _seeds(cfg: Mapping[str, Any]) -> dict[str, int]:
    seeds = {"master": _seed(cfg)}
    if cfg["dataset"]["source"] == "synth":
        seeds["synth"] = _seed(cfg)
    if cfg["search"]["enabled"]:
        seeds["search"] = _seed(cfg)
    return seeds


# ---------------------------------------------------------------------------
# Stage helpers
# ---------------------------------------------------------------------------

class StageTimer:
    """Monotonic wall-clock seconds per named stage."""

    def __init__(self) -> None:
        self.stages: dict[str, float] = {}

    @contextmanager
    def __call__(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.stages[name] = self.stages.get(name, 0.0) + elapsed
            logger.info("Stage %-24s %.2fs", name, elapsed)


def _manifest_path(cfg: Mapping[str, Any]) -> Path:
    manifest = cfg["dataset"]["manifest"]
    return Path(manifest) if manifest else Path(cfg["paths"]["dataset_dir"]) / "manifest.yaml"


def build_dataset(cfg: Mapping[str, Any]) -> SubjectDataset:
    """Synthesize in memory or load from the manifest, per ``dataset.source``."""
    if cfg["dataset"]["source"] == "synth":
        spec = SynthSpec.from_config(cfg["synth"], _seed(cfg))
        pre = cfg["preprocessing"]
        return dataset_from_recordings(
            synth_recordings(spec),
            spec.window_s,
            band=pre["bandpass"],
            reference=pre["reference"],
            order=int(pre["filter_order"]),
            provenance=spec.provenance(),
        )
    return load_dataset(_manifest_path(cfg))


def _file_stamps(manifest: Path) -> list[list[Any]]:
    """[name, size, mtime_ns] of the manifest and each file it lists.

    An unreadable manifest gives an empty list; loading it reports the error.
    """
    try:
        files = dataset_files(manifest)
    except (FileNotFoundError, PipelineError, KeyError, TypeError, yaml.YAMLError):
        return []
    stamps: list[list[Any]] = []
    for path in files:
        try:
            st = path.stat()
        except FileNotFoundError:
            stamps.append([path.name, None, None])
            continue
        stamps.append([path.name, int(st.st_size), int(st.st_mtime_ns)])
    return stamps


def _extraction_key(cfg: Mapping[str, Any]) -> dict[str, Any]:
    """Config values that determine the feature matrix, in YAML-normal form."""
    key: dict[str, Any] = {
        "source": cfg["dataset"]["source"],
        "preprocessing": cfg["preprocessing"],
        "entropy": cfg["entropy"],
        "include_mse": cfg["features"]["include_mse"],
        "channels": cfg["features"]["channels"],
    }
    if cfg["dataset"]["source"] == "synth":
        key["synth"] = cfg["synth"]
        key["seed"] = _seed(cfg)
    else:
        key["manifest"] = str(_manifest_path(cfg))
        key["files"] = _file_stamps(_manifest_path(cfg))
    return yaml.safe_load(yaml.safe_dump(to_plain(key)))


def extract_features(cfg: Mapping[str, Any], ds: SubjectDataset | None = None) -> FeatureMatrix:
    """Extract the configured channel subset from ``ds`` (built from config if None).

    Raises:
        ConfigError: If ``features.channels`` names a channel the dataset lacks.
    """
    ds = ds if ds is not None else build_dataset(cfg)
    channels = cfg["features"]["channels"]
    if channels is not None:
        unknown = [c for c in channels if c not in ds.channels]
        if unknown:
            raise ConfigError(f"Unknown channels in features.channels: {unknown}; dataset has {ds.channels}")
    fm = extract_matrix(
        ds,
        channels,
        include_mse=bool(cfg["features"]["include_mse"]),
        params=EntropyParams.from_config(cfg["entropy"]),
        n_jobs=_threads(cfg),
    )
    fm.provenance["extraction_key"] = _extraction_key(cfg)
    return fm


def feature_matrix(cfg: Mapping[str, Any]) -> FeatureMatrix:
    """The saved matrix when it was built from the same settings, else a fresh extraction."""
    path = Path(cfg["paths"]["features"])
    if cfg["features"]["reuse"] and path.exists():
        fm = FeatureMatrix.load_csv(path)
        if fm.provenance.get("extraction_key") == _extraction_key(cfg):
            logger.info("Reusing feature matrix %s (%d rows × %d features)", path, fm.n_rows, fm.X.shape[1])
            return fm
        logger.info("Feature matrix %s was extracted with other settings; extracting again", path)
    return extract_features(cfg)


def _matrix_summary(fm: FeatureMatrix) -> dict[str, Any]:
    substitutions = fm.provenance.get("substitutions") or []
    return {
        "rows": fm.n_rows,
        "features": int(fm.X.shape[1]),
        "subjects": len(set(fm.subject_ids)),
        "channels": len(fm.channels),
        "mw_fraction": round(float(np.mean(fm.labels)), 4) if fm.n_rows else 0.0,
        "substituted_columns": len(substitutions),
        "substituted_cells": sum(len(e["rows"]) for e in substitutions),
    }


def _write(
    cfg: Mapping[str, Any],
    stem: str,
    report: dict[str, Any],
    tables: Mapping[str, Sequence[Mapping[str, Any]]] | None = None,
) -> dict[str, Any]:
    paths = write_run_outputs(
        report, cfg["paths"]["output_dir"], stem, tables=tables, workbook=bool(cfg["runtime"]["workbook"])
    )
    report["outputs"] = {k: str(v) for k, v in paths.items()}
    return report


def _banner(title: str) -> None:
    logger.info("=" * 60)
    logger.info(title)
    logger.info("=" * 60)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(config: Mapping[str, Any], out_dir: str | Path | None = None) -> dict[str, Any]:
    """Write a synthetic dataset in the on-disk format and return its summary.

    Raises:
        PipelineError: If the output directory cannot be written.
    """
    _banner("SYNTH: Synthetic recordings")
    spec = SynthSpec.from_config(config["synth"], _seed(config))
    out = Path(out_dir) if out_dir is not None else Path(config["paths"]["dataset_dir"])
    recordings = synth_recordings(spec)
    pre = config["preprocessing"]
    try:
        manifest = save_recordings(
            recordings,
            out,
            spec.window_s,
            band=pre["bandpass"],
            reference=pre["reference"],
            order=int(pre["filter_order"]),
            provenance=spec.provenance(),
        )
    except OSError as exc:
        raise PipelineError(f"Cannot write dataset to {out}: {exc}") from exc

    probes = {rec.subject_id: len(rec.events) for rec in recordings}
    summary = {
        "manifest": str(manifest),
        "subjects": len(recordings),
        "epochs_per_subject": spec.epochs_per_subject,
        "epochs": sum(probes.values()),
        "channels": spec.channel_names,
        "fs": spec.fs,
        "window_s": spec.window_s,
        "separation": spec.separation,
        "informative_channels": spec.provenance()["informative_channels"],
        "seed": spec.seed,
    }
    logger.info("  %-28s %d", "Subjects:", summary["subjects"])
    logger.info("  %-28s %d (%d per subject)", "Epochs:", summary["epochs"], summary["epochs_per_subject"])
    logger.info("  %-28s %s", "Channels:", ", ".join(summary["channels"]))
    logger.info("  %-28s %s", "Informative channels:", ", ".join(summary["informative_channels"]))
    logger.info("  %-28s %s", "Manifest:", manifest)
    return summary


def cmd_extract(config: Mapping[str, Any]) -> dict[str, Any]:
    """Extract the feature matrix, write it with provenance, and report substitutions."""
    _banner("EXTRACT: Feature extraction")
    timer = StageTimer()
    with timer("dataset"):
        ds = build_dataset(config)
    with timer("extraction"):
        fm = extract_features(config, ds)
    path = fm.save_csv(config["paths"]["features"])

    summary = _matrix_summary(fm)
    logger.info(
        "Undefined values substituted: %d cells in %d columns",
        summary["substituted_cells"], summary["substituted_columns"],
    )
    report = build_report(
        "extract", config, _seeds(config), _threads(config), timer.stages,
        channels=fm.channels,
        dataset=summary,
        matrix={"path": str(path), "columns": fm.X.shape[1]},
    )
    return _write(config, "extract", report)


def cmd_train(config: Mapping[str, Any]) -> dict[str, Any]:
    """Fit the configured classifier on every row and summarise its importances."""
    _banner("TRAIN: Whole-dataset fit")
    timer = StageTimer()
    with timer("features"):
        fm = feature_matrix(config)
    spec = ClassifierSpec.from_config(config["classifier"], _seed(config), _threads(config))
    with timer("training"):
        model = spec.fit(fm.X, fm.labels)

    importance = None
    if spec.kind == "random_forest":
        importance = importance_summary(model, int(config["evaluation"]["importance_top_k"]))
        logger.info("Top features: %s", ", ".join(n for n, _ in importance.top_features[:5]))
        logger.info("Significant features per channel: %s", importance.per_channel)
    else:
        logger.warning("Classifier %s has no feature importances; importance analysis skipped", spec.kind)

    report = build_report(
        "train", config, _seeds(config), _threads(config), timer.stages,
        channels=fm.channels,
        dataset=_matrix_summary(fm),
        classifier=spec.describe(),
        importance=importance.to_dict() if importance else None,
    )
    tables = {"importance": importance.to_dict()["top_features"]} if importance else None
    return _write(config, "train", report, tables)


def cmd_evaluate(config: Mapping[str, Any]) -> dict[str, Any]:
    """LOSO evaluation, optionally preceded by random search over grouped folds."""
    _banner("EVALUATE: Leave-one-subject-out")
    timer = StageTimer()
    seed, threads = _seed(config), _threads(config)
    with timer("features"):
        fm = feature_matrix(config)
    base = ClassifierSpec.from_config(config["classifier"], seed, threads)

    search = None
    if config["search"]["enabled"]:
        with timer("search"):
            search = random_search(
                parse_search_space(config["search"]["space"]),
                fm,
                base,
                n_candidates=int(config["search"]["n_candidates"]),
                n_folds=int(config["search"]["n_folds"]),
                seed=seed,
            )
        base = base.with_params(search.best_params)

    evaluations = {}
    for kind in dict.fromkeys([base.kind, *config["evaluation"]["compare_with"]]):
        spec = base if kind == base.kind else ClassifierSpec.from_config(config["classifier"], seed, threads, kind=kind)
        with timer(f"loso_{kind}"):
            evaluations[kind] = loso_cv(fm, spec)

    categories = None
    if config["evaluation"]["per_category"]:
        with timer("categories"):
            categories = evaluate_categories(fm, base)

    primary = evaluations[base.kind]
    logger.info("=" * 60)
    logger.info("  %-28s %.4f", "AUC:", primary.auc)
    logger.info("  %-28s %.4f", "Weighted F1:", primary.weighted_f1)
    logger.info("  %-28s %.4f", "Cohen's kappa:", primary.kappa)

    report = build_report(
        "evaluate", config, _seeds(config), threads, timer.stages,
        channels=fm.channels,
        dataset=_matrix_summary(fm),
        search=search.to_dict() if search else None,
        evaluations={k: r.to_dict() for k, r in evaluations.items()},
        categories={k: r.to_dict() for k, r in categories.items()} if categories else None,
    )
    tables = {
        "folds": [{"classifier": k, **f.to_dict()} for k, r in evaluations.items() for f in r.folds],
        "scores": [
            {"subject_id": s, "label": int(y), "score": float(p)}
            for s, y, p in zip(fm.subject_ids, primary.y_true, primary.scores)
        ],
    }
    if search:
        tables["search"] = [
            {**c["params"], "score": c["score"], "degenerate_folds": len(c["degenerate_folds"])}
            for c in search.candidates
        ]
    return _write(config, "evaluate", report, tables)


def _run_channel_selection(cfg: Mapping[str, Any], fm: FeatureMatrix, timer: StageTimer) -> tuple[dict, dict]:
    sel = cfg["selection"]
    params = ForestParams.from_config(cfg["classifier"]["random_forest"], _seed(cfg), _threads(cfg))
    methods = list(dict.fromkeys([*sel["channel_methods"], sel["curve_method"]]))
    rankings = {}
    for method in methods:
        with timer(f"ranking_{method}"):
            rankings[method] = rank_channels(
                fm, method, params, alpha=float(sel["alpha"]), n_folds=int(sel["n_folds"])
            )

    k_max = int(sel["k_max"])
    if k_max > len(fm.channels):
        logger.warning("selection.k_max=%d exceeds %d channels; using %d", k_max, len(fm.channels), len(fm.channels))
        k_max = len(fm.channels)
    spec = ClassifierSpec.from_config(cfg["classifier"], _seed(cfg), _threads(cfg))
    with timer("channel_curve"):
        curve = channel_curve(fm, rankings[sel["curve_method"]], k_max, spec)

    sections = {
        "channel_rankings": {m: r.to_dict() for m, r in rankings.items()},
        "channel_curve": [p.to_row() for p in curve],
        "salient_by_category": salient_counts_by_category(fm, float(sel["alpha"])),
    }
    tables: dict[str, list] = {"curve": sections["channel_curve"]}
    for method, ranking in rankings.items():
        tables[f"ranking_{method}"] = [
            {"rank": i, "channel": c, "score": s} for i, (c, s) in enumerate(ranking.entries, start=1)
        ]
    return sections, tables


def _select(method: str, fm: FeatureMatrix, k: int, params: ForestParams, sel: Mapping[str, Any]) -> FeatureSelection:
    if method == "IFE":
        return ife(fm, k, params)
    if method == "RFE":
        return rfe(fm, k, params, step=sel["rfe_step"])
    return cife(fm, float(sel["rho_thres"]), k, params)


def _run_feature_selection(cfg: Mapping[str, Any], fm: FeatureMatrix, timer: StageTimer) -> tuple[dict, dict]:
    sel = cfg["selection"]
    params = ForestParams.from_config(cfg["classifier"]["random_forest"], _seed(cfg), _threads(cfg))
    spec = ClassifierSpec.from_config(cfg["classifier"], _seed(cfg), _threads(cfg))
    selections, rows = [], []
    for k in sel["k"]:
        for method in sel["feature_methods"]:
            with timer(f"{method.lower()}_k{k}"):
                result = _select(method, fm, int(k), params, sel)
            row = {
                "method": method,
                "k": int(k),
                "time_s": round(result.time_s, 3),
                "n_fits": result.n_fits,
                "n_input": result.n_input,
            }
            if result.clusters is not None:
                row["n_clusters"] = result.clusters.n_clusters
            if sel["evaluate"]:
                with timer(f"loso_{method.lower()}_k{k}"):
                    evaluation = loso_cv(fm.select_columns(result.selected), spec)
                row.update(evaluation.metrics())
                row["train_time_s"] = round(evaluation.total_train_time_s, 3)
            logger.info("%s k=%d: %.2fs%s", method, k, result.time_s,
                        f", AUC {row['auc']:.4f}" if "auc" in row else "")
            selections.append(result.to_dict())
            rows.append(row)
    return {"feature_selection": selections, "selection_comparison": rows}, {"comparison": rows}


def cmd_select(config: Mapping[str, Any], channels: bool = True, features: bool = True) -> dict[str, Any]:
    """Channel ranking + curve and/or RFE / IFE / CIFE comparison at matched k."""
    if not (channels or features):
        raise ValueError("cmd_select needs channels and/or features")
    stem = "select" if channels and features else ("select_channels" if channels else "select_features")
    _banner(f"{stem.upper().replace('_', '-')}: Selection")
    timer = StageTimer()
    with timer("features"):
        fm = feature_matrix(config)

    sections: dict[str, Any] = {}
    tables: dict[str, list] = {}
    for enabled, run in ((channels, _run_channel_selection), (features, _run_feature_selection)):
        if enabled:
            extra_sections, extra_tables = run(config, fm, timer)
            sections.update(extra_sections)
            tables.update(extra_tables)

    report = build_report(
        stem, config, _seeds(config), _threads(config), timer.stages,
        channels=fm.channels,
        dataset=_matrix_summary(fm),
        **sections,
    )
    return _write(config, stem, report, tables)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

def _bench_matrix(n_rows: int, n_columns: int, separation: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian columns with a class shift on the first 2% of them."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, n_columns]))
    y = np.arange(n_rows) % 2
    X = rng.standard_normal((n_rows, n_columns))
    informative = max(1, n_columns // 50)
    X[:, :informative] += separation * y[:, None]
    return X, y


def time_forest_training(X: np.ndarray, y: np.ndarray, params: ForestParams, repetitions: int) -> dict[str, float]:
    """Median / min / max training seconds over ``repetitions`` fits after one discarded warm-up."""
    train_random_forest(X, y, params)
    times = [train_random_forest(X, y, params).train_time_s for _ in range(repetitions)]
    return {
        "median_s": float(np.median(times)),
        "min_s": float(np.min(times)),
        "max_s": float(np.max(times)),
    }


def cmd_bench(config: Mapping[str, Any]) -> dict[str, Any]:
    """Forest training time vs channel count, feature count and tree count."""
    _banner("BENCH: Training-time scaling")
    bench = config["bench"]
    seed, threads = _seed(config), _threads(config)
    reps = int(bench["repetitions"])
    n_rows = int(bench["n_rows"])
    per_channel = int(bench["features_per_channel"])
    params = ForestParams.from_config(
        {**config["classifier"]["random_forest"], "n_trees": int(bench["n_trees"])}, seed, threads
    )
    timer = StageTimer()

    def measure(n_columns: int, forest: ForestParams) -> dict[str, Any]:
        X, y = _bench_matrix(n_rows, n_columns, float(bench["separation"]), seed)
        return {"n_features": n_columns, "n_rows": n_rows, "n_trees": forest.n_trees,
                **time_forest_training(X, y, forest, reps), "repetitions": reps, "threads": threads}

    tables: dict[str, list] = {"channels": [], "features": [], "trees": []}
    with timer("bench_channels"):
        for count in bench["channel_counts"]:
            tables["channels"].append({"channels": int(count), **measure(int(count) * per_channel, params)})
    with timer("bench_features"):
        for count in bench["feature_counts"]:
            tables["features"].append(measure(int(count), params))
    with timer("bench_trees"):
        for n_trees in bench["tree_counts"]:
            tables["trees"].append(measure(int(bench["tree_channels"]) * per_channel, replace(params, n_trees=int(n_trees))))

    for name, rows in tables.items():
        if rows:
            reference = rows[-1]["median_s"]
            for row in rows:
                row["ratio_to_last"] = round(row["median_s"] / reference, 4) if reference > 0 else None
        for row in rows:
            logger.info("  %-9s %6d features %5d trees   median %.3fs", name, row["n_features"], row["n_trees"], row["median_s"])

    report = build_report(
        "bench", config, _seeds(config), threads, timer.stages,
        bench={"repetitions": reps, "threads": threads, "n_rows": n_rows, "warm_up": 1, "tables": tables},
    )
    return _write(config, "bench", report, tables)
