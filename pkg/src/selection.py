"""
selection.py — Channel Ranking and Feature Selection.

Channel side:
    salient_feature_counts   Mann–Whitney U per feature, salient counts per channel
    rank_channels            by salient count ("pvalue") or per-channel forest AUC ("auc")
    channel_curve            LOSO evaluation on the top-K ranked channels, K = 1..K_max

Feature side (all return a FeatureSelection with wall time):
    ife    one forest fit, top-k by importance
    rfe    refit and drop the least important features until k remain
    cife   |ρ| connected-component clustering, one representative per cluster,
           then one forest fit on the representatives and top-k by importance
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.model_selection import GroupKFold

from src.errors import SelectionError
from src.feature_bank import CATEGORIES, FeatureMatrix, feature_category
from src.learn import (
    ClassifierSpec,
    EvalResult,
    ForestParams,
    derive_seed,
    loso_cv,
    roc_auc,
    train_random_forest,
)

logger = logging.getLogger(__name__)

RANKING_METHODS = ("pvalue", "auc")
SELECTION_METHODS = ("RFE", "IFE", "CIFE")
RHO_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Salient features
# ---------------------------------------------------------------------------

def _require_both_classes(labels: np.ndarray) -> None:
    if np.unique(labels).size < 2:
        raise ValueError("Both classes must be present")


def feature_pvalues(fm: FeatureMatrix) -> pd.Series:
    """Two-sided Mann–Whitney U p-value per feature (normal approximation, tie corrected).

    Constant features get p = 1.
    """
    _require_both_classes(fm.labels)
    values = fm.values
    x0, x1 = values[fm.labels == 0], values[fm.labels == 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        result = stats.mannwhitneyu(x0, x1, alternative="two-sided", method="asymptotic", axis=0)
    pvalues = np.asarray(result.pvalue, dtype=np.float64)
    constant = np.ptp(values, axis=0) == 0
    pvalues[constant | ~np.isfinite(pvalues)] = 1.0
    return pd.Series(pvalues, index=fm.feature_names, name="pvalue")


def salient_feature_counts(fm: FeatureMatrix, alpha: float = 0.05) -> dict[str, int]:
    """Number of features with p < alpha, per channel in matrix order."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    salient = feature_pvalues(fm) < alpha
    channel_of = fm.channel_map()
    counts = dict.fromkeys(fm.channels, 0)
    for name in salient.index[salient.to_numpy()]:
        counts[channel_of[name]] += 1
    return counts


def salient_counts_by_category(fm: FeatureMatrix, alpha: float = 0.05) -> dict[str, dict[str, float]]:
    """Salient count, total and fraction per feature category."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    pvalues = feature_pvalues(fm)
    categories = pd.Series([feature_category(n) for n in pvalues.index], index=pvalues.index)
    out = {}
    for category in CATEGORIES:
        mask = (categories == category).to_numpy()
        total = int(mask.sum())
        count = int((pvalues.to_numpy()[mask] < alpha).sum())
        out[category] = {"count": count, "total": total, "fraction": count / total if total else 0.0}
    return out


# ---------------------------------------------------------------------------
# Channel ranking
# ---------------------------------------------------------------------------

@dataclass
class ChannelRanking:
    """Channels ordered by a non-increasing score."""

    method: str
    entries: list[tuple[str, float]]

    def __post_init__(self) -> None:
        names = [c for c, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate channels in ranking: {names}")
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("Ranking scores must be non-increasing")

    @property
    def channels(self) -> list[str]:
        return [c for c, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.channels[:k]

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "channels": [{"channel": c, "score": float(s)} for c, s in self.entries],
        }


def _sorted_ranking(method: str, scores: dict[str, float]) -> ChannelRanking:
    # stable: equal scores keep matrix channel order
    ordered = sorted(scores.items(), key=lambda item: -item[1])
    return ChannelRanking(method=method, entries=[(c, float(s)) for c, s in ordered])


def grouped_auc(fm: FeatureMatrix, params: ForestParams, n_folds: int = 5) -> float:
    """Pooled out-of-fold forest AUC under subject-grouped folds.

    A fold whose training rows hold one class predicts 0.5 for its test rows.
    """
    groups = fm.subject_ids
    n_folds = min(n_folds, len(set(groups)))
    if n_folds < 2:
        raise ValueError("Grouped CV needs at least 2 subjects")
    values, y = fm.values, fm.labels
    scores = np.full(y.size, 0.5)
    for f, (train_idx, test_idx) in enumerate(GroupKFold(n_splits=n_folds).split(values, y, groups)):
        if np.unique(y[train_idx]).size < 2:
            logger.warning("Grouped fold %d has single-class training rows; scored 0.5", f)
            continue
        forest = train_random_forest(values[train_idx], y[train_idx], params.with_seed(derive_seed(params.seed, f)))
        scores[test_idx] = forest.predict_proba(values[test_idx])[:, 1]
    return roc_auc(y, scores)


def rank_channels(
    fm: FeatureMatrix,
    method: str,
    params: ForestParams,
    alpha: float = 0.05,
    n_folds: int = 5,
) -> ChannelRanking:
    """Rank channels by salient-feature count or by per-channel forest AUC.

    Raises:
        ValueError: On an unknown method.
    """
    if method not in RANKING_METHODS:
        raise ValueError(f"Unknown ranking method {method!r}; expected one of {RANKING_METHODS}")
    start = time.perf_counter()
    if method == "pvalue":
        scores = {c: float(n) for c, n in salient_feature_counts(fm, alpha).items()}
    else:
        _require_both_classes(fm.labels)
        scores = {}
        for channel in fm.channels:
            scores[channel] = grouped_auc(fm.select_channels([channel]), params, n_folds)
            logger.debug("Channel %s: grouped AUC %.4f", channel, scores[channel])
    ranking = _sorted_ranking(method, scores)
    logger.info(
        "Channel ranking (%s) in %.2fs: %s",
        method, time.perf_counter() - start, ", ".join(f"{c}={s:.3g}" for c, s in ranking.entries[:5]),
    )
    return ranking


@dataclass
class CurvePoint:
    """LOSO result on the top-K channels."""

    k: int
    channels: list[str]
    result: EvalResult

    def to_row(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "channels": "+".join(self.channels),
            "n_features": self.result.n_features,
            **self.result.metrics(),
            "total_train_time_s": round(self.result.total_train_time_s, 3),
            "median_train_time_s": round(self.result.median_train_time_s, 3),
        }


def channel_curve(fm: FeatureMatrix, ranking: ChannelRanking, k_max: int, spec: ClassifierSpec) -> list[CurvePoint]:
    """LOSO evaluation adding one ranked channel at a time.

    Raises:
        ValueError: If ``k_max`` is not in 1..len(ranking).
    """
    if not 1 <= k_max <= len(ranking.entries):
        raise ValueError(f"k_max must lie in 1..{len(ranking.entries)}, got {k_max}")
    curve = []
    for k in range(1, k_max + 1):
        channels = ranking.top(k)
        logger.info("Channel curve K=%d: %s", k, channels)
        curve.append(CurvePoint(k=k, channels=channels, result=loso_cv(fm.select_channels(channels), spec)))
    return curve


# ---------------------------------------------------------------------------
# Feature selection
# ---------------------------------------------------------------------------

@dataclass
class ClusterMap:
    """Correlation clusters: feature → cluster id and one representative per cluster."""

    assignment: dict[str, int]
    representatives: list[str]

    def __post_init__(self) -> None:
        for cid, rep in enumerate(self.representatives):
            if self.assignment.get(rep) != cid:
                raise ValueError(f"Representative {rep} is not a member of cluster {cid}")

    @property
    def n_clusters(self) -> int:
        return len(self.representatives)

    def members(self, cluster_id: int) -> list[str]:
        return [n for n, c in self.assignment.items() if c == cluster_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_clusters": self.n_clusters,
            "representatives": list(self.representatives),
            "clusters": [self.members(c) for c in range(self.n_clusters) if len(self.members(c)) > 1],
        }


@dataclass
class FeatureSelection:
    """Selected feature names (importance order) with selection wall time."""

    method: str
    selected: list[str]
    time_s: float
    params: dict[str, Any] = field(default_factory=dict)
    importances: list[float] = field(default_factory=list)
    n_input: int = 0
    n_fits: int = 0
    step_times: dict[str, float] = field(default_factory=dict)
    clusters: ClusterMap | None = None

    def __post_init__(self) -> None:
        if self.method not in SELECTION_METHODS:
            raise ValueError(f"Unknown selection method {self.method!r}")
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("Selected names must be unique")

    @property
    def k(self) -> int:
        return len(self.selected)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "method": self.method,
            "k": self.k,
            "time_s": round(self.time_s, 3),
            "n_input": self.n_input,
            "n_fits": self.n_fits,
            "params": dict(self.params),
            "step_times": {k: round(v, 3) for k, v in self.step_times.items()},
            "selected": [
                {"name": n, "importance": float(v)} for n, v in zip(self.selected, self.importances)
            ] if self.importances else list(self.selected),
        }
        if self.clusters is not None:
            out["clusters"] = self.clusters.to_dict()
        return out


def _check_k(k: int, available: int, what: str = "features") -> None:
    if not 1 <= k <= available:
        raise SelectionError(f"k={k} out of range: {available} {what} available")


def _top_k(imp: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(-imp, kind="stable")[:k]


def ife(fm: FeatureMatrix, k: int, params: ForestParams) -> FeatureSelection:
    """Importance feature elimination: one forest, keep the top-k."""
    _check_k(k, fm.X.shape[1])
    start = time.perf_counter()
    forest = train_random_forest(fm.X, fm.labels, params)
    keep = _top_k(forest.importances, k)
    elapsed = time.perf_counter() - start
    logger.info("IFE: kept %d of %d features in %.2fs", k, fm.X.shape[1], elapsed)
    return FeatureSelection(
        method="IFE",
        selected=[forest.feature_names[i] for i in keep],
        time_s=elapsed,
        params={"k": k, "seed": params.seed, "n_trees": params.n_trees, "threads": params.n_jobs},
        importances=forest.importances[keep].tolist(),
        n_input=fm.X.shape[1],
        n_fits=1,
        step_times={"fit": elapsed},
    )


def default_rfe_step(remaining: int) -> int:
    return max(1, int(0.1 * remaining))


def rfe(fm: FeatureMatrix, k: int, params: ForestParams, step: int | None = None) -> FeatureSelection:
    """Recursive feature elimination.

    Each round refits on the surviving columns and drops the ``step``
    least important (default 10% of the survivors, at least 1) without
    going below k. Survivors stay in importance order of the latest fit.
    """
    n_features = fm.X.shape[1]
    _check_k(k, n_features)
    if step is not None and step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    values, names, y = fm.values, fm.feature_names, fm.labels

    start = time.perf_counter()
    remaining = np.arange(n_features)
    importances = None
    n_fits = 0
    while True:
        forest = train_random_forest(values[:, remaining], y, params, [names[i] for i in remaining])
        n_fits += 1
        imp = forest.importances
        order = np.argsort(-imp, kind="stable")
        n_remove = min(step or default_rfe_step(remaining.size), remaining.size - k)
        keep = order[: remaining.size - n_remove]
        remaining, importances = remaining[keep], imp[keep]
        logger.debug("RFE round %d: %d features remain", n_fits, remaining.size)
        if remaining.size <= k:
            break
    elapsed = time.perf_counter() - start
    logger.info("RFE: kept %d of %d features in %.2fs (%d fits)", k, n_features, elapsed, n_fits)
    return FeatureSelection(
        method="RFE",
        selected=[names[i] for i in remaining],
        time_s=elapsed,
        params={"k": k, "step": step if step is not None else "10%", "seed": params.seed,
                "n_trees": params.n_trees, "threads": params.n_jobs},
        importances=importances.tolist(),
        n_input=n_features,
        n_fits=n_fits,
        step_times={"fits": elapsed},
    )


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    """Sample Pearson correlation; NaN when either input is constant.

    Raises:
        ValueError: On unequal lengths or fewer than two values.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"pearson needs equal-length 1-D inputs, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValueError("pearson needs at least two values")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.clip(stats.pearsonr(a, b).statistic, -1.0, 1.0))


def abs_correlation(values: np.ndarray) -> np.ndarray:
    """|ρ| between columns; pairs involving a constant column are 0, the diagonal 1."""
    centered = values - values.mean(axis=0)
    norms = np.sqrt(np.sum(centered * centered, axis=0))
    constant = norms == 0
    norms[constant] = 1.0
    unit = centered / norms
    corr = np.abs(np.clip(unit.T @ unit, -1.0, 1.0))
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    return corr


def correlation_clusters(fm: FeatureMatrix, rho_thres: float) -> ClusterMap:
    """Connected components of the graph joining features with |ρ| ≥ rho_thres.

    Uses features only, never labels. The representative of a cluster is the
    member with the largest summed |ρ| to the cluster (lowest index on ties).
    """
    if not rho_thres > 0:
        raise ValueError(f"rho_thres must be positive, got {rho_thres}")
    names = fm.feature_names
    corr = abs_correlation(fm.values)
    if rho_thres <= 1.0:
        adjacency = corr >= rho_thres - RHO_TOLERANCE
    else:
        adjacency = np.eye(len(names), dtype=bool)
    _, labels = connected_components(csr_matrix(adjacency), directed=False)

    # renumber clusters by their lowest member index
    remap: dict[int, int] = {}
    for label in labels:
        remap.setdefault(int(label), len(remap))
    cluster_ids = np.array([remap[int(label)] for label in labels])

    representatives = []
    for cid in range(len(remap)):
        members = np.flatnonzero(cluster_ids == cid)
        within = corr[np.ix_(members, members)].sum(axis=1)
        representatives.append(names[members[int(np.argmax(within))]])
    return ClusterMap(
        assignment={name: int(c) for name, c in zip(names, cluster_ids)},
        representatives=representatives,
    )


def cife(fm: FeatureMatrix, rho_thres: float, k: int, params: ForestParams) -> FeatureSelection:
    """Correlation clustering then importance rejection on cluster representatives.

    Raises:
        SelectionError: If k exceeds the number of clusters.
    """
    _check_k(k, fm.X.shape[1])
    start = time.perf_counter()
    clusters = correlation_clusters(fm, rho_thres)
    cluster_time = time.perf_counter() - start
    _check_k(k, clusters.n_clusters, "clusters")

    # representatives in original column order
    reps = set(clusters.representatives)
    columns = [n for n in fm.feature_names if n in reps]
    forest = train_random_forest(fm.select_columns(columns).X, fm.labels, params)
    keep = _top_k(forest.importances, k)
    elapsed = time.perf_counter() - start
    logger.info(
        "CIFE: %d features → %d clusters (ρ ≥ %.3g) → kept %d in %.2fs",
        fm.X.shape[1], clusters.n_clusters, rho_thres, k, elapsed,
    )
    return FeatureSelection(
        method="CIFE",
        selected=[forest.feature_names[i] for i in keep],
        time_s=elapsed,
        params={"k": k, "rho_thres": rho_thres, "seed": params.seed,
                "n_trees": params.n_trees, "threads": params.n_jobs},
        importances=forest.importances[keep].tolist(),
        n_input=fm.X.shape[1],
        n_fits=1,
        step_times={"clustering": cluster_time, "fit": elapsed - cluster_time},
        clusters=clusters,
    )
