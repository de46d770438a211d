"""
learn.py — Classifiers, Metrics and Subject-Wise Evaluation.

Wraps scikit-learn for the three classifier kinds the pipeline compares:

    random_forest   Gini forest; probabilities are hard tree votes
    naive_bayes     Gaussian NB, variance floor 1e-9 × max feature variance
    knn             k-NN, Manhattan distance, inverse-distance votes

and evaluates them with leave-one-subject-out cross-validation on a
FeatureMatrix. Metrics (weighted F1, Cohen's kappa, ROC AUC) are computed
on pooled out-of-fold predictions. Every fit takes its seed from the master
seed through ``derive_seed`` so sequential and parallel runs agree.
"""

import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics import cohen_kappa_score, f1_score, roc_auc_score
from sklearn.model_selection import GroupKFold, LeaveOneGroupOut, ParameterSampler
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from src.errors import ConfigError, PipelineError
from src.feature_bank import CATEGORIES, FeatureMatrix, parse_feature_name

logger = logging.getLogger(__name__)

CLASSIFIER_KINDS = ("random_forest", "naive_bayes", "knn")
MAX_FEATURES_RULES = ("sqrt", "auto", "all")
SEARCH_PENALTY_AUC = 0.5

KNN_DEFAULTS: dict[str, Any] = {"n_neighbors": 10, "weights": "distance", "metric": "manhattan", "standardize": True}
NB_DEFAULTS: dict[str, Any] = {"var_smoothing": 1e-9}


def derive_seed(master: int, *counter: int) -> int:
    """Deterministic 32-bit child seed for a (master, counter...) position."""
    return int(np.random.SeedSequence([int(master), *map(int, counter)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _paired(a: Sequence, b: Sequence, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1 or a.size != b.size:
        raise ValueError(f"{what}: length mismatch ({a.size} vs {b.size})")
    if a.size == 0:
        raise ValueError(f"{what}: inputs are empty")
    return a, b


def weighted_f1(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    """Per-class F1 weighted by class prevalence in ``y_true``.

    A class with no true or predicted members contributes F1 = 0.
    """
    y_true, y_pred = _paired(y_true, y_pred, "weighted_f1")
    return float(f1_score(y_true, y_pred, labels=[0, 1], average="weighted", zero_division=0))


def cohens_kappa(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    """Chance-corrected agreement (p0 - pe) / (1 - pe).

    When both label sequences are the same constant, pe = 1 and the
    agreement is perfect; kappa is defined as 1.0 there.
    """
    y_true, y_pred = _paired(y_true, y_pred, "cohens_kappa")
    true_classes, pred_classes = np.unique(y_true), np.unique(y_pred)
    if true_classes.size == 1 and pred_classes.size == 1 and true_classes[0] == pred_classes[0]:
        return 1.0
    return float(cohen_kappa_score(y_true, y_pred, labels=[0, 1]))


def roc_auc(y_true: Sequence[int], scores: Sequence[float]) -> float:
    """Area under the ROC curve; ties between a positive and a negative count ½.

    Raises:
        ValueError: If ``y_true`` holds a single class.
    """
    y_true, scores = _paired(y_true, scores, "roc_auc")
    if np.unique(y_true).size < 2:
        raise ValueError("roc_auc needs both classes in y_true")
    return float(roc_auc_score(y_true, np.asarray(scores, dtype=np.float64)))


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters.

    ``max_features`` is "sqrt" (alias "auto"), "all", or a fraction in (0, 1].
    """

    n_trees: int = 700
    max_depth: int = 12
    max_features: str | float = "sqrt"
    min_samples_leaf: int = 1
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if int(self.n_trees) < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if int(self.max_depth) < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if int(self.min_samples_leaf) < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        rule = self.max_features
        if isinstance(rule, str):
            if rule not in MAX_FEATURES_RULES:
                raise ValueError(f"max_features must be one of {MAX_FEATURES_RULES} or a fraction, got {rule!r}")
        elif not 0.0 < float(rule) <= 1.0:
            raise ValueError(f"max_features fraction must lie in (0, 1], got {rule}")

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], seed: int, n_jobs: int = 1) -> "ForestParams":
        return cls(
            n_trees=int(cfg.get("n_trees", 700)),
            max_depth=int(cfg.get("max_depth", 12)),
            max_features=cfg.get("max_features", "sqrt"),
            min_samples_leaf=int(cfg.get("min_samples_leaf", 1)),
            seed=int(seed),
            n_jobs=int(n_jobs),
        )

    @property
    def sklearn_max_features(self) -> str | float | None:
        if self.max_features in ("sqrt", "auto"):
            return "sqrt"
        if self.max_features == "all":
            return None
        return float(self.max_features)

    def with_seed(self, seed: int) -> "ForestParams":
        return replace(self, seed=int(seed))

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


def _as_matrix(X: FeatureMatrix | pd.DataFrame | np.ndarray) -> tuple[np.ndarray, list[str] | None]:
    if isinstance(X, FeatureMatrix):
        return X.values, X.feature_names
    if isinstance(X, pd.DataFrame):
        return X.to_numpy(dtype=np.float64), [str(c) for c in X.columns]
    values = np.asarray(X, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"Feature matrix must be 2-D, got shape {values.shape}")
    return values, None


def _check_training_data(values: np.ndarray, y: np.ndarray) -> None:
    if values.shape[0] == 0 or values.shape[1] == 0:
        raise ValueError(f"Training matrix is empty (shape {values.shape})")
    if values.shape[0] != y.size:
        raise ValueError(f"{values.shape[0]} rows but {y.size} labels")
    if not np.all(np.isfinite(values)):
        raise ValueError("Training matrix contains non-finite values")
    if np.unique(y).size < 2:
        raise ValueError("Training labels hold a single class")


@dataclass
class TrainedForest:
    """A fitted forest with the column names it was trained on."""

    model: RandomForestClassifier
    feature_names: list[str]
    params: ForestParams
    train_time_s: float

    @property
    def importances(self) -> np.ndarray:
        """Normalized mean impurity decrease; uniform when no tree could split."""
        imp = np.asarray(self.model.feature_importances_, dtype=np.float64)
        total = imp.sum()
        if total <= 0:
            return np.full(imp.size, 1.0 / imp.size)
        return imp / total

    def importance_series(self) -> pd.Series:
        return pd.Series(self.importances, index=self.feature_names, name="importance")

    def _values(self, X: FeatureMatrix | pd.DataFrame | np.ndarray) -> np.ndarray:
        values, names = _as_matrix(X)
        if names is not None and names != self.feature_names:
            raise ValueError("Feature names do not match the columns the forest was trained on")
        if values.shape[1] != len(self.feature_names):
            raise ValueError(f"Expected {len(self.feature_names)} columns, got {values.shape[1]}")
        return values

    def predict_proba(self, X: FeatureMatrix | pd.DataFrame | np.ndarray) -> np.ndarray:
        """Fraction of trees voting each class (columns follow ``model.classes_``)."""
        values = self._values(X)
        votes = np.zeros((values.shape[0], self.model.n_classes_), dtype=np.float64)
        rows = np.arange(values.shape[0])
        for tree in self.model.estimators_:
            votes[rows, np.argmax(tree.predict_proba(values), axis=1)] += 1.0
        positive = votes[:, 1] / len(self.model.estimators_)
        return np.column_stack([1.0 - positive, positive])

    def predict(self, X: FeatureMatrix | pd.DataFrame | np.ndarray) -> np.ndarray:
        return self.model.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def max_tree_depth(self) -> int:
        return max(tree.get_depth() for tree in self.model.estimators_)


def train_random_forest(
    X: FeatureMatrix | pd.DataFrame | np.ndarray,
    y: Sequence[int],
    params: ForestParams,
    feature_names: Sequence[str] | None = None,
) -> TrainedForest:
    """Fit a bootstrap Gini forest.

    Raises:
        ValueError: On an empty or non-finite matrix or single-class labels.
    """
    values, names = _as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    _check_training_data(values, y)
    if names is None:
        names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(values.shape[1])]

    model = RandomForestClassifier(
        n_estimators=params.n_trees,
        criterion="gini",
        max_depth=params.max_depth,
        max_features=params.sklearn_max_features,
        min_samples_leaf=params.min_samples_leaf,
        bootstrap=True,
        random_state=params.seed,
        n_jobs=params.n_jobs,
    )
    start = time.perf_counter()
    model.fit(values, y)
    elapsed = time.perf_counter() - start
    logger.debug(
        "Forest fitted: %d trees, %d rows × %d features in %.3fs",
        params.n_trees, values.shape[0], values.shape[1], elapsed,
    )
    return TrainedForest(model=model, feature_names=list(names), params=params, train_time_s=elapsed)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def train_baseline(
    kind: str,
    X: FeatureMatrix | pd.DataFrame | np.ndarray,
    y: Sequence[int],
    hyper: Mapping[str, Any] | None = None,
) -> GaussianNB | Pipeline:
    """Fit a naive Bayes or k-NN baseline exposing ``predict_proba``.

    Raises:
        ValueError: On an unknown kind or invalid training data.
    """
    values, _ = _as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    _check_training_data(values, y)
    hyper = dict(hyper or {})

    if kind == "naive_bayes":
        cfg = {**NB_DEFAULTS, **hyper}
        model = GaussianNB(var_smoothing=float(cfg["var_smoothing"]))
    elif kind == "knn":
        cfg = {**KNN_DEFAULTS, **hyper}
        knn = KNeighborsClassifier(
            n_neighbors=min(int(cfg["n_neighbors"]), values.shape[0]),
            weights=cfg["weights"],
            metric=cfg["metric"],
            algorithm="brute",
        )
        steps = [("scaler", StandardScaler())] if cfg["standardize"] else []
        model = Pipeline(steps + [("knn", knn)])
    else:
        raise ValueError(f"Unknown baseline kind {kind!r}; expected naive_bayes or knn")
    return model.fit(values, y)


# ---------------------------------------------------------------------------
# Classifier dispatch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierSpec:
    """Which classifier to fit and with what hyperparameters."""

    kind: str = "random_forest"
    forest: ForestParams = field(default_factory=ForestParams)
    hyper: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"Unknown classifier kind {self.kind!r}; expected one of {CLASSIFIER_KINDS}")

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], seed: int, n_jobs: int = 1, kind: str | None = None) -> "ClassifierSpec":
        """Build from the ``classifier`` config section."""
        kind = kind or cfg.get("kind", "random_forest")
        try:
            return cls(
                kind=kind,
                forest=ForestParams.from_config(cfg.get("random_forest", {}), seed, n_jobs),
                hyper=dict(cfg.get(kind, {}) or {}) if kind != "random_forest" else {},
            )
        except ValueError as exc:
            raise ConfigError(f"Invalid classifier config: {exc}") from exc

    @property
    def seed(self) -> int:
        return self.forest.seed

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return replace(self, forest=self.forest.with_seed(seed))

    def with_params(self, params: Mapping[str, Any]) -> "ClassifierSpec":
        """Copy with search-candidate parameters applied."""
        if self.kind == "random_forest":
            return replace(self, forest=replace(self.forest, **params))
        return replace(self, hyper={**self.hyper, **params})

    def fit(self, X: FeatureMatrix | pd.DataFrame | np.ndarray, y: Sequence[int], feature_names: Sequence[str] | None = None):
        if self.kind == "random_forest":
            return train_random_forest(X, y, self.forest, feature_names)
        return train_baseline(self.kind, X, y, self.hyper)

    def describe(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "random_forest":
            out.update(self.forest.as_dict())
        else:
            defaults = KNN_DEFAULTS if self.kind == "knn" else NB_DEFAULTS
            out.update({**defaults, **self.hyper})
        return out


def positive_scores(model, X: np.ndarray) -> np.ndarray:
    """Probability of the MW class for each row."""
    proba = model.predict_proba(X)
    return np.asarray(proba, dtype=np.float64)[:, 1]


# ---------------------------------------------------------------------------
# Leave-one-subject-out evaluation
# ---------------------------------------------------------------------------

@dataclass
class FoldResult:
    """One held-out subject."""

    subject_id: str
    n_train: int
    n_test: int
    seed: int
    train_time_s: float
    weighted_f1: float
    kappa: float
    auc: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "seed": self.seed,
            "train_time_s": round(self.train_time_s, 3),
            "weighted_f1": self.weighted_f1,
            "kappa": self.kappa,
            "auc": self.auc,
        }


@dataclass
class EvalResult:
    """Pooled out-of-fold metrics plus the per-fold breakdown."""

    weighted_f1: float
    kappa: float
    auc: float
    folds: list[FoldResult]
    classifier: dict[str, Any] = field(default_factory=dict)
    n_features: int = 0
    y_true: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64), repr=False)
    scores: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def train_times(self) -> list[float]:
        return [f.train_time_s for f in self.folds]

    @property
    def total_train_time_s(self) -> float:
        return float(sum(self.train_times))

    @property
    def median_train_time_s(self) -> float:
        return float(np.median(self.train_times)) if self.folds else 0.0

    def metrics(self) -> dict[str, float]:
        return {"weighted_f1": self.weighted_f1, "kappa": self.kappa, "auc": self.auc}

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.metrics(),
            "n_features": self.n_features,
            "n_folds": len(self.folds),
            "total_train_time_s": round(self.total_train_time_s, 3),
            "median_train_time_s": round(self.median_train_time_s, 3),
            "classifier": dict(self.classifier),
            "folds": [f.to_dict() for f in self.folds],
        }


def loso_cv(fm: FeatureMatrix, spec: ClassifierSpec) -> EvalResult:
    """Leave-one-subject-out cross-validation on a feature matrix.

    Fold ``i`` (in order of first appearance of each subject) trains with
    seed ``derive_seed(spec.seed, i)``.

    Raises:
        ValueError: If fewer than two subjects are present.
        PipelineError: If a held-out subject leaks into its training rows.
    """
    values = fm.values
    y = fm.labels
    groups = fm.subject_ids
    subjects = list(dict.fromkeys(groups))
    if len(subjects) < 2:
        raise ValueError(f"LOSO needs at least 2 subjects, got {len(subjects)}")

    # LeaveOneGroupOut orders folds by sorted group; re-order by appearance
    splits = {groups[test[0]]: (train, test) for train, test in LeaveOneGroupOut().split(values, y, groups)}
    scores = np.full(len(y), np.nan)
    folds = []
    logger.info("LOSO: %d subjects, %d rows × %d features, classifier=%s", len(subjects), len(y), values.shape[1], spec.kind)

    for i, subject in enumerate(subjects):
        train_idx, test_idx = splits[subject]
        if set(groups[train_idx]) & set(groups[test_idx]):
            raise PipelineError(f"Subject {subject} appears in both training and test rows")
        fold_seed = derive_seed(spec.seed, i)
        start = time.perf_counter()
        model = spec.with_seed(fold_seed).fit(values[train_idx], y[train_idx], fm.feature_names)
        elapsed = time.perf_counter() - start
        fold_scores = positive_scores(model, values[test_idx])
        scores[test_idx] = fold_scores
        fold_pred = (fold_scores > 0.5).astype(np.int64)
        y_test = y[test_idx]
        fold = FoldResult(
            subject_id=str(subject),
            n_train=int(train_idx.size),
            n_test=int(test_idx.size),
            seed=fold_seed,
            train_time_s=elapsed,
            weighted_f1=weighted_f1(y_test, fold_pred),
            kappa=cohens_kappa(y_test, fold_pred),
            auc=roc_auc(y_test, fold_scores) if np.unique(y_test).size == 2 else None,
        )
        folds.append(fold)
        logger.debug("Fold %s: AUC=%s, train %.3fs", subject, fold.auc, elapsed)

    y_pred = (scores > 0.5).astype(np.int64)
    result = EvalResult(
        weighted_f1=weighted_f1(y, y_pred),
        kappa=cohens_kappa(y, y_pred),
        auc=roc_auc(y, scores),
        folds=folds,
        classifier=spec.describe(),
        n_features=values.shape[1],
        y_true=y.copy(),
        scores=scores,
    )
    logger.info(
        "LOSO done: AUC=%.3f F1=%.3f kappa=%.3f (train %.2fs total)",
        result.auc, result.weighted_f1, result.kappa, result.total_train_time_s,
    )
    return result


# ---------------------------------------------------------------------------
# Random search
# ---------------------------------------------------------------------------

_DISTRIBUTIONS = {
    "randint": lambda lo, hi: stats.randint(int(lo), int(hi)),
    "uniform": lambda lo, hi: stats.uniform(float(lo), float(hi) - float(lo)),
    "loguniform": lambda lo, hi: stats.loguniform(float(lo), float(hi)),
}


def parse_search_space(cfg: Mapping[str, Any]) -> dict[str, Any]:
    """Turn the config ``search.space`` mapping into ParameterSampler input.

    Each entry is either a list of candidate values or a one-key mapping
    ``{randint|uniform|loguniform: [low, high]}``.

    Raises:
        ConfigError: On an empty space or an unknown distribution.
    """
    if not cfg:
        raise ConfigError("Search space is empty")
    space = {}
    for name, entry in cfg.items():
        if isinstance(entry, Mapping):
            if len(entry) != 1 or next(iter(entry)) not in _DISTRIBUTIONS:
                raise ConfigError(f"Search entry {name!r} must be one of {sorted(_DISTRIBUTIONS)}: {entry}")
            dist, bounds = next(iter(entry.items()))
            space[name] = _DISTRIBUTIONS[dist](*bounds)
        elif isinstance(entry, (list, tuple)) and entry:
            space[name] = list(entry)
        else:
            raise ConfigError(f"Search entry {name!r} must be a non-empty list or a distribution")
    return space


def _plain(value: Any) -> Any:
    return value.item() if isinstance(value, np.generic) else value


@dataclass
class SearchResult:
    """Outcome of a random hyperparameter search."""

    best_params: dict[str, Any]
    best_score: float
    candidates: list[dict[str, Any]]
    n_folds: int
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def random_search(
    space: Mapping[str, Any],
    fm: FeatureMatrix,
    spec: ClassifierSpec,
    n_candidates: int = 100,
    n_folds: int = 5,
    seed: int = 0,
) -> SearchResult:
    """Score sampled parameter sets by mean AUC over subject-grouped folds.

    A fold whose training or test rows hold a single class scores
    ``SEARCH_PENALTY_AUC`` and is recorded on the candidate. The first
    candidate with the highest score wins.

    Raises:
        ValueError: If ``n_candidates < 1``, ``n_folds < 2`` or fewer than two subjects exist.
    """
    if n_candidates < 1:
        raise ValueError(f"n_candidates must be >= 1, got {n_candidates}")
    if n_folds < 2:
        raise ValueError(f"n_folds must be >= 2, got {n_folds}")
    groups = fm.subject_ids
    n_groups = len(set(groups))
    if n_groups < 2:
        raise ValueError("random_search needs at least 2 subjects")
    if n_folds > n_groups:
        logger.warning("n_folds=%d exceeds %d subjects; using %d folds", n_folds, n_groups, n_groups)
        n_folds = n_groups

    values, y = fm.values, fm.labels
    splits = list(GroupKFold(n_splits=n_folds).split(values, y, groups))
    sampled = list(ParameterSampler(dict(space), n_iter=n_candidates, random_state=seed))
    logger.info("Random search: %d candidates × %d grouped folds", len(sampled), n_folds)

    candidates = []
    best_index, best_score = 0, -np.inf
    for c, raw in enumerate(sampled):
        params = {k: _plain(v) for k, v in raw.items()}
        candidate_spec = spec.with_params(params)
        fold_scores, degenerate = [], []
        for f, (train_idx, test_idx) in enumerate(splits):
            if np.unique(y[train_idx]).size < 2 or np.unique(y[test_idx]).size < 2:
                fold_scores.append(SEARCH_PENALTY_AUC)
                degenerate.append(f)
                continue
            model = candidate_spec.with_seed(derive_seed(seed, f)).fit(values[train_idx], y[train_idx])
            fold_scores.append(roc_auc(y[test_idx], positive_scores(model, values[test_idx])))
        score = float(np.mean(fold_scores))
        if degenerate:
            logger.warning("Candidate %d: degenerate folds %s scored %.1f", c, degenerate, SEARCH_PENALTY_AUC)
        candidates.append({"params": params, "score": score, "degenerate_folds": degenerate})
        logger.debug("Candidate %d %s → mean AUC %.4f", c, params, score)
        if score > best_score:
            best_index, best_score = c, score

    best = candidates[best_index]
    logger.info("Random search best: %s (mean AUC %.4f)", best["params"], best_score)
    return SearchResult(
        best_params=dict(best["params"]),
        best_score=float(best_score),
        candidates=candidates,
        n_folds=n_folds,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Importance analysis and category evaluation
# ---------------------------------------------------------------------------

@dataclass
class ImportanceSummary:
    """Top-K significant features and their spread over channels and categories."""

    top_features: list[tuple[str, float]]
    per_channel: dict[str, int]
    per_category: dict[str, int]
    train_time_s: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "top_features": [{"name": n, "importance": float(v)} for n, v in self.top_features],
            "per_channel": dict(self.per_channel),
            "per_category": dict(self.per_category),
            "train_time_s": round(self.train_time_s, 3),
        }


def importance_summary(forest: TrainedForest, top_k: int = 60) -> ImportanceSummary:
    """Count the ``top_k`` most important features per channel and category."""
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    imp = forest.importances
    order = np.argsort(-imp, kind="stable")[: min(top_k, imp.size)]
    top = [(forest.feature_names[i], float(imp[i])) for i in order]
    parsed = [parse_feature_name(name) for name, _ in top]
    per_channel = Counter(p.channel for p in parsed)
    per_category = Counter(p.category for p in parsed)
    return ImportanceSummary(
        top_features=top,
        per_channel=dict(per_channel.most_common()),
        per_category={c: per_category.get(c, 0) for c in CATEGORIES},
        train_time_s=forest.train_time_s,
    )


def category_groups() -> dict[str, tuple[str, ...]]:
    """Each category alone, then basic+entropy per domain."""
    groups = {c: (c,) for c in CATEGORIES}
    for domain in ("time", "frequency", "wavelet"):
        groups[domain] = (f"basic/{domain}", f"entropy/{domain}")
    return groups


def evaluate_categories(fm: FeatureMatrix, spec: ClassifierSpec) -> dict[str, EvalResult]:
    """LOSO evaluation restricted to each category group present in ``fm``."""
    results = {}
    for name, categories in category_groups().items():
        subset = fm.select_categories(categories)
        if subset.X.shape[1] == 0:
            logger.info("Category group %s has no columns; skipped", name)
            continue
        logger.info("Evaluating category group %s (%d features)", name, subset.X.shape[1])
        results[name] = loso_cv(subset, spec)
    return results
