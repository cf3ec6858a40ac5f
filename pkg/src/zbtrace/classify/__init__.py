"""Device type / device identity classification with boosted trees."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..errors import ClassifierError
from ..features import FEATURE_NAMES, FeatureVector, feature_matrix
from ..labeling import identity_of
from . import native, xgb
from .folds import stratified_kfold
from .metrics import EvalReport, classification_report, fold_statistics, report_from_confusion
from .model import GbdtModel, check_feature_order

log = logging.getLogger(__name__)

__all__ = [
    "Task", "TrainConfig", "GbdtModel", "EvalReport", "train", "evaluate", "cross_validate",
    "cross_topology_eval", "stratified_kfold", "classification_report", "labels_for_task",
    "report_from_confusion",
]


class Task(str, Enum):
    DEVICE_TYPE = "DeviceType"
    DEVICE_IDENTITY = "DeviceIdentity"


@dataclass
class TrainConfig:
    task: Task = Task.DEVICE_TYPE
    n_estimators: int = 300
    max_depth: int = 8
    learning_rate: float = 0.3
    subsample: float = 1.0
    seed: int = 0
    backend: str = "auto"

    def __post_init__(self):
        self.task = Task(self.task)
        if self.n_estimators <= 0:
            raise ClassifierError("n_estimators must be positive")
        if not 0.0 < self.subsample <= 1.0:
            raise ClassifierError("subsample must be in (0, 1]")
        if self.max_depth < 1:
            raise ClassifierError("max_depth must be >= 1")
        if self.backend not in ("auto", "native", "xgboost"):
            raise ClassifierError(f"unknown backend {self.backend!r}")

    @classmethod
    def for_task(cls, task: Task | str, **overrides) -> "TrainConfig":
        task = Task(task)
        if task is Task.DEVICE_TYPE:
            base = dict(max_depth=8, subsample=1.0)
        else:
            base = dict(max_depth=10, subsample=0.8)
        base.update(overrides)
        return cls(task=task, **base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.value
        return d


def labels_for_task(vectors: Sequence[FeatureVector], task: Task | str) -> np.ndarray:
    """Class label per window: category for device type, model-level label for identity."""
    task = Task(task)
    if task is Task.DEVICE_TYPE:
        return np.array([v.category for v in vectors], dtype=object)
    return np.array([identity_of(v.device_label) for v in vectors], dtype=object)


def _resolve_backend(name: str) -> str:
    if name == "auto":
        return "xgboost" if xgb.available() else "native"
    if name == "xgboost" and not xgb.available():
        raise ClassifierError("xgboost backend requested but xgboost is not installed")
    return name


def train(X: np.ndarray, labels: Sequence, config: TrainConfig,
          feature_order: Sequence[str] = FEATURE_NAMES) -> GbdtModel:
    check_feature_order(FEATURE_NAMES, feature_order)
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels).astype(str)
    if X.shape[0] != labels.size:
        raise ClassifierError("feature rows and labels differ in length")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ClassifierError("training needs at least two classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[c] for c in labels], dtype=np.int64)
    backend = _resolve_backend(config.backend)
    fit = xgb.fit_xgboost if backend == "xgboost" else native.fit_native
    base_margin, trees = fit(X, y, len(classes), n_estimators=config.n_estimators, max_depth=config.max_depth,
                             learning_rate=config.learning_rate, subsample=config.subsample, seed=config.seed)
    return GbdtModel(classes, list(feature_order), base_margin, trees, backend=backend, params=config.to_dict())


def evaluate(model: GbdtModel, X: np.ndarray, labels: Sequence) -> EvalReport:
    labels = np.asarray(labels).astype(str)
    if labels.size == 0:
        raise ClassifierError("cannot evaluate an empty test set")
    return classification_report(labels, model.predict(X), known=model.classes)


def cross_validate(X: np.ndarray, labels: Sequence, config: TrainConfig, k: int = 5) -> EvalReport:
    """Stratified k-fold evaluation.

    Headline metrics come from the pooled out-of-fold predictions (so they agree
    with the confusion matrix); ``fold_stats`` holds per-fold mean and std.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels).astype(str)
    folds = stratified_kfold(labels, k, config.seed)
    retained = np.concatenate(folds)
    pred = np.empty(labels.size, dtype=object)
    reports = []
    for i, test in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model = train(X[train_idx], labels[train_idx], config)
        pred[test] = model.predict(X[test])
        reports.append(classification_report(labels[test], pred[test], known=model.classes))
    report = classification_report(labels[retained], pred[retained].astype(str))
    report.fold_stats = fold_statistics(reports)
    report.notes["k"] = k
    report.notes["dropped_classes"] = sorted(set(labels.tolist()) - set(labels[retained].tolist()))
    return report


def cross_topology_eval(X_train: np.ndarray, y_train: Sequence, X_test: np.ndarray, y_test: Sequence,
                        config: TrainConfig) -> EvalReport:
    """Train on one topology's full set, test once on another's.

    Both sides are restricted to the labels they share.
    """
    y_train = np.asarray(y_train).astype(str)
    y_test = np.asarray(y_test).astype(str)
    shared = sorted(set(y_train.tolist()) & set(y_test.tolist()))
    if not shared:
        raise ClassifierError("train and test label spaces do not intersect")
    tr = np.isin(y_train, shared)
    te = np.isin(y_test, shared)
    model = train(np.asarray(X_train)[tr], y_train[tr], config)
    report = evaluate(model, np.asarray(X_test)[te], y_test[te])
    report.notes.update({
        "shared_labels": shared,
        "train_only_labels": sorted(set(y_train.tolist()) - set(shared)),
        "test_only_labels": sorted(set(y_test.tolist()) - set(shared)),
        "dropped_train_rows": int((~tr).sum()),
        "dropped_test_rows": int((~te).sum()),
    })
    return report


def dataset_arrays(vectors: Sequence[FeatureVector], task: Task | str) -> tuple[np.ndarray, np.ndarray]:
    return feature_matrix(vectors), labels_for_task(vectors, task)
