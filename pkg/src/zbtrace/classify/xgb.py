"""Train with XGBoost and convert the booster into a ``GbdtModel``."""

from __future__ import annotations

import json

import numpy as np

from .model import Tree


def available() -> bool:
    try:
        import xgboost  # noqa: F401
    except ImportError:
        return False
    return True


def _parse_base_score(raw: str, n_classes: int) -> np.ndarray:
    raw = raw.strip()
    if raw.startswith("["):
        vals = [float(v) for v in raw.strip("[]").split(",")]
    else:
        vals = [float(raw)]
    if len(vals) == 1:
        vals = vals * n_classes
    return np.asarray(vals, dtype=np.float64)


def fit_xgboost(X: np.ndarray, y: np.ndarray, n_classes: int, *, n_estimators: int, max_depth: int,
                learning_rate: float, subsample: float, seed: int, n_jobs: int = 0) -> tuple[np.ndarray, list[Tree]]:
    import xgboost as xgb

    params = {
        "objective": "multi:softprob",
        "num_class": n_classes,
        "max_depth": max_depth,
        "eta": learning_rate,
        "subsample": subsample,
        "tree_method": "hist",
        "seed": seed,
        "verbosity": 0,
    }
    if n_jobs:
        params["nthread"] = n_jobs
    dtrain = xgb.DMatrix(np.asarray(X, dtype=np.float32), label=y)
    booster = xgb.train(params, dtrain, num_boost_round=n_estimators)

    config = json.loads(booster.save_config())
    base_margin = _parse_base_score(config["learner"]["learner_model_param"]["base_score"], n_classes)
    raw = json.loads(booster.save_raw("json").decode())
    model = raw["learner"]["gradient_booster"]["model"]
    trees = []
    for info, t in zip(model["tree_info"], model["trees"]):
        left = np.asarray(t["left_children"], dtype=np.int64)
        right = np.asarray(t["right_children"], dtype=np.int64)
        # stored as decimal text; round back to the float32 the booster compares against
        cond = np.asarray(t["split_conditions"], dtype=np.float32).astype(np.float64)
        is_leaf = left < 0
        trees.append(Tree(
            class_index=int(info),
            left=left,
            right=right,
            feature=np.where(is_leaf, -1, np.asarray(t["split_indices"], dtype=np.int64)),
            threshold=np.where(is_leaf, 0.0, cond),
            value=np.where(is_leaf, cond, 0.0),
        ))
    return base_margin, trees
