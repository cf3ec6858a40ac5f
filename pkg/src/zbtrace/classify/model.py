"""Backend-neutral boosted tree ensemble with softmax output."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ClassifierError

FORMAT = "zbtrace-gbdt"


@dataclass
class Tree:
    """Array-encoded binary tree; rows go left when ``x[feature] < threshold``.

    Leaves have ``left == right == -1`` and carry their output in ``value``.
    """

    class_index: int
    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray

    def depth(self) -> int:
        depth = np.zeros(len(self.left), dtype=np.int64)
        for i in range(len(self.left)):
            if self.left[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {
            "class": int(self.class_index),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            class_index=int(d["class"]),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def softmax(margin: np.ndarray) -> np.ndarray:
    z = margin - margin.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class GbdtModel:
    classes: list[str]
    feature_order: list[str]
    base_margin: np.ndarray
    trees: list[Tree]
    backend: str = "native"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self._packed = None

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _pack(self):
        if self._packed is None:
            offsets = np.cumsum([0] + [len(t.left) for t in self.trees])
            left = np.concatenate([np.where(t.left >= 0, t.left + o, np.arange(len(t.left)) + o)
                                   for t, o in zip(self.trees, offsets)])
            right = np.concatenate([np.where(t.right >= 0, t.right + o, np.arange(len(t.right)) + o)
                                    for t, o in zip(self.trees, offsets)])
            feature = np.concatenate([np.maximum(t.feature, 0) for t in self.trees])
            threshold = np.concatenate([t.threshold for t in self.trees])
            value = np.concatenate([t.value for t in self.trees])
            depth = max((t.depth() for t in self.trees), default=0)
            onehot = np.zeros((len(self.trees), self.n_classes))
            onehot[np.arange(len(self.trees)), [t.class_index for t in self.trees]] = 1.0
            self._packed = (offsets[:-1], left, right, feature, threshold, value, depth, onehot)
        return self._packed

    def predict_margin(self, X: np.ndarray, chunk: int = 1024) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_order):
            raise ClassifierError(f"expected {len(self.feature_order)} features, got shape {X.shape}")
        # split decisions are made at single precision, as histogram backends do
        X = X.astype(np.float32).astype(np.float64)
        out = np.tile(self.base_margin, (X.shape[0], 1))
        if not self.trees:
            return out
        roots, left, right, feature, threshold, value, depth, onehot = self._pack()
        for s in range(0, X.shape[0], chunk):
            xb = X[s:s + chunk]
            rows = np.arange(xb.shape[0])[:, None]
            node = np.broadcast_to(roots, (xb.shape[0], roots.size)).copy()
            for _ in range(depth):
                go_left = xb[rows, feature[node]] < threshold[node]
                node = np.where(go_left, left[node], right[node])
            out[s:s + chunk] += value[node] @ onehot
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.predict_margin(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.argmax(self.predict_margin(X), axis=1)
        return np.asarray(self.classes, dtype=object)[idx]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": 1,
            "backend": self.backend,
            "params": self.params,
            "classes": list(self.classes),
            "feature_order": list(self.feature_order),
            "base_margin": [float(b) for b in self.base_margin],
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self, fp) -> None:
        json.dump(self.to_dict(), fp, sort_keys=True)
        fp.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        if d.get("format") != FORMAT:
            raise ClassifierError("not a serialized boosted-tree model")
        return cls(
            classes=list(d["classes"]),
            feature_order=list(d["feature_order"]),
            base_margin=np.asarray(d["base_margin"], dtype=np.float64),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            backend=d.get("backend", "native"),
            params=d.get("params", {}),
        )

    @classmethod
    def from_json(cls, fp) -> "GbdtModel":
        return cls.from_dict(json.load(fp))


def check_feature_order(expected: Sequence[str], given: Sequence[str]) -> None:
    if list(expected) != list(given):
        raise ClassifierError("feature order does not match the model's feature contract")
