from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from ..errors import ClassifierError


def stratified_kfold(labels: Sequence, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Split indices into ``k`` disjoint test folds, stratified by label.

    Each class is shuffled and dealt round-robin, so its count per fold differs
    by at most one. The starting fold rotates between classes to keep total fold
    sizes even. Classes with fewer than ``k`` members are dropped with a warning.
    """
    if k < 2:
        raise ClassifierError(f"k must be >= 2, got {k}")
    labels = np.asarray(labels).astype(str)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            warnings.warn(f"class {cls!r} has {idx.size} samples (< k={k}); dropped", stacklevel=2)
            continue
        idx = rng.permutation(idx)
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset = (offset + idx.size) % k
    return [np.array(sorted(f), dtype=np.int64) for f in folds]
