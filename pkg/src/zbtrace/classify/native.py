"""Histogram-based multiclass gradient boosting in numpy.

Second-order softmax boosting with an L2 leaf penalty, depth-wise growth and
per-round Bernoulli row subsampling. Slow next to compiled backends, but has
no dependencies and produces the same ``GbdtModel``.
"""

from __future__ import annotations

import numpy as np

from .model import Tree, softmax

MAX_BINS = 256


def make_cuts(X: np.ndarray, max_bins: int = MAX_BINS) -> list[np.ndarray]:
    """Per-feature candidate thresholds (distinct values above the minimum)."""
    cuts = []
    for f in range(X.shape[1]):
        u = np.unique(X[:, f])[1:]
        if u.size > max_bins - 1:
            u = np.unique(np.quantile(u, np.linspace(0, 1, max_bins - 1), method="nearest"))
        cuts.append(u.astype(np.float64))
    return cuts


def bin_matrix(X: np.ndarray, cuts: list[np.ndarray]) -> np.ndarray:
    # bin b collects rows with cuts[b-1] <= x < cuts[b]
    return np.stack([np.searchsorted(c, X[:, f], side="right") for f, c in enumerate(cuts)], axis=1).astype(np.int32)


def _grow_tree(bins, cuts, g, h, rows, class_index, max_depth, reg_lambda, min_child_weight, eta):
    n_feat = bins.shape[1]
    B = MAX_BINS
    base = (np.arange(n_feat, dtype=np.int64) * B)[None, :] + bins[rows]

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            lst.append(v)
        return len(feature) - 1

    root = new_node()
    node_of = np.zeros(rows.size, dtype=np.int64)  # position in the current level's node list
    level = [root]
    gr, hr = g[rows], h[rows]
    for depth in range(max_depth + 1):
        n_nodes = len(level)
        G = np.bincount(node_of, weights=gr, minlength=n_nodes)
        H = np.bincount(node_of, weights=hr, minlength=n_nodes)
        if depth == max_depth:
            for j, nid in enumerate(level):
                value[nid] = -G[j] / (H[j] + reg_lambda) * eta
            break
        key = (node_of[:, None] * (n_feat * B) + base).ravel()
        size = n_nodes * n_feat * B
        hg = np.bincount(key, weights=np.repeat(gr, n_feat), minlength=size).reshape(n_nodes, n_feat, B)
        hh = np.bincount(key, weights=np.repeat(hr, n_feat), minlength=size).reshape(n_nodes, n_feat, B)
        GL = np.cumsum(hg, axis=2)
        HL = np.cumsum(hh, axis=2)
        GR = G[:, None, None] - GL
        HR = H[:, None, None] - HL
        gain = GL ** 2 / (HL + reg_lambda) + GR ** 2 / (HR + reg_lambda) - (G ** 2 / (H + reg_lambda))[:, None, None]
        gain[(HL < min_child_weight) | (HR < min_child_weight)] = -np.inf
        flat = gain.reshape(n_nodes, -1)
        best = np.argmax(flat, axis=1)
        best_gain = flat[np.arange(n_nodes), best]

        next_level = []
        child_of = np.full((n_nodes, 2), -1, dtype=np.int64)
        split_feat = np.zeros(n_nodes, dtype=np.int64)
        split_bin = np.zeros(n_nodes, dtype=np.int64)
        for j, nid in enumerate(level):
            f, b = divmod(int(best[j]), B)
            if not best_gain[j] > 1e-12 or b >= cuts[f].size:
                value[nid] = -G[j] / (H[j] + reg_lambda) * eta
                continue
            lnode, rnode = new_node(), new_node()
            feature[nid], threshold[nid] = f, float(cuts[f][b])
            left[nid], right[nid] = lnode, rnode
            child_of[j] = (len(next_level), len(next_level) + 1)
            next_level += [lnode, rnode]
            split_feat[j], split_bin[j] = f, b
        if not next_level:
            break
        # bins <= b go left, i.e. x < cuts[f][b]
        row_bins = bins[rows, split_feat[node_of]]
        goes_left = row_bins <= split_bin[node_of]
        new_pos = np.where(goes_left, child_of[node_of, 0], child_of[node_of, 1])
        keep = new_pos >= 0
        node_of, gr, hr, base, rows = new_pos[keep], gr[keep], hr[keep], base[keep], rows[keep]
        level = next_level

    return Tree(
        class_index=class_index,
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        value=np.asarray(value, dtype=np.float64),
    )


def fit_native(X: np.ndarray, y: np.ndarray, n_classes: int, *, n_estimators: int, max_depth: int,
               learning_rate: float, subsample: float, seed: int, reg_lambda: float = 1.0,
               min_child_weight: float = 1.0) -> tuple[np.ndarray, list[Tree]]:
    X = np.asarray(X, dtype=np.float32).astype(np.float64)
    n = X.shape[0]
    cuts = make_cuts(X)
    bins = bin_matrix(X, cuts)
    rng = np.random.default_rng(seed)
    prior = np.bincount(y, minlength=n_classes) / n
    base_margin = np.log(np.maximum(prior, 1e-12))
    base_margin -= base_margin.mean()
    margin = np.tile(base_margin, (n, 1))
    onehot = np.eye(n_classes)[y]
    trees = []
    all_rows = np.arange(n)
    for _ in range(n_estimators):
        p = softmax(margin)
        grad = p - onehot
        hess = np.maximum(2.0 * p * (1.0 - p), 1e-16)
        rows = all_rows[rng.random(n) < subsample] if subsample < 1.0 else all_rows
        if rows.size == 0:
            continue
        for k in range(n_classes):
            tree = _grow_tree(bins, cuts, grad[:, k], hess[:, k], rows, k, max_depth,
                              reg_lambda, min_child_weight, learning_rate)
            trees.append(tree)
            margin[:, k] += _apply(tree, X)
    return base_margin, trees


def _apply(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        internal = tree.left[node] >= 0
        if not internal.any():
            return tree.value[node]
        idx = np.flatnonzero(internal)
        nd = node[idx]
        go_left = X[idx, tree.feature[nd]] < tree.threshold[nd]
        node[idx] = np.where(go_left, tree.left[nd], tree.right[nd])
