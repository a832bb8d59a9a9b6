"""A small CART/random-forest implementation for the label-powerset route.

Axis-aligned Gini splits, unbounded depth, min-leaf 1, bootstrap
sampling, and sqrt(d) feature subsampling per node.  Trees are stored as
flat arrays so a trained forest serializes into plain numpy buffers and
rebuilds bit-identically.  All randomness flows from one seed through
``numpy.random.SeedSequence``; training twice with the same seed gives
the same forest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class Tree:
    """Flat-array decision tree: node i splits on ``feature[i]`` at
    ``threshold[i]`` (x <= t goes left), or is a leaf if feature is -1."""

    feature: np.ndarray      # int32, -1 for leaves
    threshold: np.ndarray    # float64
    left: np.ndarray         # int32 child index
    right: np.ndarray        # int32 child index
    counts: np.ndarray       # (n_nodes, n_classes) float64 training counts

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def leaf_index(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] != LEAF:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return node

    def predict_class(self, x: np.ndarray) -> int:
        return int(np.argmax(self.counts[self.leaf_index(x)]))

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaf_index(x)]
        return c / c.sum()


class _TreeBuilder:
    def __init__(self, X, y, n_classes, max_features, rng):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.max_features = max_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[np.ndarray] = []

    def build(self, indices: np.ndarray) -> None:
        # pre-order DFS with an explicit stack; depth-unbounded trees on
        # adversarial data would blow the recursion limit otherwise
        stack: list[tuple[np.ndarray, int, bool]] = [(indices, -1, False)]
        while stack:
            idx, parent, is_left = stack.pop()
            node = len(self.feature)
            self.feature.append(LEAF)
            self.threshold.append(0.0)
            self.left.append(LEAF)
            self.right.append(LEAF)
            counts = np.bincount(self.y[idx], minlength=self.n_classes).astype(np.float64)
            self.counts.append(counts)
            if parent >= 0:
                if is_left:
                    self.left[parent] = node
                else:
                    self.right[parent] = node
            if np.count_nonzero(counts) <= 1:
                continue
            split = self._best_split(idx)
            if split is None:
                continue
            feat, thr, left_mask = split
            self.feature[node] = feat
            self.threshold[node] = thr
            stack.append((idx[~left_mask], node, False))
            stack.append((idx[left_mask], node, True))

    def _best_split(self, indices):
        """Best Gini split over up to ``max_features`` non-constant
        features, examined in a random order.  Constant features do not
        consume the budget, so a split is found whenever one exists."""
        n = indices.size
        y = self.y[indices]
        best = None  # (score, feat, thr, left_mask)
        examined = 0
        for feat in self.rng.permutation(self.X.shape[1]):
            v = self.X[indices, feat]
            order = np.argsort(v, kind="stable")
            sv = v[order]
            if sv[0] == sv[-1]:
                continue
            examined += 1
            sy = y[order]
            onehot = np.zeros((n, self.n_classes))
            onehot[np.arange(n), sy] = 1.0
            cum = np.cumsum(onehot, axis=0)
            boundaries = np.nonzero(sv[1:] > sv[:-1])[0] + 1  # split before index b
            nl = boundaries.astype(np.float64)
            nr = n - nl
            left_counts = cum[boundaries - 1]
            right_counts = cum[-1] - left_counts
            gini_l = 1.0 - ((left_counts / nl[:, None]) ** 2).sum(axis=1)
            gini_r = 1.0 - ((right_counts / nr[:, None]) ** 2).sum(axis=1)
            score = (nl * gini_l + nr * gini_r) / n
            b = int(np.argmin(score))
            if best is None or score[b] < best[0]:
                thr = (sv[boundaries[b] - 1] + sv[boundaries[b]]) / 2.0
                best = (float(score[b]), int(feat), float(thr), None)
            if examined >= self.max_features:
                break
        if best is None:
            return None
        _, feat, thr, _ = best
        return feat, thr, self.X[indices, feat] <= thr

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            counts=np.asarray(self.counts, dtype=np.float64),
        )


def _sqrt_features(d: int) -> int:
    return max(1, int(np.sqrt(d)))


class RandomForest:
    """Bagged Gini trees with hard majority voting."""

    def __init__(self, n_trees: int = 100, seed: int = 0, max_features: int | None = None):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = int(n_trees)
        self.seed = int(seed)
        self.max_features = max_features
        self.trees: list[Tree] = []
        self.n_classes = 0
        self.n_features = 0

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a non-empty 2-D array")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be one integer per row")
        self.n_features = X.shape[1]
        self.n_classes = int(y.max()) + 1
        m = self.max_features or _sqrt_features(self.n_features)
        self.trees = []
        for seq in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(seq)
            sample = rng.integers(0, X.shape[0], size=X.shape[0])
            builder = _TreeBuilder(X, y, self.n_classes, m, rng)
            builder.build(sample)
            self.trees.append(builder.finish())
        return self

    def vote_shares(self, X) -> np.ndarray:
        """Fraction of trees voting for each class, per row."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        shares = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            for i, row in enumerate(X):
                shares[i, tree.predict_class(row)] += 1.0
        return shares / self.n_trees

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.vote_shares(X), axis=1)
