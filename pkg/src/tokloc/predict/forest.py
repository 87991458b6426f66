"""Random-forest scorer built on numpy: bagged Gini trees, sqrt-d features.

Defaults: 100 trees, depth ≤ 12, Gini splits, sqrt(d) feature subsampling
per split. Candidate thresholds are per-feature quantile midpoints, so split
search is vectorized across (feature, threshold) pairs at every node. Leaf
scores are class-1 fractions; the ensemble score is their mean.
"""

from __future__ import annotations

import numpy as np

_N_THRESHOLDS = 32
_MIN_SPLIT = 2


class _TreeBuilder:
    def __init__(self, max_depth: int, n_sub_features: int, rng: np.random.Generator):
        self.max_depth = max_depth
        self.n_sub = n_sub_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, X: np.ndarray, y: np.ndarray) -> int:
        node = self._new_node()
        self.value[node] = float(y.mean()) if y.size else 0.0
        stack = [(node, X, y, 0)]
        while stack:
            node, Xn, yn, depth = stack.pop()
            n = yn.size
            pos = int(yn.sum())
            if depth >= self.max_depth or n < _MIN_SPLIT or pos == 0 or pos == n:
                continue
            split = self._best_split(Xn, yn)
            if split is None:
                continue
            feat, thr = split
            mask = Xn[:, feat] <= thr
            if not mask.any() or mask.all():
                continue
            self.feature[node] = feat
            self.threshold[node] = thr
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            self.value[left] = float(yn[mask].mean())
            self.value[right] = float(yn[~mask].mean())
            stack.append((left, Xn[mask], yn[mask], depth + 1))
            stack.append((right, Xn[~mask], yn[~mask], depth + 1))
        return len(self.feature)

    def _best_split(self, X: np.ndarray, y: np.ndarray):
        n, d = X.shape
        feats = self.rng.choice(d, size=min(self.n_sub, d), replace=False)
        feats.sort()
        Xs = X[:, feats]
        qs = np.linspace(0.02, 0.98, _N_THRESHOLDS)
        thresholds = np.quantile(Xs, qs, axis=0)  # (q, m)
        mask = Xs[:, None, :] <= thresholds[None, :, :]  # (n, q, m)
        ypos = (y == 1)[:, None, None]
        left_n = mask.sum(axis=0).astype(np.float64)  # (q, m)
        left_pos = (mask & ypos).sum(axis=0).astype(np.float64)
        total_pos = float((y == 1).sum())
        right_n = n - left_n
        right_pos = total_pos - left_pos
        valid = (left_n > 0) & (right_n > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            pl = left_pos / left_n
            pr = right_pos / right_n
            gini_left = 2 * pl * (1 - pl)
            gini_right = 2 * pr * (1 - pr)
            weighted = (left_n * gini_left + right_n * gini_right) / n
        p = total_pos / n
        parent = 2 * p * (1 - p)
        gain = np.where(valid, parent - weighted, -np.inf)
        best = np.unravel_index(int(np.argmax(gain)), gain.shape)
        if not np.isfinite(gain[best]) or gain[best] <= 1e-12:
            return None
        qi, mi = best
        return int(feats[mi]), float(thresholds[qi, mi])


class TreeEnsembleScorer:
    """Bagged forest of Gini trees; score_rows returns P(class 1)."""

    def __init__(self, n_trees: int = 100, max_depth: int = 12, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.seed = seed
        self.trees: list[dict[str, np.ndarray]] = []
        self.n_features = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "TreeEnsembleScorer":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        n, d = X.shape
        self.n_features = d
        n_sub = max(1, int(np.sqrt(d)))
        root = np.random.SeedSequence(self.seed)
        self.trees = []
        for seq in root.spawn(self.n_trees):
            rng = np.random.default_rng(seq)
            sample = rng.integers(0, n, size=n)
            builder = _TreeBuilder(self.max_depth, n_sub, rng)
            builder.build(X[sample], y[sample])
            self.trees.append(
                {
                    "feature": np.asarray(builder.feature, dtype=np.int32),
                    "threshold": np.asarray(builder.threshold, dtype=np.float64),
                    "left": np.asarray(builder.left, dtype=np.int32),
                    "right": np.asarray(builder.right, dtype=np.int32),
                    "value": np.asarray(builder.value, dtype=np.float64),
                }
            )
        return self

    def score_rows(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            node = np.zeros(X.shape[0], dtype=np.int32)
            feature = tree["feature"]
            while True:
                active = feature[node] >= 0
                if not active.any():
                    break
                rows = np.nonzero(active)[0]
                cur = node[rows]
                go_left = X[rows, feature[cur]] <= tree["threshold"][cur]
                node[rows] = np.where(go_left, tree["left"][cur], tree["right"][cur])
            total += tree["value"][node]
        return total / max(1, len(self.trees))

    def to_arrays(self):
        meta = {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "n_features": self.n_features,
            "tree_sizes": [int(t["feature"].size) for t in self.trees],
        }
        arrays = {}
        for name in ("feature", "threshold", "left", "right", "value"):
            arrays[f"trees/{name}"] = (
                np.concatenate([t[name] for t in self.trees])
                if self.trees
                else np.zeros(0)
            )
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        scorer = cls(n_trees=meta["n_trees"], max_depth=meta["max_depth"], seed=meta["seed"])
        scorer.n_features = meta["n_features"]
        sizes = meta["tree_sizes"]
        offsets = np.cumsum([0] + sizes)
        scorer.trees = []
        for i in range(len(sizes)):
            lo, hi = offsets[i], offsets[i + 1]
            scorer.trees.append(
                {name: arrays[f"trees/{name}"][lo:hi] for name in
                 ("feature", "threshold", "left", "right", "value")}
            )
        return scorer
