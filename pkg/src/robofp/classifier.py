"""Gradient-boosted decision trees with a softmax objective.

Exact greedy splitting on presorted columns, one tree per class per round.
Kept in-house so that training is bit-reproducible across platforms, models
serialize to plain JSON, and split tie-breaking is pinned: the candidate
with the lowest feature index wins, then the lowest threshold.

Per-round math: with current class scores F and probabilities
p = softmax(F), gradient g = p - y and hessian h = p (1 - p) per class;
each leaf takes weight -G / (H + lambda) and scores move by the learning
rate times that weight.  Split gain is the usual
0.5 (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, SchemaMismatch, SingleClass, TooFewSamples

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GBDTParams:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1:
            raise InvalidConfig("n_rounds and max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise InvalidConfig("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0 or self.min_child_weight < 0:
            raise InvalidConfig("regularizers must be non-negative")


@dataclass
class _Tree:
    """Flat node arrays; node 0 is the root, leaves carry the weight."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, weight: float) -> int:
        return self._add(-1, 0.0, -1, -1, weight)

    def add_split(self, f: int, t: float) -> int:
        return self._add(f, t, -1, -1, 0.0)

    def _add(self, f, t, l, r, v) -> int:
        self.feature.append(f)
        self.threshold.append(t)
        self.left.append(l)
        self.right.append(r)
        self.value.append(v)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        feature = np.array(self.feature)
        threshold = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        value = np.array(self.value)
        live = feature[node] >= 0
        while live.any():
            idx = node[live]
            goes_left = X[live, feature[idx]] <= threshold[idx]
            node[live] = np.where(goes_left, left[idx], right[idx])
            live = feature[node] >= 0
        return value[node]

    def to_doc(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "_Tree":
        return cls(
            feature=[int(v) for v in doc["feature"]],
            threshold=[float(v) for v in doc["threshold"]],
            left=[int(v) for v in doc["left"]],
            right=[int(v) for v in doc["right"]],
            value=[float(v) for v in doc["value"]],
        )


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GBDTClassifier:
    def __init__(self, params: GBDTParams | None = None, feature_names: list[str] | None = None):
        self.params = params or GBDTParams()
        self.feature_names = list(feature_names) if feature_names else None
        self.classes_: list[str] = []
        self.trees_: list[list[_Tree]] = []  # [round][class]
        self._gain: np.ndarray | None = None

    # -- training ---------------------------------------------------------

    def fit(self, X: np.ndarray, y: list[str]) -> "GBDTClassifier":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(y) != X.shape[0]:
            raise SchemaMismatch("X must be 2-D with one label per row")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise SchemaMismatch(
                f"{X.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        self.classes_ = sorted(set(y))
        if len(self.classes_) < 2:
            raise SingleClass("training data contains a single class")
        class_index = {c: k for k, c in enumerate(self.classes_)}
        n, n_features = X.shape
        K = len(self.classes_)
        Y = np.zeros((n, K))
        Y[np.arange(n), [class_index[v] for v in y]] = 1.0

        # presort once; node membership is filtered through these orders
        order = np.argsort(X, axis=0, kind="stable")

        self._gain = np.zeros(n_features)
        self.trees_ = []
        scores = np.zeros((n, K))
        for _ in range(self.params.n_rounds):
            P = _softmax(scores)
            G = P - Y
            H = P * (1.0 - P)
            round_trees = []
            for k in range(K):
                tree = _Tree()
                self._grow(tree, X, order, G[:, k], H[:, k])
                round_trees.append(tree)
                scores[:, k] += self.params.learning_rate * tree.predict(X)
            self.trees_.append(round_trees)
        return self

    def _grow(self, tree: _Tree, X, order, g, h) -> int:
        mask = np.ones(len(g), dtype=bool)
        return self._grow_node(tree, X, order, g, h, mask, depth=0)

    def _grow_node(self, tree, X, order, g, h, mask, depth) -> int:
        lam = self.params.reg_lambda
        g_sum = g[mask].sum()
        h_sum = h[mask].sum()
        denom = h_sum + lam
        weight = -g_sum / denom if denom > 0 else 0.0
        if depth >= self.params.max_depth or mask.sum() < 2:
            return tree.add_leaf(weight)

        found = self._best_split(X, order, g, h, mask, g_sum, h_sum)
        if found is None:
            return tree.add_leaf(weight)
        f, threshold, gain = found
        self._gain[f] += gain

        node = tree.add_split(f, threshold)
        left_mask = mask & (X[:, f] <= threshold)
        tree.left[node] = self._grow_node(tree, X, order, g, h, left_mask, depth + 1)
        tree.right[node] = self._grow_node(tree, X, order, g, h, mask & ~left_mask, depth + 1)
        return node

    def _best_split(self, X, order, g, h, mask, g_sum, h_sum):
        lam = self.params.reg_lambda
        mcw = self.params.min_child_weight

        # rows of the node in per-feature sorted order: (n_node, n_features)
        keep = mask[order]
        n_node = int(mask.sum())
        rows = order.T[keep.T].reshape(X.shape[1], n_node).T

        gs = np.cumsum(g[rows], axis=0)[:-1]
        hs = np.cumsum(h[rows], axis=0)[:-1]
        xs = np.take_along_axis(X, rows, axis=0)

        valid = xs[1:] > xs[:-1]  # no split between equal values
        valid &= (hs >= mcw) & (h_sum - hs >= mcw)
        if not valid.any():
            return None

        parent = g_sum * g_sum / (h_sum + lam)
        gain = np.where(
            valid,
            gs * gs / (hs + lam) + (g_sum - gs) ** 2 / (h_sum - hs + lam) - parent,
            -np.inf,
        )
        # first maximum in (position, feature) scan order breaks ties toward
        # the lowest feature index, then the lowest threshold
        flat = np.argmax(gain.T)
        f, pos = divmod(int(flat), gain.shape[0])
        best = gain[pos, f]
        if best <= _MIN_GAIN:
            return None
        threshold = 0.5 * (xs[pos, f] + xs[pos + 1, f])
        return f, float(threshold), float(0.5 * best)

    # -- inference --------------------------------------------------------

    def _check_fitted(self):
        if not self.trees_:
            raise InvalidConfig("model is not fitted")

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise SchemaMismatch("X must be 2-D")
        if self.feature_names is not None and X.shape[1] != len(self.feature_names):
            raise SchemaMismatch(
                f"{X.shape[1]} columns but model expects {len(self.feature_names)}"
            )
        scores = np.zeros((len(X), len(self.classes_)))
        for round_trees in self.trees_:
            for k, tree in enumerate(round_trees):
                scores[:, k] += self.params.learning_rate * tree.predict(X)
        return scores

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.decision_scores(X))

    def predict(self, X: np.ndarray) -> list[str]:
        proba = self.predict_proba(X)
        return [self.classes_[i] for i in np.argmax(proba, axis=1)]

    def feature_importance(self) -> dict[str, float]:
        """Total split gain per feature; zero for never-used features."""
        self._check_fitted()
        names = self.feature_names or [f"f{i}" for i in range(len(self._gain))]
        return {name: float(v) for name, v in zip(names, self._gain)}

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        self._check_fitted()
        return json.dumps(
            {
                "model": "gbdt-softmax",
                "version": 1,
                "params": {
                    "n_rounds": self.params.n_rounds,
                    "max_depth": self.params.max_depth,
                    "learning_rate": self.params.learning_rate,
                    "reg_lambda": self.params.reg_lambda,
                    "min_child_weight": self.params.min_child_weight,
                },
                "classes": self.classes_,
                "feature_names": self.feature_names,
                "gain": [float(v) for v in self._gain],
                "trees": [[t.to_doc() for t in row] for row in self.trees_],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GBDTClassifier":
        try:
            doc = json.loads(text)
            if doc.get("model") != "gbdt-softmax":
                raise InvalidConfig("not a gbdt-softmax model document")
            model = cls(GBDTParams(**doc["params"]), doc.get("feature_names"))
            model.classes_ = list(doc["classes"])
            model.trees_ = [[_Tree.from_doc(d) for d in row] for row in doc["trees"]]
            model._gain = np.array(doc["gain"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidConfig(f"bad model document: {e}") from e
        return model


# ---------------------------------------------------------------------------
# stratified cross-validation


@dataclass
class CVReport:
    classes: list[str]
    fold_accuracies: list[float]
    accuracy: float
    confusion: list[list[int]]  # confusion[true][predicted]
    precision: dict[str, float]
    recall: dict[str, float]

    def to_doc(self) -> dict:
        return {
            "classes": self.classes,
            "fold_accuracies": self.fold_accuracies,
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "precision": self.precision,
            "recall": self.recall,
        }


def stratified_folds(y: list[str], n_folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle within class, deal round-robin; every class lands in every fold."""
    classes = sorted(set(y))
    if len(classes) < 2:
        raise SingleClass("need at least two classes")
    y_arr = np.array(y)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for c in classes:
        idx = np.flatnonzero(y_arr == c)
        if len(idx) < n_folds:
            raise TooFewSamples(c, len(idx), n_folds)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[j % n_folds].append(int(i))
    return [np.array(sorted(f)) for f in folds]


def cross_validate(
    X: np.ndarray,
    y: list[str],
    params: GBDTParams | None = None,
    n_folds: int = 10,
    seed: int = 0,
    feature_names: list[str] | None = None,
) -> CVReport:
    X = np.asarray(X, dtype=np.float64)
    folds = stratified_folds(y, n_folds, seed)
    classes = sorted(set(y))
    class_index = {c: k for k, c in enumerate(classes)}
    K = len(classes)
    confusion = np.zeros((K, K), dtype=np.int64)
    fold_accuracies = []
    y_arr = np.array(y)

    for heldout in folds:
        train = np.setdiff1d(np.arange(len(y)), heldout)
        model = GBDTClassifier(params, feature_names)
        model.fit(X[train], list(y_arr[train]))
        pred = model.predict(X[heldout])
        truth = y_arr[heldout]
        fold_accuracies.append(float(np.mean(pred == truth)))
        for t, p in zip(truth, pred):
            confusion[class_index[t], class_index[p]] += 1

    total = confusion.sum()
    accuracy = float(confusion.trace() / total) if total else 0.0
    precision = {}
    recall = {}
    for c, k in class_index.items():
        col = confusion[:, k].sum()
        row = confusion[k, :].sum()
        precision[c] = float(confusion[k, k] / col) if col else 0.0
        recall[c] = float(confusion[k, k] / row) if row else 0.0
    return CVReport(
        classes=classes,
        fold_accuracies=fold_accuracies,
        accuracy=accuracy,
        confusion=confusion.tolist(),
        precision=precision,
        recall=recall,
    )
