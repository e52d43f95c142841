"""Random-forest regression with an absolute-error split criterion.

Trees are grown greedily. Each node draws a random feature subset and picks the
split that minimizes the children's summed absolute deviation about their
per-component medians. Leaves store component-wise medians and a forest
averages its trees.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySpace,
    EmptyTraining,
    ModelVocabMismatch,
    NonFiniteInput,
)

FORMAT_VERSION = 1
_CHUNK_CELLS = 1 << 20  # candidate x row cells evaluated per batch


@dataclass(frozen=True)
class ForestHyperparams:
    """Forest settings.

    ``min_samples_split`` and ``min_samples_leaf`` are absolute counts when
    given as ``int`` and fractions of the training-set size (ceil-rounded)
    when given as ``float``. ``max_depth=None`` grows until another stop
    rule fires. ``bootstrap=False`` trains every tree on the full set.
    """

    n_estimators: int = 100
    max_depth: int | None = 20
    min_samples_split: int | float = 2
    min_samples_leaf: int | float = 1
    max_features: float = 1.0
    bootstrap: bool = True

    def __post_init__(self):
        if not isinstance(self.n_estimators, (int, np.integer)) or self.n_estimators < 1:
            raise ValueError("n_estimators must be a positive integer")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        for name in ("min_samples_split", "min_samples_leaf"):
            v = getattr(self, name)
            if isinstance(v, (bool, np.bool_)):
                raise ValueError(f"{name} must be numeric")
            if isinstance(v, (int, np.integer)):
                if v < 1:
                    raise ValueError(f"{name} must be >= 1 as a count")
            elif not 0 < v <= 1:
                raise ValueError(f"{name} as a fraction must lie in (0, 1]")
        if not 0 < self.max_features <= 1:
            raise ValueError("max_features must lie in (0, 1]")
        split, leaf = self.min_samples_split, self.min_samples_leaf
        if isinstance(split, float) and isinstance(leaf, float) and leaf > split:
            raise ValueError("min_samples_leaf must not exceed min_samples_split")

    def resolve(self, n: int) -> tuple[int, int]:
        """(min_split, min_leaf) as counts for a training set of size n."""

        def count(v):
            return int(v) if isinstance(v, (int, np.integer)) else max(1, math.ceil(v * n))

        return max(2, count(self.min_samples_split)), count(self.min_samples_leaf)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_estimators"] = int(d["n_estimators"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForestHyperparams":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


# hyperparameters reported for the five regressors
PUBLISHED_STIFFNESS_HP = ForestHyperparams(
    n_estimators=100, max_depth=20, min_samples_split=0.0420, min_samples_leaf=0.0094, max_features=0.6911
)
PUBLISHED_RATIO_HP = ForestHyperparams(
    n_estimators=200, max_depth=30, min_samples_split=0.0703, min_samples_leaf=0.0016, max_features=0.9595
)
PUBLISHED_HYPERPARAMS = {
    "bending": PUBLISHED_STIFFNESS_HP,
    "shear": PUBLISHED_STIFFNESS_HP,
    "stretch": PUBLISHED_STIFFNESS_HP,
    "buckling_stiffness": PUBLISHED_STIFFNESS_HP,
    "buckling_ratio": PUBLISHED_RATIO_HP,
}


@dataclass
class RegressionTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float).reshape(len(d["feature"]), -1),
        )


def _abs_dev(Y: np.ndarray) -> np.ndarray:
    """Per-component sum of |y - median|."""
    return np.abs(Y - np.median(Y, axis=0)).sum(axis=0)


def _subset_sums(mask, cnt, h, vals):
    # sum of the h smallest masked values; vals sorted ascending
    return ((mask & (cnt <= h[:, None])).astype(float)) @ vals


def _split_costs(P, K, Y, yorder, weights):
    """Weighted children cost for every candidate.

    P[j] holds each row's rank along candidate j's feature; rows with rank
    below K[j] go left.
    """
    n = Y.shape[0]
    total = np.zeros(len(K))
    hl, nr = K // 2, n - K
    hr = nr // 2
    for c in range(Y.shape[1]):
        if weights[c] == 0:
            continue
        vals = Y[yorder[c], c]
        mask = P[:, yorder[c]] < K[:, None]
        cnt = np.cumsum(mask, axis=1)
        s_left = mask.astype(float) @ vals
        left = s_left - _subset_sums(mask, cnt, K - hl, vals) - _subset_sums(mask, cnt, hl, vals)
        rmask = ~mask
        rcnt = np.arange(1, n + 1)[None, :] - cnt
        s_right = vals.sum() - s_left
        right = s_right - _subset_sums(rmask, rcnt, nr - hr, vals) - _subset_sums(rmask, rcnt, hr, vals)
        total += weights[c] * (left + right)
    return total


def _best_split(X, Y, feats, min_leaf, weights):
    n = X.shape[0]
    Xs = X[:, feats]
    order = np.argsort(Xs, axis=0, kind="stable")
    xsorted = np.take_along_axis(Xs, order, axis=0)
    sizes = np.arange(1, n)[:, None]
    valid = (xsorted[1:] > xsorted[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
    # feature-major, then ascending left size: fixes the tie-break order
    fsel, ksel = np.nonzero(valid.T)
    if len(fsel) == 0:
        return None
    K = ksel + 1
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(n)[:, None], axis=0)
    yorder = [np.argsort(Y[:, c], kind="stable") for c in range(Y.shape[1])]
    costs = np.empty(len(K))
    step = max(1, _CHUNK_CELLS // n)
    for s in range(0, len(K), step):
        P = rank[:, fsel[s: s + step]].T
        costs[s: s + step] = _split_costs(P, K[s: s + step], Y, yorder, weights)
    best = float(costs.min())
    j = int(np.nonzero(costs <= best + 1e-12 * max(abs(best), 1.0))[0][0])
    f_local, k = int(fsel[j]), int(K[j])
    thr = 0.5 * (xsorted[k - 1, f_local] + xsorted[k, f_local])
    if not thr > xsorted[k - 1, f_local]:
        thr = xsorted[k - 1, f_local]
    return int(feats[f_local]), float(thr), best


def _check_xy(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or len(X) == 0:
        raise EmptyTraining("need at least one training row")
    if len(X) != len(Y):
        raise DimensionMismatch(f"X has {len(X)} rows, Y has {len(Y)}")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise NonFiniteInput("training data contains NaN or inf")
    return X, Y


def _component_weights(Y):
    rng = Y.max(axis=0) - Y.min(axis=0)
    return np.where(rng > 0, 1.0 / np.where(rng > 0, rng, 1.0), 1.0)


def fit_tree(X, Y, hp: ForestHyperparams, rng=None, weights=None, n_train: int | None = None) -> RegressionTree:
    """Grow one tree on (X, Y).

    ``weights`` scales each output component's absolute error; by default
    each component is divided by its range on Y. ``n_train`` is the size
    fractional ``min_samples_*`` refer to (defaults to len(X)).
    """
    X, Y = _check_xy(X, Y)
    rng = rng if rng is not None else np.random.default_rng(0)
    n, d = X.shape
    weights = _component_weights(Y) if weights is None else np.asarray(weights, dtype=float)
    min_split, min_leaf = hp.resolve(n_train or n)
    n_sub = min(d, max(1, math.ceil(hp.max_features * d)))

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.median(Y[rows], axis=0))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if len(rows) < min_split or len(rows) < 2 * min_leaf:
            continue
        if hp.max_depth is not None and depth >= hp.max_depth:
            continue
        Yn = Y[rows]
        parent = float(weights @ _abs_dev(Yn))
        if parent <= 0:
            continue
        feats = np.sort(rng.choice(d, size=n_sub, replace=False))
        Xn = X[rows]
        span = Xn[:, feats]
        feats = feats[span.max(axis=0) > span.min(axis=0)]
        if len(feats) == 0:
            continue
        found = _best_split(Xn, Yn, feats, min_leaf, weights)
        if found is None:
            continue
        f, thr, cost = found
        if not cost < parent - 1e-12 * parent:
            continue
        go_left = Xn[:, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))

    return RegressionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.vstack(value).reshape(len(value), Y.shape[1]),
    )


def _fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=float)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


@dataclass
class Forest:
    trees: list
    target_names: list
    hyperparams: ForestHyperparams
    train_fingerprint: str
    n_features: int
    vocab_fingerprint: str | None = None
    group: str | None = None
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        """Mean of the trees' leaf vectors; accepts one row or a matrix."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros((len(X), len(self.target_names)))
        for tree in self.trees:
            out += tree.predict(X)
        out /= len(self.trees)
        return out[0] if single else out

    def to_document(self) -> dict:
        return {
            "format": "tagphys.forest",
            "version": FORMAT_VERSION,
            "group": self.group,
            "target_names": list(self.target_names),
            "hyperparams": self.hyperparams.to_dict(),
            "train_fingerprint": self.train_fingerprint,
            "vocab_fingerprint": self.vocab_fingerprint,
            "n_features": self.n_features,
            "meta": self.meta,
            "trees": [t.to_dict() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def from_document(cls, doc: dict, vocab_fingerprint: str | None = None) -> "Forest":
        if doc.get("format") != "tagphys.forest":
            raise ValueError("not a tagphys forest document")
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest document version {doc.get('version')}")
        if vocab_fingerprint is not None and doc.get("vocab_fingerprint") != vocab_fingerprint:
            raise ModelVocabMismatch(
                f"model vocabulary {doc.get('vocab_fingerprint')} does not match {vocab_fingerprint}"
            )
        return cls(
            trees=[RegressionTree.from_dict(t) for t in doc["trees"]],
            target_names=list(doc["target_names"]),
            hyperparams=ForestHyperparams.from_dict(doc["hyperparams"]),
            train_fingerprint=doc["train_fingerprint"],
            n_features=int(doc["n_features"]),
            vocab_fingerprint=doc.get("vocab_fingerprint"),
            group=doc.get("group"),
            meta=doc.get("meta", {}),
        )

    @classmethod
    def load(cls, path, vocab_fingerprint: str | None = None) -> "Forest":
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")), vocab_fingerprint)


def fit_forest(
    X,
    Y,
    hp: ForestHyperparams,
    seed: int = 0,
    target_names=None,
    vocab_fingerprint: str | None = None,
    group: str | None = None,
) -> Forest:
    """Fit ``hp.n_estimators`` trees on bootstrap resamples.

    Tree i draws from ``default_rng([seed, i])``, so results do not depend on
    the order trees are built in.
    """
    X, Y = _check_xy(X, Y)
    n = len(X)
    weights = _component_weights(Y)
    trees = []
    for i in range(hp.n_estimators):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n) if hp.bootstrap else np.arange(n)
        trees.append(fit_tree(X[idx], Y[idx], hp, rng, weights=weights, n_train=n))
    names = list(target_names) if target_names is not None else [f"y{j}" for j in range(Y.shape[1])]
    if len(names) != Y.shape[1]:
        raise DimensionMismatch("target_names length must match Y columns")
    return Forest(trees, names, hp, _fingerprint(X, Y), X.shape[1], vocab_fingerprint, group)


def predict(forest: Forest, x) -> np.ndarray:
    return forest.predict(x)


# ---------------------------------------------------------------- search


def normalized_mae(y_true, y_pred, scale) -> float:
    """Mean over components of MAE divided by the component's scale."""
    y_true = np.atleast_2d(np.asarray(y_true, dtype=float))
    y_pred = np.atleast_2d(np.asarray(y_pred, dtype=float))
    scale = np.where(np.asarray(scale) > 0, scale, 1.0)
    return float(np.mean(np.mean(np.abs(y_true - y_pred), axis=0) / scale))


class SearchSpace:
    """Hyperparameter distributions or an explicit candidate list.

    Distribution form maps each field to a fixed value or one of
    ``{"choice": [...]}``, ``{"uniform": [lo, hi]}``,
    ``{"loguniform": [lo, hi]}``. Candidate form is
    ``{"candidates": [{...}, ...]}``.
    """

    def __init__(self, spec: dict):
        self.spec = spec
        self.candidates = None
        if "candidates" in spec:
            self.candidates = [ForestHyperparams.from_dict(c) for c in spec["candidates"]]
            if not self.candidates:
                raise EmptySpace("candidate list is empty")
        elif not spec:
            raise EmptySpace("search space is empty")

    @classmethod
    def load(cls, path) -> "SearchSpace":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    @staticmethod
    def _draw(dist, rng):
        if not isinstance(dist, dict):
            return dist
        (kind, arg), = dist.items()
        if kind == "choice":
            if not arg:
                raise EmptySpace("empty choice list")
            v = arg[int(rng.integers(len(arg)))]
            return v
        lo, hi = arg
        if kind == "uniform":
            return float(rng.uniform(lo, hi))
        if kind == "loguniform":
            return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        raise ValueError(f"unknown distribution {kind!r}")

    def sample(self, iters: int, rng) -> list[ForestHyperparams]:
        if self.candidates is not None:
            order = rng.permutation(len(self.candidates))[: min(iters, len(self.candidates))]
            return [self.candidates[i] for i in order]
        out = []
        for _ in range(iters):
            for _attempt in range(100):
                d = {k: self._draw(v, rng) for k, v in self.spec.items()}
                try:
                    out.append(ForestHyperparams.from_dict(d))
                    break
                except ValueError:
                    continue
            else:
                raise EmptySpace("could not draw a valid configuration from the space")
        return out


def default_search_space() -> SearchSpace:
    from importlib import resources

    return SearchSpace(json.loads((resources.files("tagphys") / "data" / "search_space.json").read_text()))


@dataclass
class SearchReport:
    group: str
    entries: list  # {"params": ..., "score": ..., "fold_scores": [...]}
    best_index: int

    @property
    def best(self) -> dict:
        return self.entries[self.best_index]

    def to_dict(self) -> dict:
        return {"group": self.group, "best_index": self.best_index, "entries": self.entries}


def cv_score(ds, group: str, hp: ForestHyperparams, folds, seed: int = 0) -> tuple[float, list]:
    """Mean range-normalized validation MAE of ``hp`` over precomputed folds."""
    scores = []
    for train, hold in folds:
        Ytr = train.targets(group)
        forest = fit_forest(train.features(), Ytr, hp, seed=seed)
        scale = Ytr.max(axis=0) - Ytr.min(axis=0)
        scores.append(normalized_mae(hold.targets(group), forest.predict(hold.features()), scale))
    return float(np.mean(scores)), scores


def randomized_search(
    ds,
    target_group: str,
    space: SearchSpace | dict | None = None,
    iters: int = 50,
    k: int = 5,
    seed: int = 0,
    key="structure",
) -> tuple[ForestHyperparams, SearchReport]:
    """Sample ``iters`` configurations, score each by k-fold CV, keep the best.

    All configurations share the folds and the forest seed. Repeated draws
    of one configuration are scored once.
    """
    from .dataset import stratified_kfold

    if len(ds) == 0:
        from .errors import EmptyDataset

        raise EmptyDataset("search needs data")
    if space is None:
        space = default_search_space()
    elif isinstance(space, dict):
        space = SearchSpace(space)
    rng = np.random.default_rng(seed)
    configs = space.sample(iters, rng)
    if not configs:
        raise EmptySpace("no configurations sampled")
    folds = [(tr, ho) for tr, ho in stratified_kfold(ds, k, key=key, seed=seed) if len(tr) and len(ho)]
    cache: dict = {}
    entries = []
    for hp in configs:
        key_ = json.dumps(hp.to_dict(), sort_keys=True)
        if key_ not in cache:
            cache[key_] = cv_score(ds, target_group, hp, folds, seed)
        score, fold_scores = cache[key_]
        entries.append({"params": hp.to_dict(), "score": score, "fold_scores": fold_scores})
    best = min(range(len(entries)), key=lambda i: (entries[i]["score"], i))
    return configs[best], SearchReport(target_group, entries, best)
