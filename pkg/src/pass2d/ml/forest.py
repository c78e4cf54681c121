"""Random forest of Gini-split CART trees.

Split search runs on per-column histograms. A column with at most
``max_bins`` distinct training values gets one bin per value, so every
midpoint between consecutive distinct values in a node is scored, which is
the exact CART search. Wider columns are cut into equal-frequency bins and
only bin boundaries are scored. Among equally good splits the first
candidate feature wins, then the smallest threshold. Samples go left when
``x <= threshold``.

Tree ``i`` draws its bootstrap sample and per-node feature subsets from
``SeedSequence([seed, i])``, so forests are identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from pass2d.ml import archive

N_CLASSES = 11
LEAF = -1


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    # "sqrt", "all", or an explicit count
    features_per_split: str | int = "sqrt"
    bootstrap: bool = True
    # columns with more distinct values are split on equal-frequency bin edges
    max_bins: int = 255
    n_classes: int = N_CLASSES
    seed: int = 0

    def __post_init__(self):
        if self.n_trees <= 0:
            raise ValueError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if not 2 <= self.max_bins <= 65536:
            raise ValueError("max_bins must be in 2..65536")

    def n_candidates(self, n_features: int) -> int:
        f = self.features_per_split
        if f == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        if f == "all" or f is None:
            return n_features
        return max(1, min(int(f), n_features))


@dataclass
class Tree:
    feature: np.ndarray       # int64, LEAF for leaves
    threshold: np.ndarray     # float64
    left: np.ndarray          # int64 child ids
    right: np.ndarray
    value: np.ndarray         # (n_nodes, n_classes) class distribution, rows sum to 1
    n_samples: np.ndarray     # int64, in-bag samples reaching the node
    decrease: np.ndarray      # weighted Gini decrease (sample-count units) at splits

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


@dataclass
class RFModel:
    trees: list[Tree]
    config: RFConfig
    n_features: int
    meta: dict = field(default_factory=dict)


@numba.njit(cache=True)
def _greater(a, b, c, d):
    """a/b > c/d for non-negative int64 with 0 < b, d < 3e9."""
    qa, qc = a // b, c // d
    if qa != qc:
        return qa > qc
    return (a - qa * b) * d > (c - qc * d) * b


@numba.njit(cache=True)
def _best_split(Xb, y, idx, candidates, n_wanted, n_classes, n_bins, lo_rep, hi_rep):
    """Scan candidate features in order; stop once ``n_wanted`` non-constant ones were scored.

    ``Xb`` holds per-column bin codes; ``lo_rep``/``hi_rep`` give the smallest
    and largest training value in each bin. Returns (feature, threshold,
    child impurity) with child impurity nL*giniL + nR*giniR; feature = -1
    if no candidate separates the node.
    """
    n = idx.shape[0]
    best_f = -1
    best_t = 0.0
    best_imp = np.inf
    best_num, best_den = 0, 1
    # exact rational comparison keeps ties deterministic; the int64 products
    # in _greater stay in range while nL*nR < 3e9
    exact = n <= 100000
    hist = np.zeros((lo_rep.shape[1], n_classes), np.int64)
    bin_n = np.zeros(lo_rep.shape[1], np.int64)
    left = np.zeros(n_classes, np.int64)
    total = np.zeros(n_classes, np.int64)
    for i in range(n):
        total[y[idx[i]]] += 1
    ss_total = 0
    for j in range(n_classes):
        ss_total += total[j] * total[j]
    scored = 0
    for c in range(candidates.shape[0]):
        if scored >= n_wanted and best_f >= 0:
            break
        f = candidates[c]
        bmin = n_bins[f]
        bmax = -1
        for i in range(n):
            b = Xb[idx[i], f]
            hist[b, y[idx[i]]] += 1
            bin_n[b] += 1
            if b < bmin:
                bmin = b
            if b > bmax:
                bmax = b
        if bmin == bmax:
            hist[bmin, :] = 0
            bin_n[bmin] = 0
            continue
        scored += 1
        left[:] = 0
        ss_left = 0
        ss_right = ss_total
        nl = 0
        prev = -1
        for b in range(bmin, bmax + 1):
            if bin_n[b] == 0:
                continue
            if prev >= 0:
                nr = n - nl
                num = ss_left * nr + ss_right * nl
                den = nl * nr
                if best_f < 0 or (_greater(num, den, best_num, best_den) if exact
                                  else num / den > best_num / best_den):
                    best_num, best_den = num, den
                    best_imp = n - num / den
                    best_f = f
                    v = hi_rep[f, prev]
                    w = lo_rep[f, b]
                    t = 0.5 * (v + w)
                    best_t = t if t < w else v
            for j in range(n_classes):
                k = hist[b, j]
                if k:
                    cl = left[j]
                    cr = total[j] - cl
                    ss_left += 2 * cl * k + k * k
                    ss_right += k * k - 2 * cr * k
                    left[j] = cl + k
                    hist[b, j] = 0
            nl += bin_n[b]
            bin_n[b] = 0
            prev = b
    return best_f, best_t, best_imp


def bin_columns(X: np.ndarray, max_bins: int = 255):
    """Per-column bin codes plus each bin's smallest/largest training value.

    A column with at most ``max_bins`` distinct values gets one bin per
    value, which makes the split search exact for it.
    """
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.uint8 if max_bins <= 256 else np.uint16, order="F")
    lo = np.zeros((d, max_bins))
    hi = np.zeros((d, max_bins))
    n_bins = np.zeros(d, np.int64)
    for f in range(d):
        uniq, inv = np.unique(X[:, f], return_inverse=True)
        if len(uniq) <= max_bins:
            codes[:, f] = inv
            lo[f, :len(uniq)] = hi[f, :len(uniq)] = uniq
            n_bins[f] = len(uniq)
            continue
        # cut the sorted distinct values into equal-frequency groups
        cum = np.cumsum(np.bincount(inv))
        group = np.minimum((cum - 1) * max_bins // n, max_bins - 1)
        group = np.concatenate([[0], np.cumsum(np.diff(group) > 0)])
        codes[:, f] = group[inv]
        nb = int(group[-1]) + 1
        first = np.searchsorted(group, np.arange(nb), side="left")
        last = np.searchsorted(group, np.arange(nb), side="right") - 1
        lo[f, :nb], hi[f, :nb] = uniq[first], uniq[last]
        n_bins[f] = nb
    return codes, lo, hi, n_bins


@numba.njit(cache=True)
def _apply(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def node_gini_units(counts: np.ndarray) -> float:
    """n * gini for a node with the given class counts."""
    n = counts.sum()
    return float(n - (counts.astype(np.int64) ** 2).sum() / n) if n else 0.0


def build_tree(X: np.ndarray, y: np.ndarray, cfg: RFConfig, rng: np.random.Generator | None,
               sample: np.ndarray | None = None, binned=None) -> Tree:
    """Grow one tree on rows ``sample`` (default: all rows).

    With ``rng=None`` every node scans all features in index order.
    ``binned`` is ``bin_columns(X, cfg.max_bins)`` when the caller has it.
    """
    if binned is None:
        binned = bin_columns(X, cfg.max_bins)
    Xb, lo_rep, hi_rep, n_bins = binned
    y = np.ascontiguousarray(y, dtype=np.int64)
    n_features = X.shape[1]
    n_wanted = cfg.n_candidates(n_features)
    if sample is None:
        sample = np.arange(len(X))
    feature, threshold, left, right, value, n_samples, decrease = [], [], [], [], [], [], []

    def new_node(counts):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(counts / counts.sum())
        n_samples.append(int(counts.sum()))
        decrease.append(0.0)
        return len(feature) - 1

    root_counts = np.bincount(y[sample], minlength=cfg.n_classes)
    stack = [(new_node(root_counts), sample, 0, root_counts)]
    all_features = np.arange(n_features)
    while stack:
        node, idx, depth, counts = stack.pop()
        n = len(idx)
        if (n < cfg.min_samples_split or (cfg.max_depth is not None and depth >= cfg.max_depth)
                or np.count_nonzero(counts) <= 1):
            continue
        candidates = all_features if rng is None else rng.permutation(n_features)
        f, t, child_imp = _best_split(Xb, y, idx, candidates, n_wanted, cfg.n_classes, n_bins, lo_rep, hi_rep)
        if f < 0:
            continue
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        lc = np.bincount(y[li], minlength=cfg.n_classes)
        rc = counts - lc
        feature[node], threshold[node] = int(f), float(t)
        decrease[node] = node_gini_units(counts) - child_imp
        left[node] = new_node(lc)
        right[node] = new_node(rc)
        # right pushed first so the left subtree gets the lower node ids
        stack.append((right[node], ri, depth + 1, rc))
        stack.append((left[node], li, depth + 1, lc))
    return Tree(np.array(feature, np.int64), np.array(threshold, np.float64), np.array(left, np.int64),
                np.array(right, np.int64), np.array(value, np.float64).reshape(-1, cfg.n_classes),
                np.array(n_samples, np.int64), np.array(decrease, np.float64))


def tree_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(i)])))


def _grow(X, y, cfg: RFConfig, i: int, binned) -> Tree:
    rng = tree_rng(cfg.seed, i)
    sample = rng.integers(0, len(X), len(X)) if cfg.bootstrap else np.arange(len(X))
    return build_tree(X, y, cfg, rng, np.sort(sample), binned)


def fit(X: np.ndarray, y: np.ndarray, cfg: RFConfig, workers: int = 1, meta: dict | None = None) -> RFModel:
    """Train on ``X`` with 0-based labels ``y``."""
    if len(X) == 0:
        raise ValueError("empty training table")
    # column-major: split search reads one feature for many rows at a time
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if y.min() < 0 or y.max() >= cfg.n_classes:
        raise ValueError(f"labels must lie in 0..{cfg.n_classes - 1}")
    binned = bin_columns(X, cfg.max_bins)
    if workers > 1:
        from joblib import Parallel, delayed
        trees = Parallel(n_jobs=workers)(delayed(_grow)(X, y, cfg, i, binned) for i in range(cfg.n_trees))
    else:
        trees = [_grow(X, y, cfg, i, binned) for i in range(cfg.n_trees)]
    return RFModel(list(trees), cfg, X.shape[1], dict(meta or {}))


def rf_train(table, cfg: RFConfig, workers: int = 1) -> RFModel:
    meta = {"schema_hash": table.schema_hash, "label_kind": table.config.label_kind.value,
            "dataset": table.config.to_dict(), "columns": table.schema.names, "k": table.schema.k}
    return fit(table.X, table.labels - 1, cfg, workers, meta)


def tree_proba(tree: Tree, X: np.ndarray) -> np.ndarray:
    leaves = _apply(np.ascontiguousarray(X, dtype=np.float64), tree.feature, tree.threshold, tree.left, tree.right)
    return tree.value[leaves]


def predict_proba(model: RFModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise ValueError(f"row width {X.shape[1]} != model input width {model.n_features}")
    X = np.ascontiguousarray(X)
    out = np.zeros((len(X), model.config.n_classes))
    for t in model.trees:
        out += tree_proba(t, X)
    return out / len(model.trees)


def predict(model: RFModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(predict_proba(model, X), axis=1)


def rf_predict(model: RFModel, row) -> tuple[int, np.ndarray]:
    """(0-based class, 11-way distribution) for a single row."""
    p = predict_proba(model, np.asarray(row, dtype=np.float64)[None, :])[0]
    return int(np.argmax(p)), p


def gini_importance(model: RFModel) -> np.ndarray:
    """Total weighted Gini decrease per column, normalised to sum to 1.

    A forest without a single split has no decrease to share; zeros are returned.
    """
    imp = np.zeros(model.n_features)
    for t in model.trees:
        split = t.feature != LEAF
        np.add.at(imp, t.feature[split], t.decrease[split] / t.n_samples[0])
    s = imp.sum()
    return imp / s if s > 0 else imp


def save_rf(model: RFModel, path) -> None:
    offsets = np.cumsum([0] + [t.n_nodes for t in model.trees]).astype(np.int64)
    arrays = {"offsets": offsets}
    for name in ("feature", "threshold", "left", "right", "value", "n_samples", "decrease"):
        arrays[name] = np.concatenate([getattr(t, name) for t in model.trees])
    cfg = asdict(model.config)
    archive.save(path, "rf", {"config": cfg, "n_features": model.n_features, **model.meta}, arrays)


def load_rf(path) -> RFModel:
    meta, a = archive.load(path)
    if meta["kind"] != "rf":
        raise ValueError(f"{path}: not a random-forest model")
    cfg = RFConfig(**meta["config"])
    off = a["offsets"]
    trees = [Tree(*(a[name][off[i]:off[i + 1]] for name in
                    ("feature", "threshold", "left", "right", "value", "n_samples", "decrease")))
             for i in range(len(off) - 1)]
    extra = {k: v for k, v in meta.items() if k not in ("format", "version", "kind", "config", "n_features")}
    return RFModel(trees, cfg, int(meta["n_features"]), extra)
