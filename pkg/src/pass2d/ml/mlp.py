"""Fully connected ReLU network with softmax output, trained by Adam in numpy.

Topology defaults to 1024-512-256-64-32 hidden units and 11 outputs, with
dropout (0.1) after the first hidden layer only.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from pass2d.ml import archive

log = logging.getLogger(__name__)

N_CLASSES = 11


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite training loss in epoch {epoch}")


@dataclass(frozen=True)
class MLPConfig:
    hidden_layers: tuple[int, ...] = (1024, 512, 256, 64, 32)
    n_classes: int = N_CLASSES
    dropout_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    dtype: str = "float32"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h <= 0 for h in self.hidden_layers) or self.n_classes <= 0:
            raise ValueError("layer widths must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class MLPModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    mean: np.ndarray
    std: np.ndarray
    config: MLPConfig
    meta: dict = field(default_factory=dict)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]


def init_params(sizes, rng: np.random.Generator, dtype=np.float64):
    """He-style uniform init, limit sqrt(6 / fan_in); zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, (fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return weights, biases


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(weights, biases, X, mask=None):
    """Logits plus the per-layer activations needed for backprop.

    ``mask`` is the (already scaled) dropout mask for the first hidden layer.
    """
    acts = [X]
    a = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W
        z += b
        if i == last:
            return z, acts
        np.maximum(z, 0, out=z)
        if i == 0 and mask is not None:
            z *= mask
        acts.append(z)
        a = z
    return a, acts


def backward(weights, acts, dlogits, mask=None):
    """Gradients of the loss w.r.t. every weight and bias, given d loss / d logits."""
    n = len(weights)
    gw, gb = [None] * n, [None] * n
    d = dlogits
    for i in range(n - 1, -1, -1):
        gw[i] = acts[i].T @ d
        gb[i] = d.sum(axis=0)
        if i == 0:
            break
        d = d @ weights[i].T
        # acts[i] is post-ReLU (and post-dropout for layer 1): zero where inactive
        if i == 1 and mask is not None:
            d *= mask
        d *= acts[i] > 0
    return gw, gb


def loss_and_grads(weights, biases, X, y, mask=None):
    """Mean cross-entropy over the batch and its gradients."""
    logits, acts = forward(weights, biases, X, mask)
    p = softmax(logits)
    n = len(y)
    loss = -np.mean(np.log(np.maximum(p[np.arange(n), y], np.finfo(p.dtype).tiny)))
    d = p
    d[np.arange(n), y] -= 1.0
    d /= n
    gw, gb = backward(weights, acts, d, mask)
    return float(loss), gw, gb


def _standardize_stats(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    return mean, std


def fit(X: np.ndarray, y: np.ndarray, cfg: MLPConfig, meta: dict | None = None) -> MLPModel:
    """Train on ``X`` with 0-based class labels ``y``.

    BLAS runs single-threaded here so the weights do not depend on how many
    cores happen to be free; parallelism comes from training models side by side.
    """
    with threadpool_limits(1):
        return _fit(X, y, cfg, meta)


def _fit(X, y, cfg: MLPConfig, meta) -> MLPModel:
    if len(X) == 0:
        raise ValueError("empty training table")
    y = np.asarray(y, dtype=np.int64)
    if y.min() < 0 or y.max() >= cfg.n_classes:
        raise ValueError(f"labels must lie in 0..{cfg.n_classes - 1}")
    dtype = np.dtype(cfg.dtype)
    init_ss, shuffle_ss, drop_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_ss))
    drop_rng = np.random.Generator(np.random.PCG64(drop_ss))

    mean, std = _standardize_stats(np.asarray(X, dtype=np.float64))
    Xs = ((X - mean) / std).astype(dtype)
    sizes = [X.shape[1], *cfg.hidden_layers, cfg.n_classes]
    weights, biases = init_params(sizes, np.random.Generator(np.random.PCG64(init_ss)), dtype)
    params = weights + biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    keep = 1.0 - cfg.dropout_rate
    lr, b1, b2, eps = cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps
    step = 0
    n = len(Xs)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            xb, yb = Xs[idx], y[idx]
            mask = None
            if cfg.dropout_rate > 0:
                mask = (drop_rng.random((len(idx), cfg.hidden_layers[0])) < keep).astype(dtype) / dtype.type(keep)
            loss, gw, gb = loss_and_grads(weights, biases, xb, yb, mask)
            total += loss * len(idx)
            step += 1
            grads = gw + gb
            if cfg.optimizer == "sgd":
                for p, g in zip(params, grads):
                    p -= dtype.type(lr) * g
                continue
            corr = lr * np.sqrt(1 - b2 ** step) / (1 - b1 ** step)
            for p, g, a, v in zip(params, grads, m1, m2):
                a *= b1
                a += (1 - b1) * g
                v *= b2
                v += (1 - b2) * (g * g)
                p -= dtype.type(corr) * a / (np.sqrt(v) + dtype.type(eps))
        if not np.isfinite(total):
            raise DivergenceError(epoch)
        log.debug("epoch %d loss %.5f", epoch, total / n)
    return MLPModel(weights, biases, mean, std, cfg, dict(meta or {}))


def mlp_train(table, cfg: MLPConfig) -> MLPModel:
    """Train on a dataset table (labels are 1-based in the table)."""
    meta = {"schema_hash": table.schema_hash, "label_kind": table.config.label_kind.value,
            "dataset": table.config.to_dict(), "columns": table.schema.names, "k": table.schema.k}
    return fit(table.X, table.labels - 1, cfg, meta)


def predict_proba(model: MLPModel, X: np.ndarray, batch: int = 8192) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_inputs:
        raise ValueError(f"row width {X.shape[1]} != model input width {model.n_inputs}")
    dtype = model.weights[0].dtype
    out = np.empty((len(X), model.weights[-1].shape[1]), dtype=np.float64)
    for lo in range(0, len(X), batch):
        xs = ((X[lo:lo + batch] - model.mean) / model.std).astype(dtype)
        logits, _ = forward(model.weights, model.biases, xs)
        out[lo:lo + batch] = softmax(logits.astype(np.float64))
    return out


mlp_predict_proba = predict_proba


def predict(model: MLPModel, X: np.ndarray) -> np.ndarray:
    """0-based class index with ties to the lowest class."""
    return np.argmax(predict_proba(model, X), axis=1)


# -- gradient check ---------------------------------------------------------


def gradient_check(hidden_layers=(8, 4), X=None, y=None, eps: float = 1e-5, seed: int = 0,
                   n_classes: int = N_CLASSES, params=None) -> float:
    """Max relative error between backprop and central differences over all parameters.

    Runs in float64 with dropout off. Relative error is
    ``|a - n| / max(|a| + |n|, 1e-12)``.
    """
    rng = np.random.default_rng(seed)
    if X is None:
        X = rng.normal(size=(16, 5))
    if y is None:
        y = rng.integers(0, n_classes, len(X))
    X = np.asarray(X, dtype=np.float64)
    if params is None:
        sizes = [X.shape[1], *hidden_layers, n_classes]
        weights, biases = init_params(sizes, rng)
        # nonzero biases keep units away from the ReLU kink
        biases = [rng.normal(0, 0.1, b.shape) for b in biases]
    else:
        weights, biases = [w.astype(np.float64) for w in params[0]], [b.astype(np.float64) for b in params[1]]
    _, gw, gb = loss_and_grads(weights, biases, X, y)
    worst = 0.0
    for group, grads in ((weights, gw), (biases, gb)):
        for p, g in zip(group, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for j in range(flat.size):
                old = flat[j]
                flat[j] = old + eps
                lp = loss_and_grads(weights, biases, X, y)[0]
                flat[j] = old - eps
                lm = loss_and_grads(weights, biases, X, y)[0]
                flat[j] = old
                num = (lp - lm) / (2 * eps)
                err = abs(gflat[j] - num) / max(abs(gflat[j]) + abs(num), 1e-12)
                worst = max(worst, err)
    return worst


# -- persistence ------------------------------------------------------------


def save_mlp(model: MLPModel, path) -> None:
    arrays = {"mean": model.mean, "std": model.std}
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i:02d}"] = W
        arrays[f"b{i:02d}"] = b
    cfg = asdict(model.config)
    cfg["hidden_layers"] = list(cfg["hidden_layers"])
    archive.save(path, "mlp", {"config": cfg, **model.meta}, arrays)


def load_mlp(path) -> MLPModel:
    meta, arrays = archive.load(path)
    if meta["kind"] != "mlp":
        raise ValueError(f"{path}: not an MLP model")
    cfg = MLPConfig(**meta["config"])
    n = len(cfg.hidden_layers) + 1
    extra = {k: v for k, v in meta.items() if k not in ("format", "version", "kind", "config")}
    return MLPModel([arrays[f"W{i:02d}"] for i in range(n)], [arrays[f"b{i:02d}"] for i in range(n)],
                    arrays["mean"], arrays["std"], cfg, extra)
