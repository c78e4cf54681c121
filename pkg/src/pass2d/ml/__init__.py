"""Receiver classifiers: :mod:`pass2d.ml.mlp` and :mod:`pass2d.ml.forest`.

The helpers here dispatch on model type so evaluation code can treat both
the same way. Classes are 0-based internally (class c = label c + 1).
"""

from __future__ import annotations

import hashlib

import numpy as np

from pass2d.ml import archive, forest, mlp
from pass2d.ml.forest import RFConfig, RFModel
from pass2d.ml.mlp import MLPConfig, MLPModel

__all__ = ["MLPConfig", "MLPModel", "RFConfig", "RFModel", "predict_proba", "predict",
           "save_model", "load_model", "fingerprint"]


def predict_proba(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, MLPModel):
        return mlp.predict_proba(model, X)
    if isinstance(model, RFModel):
        return forest.predict_proba(model, X)
    if hasattr(model, "predict_proba"):
        return model.predict_proba(X)
    raise TypeError(f"not a model: {type(model).__name__}")


def predict(model, X: np.ndarray) -> np.ndarray:
    return np.argmax(predict_proba(model, X), axis=1)


def save_model(model, path) -> None:
    if isinstance(model, MLPModel):
        mlp.save_mlp(model, path)
    elif isinstance(model, RFModel):
        forest.save_rf(model, path)
    else:
        raise TypeError(f"cannot save {type(model).__name__}")


def load_model(path):
    kind = archive.peek_kind(path)
    if kind == "mlp":
        return mlp.load_mlp(path)
    if kind == "rf":
        return forest.load_rf(path)
    raise ValueError(f"{path}: unknown model kind {kind!r}")


def fingerprint(model) -> str:
    """Short content hash over parameters and metadata."""
    h = hashlib.sha256()
    h.update(repr(sorted((k, repr(v)) for k, v in getattr(model, "meta", {}).items())).encode())
    h.update(repr(getattr(model, "config", None)).encode())
    if isinstance(model, MLPModel):
        for a in (*model.weights, *model.biases, model.mean, model.std):
            h.update(np.ascontiguousarray(a).tobytes())
    elif isinstance(model, RFModel):
        for t in model.trees:
            h.update(t.feature.tobytes())
            h.update(t.threshold.tobytes())
    return h.hexdigest()[:16]
