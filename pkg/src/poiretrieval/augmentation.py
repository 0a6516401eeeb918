"""Descriptor post-processing: l2 normalization, PCA compression and whitening.

The full augmentation chain is::

    l2_normalize -> pca_project -> whiten (optional) -> l2_normalize

All transforms accept a single vector of shape (d,) or a batch of shape
(n, d) and operate along the last axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataValidationError, ZeroVectorError
from .features import FeatureSet

DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray         # (d,)
    components: np.ndarray   # (k, d), one principal axis per row
    eigenvalues: np.ndarray  # (k,), non-increasing

    def __post_init__(self):
        for name in ("mean", "components", "eigenvalues"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k, d = self.components.shape
        if self.mean.shape != (d,) or self.eigenvalues.shape != (k,):
            raise DataValidationError(
                f"inconsistent PCA model shapes: mean {self.mean.shape}, "
                f"components {self.components.shape}, eigenvalues {self.eigenvalues.shape}")
        if not 1 <= k <= d:
            raise DataValidationError(f"need 1 <= k <= d, got k={k}, d={d}")

    @property
    def d(self) -> int:
        return self.components.shape[1]

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "mean": self.mean.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "components": self.components.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PcaModel":
        try:
            model = cls(np.asarray(obj["mean"]), np.asarray(obj["components"]),
                        np.asarray(obj["eigenvalues"]))
        except KeyError as exc:
            raise DataValidationError(f"PCA model is missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise DataValidationError(f"malformed PCA model: {exc}") from None
        if (obj.get("d"), obj.get("k")) != (model.d, model.k):
            raise DataValidationError(
                f"PCA model header d={obj.get('d')}, k={obj.get('k')} does not match "
                f"array shapes d={model.d}, k={model.k}")
        return model

    def save(self, path) -> None:
        # json writes floats with repr(), i.e. the shortest exact round-trip form
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PcaModel":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"PCA model is not valid JSON: {exc}") from None
        return cls.from_dict(obj)


def _as_matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, FeatureSet) else np.asarray(x, dtype=np.float64)


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0):
        if v.ndim == 1:
            raise ZeroVectorError("cannot l2-normalize a zero vector")
        row = int(np.flatnonzero(norms.ravel() == 0)[0])
        raise ZeroVectorError("cannot l2-normalize a zero vector", record=row + 1)
    return v / norms


def pca_fit(X, k: int) -> PcaModel:
    """Fit a PCA model keeping the top ``k`` axes.

    The spectrum comes from the d x d sample covariance (1/(N-1)), so it
    is well defined even when there are fewer samples than dimensions;
    surplus eigenvalues are then ~0. Each axis is oriented so that its
    largest-magnitude entry is positive.
    """
    X = _as_matrix(X)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataValidationError("PCA needs at least 2 samples")
    n, d = X.shape
    if not 1 <= k <= d:
        raise DataValidationError(f"k must be in [1, {d}], got {k}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T

    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]
    return PcaModel(mean, components, eigvals)


def _check_dim(v, expected, what):
    if v.shape[-1] != expected:
        raise DataValidationError(f"dimension mismatch: {what} expects {expected}, got {v.shape[-1]}")


def pca_project(v, model: PcaModel) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    _check_dim(v, model.d, "projection")
    return (v - model.mean) @ model.components.T


def whiten(p, model: PcaModel, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    _check_dim(p, model.k, "whitening")
    return p / np.sqrt(model.eigenvalues + epsilon)


def augment(v, model: PcaModel, use_whitening: bool = True,
            epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Run the full augmentation chain; output rows have unit norm.

    ``model`` must have been fitted on l2-normalized descriptors. A vector
    that projects exactly onto the mean raises ZeroVectorError.
    """
    v = np.asarray(v, dtype=np.float64)
    _check_dim(v, model.d, "augmentation")
    p = pca_project(l2_normalize(v), model)
    if use_whitening:
        p = whiten(p, model, epsilon)
    return l2_normalize(p)


def fit_normalized(X, k: int) -> PcaModel:
    """Fit the model that :func:`augment` expects: PCA on l2-normalized rows."""
    return pca_fit(l2_normalize(_as_matrix(X)), k)


def augment_set(features: FeatureSet, model: PcaModel, use_whitening: bool = True,
                epsilon: float = DEFAULT_EPSILON) -> FeatureSet:
    return features.map_rows(lambda m: augment(m, model, use_whitening, epsilon))
