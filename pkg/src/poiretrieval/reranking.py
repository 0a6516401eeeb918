"""Linear SVM reranking of noisy per-concept image pools.

Two strategies are provided on top of a bias-free, l2-regularized,
squared-hinge linear SVM:

* ``rerank_weak``: one model trained on a small annotated positive set.
* ``rerank_auto``: a random seed sample of the candidates is used as
  pseudo-positives, split into folds, one model per fold; candidates are
  scored by the mean decision value of the fold models.

Negatives always come from a shared pool sampled at ``neg_ratio``
negatives per positive.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DataValidationError
from .features import FeatureSet
from .retrieval import RankedList, map_queries

LABELS = ("pos", "unlabeled")


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray
    iterations: int = 0
    grad_norm: float = 0.0

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class RerankConfig:
    C: float = 1.0
    neg_ratio: int = 100
    folds: int = 10
    seed_pool_size: int = 60
    keep_top: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if f.name == "rng_seed":
                continue
            value = getattr(self, f.name)
            if not value > 0:
                raise DataValidationError(f"{f.name} must be positive, got {value}")
        if self.folds > self.seed_pool_size:
            raise DataValidationError(
                f"folds ({self.folds}) cannot exceed seed_pool_size ({self.seed_pool_size})")

    @classmethod
    def from_file(cls, path, **overrides) -> "RerankConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise DataValidationError(f"unknown rerank config keys: {sorted(unknown)}")
        obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


class _SquaredHinge:
    """f(w) = 0.5 w.w + C sum_i max(0, 1 - y_i <w, x_i>)^2 and its derivatives."""

    def __init__(self, X, y, C):
        self.X = X
        self.y = y
        self.C = C
        self._active = None

    def fun(self, w):
        z = self.X @ w
        margin = 1.0 - self.y * z
        self._active = margin > 0
        m = margin[self._active]
        return 0.5 * w @ w + self.C * (m @ m)

    def grad(self, w):
        # uses the active set from the last fun() call at the same w
        z = self.X[self._active] @ w
        return w + 2.0 * self.C * (self.X[self._active].T @ (z - self.y[self._active]))

    def hess_vec(self, d):
        Xa = self.X[self._active]
        return d + 2.0 * self.C * (Xa.T @ (Xa @ d))


def _truncated_cg(problem, g, delta):
    """Approximately solve H s = -g inside the ball ||s|| <= delta."""
    s = np.zeros_like(g)
    r = -g
    d = r.copy()
    rtr = r @ r
    cg_tol = 0.1 * np.sqrt(rtr)
    while np.sqrt(rtr) > cg_tol:
        Hd = problem.hess_vec(d)
        alpha = rtr / (d @ Hd)
        s += alpha * d
        if np.linalg.norm(s) > delta:
            s -= alpha * d
            std, sts, dtd = s @ d, s @ s, d @ d
            dsq = delta * delta
            rad = np.sqrt(std * std + dtd * (dsq - sts))
            alpha = (dsq - sts) / (std + rad) if std >= 0 else (rad - std) / dtd
            s += alpha * d
            r -= alpha * Hd
            break
        r -= alpha * Hd
        rnew = r @ r
        d = r + (rnew / rtr) * d
        rtr = rnew
    return s, r


def _tron(problem, w, tol, max_iter):
    """Trust-region Newton iterations; returns (w, gradient norm, iterations)."""
    eta0, eta1, eta2 = 1e-4, 0.25, 0.75
    sigma1, sigma2, sigma3 = 0.25, 0.5, 4.0

    f = problem.fun(w)
    g = problem.grad(w)
    gnorm = np.linalg.norm(g)
    stop = tol * max(1.0, gnorm)
    delta = gnorm
    it = 0
    while gnorm > stop:
        if it >= max_iter:
            raise ConvergenceError(
                f"SVM solver did not converge in {max_iter} iterations "
                f"(gradient norm {gnorm:.3g} > {stop:.3g})")
        it += 1
        s, r = _truncated_cg(problem, g, delta)
        w_new = w + s
        gs = g @ s
        prered = -0.5 * (gs - s @ r)
        f_new = problem.fun(w_new)
        actred = f - f_new
        snorm = np.linalg.norm(s)
        if it == 1:
            delta = min(delta, snorm)
        if f_new - f - gs <= 0:
            alpha = sigma3
        else:
            alpha = max(sigma1, -0.5 * (gs / (f_new - f - gs)))
        if actred < eta0 * prered:
            delta = min(max(alpha, sigma1) * snorm, sigma2 * delta)
        elif actred < eta1 * prered:
            delta = max(sigma1 * delta, min(alpha * snorm, sigma2 * delta))
        elif actred < eta2 * prered:
            delta = max(sigma1 * delta, min(alpha * snorm, sigma3 * delta))
        else:
            delta = max(delta, min(alpha * snorm, sigma3 * delta))

        if actred > eta0 * prered:
            w, f = w_new, f_new
            g = problem.grad(w)
            gnorm = np.linalg.norm(g)
        else:
            problem.fun(w)  # restore the active set of the kept iterate
        if delta < 1e-300 or (abs(actred) <= 1e-15 * abs(f) and abs(prered) <= 1e-15 * abs(f)):
            break
    if gnorm > stop:
        raise ConvergenceError(
            f"SVM solver stalled at gradient norm {gnorm:.3g} > {stop:.3g} after {it} iterations")
    return w, gnorm, it


def _matrix(x):
    return x.matrix if isinstance(x, FeatureSet) else np.asarray(x, dtype=np.float64)


def train_linear_svm(pos, neg, C: float = 1.0, tol: float = 1e-6,
                     max_iter: int = 10_000) -> SvmModel:
    """Fit the bias-free squared-hinge SVM with a trust-region Newton method.

    Stops once ||grad f(w)|| <= tol * max(1, ||grad f(0)||).
    """
    P, N = _matrix(pos), _matrix(neg)
    if P.ndim != 2 or len(P) == 0:
        raise DataValidationError("empty positive class")
    if N.ndim != 2 or len(N) == 0:
        raise DataValidationError("empty negative class")
    if P.shape[1] != N.shape[1]:
        raise DataValidationError(
            f"dimension mismatch: positives {P.shape[1]}, negatives {N.shape[1]}")
    if not C > 0:
        raise DataValidationError(f"C must be positive, got {C}")
    X = np.vstack([P, N])
    y = np.concatenate([np.ones(len(P)), -np.ones(len(N))])
    w, gnorm, it = _tron(_SquaredHinge(X, y, C), np.zeros(X.shape[1]), tol, max_iter)
    return SvmModel(w, it, float(gnorm))


def svm_objective(weights, pos, neg, C: float = 1.0) -> float:
    P, N = _matrix(pos), _matrix(neg)
    X = np.vstack([P, N])
    y = np.concatenate([np.ones(len(P)), -np.ones(len(N))])
    return float(_SquaredHinge(X, y, C).fun(np.asarray(weights, dtype=np.float64)))


def svm_score(model: SvmModel, v) -> np.ndarray | float:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.dim:
        raise DataValidationError(f"dimension mismatch: model {model.dim}, vector {v.shape[-1]}")
    out = v @ model.weights
    return float(out) if out.ndim == 0 else out


def _sample_negatives(neg_pool: FeatureSet, n_pos: int, neg_ratio: int, rng) -> np.ndarray:
    wanted = neg_ratio * n_pos
    pool = neg_pool.matrix
    if len(pool) < wanted:
        warnings.warn(
            f"negative pool has {len(pool)} items, fewer than the {wanted} requested "
            f"({neg_ratio} x {n_pos} positives); using the whole pool", stacklevel=3)
        return pool
    idx = np.sort(rng.choice(len(pool), size=wanted, replace=False))
    return pool[idx]


def _check_dims(*sets):
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise DataValidationError(f"dimension mismatch between feature sets: {sorted(dims)}")


def rerank_weak(candidates: FeatureSet, annotated_pos: FeatureSet, neg_pool: FeatureSet,
                cfg: RerankConfig = RerankConfig(), concept_id: str = "") -> RankedList:
    if len(annotated_pos) == 0:
        raise DataValidationError("annotated positive set is empty")
    _check_dims(candidates, annotated_pos, neg_pool)
    rng = np.random.default_rng(cfg.rng_seed)
    neg = _sample_negatives(neg_pool, len(annotated_pos), cfg.neg_ratio, rng)
    model = train_linear_svm(annotated_pos.matrix, neg, cfg.C)
    scores = svm_score(model, candidates.matrix)
    return RankedList.from_scores(concept_id, candidates.ids, scores, descending=True)


def rerank_auto(candidates: FeatureSet, neg_pool: FeatureSet,
                cfg: RerankConfig = RerankConfig(), concept_id: str = "",
                workers: int = 1) -> RankedList:
    if len(candidates) < cfg.seed_pool_size:
        raise DataValidationError(
            f"{len(candidates)} candidates, fewer than the seed pool size {cfg.seed_pool_size}")
    _check_dims(candidates, neg_pool)
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(cfg.rng_seed).spawn(cfg.folds + 1)]
    seed = streams[0].choice(len(candidates), size=cfg.seed_pool_size, replace=False)
    folds = np.array_split(seed, cfg.folds)

    def fit_fold(f):
        if cfg.folds == 1:
            train = folds[0]
        else:
            train = np.concatenate([folds[j] for j in range(cfg.folds) if j != f])
        pos = candidates.matrix[train]
        neg = _sample_negatives(neg_pool, len(pos), cfg.neg_ratio, streams[f + 1])
        return train_linear_svm(pos, neg, cfg.C)

    models = map_queries(fit_fold, list(range(cfg.folds)), workers)
    scores = np.mean([svm_score(m, candidates.matrix) for m in models], axis=0)
    return RankedList.from_scores(concept_id, candidates.ids, scores, descending=True)


def select_top_k(ranked: RankedList, k: int) -> list:
    if k <= 0:
        warnings.warn(f"select_top_k called with k={k}; nothing selected", stacklevel=2)
        return []
    return list(ranked.ids[:k])


def read_rerank_manifest(path) -> dict:
    """``concept-id item-id [label]`` TSV -> {concept: [(item, label), ...]} in file order."""
    concepts: dict = {}
    seen = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields_ = line.split("\t")
        if len(fields_) not in (2, 3) or not fields_[0] or not fields_[1]:
            raise DataValidationError(
                f"line {lineno}: expected concept-id, item-id and optional label", record=lineno)
        label = fields_[2] if len(fields_) == 3 else "unlabeled"
        if label not in LABELS:
            raise DataValidationError(f"line {lineno}: unknown label {label!r}", record=lineno)
        key = (fields_[0], fields_[1])
        if key in seen:
            raise DataValidationError(f"line {lineno}: duplicate entry {key}", record=lineno)
        seen.add(key)
        concepts.setdefault(fields_[0], []).append((fields_[1], label))
    return concepts
