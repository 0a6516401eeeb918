"""Slow reference implementations used to check the engine.

These deliberately share no code with the package: plain loops, a
hand-written Jacobi eigensolver, and a fixed-step gradient descent.
"""

import math

import numpy as np


def covariance(X):
    X = [list(map(float, row)) for row in X]
    n, d = len(X), len(X[0])
    mean = [sum(row[j] for row in X) / n for j in range(d)]
    cov = [[0.0] * d for _ in range(d)]
    for row in X:
        c = [row[j] - mean[j] for j in range(d)]
        for a in range(d):
            for b in range(d):
                cov[a][b] += c[a] * c[b]
    return np.array(mean), np.array(cov) / (n - 1)


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations; returns (eigenvalues descending, eigenvectors as rows)."""
    A = np.array(A, dtype=float)
    d = A.shape[0]
    V = np.eye(d)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[i, j] ** 2 for i in range(d) for j in range(d) if i != j))
        if off < tol * max(1.0, np.abs(A).max()):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                # A <- J^T A J and V <- V J for the rotation J in the (p, q) plane
                for M in (A, V):
                    mp, mq = M[:, p].copy(), M[:, q].copy()
                    M[:, p] = c * mp - s * mq
                    M[:, q] = s * mp + c * mq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
    vals = np.diag(A)
    order = sorted(range(d), key=lambda i: -vals[i])
    return vals[order], V[:, order].T


def pca_oracle(X, k):
    mean, cov = covariance(X)
    vals, vecs = jacobi_eigh(cov)
    return mean, vecs[:k], np.clip(vals[:k], 0, None)


def euclid(a, b):
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def naive_rank(q, ids, rows, exclude=()):
    scored = [(euclid(q, row), item) for item, row in zip(ids, rows) if item not in exclude]
    scored.sort()
    return [item for _, item in scored]


def naive_spatial_distance(qpatches, rpatches):
    total = 0.0
    for qp in qpatches:
        best = math.inf
        for rp in rpatches:
            best = min(best, euclid(qp, rp))
        total += best
    return total / len(qpatches)


def naive_spatial_rank(qpatches, refs):
    """refs: list of (image_id, patches)."""
    scored = sorted((naive_spatial_distance(qpatches, p), image_id) for image_id, p in refs)
    return [image_id for _, image_id in scored]


def brute_ap(ranked, positive, junk=()):
    """Precision at every positive hit, counted from scratch each time."""
    kept = [x for x in ranked if x not in junk]
    total = 0.0
    for i in range(len(kept)):
        if kept[i] in positive:
            prefix = kept[: i + 1]
            total += sum(1 for x in prefix if x in positive) / len(prefix)
    return total / len(positive)


def svm_objective(w, X, y, C):
    loss = sum(max(0.0, 1.0 - yi * float(np.dot(w, xi))) ** 2 for xi, yi in zip(X, y))
    return 0.5 * float(np.dot(w, w)) + C * loss


def svm_gradient_descent(X, y, C, tol=1e-11, max_iter=2_000_000):
    """Fixed step 1/L gradient descent on the squared-hinge objective."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    L = 1.0 + 2.0 * C * np.linalg.norm(X, 2) ** 2
    w = np.zeros(X.shape[1])
    for _ in range(max_iter):
        margin = 1.0 - y * (X @ w)
        viol = np.maximum(margin, 0.0)
        g = w - 2.0 * C * (X.T @ (y * viol))
        if np.linalg.norm(g) < tol:
            break
        w = w - g / L
    return w
