"""Shared oracles and dataset builders for the test suite."""

import numpy as np


def blob_data(centers, per_class, seed, scale=1.0):
    """Isotropic gaussian blobs; returns (X, labels) with string labels."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    X, labels = [], []
    for k, c in enumerate(centers):
        X.append(rng.normal(size=(per_class, centers.shape[1])) * scale + c)
        labels += [f"c{k}"] * per_class
    return np.vstack(X), labels


def box_pg_violation(Q, alpha, C):
    """Max projected-gradient magnitude of 0.5 a'Qa - sum(a) over [0, C]^n."""
    g = Q @ alpha - 1.0
    pg = g.copy()
    pg[(alpha == 0.0) & (g > 0.0)] = 0.0
    pg[(alpha == C) & (g < 0.0)] = 0.0
    return float(np.max(np.abs(pg)))


def reference_dual_solve(Q, C, tol=1e-10, max_iter=500_000):
    """Independent oracle: accelerated projected gradient on the SVM dual.

    Minimizes 0.5 a'Qa - sum(a) over the box [0, C]^n with FISTA plus a
    gradient restart; run to a far tighter stationarity tolerance than the
    solver under test. Returns (alpha, dual_objective) with the objective in
    maximization form, sum(a) - 0.5 a'Qa.
    """
    n = Q.shape[0]
    L = float(np.linalg.eigvalsh(Q).max())
    step = 1.0 / max(L, 1e-12)
    a = np.zeros(n)
    v = a.copy()
    t = 1.0
    for _ in range(max_iter):
        g_v = Q @ v - 1.0
        a_new = np.clip(v - step * g_v, 0.0, C)
        if np.dot(v - a_new, a_new - a) > 0.0:  # momentum restart
            t = 1.0
            v = a_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            v = a_new + ((t - 1.0) / t_new) * (a_new - a)
            t = t_new
        a = a_new
        if box_pg_violation(Q, a, C) <= tol:
            break
    return a, float(np.sum(a) - 0.5 * a @ Q @ a)


def dual_q_linear(X, y):
    """Q for the explicit-feature dual with the constant-1 bias column folded in."""
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    return (y[:, None] * y[None, :]) * (Xa @ Xa.T)


def dual_q_kernel(K, y):
    """Q for the precomputed-kernel dual, bias folded as K + 1."""
    return (y[:, None] * y[None, :]) * (K + 1.0)
