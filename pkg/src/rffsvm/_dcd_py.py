"""Pure-python twin of the compiled dual coordinate descent loops.

Selected automatically when the ``_dcd`` extension is unavailable. Update
rules and sweep order are identical to the compiled path; only the inner dot
products differ (BLAS here, a scalar loop there), so the two backends may
disagree in the last floating-point bits. ``benchmarks/bench_solver.py``
compares their speed.
"""

import numpy as np


def linear_epoch(X, y, qdiag, alpha, w, order, C):
    """One sweep for the explicit-feature dual; w tracks sum_i alpha_i y_i X[i]."""
    maxpg = 0.0
    for i in order:
        g = y[i] * float(X[i] @ w) - 1.0
        a_old = alpha[i]
        if a_old == 0.0:
            pg = g if g < 0.0 else 0.0
        elif a_old == C:
            pg = g if g > 0.0 else 0.0
        else:
            pg = g
        if pg != 0.0:
            a_new = min(max(a_old - g / qdiag[i], 0.0), C)
            alpha[i] = a_new
            delta = (a_new - a_old) * y[i]
            if delta != 0.0:
                w += delta * X[i]
        maxpg = max(maxpg, abs(pg))
    return maxpg


def kernel_epoch(Kp, y, alpha, u, order, C):
    """One sweep for the precomputed-kernel dual; u tracks Kp @ (alpha * y)."""
    maxpg = 0.0
    for i in order:
        g = y[i] * u[i] - 1.0
        a_old = alpha[i]
        if a_old == 0.0:
            pg = g if g < 0.0 else 0.0
        elif a_old == C:
            pg = g if g > 0.0 else 0.0
        else:
            pg = g
        if pg != 0.0:
            a_new = min(max(a_old - g / Kp[i, i], 0.0), C)
            alpha[i] = a_new
            delta = (a_new - a_old) * y[i]
            if delta != 0.0:
                u += delta * Kp[i]
        maxpg = max(maxpg, abs(pg))
    return maxpg
