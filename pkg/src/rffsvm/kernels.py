"""Exact evaluation of linear, gaussian, laplacian and cauchy kernels.

The three nonlinear families are shift-invariant: they depend on x1 - x2
only, take values in (0, 1] and equal 1 on the diagonal.
"""

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("linear", "gaussian", "laplacian", "cauchy")
NONLINEAR_FAMILIES = ("gaussian", "laplacian", "cauchy")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth. ``gamma`` is absent for the linear family."""

    family: str
    gamma: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if self.family == "linear":
            # bandwidth is meaningless for the linear kernel
            object.__setattr__(self, "gamma", None)
        else:
            g = self.gamma
            if g is None or not np.isfinite(g) or g <= 0:
                raise ValueError(
                    f"{self.family} kernel requires a finite gamma > 0, got {g!r}"
                )
            object.__setattr__(self, "gamma", float(g))

    @property
    def shift_invariant(self) -> bool:
        return self.family != "linear"


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Kernel values for every row pair of two vector sets."""

    values: np.ndarray
    row_count: int = field(init=False)
    col_count: int = field(init=False)

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError("gram values must be a 2-D matrix")
        object.__setattr__(self, "row_count", v.shape[0])
        object.__setattr__(self, "col_count", v.shape[1])


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.ndim != 2 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a vector or matrix with at least one column")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _eval_block(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Kernel values for one broadcastable block; X is n1 x N, Y is n2 x N.

    All families reduce over the trailing axis of a broadcast product, so a
    Gram entry and a two-vector call share one floating-point expression.
    """
    if spec.family == "linear":
        return np.sum(X[:, np.newaxis, :] * Y[np.newaxis, :, :], axis=-1)
    delta = X[:, np.newaxis, :] - Y[np.newaxis, :, :]
    g = spec.gamma
    if spec.family == "gaussian":
        return np.exp(-g * np.sum(delta * delta, axis=-1))
    if spec.family == "laplacian":
        return np.exp(-g * np.sum(np.abs(delta), axis=-1))
    # cauchy: the factor product underflows for long vectors, so accumulate
    # log1p terms and exponentiate once
    return np.exp(-np.sum(np.log1p((g * g) * (delta * delta)), axis=-1))


# cap on the temporary n1_chunk x n2 x N difference tensor (in float64 values)
_BLOCK_BUDGET = 8_000_000


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    """Exact kernel value K(x1, x2) for two equal-length vectors."""
    a = _as_matrix(x1, "x1")
    b = _as_matrix(x2, "x2")
    if a.shape != b.shape or a.shape[0] != 1:
        raise ValueError(
            f"x1 and x2 must be single vectors of equal dimension, "
            f"got shapes {np.shape(x1)} and {np.shape(x2)}"
        )
    return float(_eval_block(spec, a, b)[0, 0])


def gram_matrix(spec: KernelSpec, X, Y=None) -> GramMatrix:
    """Kernel matrix between the rows of X and the rows of Y (default: X itself).

    Entry (i, j) is computed with the same floating-point expression as
    ``kernel_eval(spec, X[i], Y[j])``, so the two agree bit for bit.
    """
    A = _as_matrix(X, "X")
    B = A if Y is None else _as_matrix(Y, "Y")
    if A.shape[1] != B.shape[1]:
        raise ValueError(
            f"column counts differ: X has {A.shape[1]}, Y has {B.shape[1]}"
        )
    n1, n2 = A.shape[0], B.shape[0]
    chunk = max(1, _BLOCK_BUDGET // max(1, n2 * A.shape[1]))
    out = np.empty((n1, n2), dtype=np.float64)
    for start in range(0, n1, chunk):
        stop = min(start + chunk, n1)
        out[start:stop] = _eval_block(spec, A[start:stop], B)
    return GramMatrix(out)


def shift_invariance_check(spec: KernelSpec, x1, x2, z) -> tuple[float, float]:
    """Return (K(x1, x2), K(x1+z, x2+z)); diagnostic for the shift-invariant families."""
    if not spec.shift_invariant:
        raise ValueError("linear kernel is not shift-invariant")
    a = _as_matrix(x1, "x1")
    b = _as_matrix(x2, "x2")
    s = _as_matrix(z, "z")
    if not (a.shape == b.shape == s.shape):
        raise ValueError("x1, x2 and z must share one dimension")
    return kernel_eval(spec, a, b), kernel_eval(spec, a + s, b + s)
