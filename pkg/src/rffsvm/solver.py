"""Soft-margin SVM training via dual coordinate descent.

Two solvers share the update machinery: a linear one over explicit features
(the random-features path) and a kernelized one over a precomputed Gram
matrix. Both fold the bias into the problem - the linear solver by appending
a constant 1 feature, the kernel solver by adding 1 to every kernel value -
so the dual stays a pure box constraint. Multi-class training is one-vs-rest.

The per-coordinate sweeps come from the compiled ``_dcd`` extension when it
is importable, else from the pure-python ``_dcd_py`` twin.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramMatrix, KernelSpec

try:
    from . import _dcd as _backend

    BACKEND = "compiled"
except ImportError:  # extension not built; numpy twin has identical semantics
    from . import _dcd_py as _backend

    BACKEND = "python"


@dataclass(frozen=True)
class SvmConfig:
    """Solver settings; ``tolerance`` bounds the projected-gradient violation."""

    regularization_c: float = 100.0
    tolerance: float = 1e-4
    max_iterations: int = 1000
    shuffle_seed: int | None = None  # None = fixed cyclic sweep order

    def __post_init__(self):
        if not (np.isfinite(self.regularization_c) and self.regularization_c > 0):
            raise ValueError("regularization_c must be a positive real")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise ValueError("tolerance must be a positive real")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(eq=False)
class BinaryLinearModel:
    weights: np.ndarray  # length D+1, last entry is the folded bias
    support_count: int
    converged: bool
    epochs: int
    dual_objective: float
    objective_history: list = field(repr=False, default_factory=list)


@dataclass(eq=False)
class BinaryKernelModel:
    alphas: np.ndarray  # dual coefficients signed by label, |alpha_i| <= C
    support_indices: np.ndarray
    spec: KernelSpec | None
    converged: bool
    epochs: int
    dual_objective: float
    objective_history: list = field(repr=False, default_factory=list)


@dataclass(eq=False)
class SvmModel:
    class_labels: list
    binaries: list
    mode: str  # "linear_explicit" | "kernel_precomputed"
    config: SvmConfig


def _check_binary_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < 2:
        raise ValueError("y must be a vector with at least two entries")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be +1 or -1")
    if np.all(y == y[0]):
        raise ValueError("training labels contain a single class")
    return y


def _sweep_orders(n: int, config: SvmConfig):
    """Yield one coordinate order per epoch; generated here so both backends share it."""
    if config.shuffle_seed is None:
        order = np.arange(n, dtype=np.int64)
        while True:
            yield order
    else:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(config.shuffle_seed))
        )
        while True:
            yield rng.permutation(n).astype(np.int64)


def _projected_gradient(G, alpha, C) -> np.ndarray:
    pg = G.copy()
    pg[(alpha == 0.0) & (G > 0.0)] = 0.0
    pg[(alpha == C) & (G < 0.0)] = 0.0
    return pg


def train_binary_linear(X, y, config: SvmConfig) -> BinaryLinearModel:
    """Train min 0.5||w||^2 + C sum hinge on explicit features.

    The returned weight vector has length D+1 with the bias folded in as the
    last entry (constant-1 feature augmentation).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be an n x D matrix")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite entries")
    y = _check_binary_labels(y)
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y row counts differ")

    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    qdiag = np.einsum("ij,ij->i", Xa, Xa)  # >= 1 thanks to the bias column
    C = config.regularization_c
    alpha = np.zeros(n)
    w = np.zeros(d + 1)

    converged = False
    epochs = 0
    history = []
    orders = _sweep_orders(n, config)
    for _ in range(config.max_iterations):
        sweep_max = _backend.linear_epoch(Xa, y, qdiag, alpha, w, next(orders), C)
        epochs += 1
        history.append(float(np.sum(alpha) - 0.5 * np.dot(w, w)))
        if sweep_max <= config.tolerance:
            # re-check at the final iterate: sweep violations are measured
            # against a moving w, the contract is against the returned one
            G = y * (Xa @ w) - 1.0
            if np.max(np.abs(_projected_gradient(G, alpha, C))) <= config.tolerance:
                converged = True
                break

    return BinaryLinearModel(
        weights=w,
        support_count=int(np.count_nonzero(alpha)),
        converged=converged,
        epochs=epochs,
        dual_objective=history[-1],
        objective_history=history,
    )


def _square_gram(gram) -> np.ndarray:
    K = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel training needs a square self-Gram matrix")
    if not np.isfinite(K).all():
        raise ValueError("Gram matrix contains non-finite entries")
    if not np.allclose(K, K.T, atol=1e-10):
        raise ValueError("Gram matrix is not symmetric")
    return np.ascontiguousarray(K, dtype=np.float64)


def _train_binary_kernel_prepped(Kp, y, config: SvmConfig, spec) -> BinaryKernelModel:
    """Kp is the symmetric K+1 matrix, already validated."""
    n = Kp.shape[0]
    C = config.regularization_c
    alpha = np.zeros(n)
    u = np.zeros(n)  # Kp @ (alpha * y), maintained incrementally

    converged = False
    epochs = 0
    history = []
    orders = _sweep_orders(n, config)
    for _ in range(config.max_iterations):
        sweep_max = _backend.kernel_epoch(Kp, y, alpha, u, next(orders), C)
        epochs += 1
        beta = alpha * y
        history.append(float(np.sum(alpha) - 0.5 * np.dot(beta, u)))
        if sweep_max <= config.tolerance:
            G = y * (Kp @ beta) - 1.0
            if np.max(np.abs(_projected_gradient(G, alpha, C))) <= config.tolerance:
                converged = True
                break

    beta = alpha * y
    return BinaryKernelModel(
        alphas=beta,
        support_indices=np.flatnonzero(alpha),
        spec=spec,
        converged=converged,
        epochs=epochs,
        dual_objective=history[-1],
        objective_history=history,
    )


def train_binary_kernel(gram, y, config: SvmConfig, spec: KernelSpec | None = None) -> BinaryKernelModel:
    """Train on a precomputed self-Gram matrix.

    The decision function is f(x) = sum_i alphas_i (K(x_i, x) + 1); the +1
    folds the bias into the kernel.
    """
    K = _square_gram(gram)
    y = _check_binary_labels(y)
    if y.shape[0] != K.shape[0]:
        raise ValueError("Gram size and label count differ")
    return _train_binary_kernel_prepped(K + 1.0, y, config, spec)


def _class_order(labels) -> list:
    seen = {}
    for lab in labels:
        if lab not in seen:
            seen[lab] = None
    return list(seen)


def train_multiclass(data, labels, config: SvmConfig, spec: KernelSpec | None = None,
                     threads: int = 1) -> SvmModel:
    """One-vs-rest training; ``data`` is a feature matrix or a self GramMatrix.

    Class order is first-appearance order in ``labels`` and is what predict's
    argmax tie-break refers to. Binary problems are independent, so they may
    train in parallel; results do not depend on ``threads``.
    """
    labels = list(labels)
    classes = _class_order(labels)
    if len(classes) < 2:
        raise ValueError("multi-class training needs at least two distinct labels")

    lab_arr = np.asarray(labels, dtype=object)
    if isinstance(data, GramMatrix):
        mode = "kernel_precomputed"
        Kp = _square_gram(data) + 1.0
        if len(labels) != Kp.shape[0]:
            raise ValueError("Gram size and label count differ")

        def fit(cls):
            y = np.where(lab_arr == cls, 1.0, -1.0)
            return _train_binary_kernel_prepped(Kp, y, config, spec)

    else:
        mode = "linear_explicit"
        X = np.ascontiguousarray(data, dtype=np.float64)
        if len(labels) != X.shape[0]:
            raise ValueError("feature rows and label count differ")

        def fit(cls):
            y = np.where(lab_arr == cls, 1.0, -1.0)
            return train_binary_linear(X, y, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            binaries = list(pool.map(fit, classes))
    else:
        binaries = [fit(cls) for cls in classes]
    return SvmModel(class_labels=classes, binaries=binaries, mode=mode, config=config)


def decision_values(model: SvmModel, data) -> np.ndarray:
    """Per-class decision values, one row per input row.

    Linear mode expects feature rows of the training dimension; kernel mode
    expects rows of kernel values against the full training set.
    """
    A = np.asarray(data, dtype=np.float64)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if model.mode == "linear_explicit":
        Wm = np.stack([b.weights for b in model.binaries], axis=1)
        if A.shape[1] + 1 != Wm.shape[0]:
            raise ValueError(
                f"feature dimension {A.shape[1]} does not match training "
                f"dimension {Wm.shape[0] - 1}"
            )
        return A @ Wm[:-1] + Wm[-1]
    coef = np.stack([b.alphas for b in model.binaries], axis=1)
    if A.shape[1] != coef.shape[0]:
        raise ValueError(
            f"kernel row length {A.shape[1]} does not match training size {coef.shape[0]}"
        )
    # sum_i coef_i (K + 1) = rows @ coef + sum(coef)
    return A @ coef + coef.sum(axis=0)


def predict(model: SvmModel, data):
    """Argmax class per row plus the per-class decision values.

    Ties go to the earliest class in class order.
    """
    dv = decision_values(model, data)
    idx = np.argmax(dv, axis=1)  # first max wins on ties
    return [model.class_labels[i] for i in idx], dv
