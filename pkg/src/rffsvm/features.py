"""Randomized cosine feature maps approximating shift-invariant kernels.

A map projects N-dimensional inputs to M dimensions via
sqrt(2/M) * cos(W x + b); inner products of mapped vectors approximate the
kernel in expectation. Frequency rows of W are drawn from the kernel's
spectral distribution, phases b uniformly from [0, 2pi).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .kernels import GramMatrix, KernelSpec

# the uniform stream yields u in [0, 1); exact zeros are remapped to the next
# representable draw so the inverse-CDF transforms stay finite
_MIN_UNIFORM = 2.0**-53


def _uniform_stream(seed: int) -> np.random.Generator:
    # counter-based generator: the (spec, N, M, seed) tuple pins every bit of
    # the map, which is what lets model files store only the seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_spectral(spec: KernelSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. frequencies from the kernel's spectral distribution.

    gaussian kernel -> normal with variance 2*gamma, laplacian kernel ->
    Cauchy(0, gamma), cauchy kernel -> Laplace(0, gamma). All three are
    inverse-CDF transforms of one uniform draw each, so a given uniform
    stream always produces the same frequencies.
    """
    if not spec.shift_invariant:
        raise ValueError("linear kernel needs no random features")
    if count < 1:
        raise ValueError("count must be >= 1")
    u = rng.random(count)
    u[u == 0.0] = _MIN_UNIFORM
    g = spec.gamma
    if spec.family == "gaussian":
        return np.sqrt(2.0 * g) * ndtri(u)
    if spec.family == "laplacian":
        return g * np.tan(np.pi * (u - 0.5))
    # cauchy kernel: Laplace via sign-split exponential
    h = u - 0.5
    return -g * np.sign(h) * np.log1p(-2.0 * np.abs(h))


@dataclass(frozen=True, eq=False)
class RandomFeatureMap:
    """Frozen projection (W, b) together with the tuple that regenerates it."""

    spec: KernelSpec
    input_dim: int
    target_dim: int
    seed: int
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W.setflags(write=False)
        self.b.setflags(write=False)

    def descriptor(self) -> dict:
        """Seed-only serialization; W and b are rebuilt, never stored."""
        return {
            "family": self.spec.family,
            "gamma": self.spec.gamma,
            "input_dim": self.input_dim,
            "target_dim": self.target_dim,
            "seed": self.seed,
        }


def build_map(spec: KernelSpec, input_dim: int, target_dim: int, seed: int) -> RandomFeatureMap:
    """Materialize the feature map for a kernel; deterministic in (spec, N, M, seed).

    Stream order is part of the model-file contract: all of W row-major,
    then all of b.
    """
    if not spec.shift_invariant:
        raise ValueError("linear kernel needs no random features")
    if input_dim < 1 or target_dim < 1:
        raise ValueError("input_dim and target_dim must be >= 1")
    rng = _uniform_stream(int(seed))
    W = sample_spectral(spec, target_dim * input_dim, rng).reshape(target_dim, input_dim)
    b = 2.0 * np.pi * rng.random(target_dim)
    return RandomFeatureMap(spec, int(input_dim), int(target_dim), int(seed), W, b)


def map_from_descriptor(desc: dict) -> RandomFeatureMap:
    spec = KernelSpec(desc["family"], desc["gamma"])
    return build_map(spec, desc["input_dim"], desc["target_dim"], desc["seed"])


def transform(fmap: RandomFeatureMap, X) -> np.ndarray:
    """Apply the cosine map to each row of X; returns an n x M matrix.

    Matrix product first, then phase add and cosine; every output entry lies
    in [-sqrt(2/M), +sqrt(2/M)].
    """
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("X must be a 2-D matrix (one row per vector)")
    if A.shape[1] != fmap.input_dim:
        raise ValueError(
            f"X has {A.shape[1]} columns but the map expects {fmap.input_dim}"
        )
    if not np.isfinite(A).all():
        raise ValueError("X contains non-finite entries")
    proj = A @ fmap.W.T
    proj += fmap.b
    np.cos(proj, out=proj)
    proj *= np.sqrt(2.0 / fmap.target_dim)
    return proj


def approx_gram(fmap: RandomFeatureMap, X) -> GramMatrix:
    """Gram matrix of the mapped rows; entry (i, j) approximates K(X[i], X[j])."""
    phi = transform(fmap, X)
    return GramMatrix(phi @ phi.T)


def export_dense(fmap: RandomFeatureMap, path) -> None:
    """Write W (row-major) then b as little-endian float64, for interop/debugging."""
    with open(path, "wb") as fh:
        fh.write(fmap.W.astype("<f8").tobytes(order="C"))
        fh.write(fmap.b.astype("<f8").tobytes())
