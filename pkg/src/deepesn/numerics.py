"""Deterministic numerical kernels.

Everything random in this package flows through :func:`derive_seed` and
:func:`uniform_matrix`: a 64-bit avalanche hash turns (master seed, indices)
tuples into independent PCG64 streams, so matrices are bit-reproducible
across runs and across any parallel execution order.

The linear-algebra kernels are small and explicit:

- :func:`spectral_radius` returns the largest eigenvalue modulus via dense
  eigendecomposition. All matrices built here are at most a few hundred
  rows, where the dense path is fast and accurate to machine precision.
- :func:`spectral_norm` is power iteration on the Gram matrix with a
  relative-residual stopping rule.
- :func:`ridge_solve` solves the regularized least-squares normal equations
  W = T X^T (X X^T + lambda I)^{-1}, falling back to the pseudo-inverse when
  lambda = 0 leaves the Gram matrix singular.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceError, DimensionError

__all__ = [
    "MatrixRole",
    "SeedSpec",
    "derive_seed",
    "generator_for",
    "uniform_matrix",
    "spectral_radius",
    "spectral_norm",
    "ridge_solve",
    "DEFAULT_TOL",
    "MAX_ITERATIONS",
]

DEFAULT_TOL = 1e-10
MAX_ITERATIONS = 10_000

_MASK64 = (1 << 64) - 1

# fixed stream for power-iteration start vectors; not a tunable
_START_VECTOR_SEED = 0x5EED0F


class MatrixRole(enum.IntEnum):
    """Which weight matrix of a layer a random stream feeds."""

    INPUT = 1
    RECURRENT = 2
    INTER_LAYER = 3


@dataclass(frozen=True)
class SeedSpec:
    """Addresses one random matrix inside a reservoir stack.

    Parameters
    ----------
    master_seed : int
        Run-level seed; any Python int, reduced modulo 2**64.
    layer_index : int
        1-based layer the matrix belongs to.
    matrix_role : MatrixRole
        Role of the matrix within its layer.
    """

    master_seed: int
    layer_index: int
    matrix_role: MatrixRole

    def __post_init__(self):
        if self.layer_index < 1:
            raise ValueError(f"layer_index must be >= 1, got {self.layer_index}")
        if not isinstance(self.matrix_role, MatrixRole):
            raise ValueError(f"matrix_role must be a MatrixRole, got {self.matrix_role!r}")


def _splitmix64(z: int) -> int:
    # splitmix64 finalizer; full-avalanche mixing of a 64-bit word
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash a tuple of integers into one 64-bit sub-seed.

    The chain ``acc = splitmix64(acc ^ part)`` avalanches every input bit
    into the result, so adjacent master seeds or indices yield unrelated
    streams. Order matters: ``derive_seed(1, 2) != derive_seed(2, 1)``.
    """
    acc = 0
    for part in parts:
        acc = _splitmix64(acc ^ (int(part) & _MASK64))
    return acc


def generator_for(spec: SeedSpec) -> np.random.Generator:
    """PCG64 generator for the stream addressed by ``spec``."""
    sub_seed = derive_seed(spec.master_seed, spec.layer_index, int(spec.matrix_role))
    return np.random.Generator(np.random.PCG64(sub_seed))


def uniform_matrix(spec: SeedSpec, rows: int, cols: int) -> np.ndarray:
    """Draw a ``rows x cols`` matrix with i.i.d. uniform [-1, 1] entries.

    Bit-identical for equal ``spec`` regardless of process or call order;
    dimensions are validated by the caller.
    """
    rng = generator_for(spec)
    return rng.uniform(-1.0, 1.0, size=(rows, cols))


def _as_matrix(m, *, square: bool = False) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"expected a 2-D matrix with positive dimensions, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def spectral_radius(m, tol: float = DEFAULT_TOL) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Uses dense eigendecomposition, which is exact to machine precision and
    therefore well inside any requested ``tol`` for the matrix sizes this
    package constructs (at most a few hundred rows).

    Raises
    ------
    DimensionError
        If ``m`` is not square.
    ConvergenceError
        If the underlying eigensolver fails to converge.
    """
    a = _as_matrix(m, square=True)
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    try:
        eigenvalues = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    return float(np.max(np.abs(eigenvalues)))


def _start_vector(n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(derive_seed(_START_VECTOR_SEED, n)))
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def spectral_norm(m, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITERATIONS) -> float:
    """Largest singular value via power iteration on the Gram matrix.

    Iterates ``v <- B v`` on the smaller of ``m^T m`` and ``m m^T`` with a
    deterministic start vector, stopping once the relative eigen-residual
    of the Rayleigh quotient drops below ``tol``.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations without meeting the tolerance; the
        exception carries the best estimate so far.
    """
    a = _as_matrix(m)
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    gram = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    n = gram.shape[0]
    v = _start_vector(n)
    theta = 0.0
    for _ in range(max_iter):
        w = gram @ v
        theta = float(v @ w)
        residual = w - theta * v
        if np.linalg.norm(residual) <= tol * max(theta, np.finfo(np.float64).tiny):
            return float(np.sqrt(max(theta, 0.0)))
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            # v landed in the null space; for the PSD Gram matrix of a
            # nonzero m this is measure-zero, so treat m as numerically zero
            return 0.0
        v = w / norm_w
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} within {max_iter} iterations",
        best_estimate=float(np.sqrt(max(theta, 0.0))),
    )


def ridge_solve(states, targets, lam: float) -> np.ndarray:
    """Ridge-regression readout weights W = T X^T (X X^T + lambda I)^{-1}.

    Parameters
    ----------
    states : array_like, shape (n_features, n_samples)
        Design matrix X, one column per sample.
    targets : array_like, shape (n_outputs, n_samples)
        Target matrix T, one column per sample.
    lam : float
        Regularization strength, >= 0. With ``lam = 0`` and a singular Gram
        matrix the minimum-norm least-squares solution ``T pinv(X)`` is
        returned instead.

    Returns
    -------
    numpy.ndarray, shape (n_outputs, n_features)
    """
    x = _as_matrix(states)
    t = _as_matrix(targets)
    if x.shape[1] != t.shape[1]:
        raise DimensionError(
            f"states and targets disagree on sample count: {x.shape[1]} vs {t.shape[1]}"
        )
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0.0:
        raise ValueError(f"lam must be finite and >= 0, got {lam}")
    gram = x @ x.T
    if lam > 0.0:
        gram[np.diag_indices_from(gram)] += lam
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
    except scipy.linalg.LinAlgError:
        if lam > 0.0:
            # lambda > 0 makes the Gram matrix positive definite in exact
            # arithmetic; a failure here means catastrophic conditioning
            raise
        return t @ np.linalg.pinv(x)
    solution = scipy.linalg.cho_solve(factor, x @ t.T, check_finite=False)
    return solution.T
