"""Problem definition for lp-regularized linear inverse problems.

The objective throughout the package is

.. math::

    J(y, f) = \\tfrac12 \\|y - A f\\|_2^2 + \\lambda \\|f\\|_p^p

with a full-row-rank measurement matrix ``A`` of shape ``(M, N)``, ``M <= N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .duality import g_p

__all__ = [
    "DimensionError",
    "RankDeficientError",
    "IllConditionedError",
    "ForwardOperator",
    "ProblemSpec",
    "Signal",
    "Measurement",
    "SolverConfig",
    "lp_norm",
    "objective",
    "gradient",
    "synthesis_from_analysis",
    "read_matrix_csv",
    "write_matrix_csv",
]

RANK_THRESHOLD = 1e-10
CONDITION_THRESHOLD = 1e12


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


class RankDeficientError(ValueError):
    """Raised when the measurement rows are not linearly independent.

    ``eigenvalue`` holds the offending (near-zero) eigenvalue of ``A A^T``.
    """

    def __init__(self, msg: str, eigenvalue: float):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


class IllConditionedError(ValueError):
    """Raised when a matrix that must be inverted is singular or nearly so."""

    def __init__(self, msg: str, condition: float):
        super().__init__(msg)
        self.condition = condition


def _frozen(a: ArrayLike, ndim: int, name: str) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def lp_norm(x: ArrayLike, r: float) -> float:
    """lr norm of a vector for any ``r`` in ``[1, inf]``."""
    x = np.asarray(x, dtype=np.float64)
    if r == np.inf:
        return float(np.max(np.abs(x), initial=0.0))
    if r < 1:
        raise ValueError(f"norm index must be >= 1, got {r}")
    scale = np.max(np.abs(x), initial=0.0)
    if scale == 0.0:
        return 0.0
    # scaling avoids overflow for large r
    return float(scale * np.sum((np.abs(x) / scale) ** r) ** (1.0 / r))


@dataclass(frozen=True)
class ForwardOperator:
    """Dense ``(M, N)`` measurement matrix; row ``m`` is the m-th functional.

    Construction checks finiteness, ``M <= N`` and full row rank via the
    eigenvalues of ``A A^T`` (relative threshold 1e-10).
    """

    entries: NDArray[np.float64]

    def __post_init__(self):
        A = _frozen(self.entries, 2, "operator")
        object.__setattr__(self, "entries", A)
        M, N = A.shape
        if M == 0 or N == 0:
            raise DimensionError("operator must have at least one row and column")
        if M > N:
            raise DimensionError(f"operator needs M <= N, got M={M}, N={N}")
        eig = np.linalg.eigvalsh(A @ A.T)
        top = eig[-1]
        if top <= 0.0 or eig[0] <= RANK_THRESHOLD * top:
            raise RankDeficientError(
                f"measurement rows are linearly dependent: eigenvalue {eig[0]:.3e} of "
                f"A A^T is below {RANK_THRESHOLD:g} x {top:.3e}",
                float(eig[0]),
            )

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __matmul__(self, f):
        return self.entries @ np.asarray(f)

    @property
    def T(self) -> NDArray[np.float64]:
        return self.entries.T

    def scaled(self, sigma: float) -> "ForwardOperator":
        return ForwardOperator(sigma * self.entries)

    @classmethod
    def from_csv(cls, path) -> "ForwardOperator":
        return cls(read_matrix_csv(path))


@dataclass(frozen=True)
class ProblemSpec:
    """``(operator, p, lam)`` defining ``1/2 ||y - A f||^2 + lam ||f||_p^p``."""

    operator: ForwardOperator
    p: float
    lam: float

    def __post_init__(self):
        if not isinstance(self.operator, ForwardOperator):
            object.__setattr__(self, "operator", ForwardOperator(self.operator))
        p, lam = float(self.p), float(self.lam)
        if not (np.isfinite(p) and p > 1.0):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if not (np.isfinite(lam) and lam > 0.0):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lam", lam)

    @property
    def q(self) -> float:
        """Conjugate exponent ``p / (p - 1)``."""
        return self.p / (self.p - 1.0)

    @property
    def A(self) -> NDArray[np.float64]:
        return self.operator.entries


@dataclass(frozen=True)
class Signal:
    """Reconstruction ``f`` of length N."""

    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 1, "signal"))

    def norm(self, r: float = 2.0) -> float:
        return lp_norm(self.values, r)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Measurement:
    """Data vector ``y`` of length M."""

    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, 1, "measurement"))

    def norm(self, r: float = 2.0) -> float:
        return lp_norm(self.values, r)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SolverConfig:
    grad_tolerance: float = 1e-8
    max_iterations: int = 1_000_000
    prox_tolerance: float = 1e-12
    rng_seed: int = 0

    def __post_init__(self):
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be > 0")
        if not self.prox_tolerance > 0:
            raise ValueError("prox_tolerance must be > 0")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")


def _vector(x, length: int, name: str) -> NDArray[np.float64]:
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != length:
        raise DimensionError(f"{name} must have shape ({length},), got {x.shape}")
    return x


def objective(spec: ProblemSpec, y, f) -> float:
    """Value of ``1/2 ||y - A f||_2^2 + lam ||f||_p^p``."""
    A = spec.A
    y = _vector(y, A.shape[0], "y")
    f = _vector(f, A.shape[1], "f")
    r = y - A @ f
    return float(0.5 * r @ r + spec.lam * np.sum(np.abs(f) ** spec.p))


def gradient(spec: ProblemSpec, y, f) -> NDArray[np.float64]:
    """Gradient ``A^T (A f - y) + lam p g_p(f)`` of the objective in ``f``."""
    A = spec.A
    y = _vector(y, A.shape[0], "y")
    f = _vector(f, A.shape[1], "f")
    return A.T @ (A @ f - y) + spec.lam * spec.p * g_p(f, spec.p)


def synthesis_from_analysis(A_tilde: ArrayLike, L: ArrayLike) -> ForwardOperator:
    """Fold an invertible regularization operator into the forward model.

    The analysis problem penalizes ``||L f~||_p^p`` with forward matrix
    ``A~``; the substitution ``f = L f~`` yields the synthesis problem with
    ``A = A~ L^{-1}``. Map reconstructions back with ``f~ = L^{-1} f``.
    """
    A_tilde = _frozen(A_tilde, 2, "A_tilde")
    L = _frozen(L, 2, "L")
    n = A_tilde.shape[1]
    if L.shape != (n, n):
        raise DimensionError(f"L must have shape ({n}, {n}), got {L.shape}")
    cond = float(np.linalg.cond(L))
    if not np.isfinite(cond) or cond > CONDITION_THRESHOLD:
        raise IllConditionedError(
            f"L is singular or ill-conditioned (condition estimate {cond:.3e})", cond
        )
    # A L^{-1} = (L^{-T} A^T)^T
    return ForwardOperator(np.linalg.solve(L.T, A_tilde.T).T)


def read_matrix_csv(path) -> NDArray[np.float64]:
    """Headerless row-major CSV; a single line or column reads as a 2-D array."""
    arr = np.loadtxt(Path(path), delimiter=",", dtype=np.float64, ndmin=2)
    return arr


def write_matrix_csv(path, a: ArrayLike) -> None:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    np.savetxt(Path(path), a, delimiter=",", fmt="%.15g")
