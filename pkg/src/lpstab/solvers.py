"""Closed-form Tikhonov solver, proximal-gradient lp solver and optimality checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .duality import g_inverse, g_p
from .model import (
    RANK_THRESHOLD,
    ForwardOperator,
    ProblemSpec,
    RankDeficientError,
    SolverConfig,
    _vector,
    lp_norm,
    objective,
)

__all__ = [
    "ConvergenceError",
    "GramMatrix",
    "Solution",
    "gram_matrix",
    "solve_tikhonov",
    "prox_power",
    "solve_lp",
    "representer_certificate",
]

_EPS = np.finfo(np.float64).eps


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap.

    ``iterate`` is the best (last) iterate, ``residual`` its residual.
    """

    def __init__(self, msg: str, iterate, residual: float, iterations: int):
        super().__init__(msg)
        self.iterate = iterate
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class GramMatrix:
    """``H = A A^T`` with its eigendecomposition ``H = P diag(sigma) P^T``."""

    entries: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]

    @property
    def sigma_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def sigma_min(self) -> float:
        return float(self.eigenvalues[0])


@dataclass(frozen=True)
class Solution:
    """Minimizer ``f`` with representer coefficients ``a`` (length M).

    ``grad_residual`` is the lq norm of the objective gradient at ``f``.
    """

    f: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    grad_residual: float
    iterations: int
    objective_trace: Optional[NDArray[np.float64]] = field(default=None, repr=False)


def gram_matrix(A) -> GramMatrix:
    A = A.entries if isinstance(A, ForwardOperator) else np.asarray(A, dtype=np.float64)
    H = A @ A.T
    # exact symmetry, so eigh sees the same matrix the checks do
    H = 0.5 * (H + H.T)
    w, P = np.linalg.eigh(H)
    if w[-1] <= 0.0 or w[0] <= RANK_THRESHOLD * w[-1]:
        raise RankDeficientError(
            f"Gram matrix is singular: eigenvalue {w[0]:.3e} (largest {w[-1]:.3e})",
            float(w[0]),
        )
    for a in (H, w, P):
        a.setflags(write=False)
    return GramMatrix(H, w, P)


def solve_tikhonov(A, y, lam: float) -> Solution:
    """Closed-form minimizer of ``1/2 ||y - A f||^2 + lam ||f||_2^2``.

    ``a = (H + 2 lam I)^{-1} y`` and ``f = A^T a``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    op = A if isinstance(A, ForwardOperator) else ForwardOperator(A)
    H = gram_matrix(op)
    y = _vector(y, op.M, "y")
    P, w = H.eigenvectors, H.eigenvalues
    a = P @ ((P.T @ y) / (w + 2.0 * lam))
    f = op.entries.T @ a
    grad = op.entries.T @ (op.entries @ f - y) + 2.0 * lam * f
    return Solution(f, a, lp_norm(grad, 2.0), 0)


def _prox_power_array(v, tau, p, tol, max_iter=200):
    """Vectorized solve of ``x + tau p g_p(x) = v``; returns ``(x, converged)``."""
    v = np.asarray(v, dtype=np.float64)
    if p == 2.0:
        return v / (1.0 + 2.0 * tau), True
    target = np.abs(v)
    c = tau * p
    scale = np.maximum(1.0, target)
    lo = np.zeros_like(target)
    hi = target.copy()
    # root is below both |v| and the point where the penalty alone equals |v|
    u = np.minimum(target, (target / c) ** (1.0 / (p - 1.0)))
    converged = False
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(max_iter):
            h = u + c * u ** (p - 1.0) - target
            done = (np.abs(h) <= tol * scale) | (hi - lo <= 4.0 * _EPS * scale)
            if done.all():
                converged = True
                break
            hi = np.where(h > 0, u, hi)
            lo = np.where(h < 0, u, lo)
            dh = 1.0 + c * (p - 1.0) * u ** (p - 2.0)
            step = u - h / dh
            ok = np.isfinite(step) & (step > lo) & (step < hi)
            u_new = np.where(ok, step, 0.5 * (lo + hi))
            u = np.where(done, u, u_new)
    return np.sign(v) * u, converged


def prox_power(v: float, tau: float, p: float, tol: float = 1e-12) -> float:
    """Proximal operator of ``tau |x|^p`` at ``v``.

    Returns the unique root of ``x + tau p g_p(x) = v``, found by Newton's
    method safeguarded with bisection on ``[0, |v|]``. The residual
    tolerance is relative to ``max(1, |v|)``.
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    x, ok = _prox_power_array(np.asarray(float(v)), float(tau), float(p), tol)
    if not ok:
        res = abs(float(x) + tau * p * g_p(float(x), p) - v)
        raise ConvergenceError(
            f"prox_power did not reach tolerance {tol:g} (residual {res:.3e})",
            float(x), res, 200,
        )
    return float(x)


def solve_lp(
    spec: ProblemSpec,
    y,
    config: Optional[SolverConfig] = None,
    f0: Optional[ArrayLike] = None,
    record_objective: bool = False,
) -> Solution:
    """Minimize ``1/2 ||y - A f||^2 + lam ||f||_p^p`` by proximal gradient.

    Fixed step ``s = 1 / sigma_max(A A^T)``; each step applies the scalar
    prox of ``s lam |.|^p`` coordinatewise. Starts from ``f0`` (zero by
    default) and stops once the lq norm of the gradient falls below
    ``config.grad_tolerance``.

    Raises
    ------
    ConvergenceError
        If ``config.max_iterations`` is exhausted.
    """
    config = config or SolverConfig()
    A = spec.A
    M, N = A.shape
    y = _vector(y, M, "y")
    p, lam, q = spec.p, spec.lam, spec.q
    AtA = A.T @ A
    Aty = A.T @ y
    s = 1.0 / np.linalg.eigvalsh(A @ A.T)[-1]
    tau = s * lam
    # a prox residual eps shifts the fixed-point gradient by eps / s
    prox_tol = min(config.prox_tolerance, 0.1 * s * config.grad_tolerance)

    f = np.zeros(N) if f0 is None else _vector(f0, N, "f0").copy()
    trace = [] if record_objective else None
    res = np.inf
    for k in range(int(config.max_iterations) + 1):
        smooth_grad = AtA @ f - Aty
        grad = smooth_grad + lam * p * g_p(f, p)
        res = lp_norm(grad, q)
        if trace is not None:
            trace.append(objective(spec, y, f))
        if res <= config.grad_tolerance:
            a = (y - A @ f) / (lam * p)
            return Solution(
                f, a, res, k, None if trace is None else np.asarray(trace)
            )
        if k == config.max_iterations:
            break
        f, _ = _prox_power_array(f - s * smooth_grad, tau, p, prox_tol)
    raise ConvergenceError(
        f"solve_lp: gradient residual {res:.3e} above {config.grad_tolerance:g} "
        f"after {config.max_iterations} iterations",
        f, res, int(config.max_iterations),
    )


def representer_certificate(spec: ProblemSpec, y, sol: Solution) -> float:
    """Fixed-point residual ``||f - g_inverse(A^T a, p)||_p``.

    With ``a = (y - A f) / (lam p)``, stationarity of the objective is
    equivalent to ``f = g_inverse(A^T a, p)``, i.e. ``f`` is the image of a
    combination of the measurement rows under the duality-type map.
    """
    A = spec.A
    y = _vector(y, A.shape[0], "y")
    f = _vector(sol.f, A.shape[1], "f")
    a = (y - A @ f) / (spec.lam * spec.p)
    return lp_norm(f - g_inverse(A.T @ a, spec.p), spec.p)
