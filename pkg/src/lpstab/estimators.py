"""scikit-learn style wrappers around the solvers.

The rows of ``X`` are the measurement functionals and ``y`` the
measurements, so ``X`` has shape ``(M, N)`` with ``M <= N`` and the fitted
``coef_`` is the reconstruction ``f``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import check_exponent, check_positive
from .bounds import applicable_bound, tikhonov_lipschitz
from .duality import DualVector, duality_map
from .model import ForwardOperator, ProblemSpec, SolverConfig
from .solvers import gram_matrix, solve_lp, solve_tikhonov

__all__ = ["LpRegression", "TikhonovRegression", "DualityMapTransformer"]


class LpRegression(RegressorMixin, BaseEstimator):
    r"""Bridge regression solved to a gradient tolerance.

    .. math::

        \min_f \tfrac12 \|y - X f\|_2^2 + \alpha \|f\|_p^p

    Parameters
    ----------
    p : float, default=1.5
        Exponent of the penalty, ``p > 1``.
    alpha : float, default=1.0
        Regularization weight, ``alpha > 0``.
    tol : float, default=1e-8
        Stop once the lq norm of the objective gradient is below ``tol``.
    max_iter : int, default=1_000_000
        Proximal-gradient iteration cap.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        The minimizer.
    dual_coef_ : ndarray of shape (n_samples,)
        Representer coefficients ``(y - X f) / (alpha p)``.
    n_iter_ : int
    grad_residual_ : float
    """

    def __init__(self, p=1.5, alpha=1.0, tol=1e-8, max_iter=1_000_000):
        self.p = p
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def _spec(self, X):
        p = check_exponent(self.p, "p")
        alpha = check_positive(self.alpha, "alpha")
        return ProblemSpec(ForwardOperator(X), p, alpha)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        self.spec_ = self._spec(X)
        config = SolverConfig(
            grad_tolerance=check_positive(self.tol, "tol"), max_iterations=int(self.max_iter)
        )
        sol = solve_lp(self.spec_, y, config)
        self.coef_ = sol.f
        self.dual_coef_ = sol.coefficients
        self.n_iter_ = sol.iterations
        self.grad_residual_ = sol.grad_residual
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_

    def stability_bound(self, rho=None):
        """Bound on how far ``coef_`` moves when ``y`` changes (see :mod:`lpstab.bounds`)."""
        check_is_fitted(self)
        return applicable_bound(self.spec_, rho)


class TikhonovRegression(RegressorMixin, BaseEstimator):
    """Closed-form ``p = 2`` case, ``a = (X X^T + 2 alpha I)^{-1} y``, ``f = X^T a``."""

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        alpha = check_positive(self.alpha, "alpha")
        op = ForwardOperator(X)
        sol = solve_tikhonov(op, y, alpha)
        self.coef_ = sol.f
        self.dual_coef_ = sol.coefficients
        self.grad_residual_ = sol.grad_residual
        self.lipschitz_ = tikhonov_lipschitz(gram_matrix(op), alpha).coefficient
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_


class DualityMapTransformer(TransformerMixin, BaseEstimator):
    """Apply the lq -> lp duality map to every row; ``p = inf`` uses the q -> 1 limit."""

    def __init__(self, p=2.0):
        self.p = p

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if self.p != np.inf:
            check_exponent(self.p, "p")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return np.vstack([duality_map(DualVector.for_primal(row, self.p)) for row in X])
