"""Stability constants for lp-regularized least squares.

Every bound has the form ``||f1 - f2||_p <= K' ||y1 - y2||_2 ** beta`` on
some region of measurement space. The operator norm ``K_p`` of ``A`` from
lp to l2 enters all of the general-p bounds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .duality import g_p
from .model import ForwardOperator, ProblemSpec, objective, _vector
from .solvers import GramMatrix, gram_matrix

__all__ = [
    "BoundSource",
    "Exactness",
    "NormMethod",
    "Region",
    "StabilityBound",
    "OperatorNormResult",
    "GrowthReport",
    "operator_norm",
    "riesz_thorin_bound",
    "estimate_operator_norm",
    "tikhonov_lipschitz",
    "tikhonov_loose",
    "holder_bound_pge2",
    "r_p_ball",
    "r_p_general",
    "local_lipschitz_plt2",
    "abstract_holder",
    "growth_sides_pge2",
    "growth_sides_plt2",
    "growth_check_pge2",
    "growth_check_plt2",
    "applicable_bound",
    "all_bounds",
]


class BoundSource(str, enum.Enum):
    TIKHONOV_TIGHT = "TikhonovTight"
    TIKHONOV_LOOSE = "TikhonovLoose"
    HOLDER_PGE2 = "HolderPge2"
    LOCAL_LIPSCHITZ_PLT2 = "LocalLipschitzPlt2"
    ABSTRACT = "Abstract"


class Exactness(str, enum.Enum):
    EXACT = "Exact"
    UPPER_BOUND = "UpperBound"


class NormMethod(str, enum.Enum):
    SIGMA_MAX = "SigmaMax"
    MAX_COLUMN = "MaxColumn"
    RIESZ_THORIN = "RieszThorin"
    NORM_EQUIVALENCE = "NormEquivalence"


@dataclass(frozen=True)
class Region:
    """Where in measurement space a bound holds.

    ``kind`` is ``"global"``, ``"ball"`` (closed l2 ball of ``radius``) or
    ``"sampled"`` (a finite sample of a compact set).
    """

    kind: str = "global"
    radius: Optional[float] = None
    n_samples: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("global", "ball", "sampled"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "ball" and (self.radius is None or self.radius < 0):
            raise ValueError("ball region needs a radius >= 0")

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


GLOBAL = Region()


@dataclass(frozen=True)
class OperatorNormResult:
    value: float
    exactness: Exactness
    method: NormMethod


@dataclass(frozen=True)
class StabilityBound:
    coefficient: float
    exponent: float
    region: Region
    source: BoundSource
    operator_norm: Optional[OperatorNormResult] = None

    def __post_init__(self):
        if not self.coefficient >= 0:
            raise ValueError(f"coefficient must be >= 0, got {self.coefficient}")
        if not 0 < self.exponent <= 1:
            raise ValueError(f"exponent must lie in (0, 1], got {self.exponent}")

    def value(self, delta_y_norm):
        """Predicted bound on ``||f1 - f2||_p`` for a data change of this size."""
        return self.coefficient * np.asarray(delta_y_norm, dtype=float) ** self.exponent

    def as_dict(self) -> dict:
        out = {
            "source": self.source.value,
            "coefficient": self.coefficient,
            "exponent": self.exponent,
            "region": self.region.as_dict(),
        }
        if self.operator_norm is not None:
            out["K_p"] = {
                "value": self.operator_norm.value,
                "method": self.operator_norm.method.value,
                "exactness": self.operator_norm.exactness.value,
            }
        return out


def _matrix(A):
    return A.entries if isinstance(A, ForwardOperator) else np.asarray(A, dtype=float)


def _eigenvalues(H) -> np.ndarray:
    if isinstance(H, GramMatrix):
        return np.asarray(H.eigenvalues)
    if isinstance(H, ForwardOperator):
        return gram_matrix(H).eigenvalues
    w = np.asarray(H, dtype=float)
    if w.ndim != 1 or w.size == 0 or not np.all(w > 0):
        raise ValueError("expected a GramMatrix or a 1-D array of positive eigenvalues")
    return w


def _spectral_norm(A) -> float:
    return float(np.sqrt(np.linalg.eigvalsh(A @ A.T)[-1]))


def _max_column_norm(A) -> float:
    return float(np.max(np.linalg.norm(A, axis=0)))


def operator_norm(A, p: float) -> OperatorNormResult:
    """Norm of ``A`` as a map from ``(R^N, ||.||_p)`` to ``(R^M, ||.||_2)``.

    Exact for ``p`` in {1, 2}; an upper bound otherwise (interpolation for
    ``1 < p < 2``, norm equivalence ``||f||_2 <= N^(1/2 - 1/p) ||f||_p``
    for ``p > 2``).
    """
    A = _matrix(A)
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p == 1:
        return OperatorNormResult(_max_column_norm(A), Exactness.EXACT, NormMethod.MAX_COLUMN)
    if p == 2:
        return OperatorNormResult(_spectral_norm(A), Exactness.EXACT, NormMethod.SIGMA_MAX)
    if p < 2:
        return OperatorNormResult(
            riesz_thorin_bound(A, p), Exactness.UPPER_BOUND, NormMethod.RIESZ_THORIN
        )
    N = A.shape[1]
    return OperatorNormResult(
        _spectral_norm(A) * N ** (0.5 - 1.0 / p),
        Exactness.UPPER_BOUND,
        NormMethod.NORM_EQUIVALENCE,
    )


def riesz_thorin_bound(A, p: float) -> float:
    """Interpolated bound ``||A||_{1->2}^(1-theta) ||A||_{2->2}^theta``, ``theta = 2 - 2/p``."""
    if not 1 < p < 2:
        raise ValueError(f"riesz_thorin_bound needs p in (1, 2), got {p}")
    A = _matrix(A)
    theta = 2.0 - 2.0 / p
    return _max_column_norm(A) ** (1.0 - theta) * _spectral_norm(A) ** theta


def estimate_operator_norm(
    A, p: float, restarts: int = 10_000, steps: int = 100, seed: int = 0
) -> float:
    """Brute-force lower estimate of ``sup ||A f||_2 / ||f||_p``.

    Random starting points on the lp unit sphere, each refined by ``steps``
    normalized gradient-ascent moves that are kept only when they improve.
    """
    A = _matrix(A)
    rng = np.random.default_rng(seed)
    N = A.shape[1]

    def normalize(F):
        nrm = np.sum(np.abs(F) ** p, axis=1) ** (1.0 / p)
        return F / nrm[:, None]

    F = normalize(rng.standard_normal((restarts, N)))
    val = np.linalg.norm(F @ A.T, axis=1)
    for k in range(steps):
        AF = F @ A.T
        nAF = np.linalg.norm(AF, axis=1)
        # gradient of ||A f||_2 / ||f||_p on the unit sphere (||f||_p = 1)
        G = (AF @ A) / nAF[:, None] - nAF[:, None] * g_p(F, p)
        G /= np.maximum(np.linalg.norm(G, axis=1), 1e-300)[:, None]
        eta = 0.2 * (1.0 - k / steps) + 1e-4
        cand = normalize(F + eta * G)
        cval = np.linalg.norm(cand @ A.T, axis=1)
        better = cval > val
        F[better] = cand[better]
        val[better] = cval[better]
    return float(val.max())


def tikhonov_lipschitz(H, lam: float) -> StabilityBound:
    """Tight Lipschitz constant ``max_m sqrt(s_m) / (s_m + 2 lam)`` for p = 2.

    ``H`` is a :class:`GramMatrix` or the array of its eigenvalues.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    w = _eigenvalues(H)
    coef = float(np.max(np.sqrt(w) / (w + 2.0 * lam)))
    return StabilityBound(coef, 1.0, GLOBAL, BoundSource.TIKHONOV_TIGHT)


def tikhonov_loose(H, lam: float) -> StabilityBound:
    """General-p bound specialized to p = 2: ``max_m sqrt(s_m) / (2 lam)``."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    w = _eigenvalues(H)
    coef = float(np.sqrt(np.max(w)) / (2.0 * lam))
    return StabilityBound(coef, 1.0, GLOBAL, BoundSource.TIKHONOV_LOOSE)


def holder_bound_pge2(
    p: float, lam: float, K_p: float, operator_norm: Optional[OperatorNormResult] = None
) -> StabilityBound:
    """Global Hölder bound for ``p >= 2``.

    Coefficient ``(2^(p-2) K_p / (lam p))^(1/(p-1))``, exponent ``1/(p-1)``.
    """
    if not p >= 2:
        raise ValueError(f"holder_bound_pge2 needs p >= 2, got {p}")
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if not K_p >= 0:
        raise ValueError(f"K_p must be >= 0, got {K_p}")
    coef = (2.0 ** (p - 2.0) * K_p / (lam * p)) ** (1.0 / (p - 1.0))
    return StabilityBound(
        float(coef), 1.0 / (p - 1.0), GLOBAL, BoundSource.HOLDER_PGE2, operator_norm
    )


def r_p_ball(rho: float, lam: float, p: float) -> float:
    """Bound ``(rho^2 / (2 lam))^(1/p)`` on ``||f_y||_p`` for ``||y||_2 <= rho``."""
    if not rho >= 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    return float((rho * rho / (2.0 * lam)) ** (1.0 / p))


def r_p_general(spec: ProblemSpec, Y_samples: Sequence, f_tilde) -> float:
    """``(max_y J(y, f_tilde) / lam)^(1/p)`` over a finite sample of measurements.

    A sampled maximum can under-estimate the maximum over a continuous set;
    callers should treat the result as describing the sample only.
    """
    Y = [np.asarray(getattr(y, "values", y), dtype=float) for y in Y_samples]
    if not Y:
        raise ValueError("r_p_general needs at least one measurement sample")
    worst = max(objective(spec, y, f_tilde) for y in Y)
    return float((worst / spec.lam) ** (1.0 / spec.p))


def local_lipschitz_plt2(
    p: float,
    lam: float,
    K_p: float,
    r_p: float,
    region: Optional[Region] = None,
    operator_norm: Optional[OperatorNormResult] = None,
) -> StabilityBound:
    """Local Lipschitz bound for ``1 < p < 2``.

    Coefficient ``(2 r_p)^(2-p) K_p / (lam p (p-1))`` on the measurement set
    whose solutions have lp norm at most ``r_p``.
    """
    if not 1 < p < 2:
        raise ValueError(f"local_lipschitz_plt2 needs p in (1, 2), got {p}")
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if not (K_p >= 0 and r_p >= 0):
        raise ValueError("K_p and r_p must be >= 0")
    coef = (2.0 * r_p) ** (2.0 - p) * K_p / (lam * p * (p - 1.0))
    return StabilityBound(
        float(coef),
        1.0,
        region if region is not None else Region("sampled"),
        BoundSource.LOCAL_LIPSCHITZ_PLT2,
        operator_norm,
    )


def abstract_holder(K: float, C: float, alpha: float) -> StabilityBound:
    """Hölder bound ``(K / C)^(1/(alpha-1))`` with exponent ``1/(alpha-1)``.

    ``K`` is the Lipschitz constant of the data-fit gradient in ``y``, ``C``
    and ``alpha`` the growth constants of the cost gradient in ``f``.
    """
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")
    if not alpha >= 2:
        raise ValueError(f"alpha must be >= 2, got {alpha}")
    if not K >= 0:
        raise ValueError(f"K must be >= 0, got {K}")
    e = 1.0 / (alpha - 1.0)
    return StabilityBound(float((K / C) ** e), e, GLOBAL, BoundSource.ABSTRACT)


@dataclass(frozen=True)
class GrowthReport:
    p: float
    samples: int
    min_slack: float
    min_relative_slack: float
    violations: int
    # only filled for p in (1, 2): largest z / (|x| + |y|) recovered
    max_z_ratio: Optional[float] = None
    z_violations: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.z_violations == 0


def growth_sides_pge2(x, y, p: float):
    """Both sides of ``(g_p(x) - g_p(y))(x - y) >= 2^(2-p) |x - y|^p``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = (g_p(x, p) - g_p(y, p)) * (x - y)
    rhs = 2.0 ** (2.0 - p) * np.abs(x - y) ** p
    return lhs, rhs


def growth_sides_plt2(x, y, p: float):
    """Both sides of ``(g_p(x) - g_p(y))(x - y) >= (p-1)(|x|+|y|)^(p-2) (x-y)^2``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = (g_p(x, p) - g_p(y, p)) * (x - y)
    s = np.abs(x) + np.abs(y)
    with np.errstate(divide="ignore"):
        rhs = np.where(s > 0, (p - 1.0) * s ** (p - 2.0) * (x - y) ** 2, 0.0)
    return lhs, rhs


# relative slack tolerated on each inequality before counting a violation
_GROWTH_TOL = 1e-12


def _slack_stats(lhs, rhs):
    slack = lhs - rhs
    rel = slack / np.maximum(np.abs(rhs), 1.0)
    return float(slack.min()), float(rel.min()), int(np.count_nonzero(rel < -_GROWTH_TOL))


def growth_check_pge2(p: float, samples: int, rng_seed: int = 0) -> GrowthReport:
    """Check the ``p >= 2`` growth inequality on random pairs in ``[-10, 10]^2``."""
    if not p >= 2:
        raise ValueError(f"growth_check_pge2 needs p >= 2, got {p}")
    rng = np.random.default_rng(rng_seed)
    x, y = rng.uniform(-10.0, 10.0, size=(2, int(samples)))
    lhs, rhs = growth_sides_pge2(x, y, p)
    mn, rel, bad = _slack_stats(lhs, rhs)
    return GrowthReport(float(p), int(samples), mn, rel, bad)


def growth_check_plt2(p: float, samples: int, rng_seed: int = 0) -> GrowthReport:
    """Check the ``1 < p < 2`` growth inequality and recover the mean-value point.

    For ``x != y`` the point ``z`` solving
    ``g_p(x) - g_p(y) = (p-1) z^(p-2) (x - y)`` must satisfy
    ``z <= |x| + |y|``.
    """
    if not 1 < p < 2:
        raise ValueError(f"growth_check_plt2 needs p in (1, 2), got {p}")
    rng = np.random.default_rng(rng_seed)
    x, y = rng.uniform(-10.0, 10.0, size=(2, int(samples)))
    keep = (x != 0) | (y != 0)
    x, y = x[keep], y[keep]
    lhs, rhs = growth_sides_plt2(x, y, p)
    mn, rel, bad = _slack_stats(lhs, rhs)
    d = x != y
    slope = (g_p(x[d], p) - g_p(y[d], p)) / ((p - 1.0) * (x[d] - y[d]))
    z = slope ** (1.0 / (p - 2.0))
    ratio = z / (np.abs(x[d]) + np.abs(y[d]))
    zmax = float(ratio.max()) if ratio.size else 0.0
    zbad = int(np.count_nonzero(ratio > 1.0 + 1e-9))
    return GrowthReport(float(p), int(samples), mn, rel, bad, zmax, zbad)


def applicable_bound(spec: ProblemSpec, rho: Optional[float] = None) -> StabilityBound:
    """Bound matching the regime of ``spec.p``.

    The tight Tikhonov constant for ``p = 2``, the Hölder bound for
    ``p > 2`` and, for ``p < 2``, the local Lipschitz bound on the l2 ball
    of radius ``rho`` (required) using ``r_p`` from :func:`r_p_ball`.
    """
    A, p, lam = spec.A, spec.p, spec.lam
    if p == 2:
        return tikhonov_lipschitz(gram_matrix(A), lam)
    knorm = operator_norm(A, p)
    if p > 2:
        return holder_bound_pge2(p, lam, knorm.value, knorm)
    if rho is None:
        raise ValueError("p < 2 bounds are local: a ball radius rho is required")
    r = r_p_ball(rho, lam, p)
    return local_lipschitz_plt2(p, lam, knorm.value, r, Region("ball", float(rho)), knorm)


def all_bounds(spec: ProblemSpec, rho: Optional[float] = None) -> list:
    """Every bound that applies to ``spec``, tight ones first."""
    A, p, lam = spec.A, spec.p, spec.lam
    out = []
    if p == 2:
        H = gram_matrix(A)
        out += [tikhonov_lipschitz(H, lam), tikhonov_loose(H, lam)]
    if p >= 2:
        knorm = operator_norm(A, p)
        out.append(holder_bound_pge2(p, lam, knorm.value, knorm))
    elif rho is not None:
        out.append(applicable_bound(spec, rho))
    return out
