"""Seeded random problems, empirical stability probes and figure tables."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from importlib import resources
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .bounds import StabilityBound, applicable_bound, tikhonov_lipschitz, tikhonov_loose
from .duality import DualVector, duality_map
from .model import (
    DimensionError,
    ForwardOperator,
    ProblemSpec,
    RankDeficientError,
    SolverConfig,
    lp_norm,
)
from .solvers import ConvergenceError, gram_matrix, representer_certificate, solve_lp, solve_tikhonov

__all__ = [
    "NEAR_SCALES",
    "PROBE_CONFIG",
    "BoundViolationError",
    "SolveError",
    "PairRecord",
    "ProbeReport",
    "load_nu0",
    "sample_problem",
    "sample_ball",
    "stability_probe",
    "empirical_exponents",
    "figure_duality_map",
    "figure_manifold",
    "figure_scaling_sweep",
    "figure_lambda_sweep",
]

NEAR_SCALES = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
# tight enough that solver error stays far below the slack at the smallest scale
PROBE_CONFIG = SolverConfig(grad_tolerance=1e-14)


class BoundViolationError(RuntimeError):
    """A probed pair exceeded its bound by more than the abort slack.

    ``bundle`` holds everything needed to reproduce the pair.
    """

    def __init__(self, msg: str, bundle: dict):
        super().__init__(msg)
        self.bundle = bundle


class SolveError(RuntimeError):
    """The solver failed on one of the probe's measurements."""

    def __init__(self, msg: str, index: int = -1):
        super().__init__(msg, index)
        self.index = index

    def __str__(self):
        return self.args[0]


def load_nu0() -> np.ndarray:
    """The ten-entry dual vector used for the duality-map figure."""
    with resources.files("lpstab.data").joinpath("nu0.csv").open("r") as fh:
        return np.loadtxt(fh, dtype=np.float64)


def sample_problem(
    M: int, N: int, seed: int, normalize_rows: bool = False
) -> ForwardOperator:
    """Standard-normal ``(M, N)`` operator, redrawn until it has full row rank."""
    if M > N:
        raise DimensionError(f"need M <= N, got M={M}, N={N}")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        A = rng.standard_normal((M, N))
        if normalize_rows:
            A /= np.linalg.norm(A, axis=1, keepdims=True)
        try:
            return ForwardOperator(A)
        except RankDeficientError:
            continue
    raise RankDeficientError(f"no full-rank operator in 100 draws (seed {seed})", 0.0)


def sample_ball(rng: np.random.Generator, M: int, rho: float, n: int) -> np.ndarray:
    """``n`` points uniform in the closed l2 ball of radius ``rho`` in ``R^M``."""
    d = rng.standard_normal((n, M))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rho * rng.uniform(size=n) ** (1.0 / M)
    return d * r[:, None]


@dataclass(frozen=True)
class PairRecord:
    kind: str  # "uniform" or "near"
    scale: float  # perturbation scale for near pairs, nan otherwise
    delta_y_norm: float
    delta_f_norm: float
    ratio: float
    bound_value: float
    violated: bool


@dataclass
class ProbeReport:
    p: float
    lam: float
    rho: float
    seed: int
    bound: StabilityBound
    pairs: list
    max_grad_residual: float
    max_certificate: float
    slack: float = 1e-6

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.pairs), default=0.0)

    @property
    def max_bound_utilization(self) -> float:
        c = self.bound.coefficient
        return self.max_ratio / c if c > 0 else (0.0 if self.max_ratio == 0 else np.inf)

    @property
    def violations(self) -> int:
        return sum(r.violated for r in self.pairs)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "rho": self.rho,
            "seed": self.seed,
            "bound": self.bound.as_dict(),
            "n_pairs": len(self.pairs),
            "max_ratio": self.max_ratio,
            "max_bound_utilization": self.max_bound_utilization,
            "violations": self.violations,
            "slack": self.slack,
            "max_grad_residual": self.max_grad_residual,
            "max_certificate": self.max_certificate,
        }

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([asdict(r) for r in self.pairs])
        df.insert(0, "p", self.p)
        return df


def _solve_one(spec, y, config, index):
    try:
        sol = solve_lp(spec, y, config)
    except ConvergenceError as exc:
        raise SolveError(f"solver failed on measurement {index}: {exc}", index) from None
    return sol.f, sol.grad_residual, representer_certificate(spec, y, sol)


def stability_probe(
    spec: ProblemSpec,
    rho: float,
    n_pairs: int,
    config: Optional[SolverConfig] = None,
    seed: int = 0,
    near_scales: Sequence[float] = NEAR_SCALES,
    n_near: int = 4,
    n_jobs: int = 1,
    slack: float = 1e-6,
    abort_slack: float = 1e-3,
) -> ProbeReport:
    """Measure ``||f1 - f2||_p / ||y1 - y2||_2^beta`` against the applicable bound.

    ``n_pairs`` pairs are drawn uniformly from the l2 ball of radius ``rho``.
    On top of that, ``n_near`` base points each get one perturbation per
    entry of ``near_scales`` (relative to ``rho``), staying inside the ball.
    A pair is a violation when its ratio exceeds the bound by ``slack``; an
    excess beyond ``abort_slack`` raises :class:`BoundViolationError`.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if not rho > 0:
        raise ValueError("rho must be > 0")
    config = config or PROBE_CONFIG
    bound = applicable_bound(spec, rho)
    beta = bound.exponent
    M = spec.operator.M
    rng = np.random.default_rng(seed)

    uni = sample_ball(rng, M, rho, 2 * n_pairs).reshape(n_pairs, 2, M)
    margin = max(near_scales, default=0.0)
    bases = sample_ball(rng, M, rho * (1.0 - margin), n_near)
    dirs = rng.standard_normal((n_near, len(near_scales), M))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)

    ys = [u for pair in uni for u in pair]
    layout = [("uniform", np.nan, 2 * i, 2 * i + 1) for i in range(n_pairs)]
    for b in range(n_near):
        ib = len(ys)
        ys.append(bases[b])
        for k, eps in enumerate(near_scales):
            layout.append(("near", float(eps), ib, len(ys)))
            ys.append(bases[b] + eps * rho * dirs[b, k])

    if n_jobs == 1:
        results = [_solve_one(spec, y, config, i) for i, y in enumerate(ys)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_solve_one)(spec, y, config, i) for i, y in enumerate(ys)
        )

    coef = bound.coefficient
    pairs = []
    for idx, (kind, eps, i, j) in enumerate(layout):
        dy = float(np.linalg.norm(ys[i] - ys[j]))
        df = lp_norm(results[i][0] - results[j][0], spec.p)
        ratio = df / dy**beta if dy > 0 else 0.0
        excess = ratio - coef
        if excess > abort_slack:
            raise BoundViolationError(
                f"pair {idx} exceeds bound {coef:.6g} with ratio {ratio:.6g}",
                {
                    "seed": seed,
                    "pair_index": idx,
                    "p": spec.p,
                    "lambda": spec.lam,
                    "rho": rho,
                    "operator": spec.A.tolist(),
                    "y1": ys[i].tolist(),
                    "y2": ys[j].tolist(),
                    "ratio": ratio,
                    "bound": bound.as_dict(),
                },
            )
        pairs.append(PairRecord(kind, eps, dy, df, ratio, coef, bool(excess > slack)))

    return ProbeReport(
        p=spec.p,
        lam=spec.lam,
        rho=float(rho),
        seed=int(seed),
        bound=bound,
        pairs=pairs,
        max_grad_residual=max(r[1] for r in results),
        max_certificate=max(r[2] for r in results),
        slack=slack,
    )


def empirical_exponents(report: ProbeReport) -> list:
    """Log-log slopes of ``||df||`` against ``||dy||`` for each near-pair group."""
    near = [r for r in report.pairs if r.kind == "near"]
    if not near:
        return []
    n_scales = len({r.scale for r in near})
    out = []
    for g in range(0, len(near), n_scales):
        grp = near[g : g + n_scales]
        x = np.log([r.delta_y_norm for r in grp])
        y = np.log([max(r.delta_f_norm, 1e-300) for r in grp])
        out.append(float(np.polyfit(x, y, 1)[0]))
    return out


def _p_label(p: float) -> str:
    return "p=inf" if p == np.inf else f"p={p:g}"


def figure_duality_map(nu0=None, p_list: Sequence[float] = (2.0, 1.01, np.inf)) -> pd.DataFrame:
    """Duality-map images of ``nu0`` for each primal exponent in ``p_list``.

    ``nu0`` defaults to the bundled ten-entry vector. ``p = inf`` uses the
    ``q -> 1`` limit.
    """
    if not len(p_list):
        raise ValueError("p_list must be non-empty")
    nu0 = load_nu0() if nu0 is None else np.asarray(getattr(nu0, "values", nu0), dtype=float)
    table = {"index": np.arange(len(nu0)), "nu0": nu0}
    for p in p_list:
        table[_p_label(p)] = duality_map(DualVector.for_primal(nu0, p))
    return pd.DataFrame(table)


def figure_manifold(
    p_list: Sequence[float] = (1.25, 1.5, 1.75), grid_side: int = 32, seed: int = 0
) -> pd.DataFrame:
    """Images ``f = J(a1 nu1 + a2 nu2)`` over a regular grid of ``a`` in ``[-1, 1]^2``.

    ``nu1`` and ``nu2`` are l2-normalized random vectors in ``R^3``.
    """
    if grid_side < 2:
        raise ValueError("grid_side must be >= 2")
    nu = sample_problem(2, 3, seed, normalize_rows=True).entries
    g = np.linspace(-1.0, 1.0, grid_side)
    a1, a2 = (x.ravel() for x in np.meshgrid(g, g, indexing="ij"))
    rows = []
    for p in p_list:
        for x1, x2 in zip(a1, a2):
            f = duality_map(DualVector.for_primal(x1 * nu[0] + x2 * nu[1], p))
            rows.append((p, x1, x2, *f, np.hypot(x1, x2)))
    return pd.DataFrame(rows, columns=["p", "a1", "a2", "f1", "f2", "f3", "a_norm"])


def _max_tikhonov_ratio(op: ForwardOperator, lam: float, Y1, Y2) -> float:
    best = 0.0
    for y1, y2 in zip(Y1, Y2):
        df = solve_tikhonov(op, y1, lam).f - solve_tikhonov(op, y2, lam).f
        best = max(best, float(np.linalg.norm(df) / np.linalg.norm(y1 - y2)))
    return best


def figure_scaling_sweep(
    sigma_grid: Sequence[float],
    lam: float = 1.0,
    M: int = 2,
    N: int = 3,
    n_pairs: int = 50,
    seed: int = 0,
    normalize_rows: bool = False,
) -> pd.DataFrame:
    """Tight Tikhonov constant of ``sigma * A`` against measured ratios.

    Columns: ``sigma, bound, empirical_max, asymptote`` where the asymptote
    is ``1 / (sigma sqrt(s_min))`` with ``s_min`` the smallest Gram
    eigenvalue of the unscaled operator.
    """
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    if sigma_grid.size == 0 or np.any(sigma_grid <= 0):
        raise ValueError("sigma grid must be non-empty and positive")
    op = sample_problem(M, N, seed, normalize_rows)
    s_min = gram_matrix(op).sigma_min
    rng = np.random.default_rng(seed)
    Y1, Y2 = rng.standard_normal((2, n_pairs, M))
    rows = []
    for sigma in sigma_grid:
        scaled = op.scaled(sigma)
        bound = tikhonov_lipschitz(gram_matrix(scaled), lam).coefficient
        emp = _max_tikhonov_ratio(scaled, lam, Y1, Y2)
        rows.append((sigma, bound, emp, 1.0 / (sigma * np.sqrt(s_min))))
    return pd.DataFrame(rows, columns=["sigma", "bound", "empirical_max", "asymptote"])


def figure_lambda_sweep(
    lambda_grid: Sequence[float],
    base,
    n_pairs: int = 50,
    seed: int = 0,
) -> pd.DataFrame:
    """Tight and loose p = 2 Lipschitz constants against measured ratios.

    ``base`` is a :class:`ProblemSpec` or :class:`ForwardOperator`; only its
    operator is used.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if lambda_grid.size == 0 or np.any(lambda_grid <= 0):
        raise ValueError("lambda grid must be non-empty and positive")
    op = base.operator if isinstance(base, ProblemSpec) else base
    H = gram_matrix(op)
    rng = np.random.default_rng(seed)
    Y1, Y2 = rng.standard_normal((2, n_pairs, op.M))
    rows = []
    for lam in lambda_grid:
        rows.append(
            (
                lam,
                tikhonov_lipschitz(H, lam).coefficient,
                tikhonov_loose(H, lam).coefficient,
                _max_tikhonov_ratio(op, lam, Y1, Y2),
            )
        )
    return pd.DataFrame(rows, columns=["lambda", "tight", "loose", "empirical_max"])
