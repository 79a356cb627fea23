"""Command-line front end.

Subcommands: ``solve``, ``bounds``, ``probe``, ``figure`` and
``check-growth``. A JSON config supplies every setting; flags override it.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 bound violation. Errors are also reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .bounds import (
    all_bounds,
    growth_check_pge2,
    growth_check_plt2,
    operator_norm,
    r_p_ball,
)
from .experiments import (
    BoundViolationError,
    SolveError,
    PROBE_CONFIG,
    figure_duality_map,
    figure_lambda_sweep,
    figure_manifold,
    figure_scaling_sweep,
    sample_ball,
    sample_problem,
    stability_probe,
)
from .model import (
    DimensionError,
    ForwardOperator,
    IllConditionedError,
    ProblemSpec,
    RankDeficientError,
    SolverConfig,
    objective,
    read_matrix_csv,
)
from .solvers import ConvergenceError, representer_certificate, solve_lp, solve_tikhonov

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VIOLATION = 4

DEFAULT_PROBE_P = [1.25, 1.5, 2.0, 3.0, 4.0]
DEFAULT_GROWTH_P = [1.25, 1.5, 1.75, 2.0, 3.0, 4.0]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemSection(_Section):
    M: int = Field(2, ge=1)
    N: int = Field(3, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    normalize_rows: bool = False
    operator_csv: Optional[str] = None
    y: Optional[List[float]] = None
    y_csv: Optional[str] = None


class SolverSection(_Section):
    grad_tolerance: float = Field(1e-8, gt=0)
    max_iterations: int = Field(1_000_000, ge=1)
    prox_tolerance: float = Field(1e-12, gt=0)


class ExperimentSection(_Section):
    kind: Optional[Literal["duality", "manifold", "scaling", "lambda"]] = None
    rho: float = Field(1.0, gt=0)
    n_pairs: int = Field(200, ge=1)
    n_near: int = Field(4, ge=0)
    p_list: Optional[List[float]] = None
    sigma_grid: Optional[List[float]] = None
    lambda_grid: Optional[List[float]] = None
    grid_side: int = Field(32, ge=2)
    samples: int = Field(100_000, ge=1)


class OutputSection(_Section):
    directory: str = "out"
    format: Literal["csv", "json"] = "csv"


class RunConfig(_Section):
    problem: ProblemSection = ProblemSection()
    p: float = Field(2.0, gt=1)
    lambda_: float = Field(1.0, gt=0, alias="lambda")
    method: Literal["prox", "tikhonov"] = "prox"
    solver: SolverSection = SolverSection()
    experiment: ExperimentSection = ExperimentSection()
    output: OutputSection = OutputSection()
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ConfigError(Exception):
    def __init__(self, msg: str, field: Optional[str] = None):
        super().__init__(msg)
        self.field = field


class ViolationExit(Exception):
    def __init__(self, msg: str, bundle_path: str):
        super().__init__(msg)
        self.bundle_path = bundle_path


# ---------------------------------------------------------------- formatting


def _clean(obj):
    """Round floats to 15 significant digits and map non-finite values to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.15g}")
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def _table_text(df: pd.DataFrame, fmt: str) -> str:
    if fmt == "json":
        return _json_text(df.to_dict(orient="records"))
    return df.to_csv(index=False, float_format="%.15g", lineterminator="\n")


def _vector_csv(v) -> str:
    return "".join(f"{x:.15g}\n" for x in np.asarray(v, dtype=float))


class _Outputs:
    """Collects files in memory and moves them into place only at the end."""

    def __init__(self, directory: str):
        self.directory = Path(directory)
        self.files: dict = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def commit(self) -> list:
        self.directory.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=".lpstab-", dir=self.directory))
        try:
            for name, text in self.files.items():
                (tmp / name).write_text(text)
            for name in self.files:
                os.replace(tmp / name, self.directory / name)
        finally:
            shutil.rmtree(tmp, ignore_errors=True)
        return [str(self.directory / n) for n in self.files]


# ---------------------------------------------------------------- config


def _field_name(loc) -> str:
    return ".".join(str(x) for x in loc)


def load_config(args) -> RunConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")

    def put(path, value):
        if value is None:
            return
        node = raw
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config field {key} must be an object", key)
        node[path[-1]] = value

    put(("problem", "seed"), args.seed)
    put(("output", "directory"), args.out)
    put(("output", "format"), args.format)
    for attr, path in [
        ("p", ("p",)),
        ("lam", ("lambda",)),
        ("method", ("method",)),
        ("operator_csv", ("problem", "operator_csv")),
        ("y_csv", ("problem", "y_csv")),
        ("rho", ("experiment", "rho")),
        ("n_pairs", ("experiment", "n_pairs")),
        ("p_list", ("experiment", "p_list")),
        ("kind", ("experiment", "kind")),
        ("samples", ("experiment", "samples")),
        ("grid_side", ("experiment", "grid_side")),
    ]:
        put(path, getattr(args, attr, None))
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        field = _field_name(err["loc"])
        raise ConfigError(f"invalid config field '{field}': {err['msg']}", field) from None


def build_operator(cfg: RunConfig) -> ForwardOperator:
    pr = cfg.problem
    try:
        if pr.operator_csv:
            return ForwardOperator(read_matrix_csv(pr.operator_csv))
        return sample_problem(pr.M, pr.N, pr.seed, pr.normalize_rows)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"invalid operator: {exc}", "problem") from exc


def build_spec(cfg: RunConfig, p: Optional[float] = None) -> ProblemSpec:
    try:
        return ProblemSpec(build_operator(cfg), cfg.p if p is None else p, cfg.lambda_)
    except ValueError as exc:
        raise ConfigError(str(exc), "p") from exc


def build_measurement(cfg: RunConfig, M: int) -> np.ndarray:
    pr = cfg.problem
    if pr.y is not None and pr.y_csv is not None:
        raise ConfigError("give at most one of problem.y and problem.y_csv", "problem.y")
    try:
        if pr.y is not None:
            y = np.asarray(pr.y, dtype=float)
        elif pr.y_csv is not None:
            y = read_matrix_csv(pr.y_csv).ravel()
        else:
            # measurement drawn independently of the operator stream
            rng = np.random.default_rng([pr.seed, 1])
            y = sample_ball(rng, M, cfg.experiment.rho, 1)[0]
    except OSError as exc:
        raise ConfigError(f"cannot read measurement: {exc}", "problem.y_csv") from exc
    if y.shape != (M,) or not np.all(np.isfinite(y)):
        raise ConfigError(f"measurement must be {M} finite numbers", "problem.y")
    return y


def solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(s.grad_tolerance, s.max_iterations, s.prox_tolerance, cfg.problem.seed)


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig, jobs: int = 1) -> list:
    spec = build_spec(cfg)
    y = build_measurement(cfg, spec.operator.M)
    if cfg.method == "tikhonov":
        if spec.p != 2:
            raise ConfigError("method 'tikhonov' requires p = 2", "method")
        sol = solve_tikhonov(spec.operator, y, spec.lam)
    else:
        sol = solve_lp(spec, y, solver_config(cfg))
    out = _Outputs(cfg.output.directory)
    out.add("solution.csv", _vector_csv(sol.f))
    out.add("coefficients.csv", _vector_csv(sol.coefficients))
    out.add(
        "certificate.json",
        _json_text(
            {
                "method": cfg.method,
                "p": spec.p,
                "lambda": spec.lam,
                "seed": cfg.problem.seed,
                "grad_residual": sol.grad_residual,
                "representer_residual": representer_certificate(spec, y, sol),
                "iterations": sol.iterations,
                "objective": objective(spec, y, sol.f),
            }
        ),
    )
    return out.commit()


def cmd_bounds(cfg: RunConfig, jobs: int = 1) -> list:
    spec = build_spec(cfg)
    rho = cfg.experiment.rho
    entries = [b.as_dict() for b in all_bounds(spec, rho)]
    knorm = operator_norm(spec.A, spec.p)
    report = {
        "p": spec.p,
        "lambda": spec.lam,
        "rho": rho,
        "seed": cfg.problem.seed,
        "M": spec.operator.M,
        "N": spec.operator.N,
        "K_p": {
            "value": knorm.value,
            "method": knorm.method.value,
            "exactness": knorm.exactness.value,
        },
        "bounds": entries,
    }
    if spec.p < 2:
        report["r_p"] = r_p_ball(rho, spec.lam, spec.p)
    out = _Outputs(cfg.output.directory)
    out.add("bounds.json", _json_text(report))
    return out.commit()


def cmd_probe(cfg: RunConfig, jobs: int = 1) -> list:
    exp = cfg.experiment
    p_list = exp.p_list if exp.p_list is not None else DEFAULT_PROBE_P
    op = build_operator(cfg)
    config = SolverConfig(
        min(cfg.solver.grad_tolerance, PROBE_CONFIG.grad_tolerance),
        cfg.solver.max_iterations,
        cfg.solver.prox_tolerance,
        cfg.problem.seed,
    )
    out = _Outputs(cfg.output.directory)
    frames, summaries = [], []
    for p in p_list:
        try:
            spec = ProblemSpec(op, p, cfg.lambda_)
        except ValueError as exc:
            raise ConfigError(str(exc), "experiment.p_list") from exc
        try:
            rep = stability_probe(
                spec, exp.rho, exp.n_pairs, config, seed=cfg.problem.seed,
                n_near=exp.n_near, n_jobs=jobs,
            )
        except BoundViolationError as exc:
            bundle = _Outputs(cfg.output.directory)
            bundle.add("repro_bundle.json", _json_text(exc.bundle))
            path = bundle.commit()[0]
            raise ViolationExit(str(exc), path) from None
        frames.append(rep.to_frame())
        summaries.append(rep.summary())
    ext = cfg.output.format
    out.add(f"probe.{ext}", _table_text(pd.concat(frames, ignore_index=True), ext))
    total = sum(s["violations"] for s in summaries)
    out.add(
        "probe_summary.json",
        _json_text({"seed": cfg.problem.seed, "violations": total, "runs": summaries}),
    )
    if total:
        out.add(
            "repro_bundle.json",
            _json_text(
                {
                    "seed": cfg.problem.seed,
                    "operator": op.entries.tolist(),
                    "lambda": cfg.lambda_,
                    "rho": exp.rho,
                    "violating_runs": [s for s in summaries if s["violations"]],
                }
            ),
        )
        out.commit()
        raise ViolationExit(
            f"{total} bound violation(s)", str(Path(cfg.output.directory) / "repro_bundle.json")
        )
    return out.commit()


def cmd_figure(cfg: RunConfig, jobs: int = 1) -> list:
    exp = cfg.experiment
    seed = cfg.problem.seed
    kind = exp.kind
    if kind is None:
        raise ConfigError("figure kind is required", "experiment.kind")
    if kind == "duality":
        table = figure_duality_map(None, exp.p_list or [2.0, 1.01, math.inf])
    elif kind == "manifold":
        table = figure_manifold(exp.p_list or [1.25, 1.5, 1.75], exp.grid_side, seed)
    elif kind == "scaling":
        grid = exp.sigma_grid or list(np.logspace(-2, 4, 61))
        table = figure_scaling_sweep(
            grid, cfg.lambda_, cfg.problem.M, cfg.problem.N, min(exp.n_pairs, 50),
            seed, cfg.problem.normalize_rows,
        )
    else:
        grid = exp.lambda_grid or list(np.logspace(-3, 3, 61))
        table = figure_lambda_sweep(grid, build_operator(cfg), min(exp.n_pairs, 50), seed)
    ext = cfg.output.format
    out = _Outputs(cfg.output.directory)
    out.add(f"figure_{kind}.{ext}", _table_text(table, ext))
    out.add(
        f"figure_{kind}.json" if ext == "csv" else f"figure_{kind}_summary.json",
        _json_text({"kind": kind, "seed": seed, "rows": len(table)}),
    )
    return out.commit()


def cmd_check_growth(cfg: RunConfig, jobs: int = 1) -> list:
    exp = cfg.experiment
    rows = []
    for p in exp.p_list or DEFAULT_GROWTH_P:
        if p >= 2:
            rep = growth_check_pge2(p, exp.samples, cfg.problem.seed)
        elif p > 1:
            rep = growth_check_plt2(p, exp.samples, cfg.problem.seed)
        else:
            raise ConfigError(f"p must be > 1, got {p}", "experiment.p_list")
        rows.append(
            {
                "p": rep.p,
                "samples": rep.samples,
                "min_slack": rep.min_slack,
                "min_relative_slack": rep.min_relative_slack,
                "violations": rep.violations,
                "z_violations": rep.z_violations,
            }
        )
    table = pd.DataFrame(rows)
    ext = cfg.output.format
    out = _Outputs(cfg.output.directory)
    out.add(f"growth.{ext}", _table_text(table, ext))
    total = int(table.violations.sum() + table.z_violations.sum())
    out.add("growth_summary.json", _json_text({"seed": cfg.problem.seed, "violations": total, "checks": rows}))
    paths = out.commit()
    if total:
        raise ViolationExit(f"{total} growth violation(s)", paths[-1])
    return paths


COMMANDS = {
    "solve": cmd_solve,
    "bounds": cmd_bounds,
    "probe": cmd_probe,
    "figure": cmd_figure,
    "check-growth": cmd_check_growth,
}


# ---------------------------------------------------------------- argparse


def _common(sp):
    sp.add_argument("--config", help="JSON run configuration")
    sp.add_argument("--seed", type=int, help="seed for every random draw")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--jobs", type=int, default=1, help="parallel solves inside probes")
    sp.add_argument("--format", choices=["csv", "json"], help="table output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpstab", description="lp-regularized inverse problems: solve, bound, probe."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one problem and write certificates")
    _common(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--method", choices=["prox", "tikhonov"])
    sp.add_argument("--operator-csv")
    sp.add_argument("--y-csv")
    sp.add_argument("--rho", type=float, help="radius of the ball y is drawn from")

    sp = sub.add_parser("bounds", help="evaluate every applicable stability bound")
    _common(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--operator-csv")
    sp.add_argument("--rho", type=float)

    sp = sub.add_parser("probe", help="empirically check bounds on random pairs")
    _common(sp)
    sp.add_argument("--p", dest="p_list", type=float, action="append",
                    help="exponent to probe (repeatable); default 1.25 1.5 2 3 4")
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--operator-csv")
    sp.add_argument("--rho", type=float)
    sp.add_argument("--n-pairs", type=int)

    sp = sub.add_parser("figure", help="regenerate figure data")
    _common(sp)
    sp.add_argument("kind", choices=["duality", "manifold", "scaling", "lambda"])
    sp.add_argument("--p", dest="p_list", type=float, action="append")
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--grid-side", type=int)
    sp.add_argument("--n-pairs", type=int)

    sp = sub.add_parser("check-growth", help="random checks of the g_p growth inequalities")
    _common(sp)
    sp.add_argument("--p", dest="p_list", type=float, action="append")
    sp.add_argument("--samples", type=int)
    return parser


def _fail(code: int, kind: str, msg: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": msg, **extra}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        paths = COMMANDS[args.command](cfg, max(1, args.jobs))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), field=exc.field)
    except (DimensionError, RankDeficientError, IllConditionedError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except (ConvergenceError, SolveError) as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc))
    except ViolationExit as exc:
        return _fail(EXIT_VIOLATION, "violation", str(exc), bundle=exc.bundle_path)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
