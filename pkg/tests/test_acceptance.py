"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import time

import numpy as np
import pytest

from lpstab.bounds import (
    estimate_operator_norm,
    growth_check_pge2,
    growth_check_plt2,
    growth_sides_pge2,
    operator_norm,
    riesz_thorin_bound,
    tikhonov_lipschitz,
    tikhonov_loose,
)
from lpstab.cli import main
from lpstab.duality import ONE, DualVector, duality_map
from lpstab.experiments import load_nu0, sample_problem, stability_probe
from lpstab.model import ForwardOperator, ProblemSpec, SolverConfig, lp_norm
from lpstab.solvers import gram_matrix, solve_lp, solve_tikhonov

pytestmark = pytest.mark.acceptance

PROBE_P = (1.25, 1.5, 2.0, 3.0, 4.0)


@pytest.fixture(scope="module")
def probe_matrix():
    t0 = time.perf_counter()
    reports = {}
    for p in PROBE_P:
        spec = ProblemSpec(sample_problem(2, 3, seed=0), p, 1.0)
        reports[p] = stability_probe(spec, rho=1.0, n_pairs=200, seed=0)
    return reports, time.perf_counter() - t0


def test_duality_map_figure(criterion):
    t0 = time.perf_counter()
    nu0 = load_nu0()
    err_p2 = np.max(np.abs(duality_map(DualVector(nu0, 2.0)) - nu0))
    err_inf = np.max(np.abs(duality_map(DualVector(nu0, ONE)) - np.sign(nu0) * 7.16539416043266))
    j = duality_map(DualVector.for_primal(nu0, 1.01))
    k = int(np.argmax(np.abs(j)))
    rel = abs(j[k] - 2.43077118700778) / 2.43077118700778
    others = np.max(np.abs(np.delete(j, k)))
    elapsed = time.perf_counter() - t0
    ok = err_p2 <= 1e-12 and err_inf <= 1e-9 and k == 2 and rel <= 1e-3 and others < 1e-10 and elapsed < 1
    criterion(
        "1 duality map figure",
        ok,
        f"p=2 err {err_p2:.1e}, p=inf err {err_inf:.1e}, p=1.01 argmax {k} rel {rel:.1e}, "
        f"others {others:.1e}, {elapsed:.2f}s",
    )


def test_bound_non_violation(criterion, probe_matrix):
    reports, elapsed = probe_matrix
    bad = {p: r.violations for p, r in reports.items() if r.violations}
    n_near = {p: sum(x.kind == "near" for x in r.pairs) for p, r in reports.items()}
    util = ", ".join(f"p={p:g}: {r.max_bound_utilization:.4f}" for p, r in reports.items())
    ok = not bad and all(n == 4 * 6 for n in n_near.values()) and elapsed < 60
    criterion("2 bound non-violation", ok, f"violations {bad or 0}, utilization {util}, {elapsed:.1f}s")


def test_tikhonov_consistency(criterion):
    worst = 0.0
    for seed in range(20):
        op = sample_problem(2, 3, seed)
        y = np.random.default_rng(seed).standard_normal(2)
        it = solve_lp(ProblemSpec(op, 2.0, 1.0), y, SolverConfig(grad_tolerance=1e-12))
        worst = max(worst, float(np.linalg.norm(it.f - solve_tikhonov(op, y, 1.0).f)))
    H = gram_matrix(sample_problem(2, 3, 0))
    ordered = all(
        tikhonov_lipschitz(H, lam).coefficient <= tikhonov_loose(H, lam).coefficient
        for lam in np.logspace(-3, 3, 20)
    )
    lam_big = 1e3 * H.sigma_max
    ratio = tikhonov_lipschitz(H, lam_big).coefficient / tikhonov_loose(H, lam_big).coefficient
    ok = worst <= 1e-8 and ordered and ratio >= 0.999
    criterion("3 Tikhonov consistency", ok, f"max l2 gap {worst:.1e}, ordered {ordered}, ratio {ratio:.6f}")


def test_growth_lemmas(criterion):
    t0 = time.perf_counter()
    reps = [growth_check_pge2(p, 100_000, rng_seed=0) for p in (2.0, 3.0, 4.0)]
    reps += [growth_check_plt2(p, 100_000, rng_seed=0) for p in (1.25, 1.5, 1.75)]
    sym = [abs(float(np.subtract(*growth_sides_pge2(1.0, -1.0, p)))) for p in (2.0, 3.0, 4.0)]
    elapsed = time.perf_counter() - t0
    viol = sum(r.violations + r.z_violations for r in reps)
    ok = viol == 0 and max(sym) <= 1e-12 and elapsed < 10
    criterion("4 growth lemmas", ok, f"violations {viol}, symmetric-pair gap {max(sym):.1e}, {elapsed:.1f}s")


def test_riesz_thorin_dominance(criterion):
    worst = np.inf
    endpoint = 0.0
    for seed in range(20):
        A = sample_problem(2, 3, seed).entries
        for p in (1.25, 1.5, 1.75):
            est = estimate_operator_norm(A, p, restarts=10_000, seed=seed)
            worst = min(worst, riesz_thorin_bound(A, p) - est)
        endpoint = max(
            endpoint,
            abs(riesz_thorin_bound(A, 1 + 1e-9) - operator_norm(A, 1).value),
            abs(riesz_thorin_bound(A, 2 - 1e-9) - operator_norm(A, 2).value),
        )
    ok = worst >= 0 and endpoint <= 1e-6
    criterion("5 Riesz-Thorin dominance", ok, f"min margin {worst:.3e}, endpoint gap {endpoint:.1e}")


def test_optimality_certificates(criterion, probe_matrix):
    reports, _ = probe_matrix
    grad = max(r.max_grad_residual for r in reports.values())
    cert = max(r.max_certificate for r in reports.values())
    gap = 0.0
    rng = np.random.default_rng(1)
    cfg = SolverConfig(grad_tolerance=1e-12)
    for p in PROBE_P:
        for seed in range(5):
            spec = ProblemSpec(sample_problem(2, 3, seed), p, 1.0)
            y = rng.standard_normal(2)
            a = solve_lp(spec, y, cfg).f
            b = solve_lp(spec, y, cfg, f0=rng.standard_normal(3)).f
            gap = max(gap, lp_norm(a - b, p))
    ok = grad <= 1e-8 and cert <= 1e-6 and gap <= 1e-6
    criterion(
        "6 optimality certificates",
        ok,
        f"grad residual {grad:.1e}, representer residual {cert:.1e}, uniqueness gap {gap:.1e}",
    )


def test_scaling_asymptote(criterion):
    op = sample_problem(2, 3, seed=0, normalize_rows=True)
    sigma = np.logspace(2, 4, 21)
    coef = [tikhonov_lipschitz(gram_matrix(op.scaled(s)), 1.0).coefficient for s in sigma]
    slope = float(np.polyfit(np.log(sigma), np.log(coef), 1)[0])
    criterion("7 scaling asymptote slope -1.5 +/- 0.05", abs(slope + 1.5) <= 0.05, f"slope {slope:.5f}")


def test_determinism(criterion, tmp_path):
    commands = [
        ["solve", "--p", "1.5", "--seed", "11"],
        ["bounds", "--p", "1.5"],
        ["probe", "--p", "1.5", "--p", "3", "--n-pairs", "20", "--seed", "11"],
        ["figure", "manifold", "--grid-side", "8"],
        ["figure", "scaling", "--format", "json"],
        ["check-growth", "--samples", "2000", "--seed", "11"],
    ]
    mismatched, count = [], 0
    for i, argv in enumerate(commands):
        dirs = [tmp_path / f"{i}_{k}" for k in range(2)]
        codes = [main([*argv, "--out", str(d)]) for d in dirs]
        if codes != [0, 0]:
            mismatched.append(" ".join(argv))
            continue
        for f in sorted(dirs[0].iterdir()):
            count += 1
            if f.read_bytes() != (dirs[1] / f.name).read_bytes():
                mismatched.append(f.name)
    criterion("8 determinism", not mismatched, f"{count} files compared, mismatches {mismatched or 0}")
