"""
Seeded validation campaigns.

Each suite runs a family of randomized instances against an exact oracle or a
closed-form bound and reports every failing instance. A suite passes when no
instance fails.

Usage:
    from perfbounds.validation import run_suite

    result = run_suite("ot-oracle", seed=0)
    assert result.passed, result.failures
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import binom

from .bounds import in_sample_shift_bound, pooled_wald_upper, wald_upper, wald_upper_array
from .domain import ConstantsProfile, DomainBox, EmpiricalDistribution, empirical_from_points
from .logistic import (
    FitConfig,
    argmin_lipschitz_constant,
    logistic_grad,
    logistic_loss,
    loss_lipschitz_in_z,
    risk_hessian,
)
from .rerm import run_rerm
from .robust import (
    ball_inf_enumerate,
    ball_sup_enumerate,
    default_lambda_grid,
    dual_lower,
    dual_upper,
    lambda_cap,
    minimizing_lambda,
)
from .sweep import SweepConfig, default_sweep_profile, run_sweep
from .synthetic import SyntheticConfig, gen_synthetic
from .transition import TopXiLabelFlip, certify_sensitivity
from .transport import brute_force_wp, kr_gap_check, wp_exact

logger = logging.getLogger(__name__)

SLACK = 1e-9


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, message: str) -> None:
        self.checks += 1
        if not ok:
            self.failures.append(message)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": self.checks,
            "failures": list(self.failures),
            "details": dict(self.details),
        }


def _uniform(rng: np.random.Generator, n: int, box: DomainBox) -> EmpiricalDistribution:
    features = rng.random((n, box.dim_x))
    labels = rng.integers(0, 2, size=n).astype(np.float64)
    return empirical_from_points(np.column_stack([labels, features]), box)


def suite_ot_oracle(seed: int = 0, instances: int = 50) -> SuiteResult:
    """Exact W_p against permutation enumeration on equal-weight supports, n <= 6."""
    result = SuiteResult("ot-oracle")
    rng = np.random.default_rng(seed)
    box = DomainBox.unit(dim_x=1)
    worst = 0.0
    for i in range(instances):
        n = int(rng.integers(2, 7))
        p = float(rng.choice([1.0, 1.5, 2.0]))
        d = _uniform(rng, n, box)
        d_prime = _uniform(rng, n, box)
        exact = wp_exact(d, d_prime, p)[0]
        error = abs(exact - brute_force_wp(d, d_prime, p))
        worst = max(worst, error)
        result.check(error <= SLACK, f"instance {i}: |exact - brute| = {error:.3e}")
        backward = wp_exact(d_prime, d, p)[0]
        result.check(abs(exact - backward) <= SLACK, f"instance {i}: asymmetric W_{p:g}")
    result.details["max_abs_error"] = worst
    return result


def suite_shift_bound(seed: int = 0, runs: int = 100, n: int = 200) -> SuiteResult:
    """
    W_p(d_0, d_T) of RERM traces stays within the in-sample shift bound.

    Each flip map is certified at its estimated sensitivity (floor 0) on a
    cross-sample pair and a same-sample pair with a nudged theta.
    """
    result = SuiteResult("shift-bound")
    rng = np.random.default_rng(seed)
    dim_x = 4
    box = DomainBox.unit(dim_x=dim_x)
    gamma = 2.0
    _, L_a_tilde = argmin_lipschitz_constant(box.feature_diameter, gamma)
    fit_cfg = FitConfig(reg_lambda=gamma)
    p = 2.0
    slack_ratio = 0.0
    max_eps = 0.0
    for run in range(runs):
        data_cfg = SyntheticConfig(n=n, pop_n=n, dim_x=dim_x, seed=seed * 1000 + run)
        _, sample = gen_synthetic(data_cfg)
        xi = float(rng.uniform(0.01, 0.2))
        T = int(rng.integers(1, 5))
        flip = TopXiLabelFlip(xi=xi, seed=run)
        theta = rng.normal(size=dim_x + 1)
        nudged = theta + rng.normal(scale=0.1, size=dim_x + 1)
        pairs = [(sample, theta, _uniform(rng, n, box), nudged), (sample, theta, sample, nudged)]
        certified = certify_sensitivity(flip, pairs, p, floor=0.0)
        assert certified.certified_eps is not None
        max_eps = max(max_eps, certified.certified_eps)
        trace = run_rerm(sample, certified, T, fit_cfg, p=p, record_wasserstein=False)
        observed = wp_exact(trace.dists[0], trace.dists[-1], p)[0]
        bound = in_sample_shift_bound(
            certified.certified_eps, T, trace.m_max, n, p, box.diameter, L_a_tilde
        )
        if bound > 0:
            slack_ratio = max(slack_ratio, observed / bound)
        result.check(observed <= bound + SLACK,
                     f"run {run}: W_p {observed:.6g} > bound {bound:.6g} (xi={xi:.3f}, T={T})")
    result.details["max_observed_over_bound"] = slack_ratio
    result.details["max_certified_eps"] = max_eps
    return result


def suite_wald_coverage(
    seed: int = 0, draws: int = 20_000, n: int = 1000, delta: float = 0.05, triples: int = 1000
) -> SuiteResult:
    """Monte Carlo coverage of the Wald upper limit, plus exact pooled dominance."""
    result = SuiteResult("wald-coverage")
    rng = np.random.default_rng(seed)
    for s in (0.1, 0.3):
        m = binom.rvs(n, s, size=draws, random_state=rng)
        coverage = float(np.mean(s <= wald_upper_array(m, n, delta)))
        result.details[f"coverage_s{s:g}"] = coverage
        result.check(coverage >= 0.92, f"s={s}: coverage {coverage:.4f} < 0.92")
    for i in range(triples):
        size = int(rng.integers(1, 5000))
        m = int(rng.integers(0, size + 1))
        T = int(rng.integers(1, 11))
        pooled = pooled_wald_upper([m] * T, size, delta)
        single = wald_upper(m, size, delta)
        result.check(pooled <= single, f"triple {i}: pooled {pooled!r} > single {single!r}")
    return result


def suite_grad_check(seed: int = 0, points: int = 100, datasets: int = 20) -> SuiteResult:
    """Analytic gradients against central differences, and the Hessian's curvature floor."""
    result = SuiteResult("grad-check")
    rng = np.random.default_rng(seed)
    h = 1e-6
    worst = 0.0
    for i in range(points):
        dim_x = int(rng.integers(1, 6))
        z = np.concatenate([[float(rng.integers(0, 2))], rng.random(dim_x)])
        theta = rng.normal(size=dim_x + 1)
        lam = float(rng.uniform(0.0, 2.0))
        grad = logistic_grad(z, theta, lam)
        fd = np.array([
            (logistic_loss(z, theta + h * e, lam) - logistic_loss(z, theta - h * e, lam)) / (2 * h)
            for e in np.eye(dim_x + 1)
        ])
        rel = float(np.linalg.norm(grad - fd)) / max(1.0, float(np.linalg.norm(grad)))
        worst = max(worst, rel)
        result.check(rel <= 1e-5, f"point {i}: relative error {rel:.3e}")
    for i in range(datasets):
        box = DomainBox.unit(dim_x=int(rng.integers(1, 6)))
        dist = _uniform(rng, int(rng.integers(5, 50)), box)
        lam = float(rng.uniform(0.1, 2.0))
        theta = rng.normal(size=box.dim_x + 1)
        smallest = float(np.linalg.eigvalsh(risk_hessian(dist, theta, lam))[0])
        result.check(smallest >= lam - 1e-8,
                     f"dataset {i}: min eigenvalue {smallest:.6g} < {lam:.6g}")
    result.details["max_relative_error"] = worst
    return result


def suite_weak_duality(seed: int = 0, instances: int = 50) -> SuiteResult:
    """Enumerated ball extremes lie within the dual bounds; the dual minimizer respects its cap."""
    result = SuiteResult("weak-duality")
    rng = np.random.default_rng(seed)
    box = DomainBox.unit(dim_x=1)
    for i in range(instances):
        dist = _uniform(rng, 6, box)
        grid = np.column_stack([rng.integers(0, 2, size=10).astype(np.float64), rng.random(10)])
        theta = rng.normal(scale=2.0, size=2)
        R = float(rng.uniform(0.1, 1.0))
        p = float(rng.choice([1.0, 2.0]))
        sup_primal = ball_sup_enumerate(dist, theta, R, p, grid, max_moves=2)
        sup_dual = dual_upper(dist, theta, R, p, z_grid=grid)
        result.check(sup_primal <= sup_dual + SLACK,
                     f"instance {i}: sup {sup_primal:.9g} > dual {sup_dual:.9g}")
        inf_primal = ball_inf_enumerate(dist, theta, R, p, grid, max_moves=2)
        inf_dual = dual_lower(dist, theta, R, p, z_grid=grid)
        result.check(inf_dual <= inf_primal + SLACK,
                     f"instance {i}: inf dual {inf_dual:.9g} > inf {inf_primal:.9g}")
        lam, _ = minimizing_lambda(dist, theta, R, p, z_grid=grid)
        cap = lambda_cap(theta, box, R, p)
        lambdas = default_lambda_grid(theta, box, R, p)
        above = lambdas[lambdas >= cap]
        limit = float(above[0]) if above.size else float(lambdas[-1])
        result.check(lam <= limit, f"instance {i}: lambda {lam:.6g} above cap step {limit:.6g}")
    return result


def suite_kr_gap(seed: int = 0, trials: int = 100, n: int = 50) -> SuiteResult:
    """|R(d) - R(d')| <= L W_1(d, d') with L the loss's Lipschitz constant in z."""
    result = SuiteResult("kr-gap")
    rng = np.random.default_rng(seed)
    box = DomainBox.unit(dim_x=2)
    base = ConstantsProfile(
        L_ell=1.0, L_a=1.0, L_f=0.25, gamma=1.0, kappa=1.0, eps_sens=1.0,
        p=1.0, nu=box.nu, D_Z=box.diameter, D_Theta=2.0, delta=0.05,
    )
    for trial in range(trials):
        d = _uniform(rng, n, box)
        d_prime = _uniform(rng, n, box)
        theta = rng.normal(size=box.dim_x + 1)
        profile = base.replace(L_ell=loss_lipschitz_in_z(theta, box))
        check = kr_gap_check(d, d_prime, theta, profile)
        result.check(check.ok, f"trial {trial}: gap {check.risk_gap:.6g} > {check.bound:.6g}")
    return result


def suite_sweep_validity(
    seed: int = 0, seeds: int = 5, n: int = 400, pop_n: int = 2000
) -> SuiteResult:
    """Realized gaps under the semi-simulation never exceed the Gen-Gap bound."""
    result = SuiteResult("sweep-validity")
    box = DomainBox.unit(dim_x=28)
    profile = default_sweep_profile(box)
    worst = -math.inf
    for offset in range(seeds):
        rows = run_sweep(SweepConfig(profile=profile, n=n, pop_n=pop_n, seed=seed + offset))
        samp = {row.report.terms["sampling"] for row in rows}
        result.check(len(samp) == 1, f"seed {seed + offset}: sampling term varies with xi")
        previous = -math.inf
        for row in rows:
            total = row.report.total
            result.check(not math.isnan(row.realized_gap) and row.realized_gap <= total,
                         f"seed {seed + offset}, xi={row.xi}: gap {row.realized_gap} > {total}")
            result.check(row.report.terms["performative"] >= previous,
                         f"seed {seed + offset}, xi={row.xi}: performative term decreased")
            previous = row.report.terms["performative"]
            worst = max(worst, row.realized_gap - total)
    result.details["max_gap_minus_total"] = worst
    return result


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "ot-oracle": suite_ot_oracle,
    "shift-bound": suite_shift_bound,
    "wald-coverage": suite_wald_coverage,
    "grad-check": suite_grad_check,
    "weak-duality": suite_weak_duality,
    "kr-gap": suite_kr_gap,
    "sweep-validity": suite_sweep_validity,
}


def run_suite(name: str, seed: int = 0, **overrides: Any) -> SuiteResult:
    """Run one campaign by name; ``overrides`` shrink or grow its instance counts."""
    if name not in SUITES:
        raise ValueError(f"Unknown suite {name!r} (expected one of {', '.join(SUITES)})")
    result = SUITES[name](seed=seed, **overrides)
    level = logging.INFO if result.passed else logging.WARNING
    logger.log(level, "Suite %s: %d checks, %d failures", name, result.checks, len(result.failures))
    return result
