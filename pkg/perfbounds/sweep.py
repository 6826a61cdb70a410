"""
xi-sweep: how the Gen-Gap bound and its terms move with the treated share.

For each share xi the m = ceil(xi n) highest-risk sample units (and the same
share of the population) are treated by a fully effective label flip. The bound
side is closed-form; the realized gap refits on the flipped sample and evaluates
on the flipped population.

Usage:
    from perfbounds.sweep import SweepConfig, run_sweep, write_sweep_csv

    rows = run_sweep(SweepConfig(profile=profile, n=41585, pop_n=100_000))
    write_sweep_csv(rows, "sweep.csv")
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import pandas as pd

from .bounds import BoundReport, gen_gap_I, gen_gap_II, radius_R
from .domain import (
    ConstantsProfile,
    DomainBox,
    EmpiricalDistribution,
    _reject_unknown,
    check_schema,
    default_kappa,
)
from .logistic import (
    ConvergenceError,
    FitConfig,
    empirical_risk,
    erm_fit,
    lipschitz_loss_constant,
    prediction_lipschitz_constant,
)
from .synthetic import SyntheticConfig, gen_synthetic
from .transition import TopXiLabelFlip, apply_transition

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["xi", "R", "comp", "samp", "perf", "total", "realized_gap", "m", "n"]
DEFAULT_XI_GRID = tuple(round(0.01 * k, 2) for k in range(1, 51))


def default_sweep_profile(
    box: DomainBox, gamma: float = 1.0, delta: float = 0.05
) -> ConstantsProfile:
    """
    Constants for the logistic class on a unit-ball parameter set over ``box``.

    The uniform entropy integral is the published reference value 7.3855 and the
    complexity inner term uses the normalized form.
    """
    D_Z = box.diameter
    D_Theta = 2.0
    return ConstantsProfile(
        L_ell=lipschitz_loss_constant(D_Z, D_Theta),
        L_a=box.feature_diameter / gamma,
        L_f=prediction_lipschitz_constant(1.0),
        gamma=gamma,
        kappa=default_kappa(D_Z, gamma),
        eps_sens=1.0,
        p=2.0,
        nu=box.nu,
        D_Z=D_Z,
        D_Theta=D_Theta,
        delta=delta,
        F=1.0,
        B=1e-3,
        c_inf=7.3855,
        complexity_form="normalized",
    )


@dataclass(frozen=True)
class SweepConfig:
    profile: ConstantsProfile
    n: int
    pop_n: int = 0
    xi_grid: tuple[float, ...] = DEFAULT_XI_GRID
    delta: Optional[float] = None
    seed: int = 0
    dim_x: int = 28
    bound_variant: Literal["gen_gap_I", "gen_gap_II"] = "gen_gap_I"
    B: Optional[float] = None
    complexity_inf: Optional[float] = None
    fit: FitConfig = field(default_factory=FitConfig)
    formula_only: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "xi_grid", tuple(float(x) for x in self.xi_grid))
        if not self.xi_grid:
            raise ValueError("xi_grid must not be empty")
        bad = [x for x in self.xi_grid if not 0.0 < x <= 1.0]
        if bad:
            raise ValueError(f"xi values outside (0, 1]: {bad}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.formula_only and self.n > self.pop_n:
            raise ValueError(f"n={self.n} exceeds pop_n={self.pop_n}")
        if self.bound_variant not in ("gen_gap_I", "gen_gap_II"):
            raise ValueError(f"Unknown bound variant: {self.bound_variant!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def effective_profile(self) -> ConstantsProfile:
        if self.delta is None:
            return self.profile
        return self.profile.replace(delta=self.delta)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["profile"] = self.profile.to_dict()
        data["fit"] = self.fit.to_dict()
        data["xi_grid"] = list(self.xi_grid)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SweepConfig:
        data = check_schema(data, "sweep")
        _reject_unknown(data, {f.name for f in fields(cls)}, "sweep")
        data["profile"] = ConstantsProfile.from_dict(data["profile"])
        if "fit" in data:
            data["fit"] = FitConfig.from_dict(data["fit"])
        if "xi_grid" in data:
            data["xi_grid"] = tuple(data["xi_grid"])
        return cls(**data)


@dataclass
class SweepRow:
    xi: float
    m: int
    n: int
    report: BoundReport
    realized_gap: float = math.nan

    @property
    def R(self) -> float:
        return self.report.factors["radius"]

    def to_row(self) -> dict[str, float]:
        terms = self.report.terms
        return {
            "xi": self.xi,
            "R": self.R,
            "comp": terms["complexity"],
            "samp": terms["sampling"],
            "perf": terms["performative"],
            "total": self.report.total,
            "realized_gap": self.realized_gap,
            "m": self.m,
            "n": self.n,
        }


def treated_count(xi: float, n: int) -> int:
    return min(n, math.ceil(xi * n - 1e-9))


def _bound_for(cfg: SweepConfig, profile: ConstantsProfile, m: int) -> BoundReport:
    assert profile.L_a_tilde is not None
    R = radius_R(m, cfg.n, profile.delta, profile.p, profile.D_Z, profile.L_a_tilde)
    if cfg.bound_variant == "gen_gap_I":
        return gen_gap_I(profile, cfg.n, R, cfg.complexity_inf)
    return gen_gap_II(profile, cfg.n, R, cfg.complexity_inf, cfg.B)


def realized_gap(
    population: EmpiricalDistribution,
    sample: EmpiricalDistribution,
    theta0: np.ndarray,
    xi: float,
    fit_cfg: FitConfig,
) -> float:
    """
    Risk gap of the model refit after treating the top-xi share under theta0.

    Returns NaN when the refit does not converge.
    """
    flip = TopXiLabelFlip(xi=xi, effectiveness=1.0)
    flipped_sample, _ = apply_transition(flip, sample, theta0)
    flipped_pop, _ = apply_transition(flip, population, theta0)
    try:
        theta1 = erm_fit(flipped_sample, fit_cfg, init=theta0).theta
    except ConvergenceError as exc:
        logger.warning("xi=%g: refit failed, realized gap set to NaN (%s)", xi, exc)
        return math.nan
    return empirical_risk(flipped_pop, theta1) - empirical_risk(flipped_sample, theta1)


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """
    One row per xi, in grid order regardless of worker completion order.

    A failed refit only blanks that row's realized gap.
    """
    profile = cfg.effective_profile
    data: Optional[tuple[EmpiricalDistribution, EmpiricalDistribution, np.ndarray]] = None
    if not cfg.formula_only:
        population, sample = gen_synthetic(
            SyntheticConfig(n=cfg.n, pop_n=cfg.pop_n, dim_x=cfg.dim_x, seed=cfg.seed)
        )
        theta0 = erm_fit(sample, cfg.fit).theta
        data = (population, sample, theta0)

    def cell(xi: float) -> SweepRow:
        m = treated_count(xi, cfg.n)
        row = SweepRow(xi=xi, m=m, n=cfg.n, report=_bound_for(cfg, profile, m))
        if data is not None:
            row.realized_gap = realized_gap(data[0], data[1], data[2], xi, cfg.fit)
        logger.info("xi=%.2f m=%d total=%.6g gap=%.6g", xi, m, row.report.total, row.realized_gap)
        return row

    if cfg.workers == 1:
        return [cell(xi) for xi in cfg.xi_grid]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(cell, cfg.xi_grid))


def sweep_frame(rows: list[SweepRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.to_row() for row in rows], columns=CSV_COLUMNS)
    return frame.astype({"m": "int64", "n": "int64"})


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    """Write the canonical CSV; full-precision floats keep reruns byte-identical."""
    sweep_frame(rows).to_csv(path, index=False, float_format="%.17g", na_rep="nan")


def write_sweep_svg(rows: list[SweepRow], path: str | Path) -> None:
    """Stacked term plot against xi; needs the ``plot`` extra (matplotlib)."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ImportError(
            "SVG output needs matplotlib: pip install performative-bounds[plot]"
        ) from exc

    frame = sweep_frame(rows)
    matplotlib.rcParams["svg.hashsalt"] = "perfbounds"
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.stackplot(
        frame["xi"], frame["samp"], frame["comp"], frame["perf"],
        labels=["sampling", "complexity", "performative"], alpha=0.8,
    )
    if frame["realized_gap"].notna().any():
        ax.plot(frame["xi"], frame["realized_gap"], color="black", marker=".", label="realized gap")
    ax.set_xlabel("treated share xi")
    ax.set_ylabel("bound")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
