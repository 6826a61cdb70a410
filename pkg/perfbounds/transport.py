"""
Exact p-Wasserstein distances between small empirical distributions.

Equal-weight supports of equal size reduce to a min-cost assignment
(scipy's Jonker-Volgenant solver); everything else goes through the POT
network simplex. Both are exact, so results double as test oracles.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass
from itertools import permutations
from pathlib import Path
from typing import Any, NamedTuple, Optional

import numpy as np
import ot
import pandas as pd
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .domain import ConstantsProfile, EmpiricalDistribution, check_schema
from .logistic import empirical_risk

logger = logging.getLogger(__name__)

# Cells below this mass are dropped from exported plans
MASS_FLOOR = 1e-15
# Reduced costs up to this (relative) level count as ties between optimal plans
TIE_TOLERANCE = 1e-12


class SupportCapError(ValueError):
    """Combined support exceeds the exact-solver cap."""

    def __init__(self, support: int, cap: int):
        super().__init__(
            f"Combined support {support} exceeds the exact transport cap {cap}; "
            "subsample the distributions or raise the cap"
        )
        self.support = support
        self.cap = cap


@dataclass(frozen=True)
class TransportConfig:
    assignment_cap: int = 2_000
    general_cap: int = 500
    max_simplex_iters: int = 1_000_000

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TransportConfig:
        return cls(**check_schema(data, "transport"))


@dataclass(frozen=True, eq=False)
class CouplingPlan:
    """Nonzero cells of an optimal coupling; ``cost`` is the total p-th power cost."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    cell_cost: np.ndarray
    cost: float

    def marginals(self, n_rows: int, n_cols: int) -> tuple[np.ndarray, np.ndarray]:
        row_mass = np.bincount(self.rows, weights=self.mass, minlength=n_rows)
        col_mass = np.bincount(self.cols, weights=self.mass, minlength=n_cols)
        return row_mass, col_mass

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"src": self.rows, "dst": self.cols, "mass": self.mass, "cost": self.cell_cost}
        )

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _check_pair(d: EmpiricalDistribution, d_prime: EmpiricalDistribution, p: float) -> None:
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"Wasserstein order p={p} outside [1, 2]")
    if d.box.nu != d_prime.box.nu:
        raise ValueError("Distributions live in different dimensions")


def cost_matrix(d: EmpiricalDistribution, d_prime: EmpiricalDistribution, p: float) -> np.ndarray:
    """Pairwise ||z - z'||_2^p."""
    return cdist(d.points, d_prime.points, metric="euclidean") ** p


def _is_assignment(d: EmpiricalDistribution, d_prime: EmpiricalDistribution) -> bool:
    return d.n == d_prime.n and d.is_uniform and d_prime.is_uniform


def _reroute(
    tight: np.ndarray, owner: np.ndarray, start: int, target: int, taken: int, fixed: int
) -> Optional[list[tuple[int, int]]]:
    """
    Alternating path on tight edges that rehouses row ``start`` so that
    column ``target`` ends up used; rows below ``fixed`` keep their columns.

    Returns the (row, col) reassignments, or None when no path exists.
    """
    back: dict[int, tuple[int, int]] = {}
    seen_cols = {taken}
    queue = deque([start])
    while queue:
        row = queue.popleft()
        for col in np.flatnonzero(tight[row]).tolist():
            if col in seen_cols:
                continue
            seen_cols.add(col)
            if col == target:
                moves = [(row, col)]
                while row != start:
                    prev, prev_col = back[row]
                    moves.append((prev, prev_col))
                    row = prev
                return moves
            holder = int(owner[col])
            if holder <= fixed:
                continue
            back[holder] = (row, col)
            queue.append(holder)
    return None


def _lexicographic_assignment(
    costs: np.ndarray, cols: np.ndarray, cfg: TransportConfig
) -> np.ndarray:
    """
    Lexicographically smallest optimal assignment, refined from an optimal one.

    Optimal assignments are exactly the perfect matchings on zero reduced-cost
    edges under optimal duals. Each row in turn takes the smallest such column
    that leaves the later rows matchable.
    """
    n = costs.shape[0]
    uniform = np.full(n, 1.0 / n)
    _, log = ot.emd(uniform, uniform, costs, numItermax=cfg.max_simplex_iters, log=True)
    if log.get("warning"):
        logger.debug("No duals for tie-breaking (%s); keeping the solver's plan", log["warning"])
        return cols
    reduced = costs - np.asarray(log["u"])[:, None] - np.asarray(log["v"])[None, :]
    tight = reduced <= TIE_TOLERANCE * max(1.0, float(costs.max()))
    tight[np.arange(n), cols] = True

    match = cols.copy()
    owner = np.empty(n, dtype=np.int64)
    owner[match] = np.arange(n)
    for i in range(n):
        for j in np.flatnonzero(tight[i, : match[i]]).tolist():
            holder = int(owner[j])
            if holder < i:
                continue
            moves = _reroute(tight, owner, holder, int(match[i]), j, i)
            if moves is None:
                continue
            match[i], owner[j] = j, i
            for row, col in moves:
                match[row], owner[col] = col, row
            break

    base = float(costs[np.arange(n), cols].sum())
    if float(costs[np.arange(n), match].sum()) > base + TIE_TOLERANCE * n * max(1.0, base):
        return cols
    return match


def wp_exact(
    d: EmpiricalDistribution,
    d_prime: EmpiricalDistribution,
    p: float,
    cfg: Optional[TransportConfig] = None,
) -> tuple[float, CouplingPlan]:
    """
    Exact W_p(d, d_prime) and an optimal coupling.

    Args:
        d: Source distribution
        d_prime: Target distribution
        p: Order in [1, 2]
        cfg: Support caps; defaults to TransportConfig()

    Returns:
        (distance, plan) with distance = plan.cost ** (1 / p)

    Raises:
        SupportCapError: If the combined support is above the applicable cap.
    """
    cfg = cfg or TransportConfig()
    _check_pair(d, d_prime, p)
    support = d.n + d_prime.n
    costs = cost_matrix(d, d_prime, p)

    if _is_assignment(d, d_prime):
        if support > cfg.assignment_cap:
            raise SupportCapError(support, cfg.assignment_cap)
        rows, cols = linear_sum_assignment(costs)
        cols = _lexicographic_assignment(costs, cols, cfg)
        mass = np.full(rows.shape[0], 1.0 / d.n)
    else:
        if support > cfg.general_cap:
            raise SupportCapError(support, cfg.general_cap)
        plan, log = ot.emd(
            np.asarray(d.weights), np.asarray(d_prime.weights), costs,
            numItermax=cfg.max_simplex_iters, log=True,
        )
        if log.get("warning"):
            raise RuntimeError(f"Network simplex did not finish: {log['warning']}")
        rows, cols = np.nonzero(plan > MASS_FLOOR)
        mass = plan[rows, cols]

    cell_cost = mass * costs[rows, cols]
    total = max(float(np.sum(cell_cost)), 0.0)
    logger.debug("W_%g over %d x %d support: cost %.6g", p, d.n, d_prime.n, total)
    coupling = CouplingPlan(
        rows=rows.astype(np.int64), cols=cols.astype(np.int64),
        mass=mass, cell_cost=cell_cost, cost=total,
    )
    return total ** (1.0 / p), coupling


def within_cap(
    d: EmpiricalDistribution, d_prime: EmpiricalDistribution, cfg: Optional[TransportConfig] = None
) -> bool:
    cfg = cfg or TransportConfig()
    cap = cfg.assignment_cap if _is_assignment(d, d_prime) else cfg.general_cap
    return d.n + d_prime.n <= cap


def shift_diameter_bound(m: int, n: int, p: float, D_Z: float) -> float:
    """(m / n)^(1/p) * D_Z: W_p after moving m of n equal-weight points anywhere in the box."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= m <= n:
        raise ValueError(f"m={m} must lie in [0, n={n}]")
    return (m / n) ** (1.0 / p) * D_Z


class KRCheck(NamedTuple):
    risk_gap: float
    bound: float
    ok: bool


def kr_gap_check(
    d: EmpiricalDistribution,
    d_prime: EmpiricalDistribution,
    theta: np.ndarray,
    profile: ConstantsProfile,
    cfg: Optional[TransportConfig] = None,
) -> KRCheck:
    """
    Compare |R(d, theta) - R(d', theta)| with L_ell * W_1(d, d').

    The inequality is only guaranteed when profile.L_ell dominates the loss's
    Lipschitz constant in z (see logistic.loss_lipschitz_in_z).
    """
    if d.box != d_prime.box:
        raise ValueError("kr_gap_check needs both distributions on the same box")
    gap = empirical_risk(d, theta) - empirical_risk(d_prime, theta)
    w1, _ = wp_exact(d, d_prime, 1.0, cfg)
    bound = profile.L_ell * w1
    return KRCheck(risk_gap=gap, bound=bound, ok=bool(abs(gap) <= bound + 1e-9))


def brute_force_wp(d: EmpiricalDistribution, d_prime: EmpiricalDistribution, p: float) -> float:
    """Enumerate every assignment of two equal-size uniform supports (n <= 8)."""
    if not _is_assignment(d, d_prime):
        raise ValueError("brute force needs equal-size uniform supports")
    if d.n > 8:
        raise ValueError("brute force enumeration is limited to 8 points")
    costs = cost_matrix(d, d_prime, p)
    idx = np.arange(d.n)
    best = min(float(costs[idx, list(perm)].sum()) for perm in permutations(range(d.n)))
    return (best / d.n) ** (1.0 / p)
