"""
Wasserstein-ball risk functionals on a finite grid.

The sup over a ball is bounded above by its dual
    min_{lambda >= 0} lambda R^p + E_d[phi_lambda(Z)],
    phi_lambda(z) = max_{z' in grid} loss(z') - lambda ||z - z'||^p,
and the inf is bounded below by the mirrored dual. Both are exact weak-duality
bounds for distributions supported on the grid; the enumeration oracles give
the matching primal side on tiny instances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Any, Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .bounds import gen_gap_I
from .domain import BOX_TOLERANCE, ConstantsProfile, DomainBox, EmpiricalDistribution
from .logistic import empirical_risk, loss_lipschitz_in_z, losses_at
from .transport import TransportConfig, wp_exact

logger = logging.getLogger(__name__)

DEFAULT_MAX_GRID = 10_000
DEFAULT_LAMBDA_POINTS = 64
ENUMERATION_BUDGET = 200_000
MAX_ENUMERATION_SUPPORT = 12
# Rows of cdist evaluated at once
CHUNK_ROWS = 256
FEASIBILITY_TOL = 1e-12


class EnumerationBudgetError(ValueError):
    """Too many candidate perturbations to enumerate."""

    def __init__(self, count: int, budget: int):
        super().__init__(
            f"{count} candidate perturbations exceed the enumeration budget {budget}; "
            "use a smaller grid or fewer moves"
        )
        self.count = count
        self.budget = budget


def make_grid(
    box: DomainBox,
    support: Optional[np.ndarray] = None,
    max_points: int = DEFAULT_MAX_GRID,
) -> np.ndarray:
    """
    Candidate perturbation targets: support plus a uniform lattice of the box.

    Label coordinates only take their two endpoint values. The lattice uses the
    largest per-axis resolution that keeps the grid within max_points; when not
    even two values per feature fit, only the support and the box center are used.
    """
    lower, upper = box.lower_array, box.upper_array
    parts: list[np.ndarray] = []
    if support is not None:
        parts.append(np.asarray(support, dtype=np.float64).reshape(-1, box.nu))
    room = max_points - sum(len(part) for part in parts)
    label_count = 2**box.dim_y
    k = 0
    if box.dim_x == 0:
        k = 1 if label_count <= room else 0
    elif label_count * 2**box.dim_x <= room:
        k = 2
        while label_count * (k + 1) ** box.dim_x <= room:
            k += 1
    if k:
        axes = [np.array([lower[i], upper[i]]) for i in range(box.dim_y)]
        axes += [np.linspace(lower[i], upper[i], k) for i in range(box.dim_y, box.nu)]
        parts.append(np.array(list(product(*axes)), dtype=np.float64))
    else:
        logger.debug("Box too high-dimensional for a lattice; using support and center")
        parts.append(((lower + upper) / 2.0)[None, :])
    grid = np.unique(np.vstack(parts), axis=0)
    return grid


def _check_grid(grid: np.ndarray, box: DomainBox) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[0] == 0 or grid.shape[1] != box.nu:
        raise ValueError(f"grid must be a nonempty (k, {box.nu}) array")
    outside = (grid < box.lower_array - BOX_TOLERANCE) | (grid > box.upper_array + BOX_TOLERANCE)
    if np.any(outside):
        bad = np.flatnonzero(outside.any(axis=1)).tolist()
        raise ValueError(f"Grid points outside the box at {bad}")
    return grid


@dataclass(frozen=True, eq=False)
class BallSpec:
    """W_p ball of radius R around ``center``, restricted to perturbations in ``grid``."""

    center: EmpiricalDistribution
    radius: float
    p: float
    grid: np.ndarray

    def __post_init__(self) -> None:
        if not self.radius >= 0:
            raise ValueError("ball radius must be nonnegative")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError(f"Wasserstein order p={self.p} outside [1, 2]")
        grid = _check_grid(self.grid, self.center.box)
        # Every support point is a valid target, so R = 0 stays exact
        object.__setattr__(self, "grid", np.unique(np.vstack([grid, self.center.points]), axis=0))

    @classmethod
    def around(
        cls, center: EmpiricalDistribution, radius: float, p: float,
        grid: Optional[np.ndarray] = None,
    ) -> BallSpec:
        if grid is None:
            grid = make_grid(center.box, center.points)
        return cls(center, radius, p, grid)

    def sup_upper(self, theta: np.ndarray, lambda_grid: Optional[np.ndarray] = None) -> float:
        return dual_upper(self.center, theta, self.radius, self.p, lambda_grid, self.grid)

    def inf_lower(self, theta: np.ndarray, lambda_grid: Optional[np.ndarray] = None) -> float:
        return dual_lower(self.center, theta, self.radius, self.p, lambda_grid, self.grid)


def dual_phi(z: np.ndarray, theta: np.ndarray, lam: float, grid: np.ndarray, p: float) -> float:
    """max over grid and z itself of loss(z') - lam ||z - z'||^p."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    grid = np.asarray(grid, dtype=np.float64)
    gaps = losses_at(grid, theta) - lam * cdist(z, grid)[0] ** p
    return float(max(losses_at(z, theta)[0], gaps.max()))


def _extremal_means(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    lambdas: np.ndarray,
    grid: np.ndarray,
    p: float,
    sign: float,
) -> np.ndarray:
    """
    E_dist over z of max (sign=+1) or min (sign=-1) over z' of
    loss(z') - sign * lam * ||z - z'||^p, one value per lambda.
    """
    grid_loss = sign * losses_at(grid, theta)
    own = sign * losses_at(dist.points, theta)
    means = np.zeros(lambdas.shape[0])
    for start in range(0, dist.n, CHUNK_ROWS):
        rows = slice(start, start + CHUNK_ROWS)
        cost = cdist(dist.points[rows], grid) ** p
        w = dist.weights[rows]
        for i, lam in enumerate(lambdas):
            best = np.maximum(own[rows], np.max(grid_loss[None, :] - lam * cost, axis=1))
            means[i] += float(w @ best)
    return sign * means


def default_lambda_grid(
    theta: np.ndarray, box: DomainBox, R: float, p: float, points: int = DEFAULT_LAMBDA_POINTS
) -> np.ndarray:
    """0 followed by a geometric grid from 1e-6 to ten times the cap L R^(1-p)."""
    cap = max(lambda_cap(theta, box, R, p), 1e-6)
    return np.concatenate([[0.0], np.geomspace(1e-6, 10.0 * cap, points)])


def lambda_cap(theta: np.ndarray, box: DomainBox, R: float, p: float) -> float:
    """Largest useful multiplier L R^(1-p), with L the loss's Lipschitz constant in z."""
    if not R > 0:
        raise ValueError("the multiplier cap needs R > 0")
    return loss_lipschitz_in_z(theta, box) * R ** (1.0 - p)


def _ball_grid(dist: EmpiricalDistribution, z_grid: Optional[np.ndarray]) -> np.ndarray:
    if z_grid is None:
        return make_grid(dist.box, dist.points)
    return np.vstack([_check_grid(z_grid, dist.box), dist.points])


def _lambda_values(
    dist: EmpiricalDistribution, theta: np.ndarray, R: float, p: float,
    lambda_grid: Optional[np.ndarray],
) -> np.ndarray:
    if lambda_grid is None:
        return default_lambda_grid(theta, dist.box, R, p)
    lambdas = np.asarray(lambda_grid, dtype=np.float64).ravel()
    if lambdas.size == 0 or np.any(lambdas < 0):
        raise ValueError("lambda grid must be nonempty and nonnegative")
    return lambdas


def dual_objective(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    lambda_grid: Optional[np.ndarray] = None,
    z_grid: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(lambdas, lambda R^p + E phi_lambda) over the lambda grid."""
    theta = np.asarray(theta, dtype=np.float64)
    lambdas = _lambda_values(dist, theta, R, p, lambda_grid)
    grid = _ball_grid(dist, z_grid)
    return lambdas, lambdas * R**p + _extremal_means(dist, theta, lambdas, grid, p, 1.0)


def dual_upper(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    lambda_grid: Optional[np.ndarray] = None,
    z_grid: Optional[np.ndarray] = None,
) -> float:
    """
    Upper bound on the worst-case risk over grid-supported d with W_p(dist, d) <= R.

    R = 0 returns the plain risk. The support is always added to the grid.
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    if R == 0:
        return empirical_risk(dist, np.asarray(theta, dtype=np.float64))
    _, values = dual_objective(dist, theta, R, p, lambda_grid, z_grid)
    return float(values.min())


def minimizing_lambda(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    lambda_grid: Optional[np.ndarray] = None,
    z_grid: Optional[np.ndarray] = None,
) -> tuple[float, float]:
    """
    Smallest grid lambda whose dual value is within rounding of the minimum.

    Returns:
        (lambda, dual value)
    """
    if not R > 0:
        raise ValueError("minimizing_lambda needs R > 0")
    lambdas, values = dual_objective(dist, theta, R, p, lambda_grid, z_grid)
    best = float(values.min())
    first = int(np.flatnonzero(values <= best + 1e-12 * max(1.0, abs(best)))[0])
    return float(lambdas[first]), float(values[first])


def dual_lower(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    lambda_grid: Optional[np.ndarray] = None,
    z_grid: Optional[np.ndarray] = None,
) -> float:
    """
    Lower bound on the best-case risk over grid-supported d with W_p(dist, d) <= R:
    max over lambda of -lambda R^p + E[min_z' loss(z') + lambda ||z - z'||^p].
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    theta = np.asarray(theta, dtype=np.float64)
    if R == 0:
        return empirical_risk(dist, theta)
    lambdas = _lambda_values(dist, theta, R, p, lambda_grid)
    grid = _ball_grid(dist, z_grid)
    values = -lambdas * R**p + _extremal_means(dist, theta, lambdas, grid, p, -1.0)
    return float(values.max())


def _candidate_count(n: int, grid_size: int, max_moves: int) -> int:
    return sum(math.comb(n, k) * grid_size**k for k in range(1, max_moves + 1))


def _enumerate_ball(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    z_grid: Optional[np.ndarray],
    max_moves: int,
    budget: int,
    better: Callable[[float, float], bool],
    cfg: Optional[TransportConfig],
) -> float:
    if dist.n > MAX_ENUMERATION_SUPPORT:
        raise ValueError(f"enumeration is limited to {MAX_ENUMERATION_SUPPORT} support points")
    if not 0 <= max_moves <= 2:
        raise ValueError("max_moves must be 0, 1 or 2")
    if R < 0:
        raise ValueError("R must be nonnegative")
    theta = np.asarray(theta, dtype=np.float64)
    grid = make_grid(dist.box, dist.points) if z_grid is None else _check_grid(z_grid, dist.box)
    count = _candidate_count(dist.n, grid.shape[0], max_moves)
    if count > budget:
        raise EnumerationBudgetError(count, budget)

    own = losses_at(dist.points, theta)
    grid_loss = losses_at(grid, theta)
    cost = cdist(dist.points, grid) ** p
    base = float(dist.weights @ own)
    best = base
    radius_p = R**p + FEASIBILITY_TOL
    checked = 0

    for k in range(1, max_moves + 1):
        for movers in combinations(range(dist.n), k):
            idx = list(movers)
            for targets in product(range(grid.shape[0]), repeat=k):
                tgt = list(targets)
                risk = base + float(dist.weights[idx] @ (grid_loss[tgt] - own[idx]))
                if not better(risk, best):
                    continue
                # Moving each point to its own target is one feasible coupling
                naive = float(dist.weights[idx] @ cost[idx, tgt])
                if naive > radius_p:
                    points = np.array(dist.points, copy=True)
                    points[idx] = grid[tgt]
                    checked += 1
                    if wp_exact(dist, dist.with_points(points), p, cfg)[0] ** p > radius_p:
                        continue
                best = risk
    logger.debug("Enumerated %d candidates (%d exact transport checks)", count, checked)
    return best


def ball_sup_enumerate(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    z_grid: Optional[np.ndarray] = None,
    max_moves: int = 1,
    budget: int = ENUMERATION_BUDGET,
    cfg: Optional[TransportConfig] = None,
) -> float:
    """
    Largest risk over distributions reachable by moving at most max_moves support
    points onto grid points while staying within W_p <= R of dist.

    Raises:
        EnumerationBudgetError: If the candidate count exceeds ``budget``.
    """
    return _enumerate_ball(dist, theta, R, p, z_grid, max_moves, budget,
                           lambda a, b: a > b, cfg)


def ball_inf_enumerate(
    dist: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    z_grid: Optional[np.ndarray] = None,
    max_moves: int = 1,
    budget: int = ENUMERATION_BUDGET,
    cfg: Optional[TransportConfig] = None,
) -> float:
    """Smallest risk over the same enumerated perturbations as ball_sup_enumerate."""
    return _enumerate_ball(dist, theta, R, p, z_grid, max_moves, budget,
                           lambda a, b: a < b, cfg)


@dataclass
class SandwichReport:
    realized_gap: float
    sup_upper: float
    inf_lower: float
    radius: float
    p: float
    shifts_within_radius: bool
    bound_total: Optional[float] = None

    @property
    def dro_gap(self) -> float:
        return self.sup_upper - self.inf_lower

    @property
    def holds_i(self) -> bool:
        """Realized gap within the sup-minus-inf sandwich."""
        return self.realized_gap <= self.dro_gap + 1e-9

    @property
    def holds_ii(self) -> Optional[bool]:
        """Sandwich within the Gen-Gap I bound, when one was evaluated."""
        if self.bound_total is None:
            return None
        return self.dro_gap <= self.bound_total + 1e-9

    def to_dict(self) -> dict[str, Any]:
        return {
            "realized_gap": self.realized_gap,
            "sup_upper": self.sup_upper,
            "inf_lower": self.inf_lower,
            "dro_gap": self.dro_gap,
            "radius": self.radius,
            "p": self.p,
            "shifts_within_radius": self.shifts_within_radius,
            "bound_total": self.bound_total,
            "holds_i": self.holds_i,
            "holds_ii": self.holds_ii,
        }


def sandwich_check(
    d0_pop: EmpiricalDistribution,
    d0_sample: EmpiricalDistribution,
    theta: np.ndarray,
    R: float,
    p: float,
    pop_shifted: Optional[EmpiricalDistribution] = None,
    sample_shifted: Optional[EmpiricalDistribution] = None,
    z_grid: Optional[np.ndarray] = None,
    profile: Optional[ConstantsProfile] = None,
    complexity_inf: Optional[float] = None,
    cfg: Optional[TransportConfig] = None,
) -> SandwichReport:
    """
    Check the performative gap against the robust sandwich and the Gen-Gap I bound.

    The realized gap R(pop_shifted, theta) - R(sample_shifted, theta) must not
    exceed sup over the population ball minus inf over the sample ball, provided
    both shifts stay within radius R (reported in ``shifts_within_radius``).
    Shifted distributions default to the unshifted ones. With a profile, the
    sandwich is also compared with gen_gap_I at n = d0_sample.n.
    """
    theta = np.asarray(theta, dtype=np.float64)
    pop_shifted = d0_pop if pop_shifted is None else pop_shifted
    sample_shifted = d0_sample if sample_shifted is None else sample_shifted
    extra = [pop_shifted.points, sample_shifted.points]
    if z_grid is not None:
        extra.append(np.asarray(z_grid, dtype=np.float64))
    grid = np.vstack(extra)

    within = (
        wp_exact(d0_pop, pop_shifted, p, cfg)[0] <= R + 1e-9
        and wp_exact(d0_sample, sample_shifted, p, cfg)[0] <= R + 1e-9
    )
    if not within:
        logger.warning("Observed shifts leave the radius-%g ball; sandwich not guaranteed", R)

    upper = BallSpec(d0_pop, R, p, grid).sup_upper(theta)
    lower = BallSpec(d0_sample, R, p, grid).inf_lower(theta)
    bound_total = None
    if profile is not None:
        bound_total = gen_gap_I(profile, d0_sample.n, R, complexity_inf).total
    return SandwichReport(
        realized_gap=empirical_risk(pop_shifted, theta) - empirical_risk(sample_shifted, theta),
        sup_upper=upper,
        inf_lower=lower,
        radius=R,
        p=p,
        shifts_within_radius=bool(within),
        bound_total=bound_total,
    )
