"""
Regularized logistic model - loss, gradient, deterministic ERM, Lipschitz constants.

The parameter vector carries the bias as its last coordinate, matched by a
constant-1 feature appended to every x. The empirical risk is
mean logistic loss + (lambda / 2) * ||theta||^2, so it is lambda-strongly convex.

Usage:
    from perfbounds.logistic import FitConfig, erm_fit

    result = erm_fit(dist, FitConfig(reg_lambda=1.0))
    print(result.theta, result.grad_norm, result.iters)
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.special import expit

from .domain import DomainBox, EmpiricalDistribution, ParamSpace

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """ERM stopped at max_iters before reaching the gradient tolerance."""

    def __init__(self, message: str, theta: np.ndarray, grad_norm: float, iters: int):
        super().__init__(message)
        self.theta = theta
        self.grad_norm = grad_norm
        self.iters = iters


@dataclass(frozen=True)
class FitConfig:
    """Solver settings; reg_lambda is the strong convexity constant gamma."""

    reg_lambda: float = 1.0
    grad_tol: float = 1e-8
    max_iters: int = 10_000
    seed: Optional[int] = None
    param_radius: float = 1e3

    def __post_init__(self) -> None:
        if not self.reg_lambda > 0:
            raise ValueError("reg_lambda must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.param_radius > 0:
            raise ValueError("param_radius must be positive")

    def param_space(self, dim: int) -> ParamSpace:
        return ParamSpace.ball(dim=dim, radius=self.param_radius)

    def digest(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FitConfig:
        return cls(**data)


@dataclass
class FitResult:
    """Outcome of erm_fit."""

    theta: np.ndarray
    grad_norm: float
    iters: int
    config_hash: str
    loss_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta": self.theta.tolist(),
            "grad_norm": self.grad_norm,
            "iters": self.iters,
            "config_hash": self.config_hash,
        }


def augment(features: np.ndarray) -> np.ndarray:
    """Append the constant-1 bias feature to a (n, k) or (k,) feature array."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        return np.append(features, 1.0)
    return np.hstack([features, np.ones((features.shape[0], 1))])


def predict_proba(features: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """sigma(theta^T [x, 1]) for every row."""
    return expit(augment(features) @ theta)


def _check_labels(y: np.ndarray) -> None:
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("logistic loss needs binary labels y in {0, 1}")


def _check_dim_y(dim_y: int) -> None:
    if dim_y != 1:
        raise ValueError(f"logistic model needs exactly one label coordinate, got dim_y={dim_y}")


def _split(z: np.ndarray, dim_y: int = 1) -> tuple[float, np.ndarray]:
    _check_dim_y(dim_y)
    z = np.asarray(z, dtype=np.float64)
    return float(z[0]), z[dim_y:]


def logistic_loss(z: np.ndarray, theta: np.ndarray, reg_lambda: float) -> float:
    """
    Per-example regularized loss log(1 + e^u) - y u + (lambda / 2) ||theta||^2.

    Args:
        z: (y, x) point with y in {0, 1}
        theta: Parameter vector (bias last)
        reg_lambda: L2 strength

    Raises:
        ValueError: If y is not binary.
    """
    y, x = _split(z)
    _check_labels(np.array([y]))
    u = float(augment(x) @ theta)
    return float(np.logaddexp(0.0, u) - y * u + 0.5 * reg_lambda * float(theta @ theta))


def logistic_grad(z: np.ndarray, theta: np.ndarray, reg_lambda: float) -> np.ndarray:
    """Gradient (sigma(u) - y) [x, 1] + lambda theta."""
    y, x = _split(z)
    _check_labels(np.array([y]))
    x_aug = augment(x)
    return (float(expit(x_aug @ theta)) - y) * x_aug + reg_lambda * theta


def losses_at(points: np.ndarray, theta: np.ndarray, dim_y: int = 1) -> np.ndarray:
    """Unregularized loss at raw (y, x) rows; y may be fractional for box-extended evaluation."""
    _check_dim_y(dim_y)
    points = np.asarray(points, dtype=np.float64)
    u = augment(points[:, dim_y:]) @ theta
    return np.logaddexp(0.0, u) - points[:, 0] * u


def pointwise_losses(dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
    """Unregularized loss at every support point."""
    _check_labels(dist.labels)
    return losses_at(dist.points, theta, dist.box.dim_y)


def empirical_risk(
    dist: EmpiricalDistribution, theta: np.ndarray, reg_lambda: float = 0.0
) -> float:
    """Weighted mean loss plus (lambda / 2) ||theta||^2."""
    losses = pointwise_losses(dist, theta)
    return float(dist.weights @ losses) + 0.5 * reg_lambda * float(theta @ theta)


def risk_gradient(
    dist: EmpiricalDistribution, theta: np.ndarray, reg_lambda: float
) -> np.ndarray:
    _check_dim_y(dist.box.dim_y)
    x_aug = augment(dist.features)
    residual = expit(x_aug @ theta) - dist.labels
    return x_aug.T @ (dist.weights * residual) + reg_lambda * theta


def risk_hessian(
    dist: EmpiricalDistribution, theta: np.ndarray, reg_lambda: float
) -> np.ndarray:
    _check_dim_y(dist.box.dim_y)
    x_aug = augment(dist.features)
    s = expit(x_aug @ theta)
    curvature = dist.weights * s * (1.0 - s)
    return (x_aug * curvature[:, None]).T @ x_aug + reg_lambda * np.eye(x_aug.shape[1])


def _smoothness_bound(dist: EmpiricalDistribution, reg_lambda: float) -> float:
    # sigma' <= 1/4, so the Hessian is dominated by X^T W X / 4 + lambda I
    scaled = augment(dist.features) * np.sqrt(dist.weights)[:, None]
    return float(np.linalg.norm(scaled, 2)) ** 2 / 4.0 + reg_lambda


def erm_fit(
    dist: EmpiricalDistribution,
    cfg: FitConfig,
    init: Optional[np.ndarray] = None,
) -> FitResult:
    """
    Minimize the regularized empirical risk over the parameter ball.

    Full-batch projected gradient descent with backtracking. The stopping rule
    uses the gradient mapping theta - P(theta - grad), which equals the gradient
    whenever the constraint is inactive.

    Args:
        dist: Training distribution
        cfg: Solver settings
        init: Warm start; defaults to zeros (or a seeded small draw when cfg.seed is set)

    Returns:
        FitResult with the minimizer and diagnostics

    Raises:
        ConvergenceError: If max_iters is reached before grad_tol.
    """
    _check_dim_y(dist.box.dim_y)
    _check_labels(dist.labels)
    dim = dist.box.dim_x + 1
    space = cfg.param_space(dim)

    if init is not None:
        theta = space.project(np.array(init, dtype=np.float64, copy=True))
    elif cfg.seed is not None:
        theta = space.project(np.random.default_rng(cfg.seed).normal(scale=1e-3, size=dim))
    else:
        theta = np.zeros(dim)

    lam = cfg.reg_lambda
    min_step = 1.0 / _smoothness_bound(dist, lam)
    step = min_step
    f = empirical_risk(dist, theta, lam)
    history = [f]
    grad_norm = math.inf

    for it in range(cfg.max_iters + 1):
        grad = risk_gradient(dist, theta, lam)
        grad_norm = float(np.linalg.norm(theta - space.project(theta - grad)))
        if grad_norm <= cfg.grad_tol:
            logger.debug("ERM converged after %d iterations (grad %.3e)", it, grad_norm)
            return FitResult(theta, grad_norm, it, cfg.digest(), history)
        if it == cfg.max_iters:
            break

        step = 2.0 * step
        while True:
            candidate = space.project(theta - step * grad)
            delta = candidate - theta
            f_new = empirical_risk(dist, candidate, lam)
            sufficient = f + float(grad @ delta) + float(delta @ delta) / (2.0 * step)
            if f_new <= sufficient or step <= min_step:
                break
            step = max(0.5 * step, min_step)

        # The 1/L step always descends in exact arithmetic; only rounding can make f_new > f
        theta, f = candidate, f_new
        history.append(f)

    raise ConvergenceError(
        f"ERM did not reach grad_tol={cfg.grad_tol:g} within {cfg.max_iters} iterations "
        f"(grad norm {grad_norm:.3e})",
        theta=theta,
        grad_norm=grad_norm,
        iters=cfg.max_iters,
    )


def lipschitz_loss_constant(D_Z: float, D_Theta: float) -> float:
    """L_ell = D_Z / (1 + exp(-D_Z * D_Theta))."""
    return D_Z / (1.0 + math.exp(-D_Z * D_Theta))


def argmin_lipschitz_constant(D_X: float, gamma: float) -> tuple[float, float]:
    """(L_a, L_a_tilde) with L_a = D_X / gamma and L_a_tilde = 1 / (1 + L_a)."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    L_a = D_X / gamma
    return L_a, 1.0 / (1.0 + L_a)


def prediction_lipschitz_constant(theta_radius: float) -> float:
    """L_f = radius / 4, since sigma' <= 1/4."""
    if theta_radius < 0:
        raise ValueError("theta_radius must be nonnegative")
    return theta_radius / 4.0


def loss_lipschitz_in_z(theta: np.ndarray, box: DomainBox) -> float:
    """
    Lipschitz constant of z -> loss(z, theta) over the box.

    The loss extends to y in [0, 1] as log(1 + e^u) - y u, whose z-gradient is
    (-u, (sigma(u) - y) theta_x); |u| is maximized at a box corner.
    """
    theta = np.asarray(theta, dtype=np.float64)
    weights = theta[:-1]
    lower = box.lower_array[box.dim_y:]
    upper = box.upper_array[box.dim_y:]
    hi = float(np.sum(np.maximum(weights * lower, weights * upper))) + theta[-1]
    lo = float(np.sum(np.minimum(weights * lower, weights * upper))) + theta[-1]
    u_max = max(abs(hi), abs(lo))
    return math.hypot(u_max, float(np.linalg.norm(weights)))
