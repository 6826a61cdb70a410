"""
Covering-number entropy integrals for Lipschitz-parametrized classes.

The class {f_theta : ||theta|| <= r} with ||f_theta - f_theta'||_inf <= L ||theta - theta'||
is covered at scale eps by at most (1 + 2 L r / eps)^dim uniform balls, so

    log N(eps) <= dim * log(1 + 2 L r / eps),

which vanishes once eps reaches the class diameter 2 L r. Both integrals
integrate the square root of that bound with scipy's adaptive QUADPACK routine.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Optional

from scipy import integrate

from .domain import check_schema

logger = logging.getLogger(__name__)


class QuadratureError(RuntimeError):
    """Quadrature did not meet its tolerance; carries the partial result."""

    def __init__(self, message: str, value: float, abserr: float):
        super().__init__(message)
        self.value = value
        self.abserr = abserr


@dataclass(frozen=True)
class ClassSpec:
    param_dim: int
    param_radius: float
    param_lipschitz: float
    output_bound: float = 1.0

    def __post_init__(self) -> None:
        if self.param_dim < 1:
            raise ValueError("param_dim must be at least 1")
        if self.param_radius < 0 or self.param_lipschitz < 0:
            raise ValueError("param_radius and param_lipschitz must be nonnegative")
        if not self.output_bound > 0:
            raise ValueError("output_bound must be positive")

    @property
    def diameter(self) -> float:
        """Uniform-norm diameter 2 * L * r of the class."""
        return 2.0 * self.param_lipschitz * self.param_radius

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ClassSpec:
        return cls(**check_schema(data, "class"))


@dataclass(frozen=True)
class QuadConfig:
    tol: float = 1e-8
    limit: int = 200

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("quadrature tolerance must be positive")


def logistic_class_spec(param_dim: int, param_radius: float, input_norm: float) -> ClassSpec:
    """sigma(theta^T x) over a ball of thetas; sigma' <= 1/4 gives L = sup||x|| / 4."""
    return ClassSpec(
        param_dim=param_dim,
        param_radius=param_radius,
        param_lipschitz=input_norm / 4.0,
        output_bound=1.0,
    )


def covering_log_bound(spec: ClassSpec, eps: float) -> float:
    """dim * log(1 + diameter / eps), or 0 once eps covers the whole class."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    diameter = spec.diameter
    if diameter == 0.0 or eps >= diameter:
        return 0.0
    return max(0.0, spec.param_dim * math.log1p(diameter / eps))


def _integrate(spec: ClassSpec, upper: float, cfg: QuadConfig) -> float:
    if upper <= 0.0:
        return 0.0

    def integrand(eps: float) -> float:
        return math.sqrt(covering_log_bound(spec, eps))

    out = integrate.quad(
        integrand, 0.0, upper, epsabs=cfg.tol, epsrel=0.0, limit=cfg.limit, full_output=1
    )
    value, abserr = float(out[0]), float(out[1])
    if len(out) > 3 and abserr > cfg.tol:
        raise QuadratureError(
            f"Entropy integral did not converge on (0, {upper:g}]: {out[3]}",
            value=value,
            abserr=abserr,
        )
    logger.debug("Entropy integral on (0, %g]: %.10g (+/- %.1e)", upper, value, abserr)
    return value


def entropy_integral_inf(spec: ClassSpec, quad_cfg: Optional[QuadConfig] = None) -> float:
    """Uniform-norm entropy integral over (0, diameter]; the integrand is zero beyond."""
    return _integrate(spec, spec.diameter, quad_cfg or QuadConfig())


def entropy_integral_l2(spec: ClassSpec, quad_cfg: Optional[QuadConfig] = None) -> float:
    """
    Upper bound on the L2(d) entropy integral over (0, 1], uniformly in d.

    ||.||_{L2(d)} <= ||.||_inf, so the uniform covering numbers dominate.
    """
    return _integrate(spec, min(1.0, spec.diameter), quad_cfg or QuadConfig())
