"""
Seeded synthetic population with a fixed logistic ground truth.

Features are uniform on [0, 1]^dim_x and labels are Bernoulli(sigma(w^T x + b)).
The weights alternate in sign with magnitudes rising linearly from 0.3 to 0.6,
and b centers the logit, so labels stay balanced and the true model only
separates the classes moderately.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np
from scipy.special import expit

from .domain import DomainBox, EmpiricalDistribution, _reject_unknown, check_schema

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    pop_n: int
    dim_x: int = 28
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.dim_x < 1:
            raise ValueError("n and dim_x must be at least 1")
        if self.n > self.pop_n:
            raise ValueError(f"sample size n={self.n} exceeds population size {self.pop_n}")

    @property
    def box(self) -> DomainBox:
        return DomainBox.unit(dim_x=self.dim_x)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SyntheticConfig:
        data = check_schema(data, "synthetic")
        _reject_unknown(data, {"n", "pop_n", "dim_x", "seed"}, "synthetic")
        return cls(**data)


def ground_truth(dim_x: int) -> tuple[np.ndarray, float]:
    """(w, b) of the label model."""
    steps = np.arange(dim_x)
    ramp = steps / (dim_x - 1) if dim_x > 1 else np.zeros(1)
    w = np.where(steps % 2 == 0, 1.0, -1.0) * (0.3 + 0.3 * ramp)
    return w, float(-0.5 * w.sum())


def gen_synthetic(
    cfg: SyntheticConfig, seed: Optional[int] = None
) -> tuple[EmpiricalDistribution, EmpiricalDistribution]:
    """
    Draw a population and a uniform subsample of it without replacement.

    Args:
        cfg: Sizes and dimension
        seed: Overrides cfg.seed

    Returns:
        (population, sample), both uniform-weight; sample rows keep population order
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    w, b = ground_truth(cfg.dim_x)
    features = rng.random((cfg.pop_n, cfg.dim_x))
    labels = (rng.random(cfg.pop_n) < expit(features @ w + b)).astype(np.float64)
    points = np.column_stack([labels, features])
    chosen = np.sort(rng.choice(cfg.pop_n, size=cfg.n, replace=False))

    box = cfg.box
    population = EmpiricalDistribution(points, np.full(cfg.pop_n, 1.0 / cfg.pop_n), box)
    sample = EmpiricalDistribution(points[chosen], np.full(cfg.n, 1.0 / cfg.n), box)
    logger.info("Synthetic data: pop_n=%d n=%d prevalence=%.3f",
                cfg.pop_n, cfg.n, float(labels.mean()))
    return population, sample
