"""
Repeated (empirical) risk minimization and its audited trace.

run_rerm retrains on the sample after every deployment:
    theta_t = argmin R(d_{t-1}, .),  d_t = Tr(d_{t-1}, theta_t)
run_rrm does the same on a population, starting from an already deployed theta.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .domain import EmpiricalDistribution
from .logistic import ConvergenceError, FitConfig, erm_fit
from .transition import ShiftRecord, TransitionMap, apply_transition
from .transport import TransportConfig, within_cap, wp_exact

logger = logging.getLogger(__name__)


class RermError(RuntimeError):
    """A refit inside the RERM loop failed."""

    def __init__(self, round_index: int, cause: Exception):
        super().__init__(f"Round {round_index}: {cause}")
        self.round_index = round_index
        self.cause = cause


@dataclass
class RermTrace:
    """
    thetas[t-1] is the model deployed in round t; dists[t] is the distribution
    after that deployment, with dists[0] the starting point.
    """

    thetas: list[np.ndarray] = field(default_factory=list)
    dists: list[EmpiricalDistribution] = field(default_factory=list)
    records: list[ShiftRecord] = field(default_factory=list)
    wasserstein_steps: list[Optional[float]] = field(default_factory=list)
    kind: str = "rerm"
    p: float = 2.0

    @property
    def T(self) -> int:
        return len(self.thetas)

    @property
    def n(self) -> int:
        return self.dists[0].n

    @property
    def shift_counts(self) -> list[int]:
        return [r.m_changed for r in self.records]

    @property
    def m_max(self) -> int:
        return max(self.shift_counts, default=0)

    @property
    def M_T(self) -> int:
        return sum(self.shift_counts)

    def check(self) -> None:
        """Raise ValueError when the trace lengths disagree."""
        T = self.T
        if len(self.dists) != T + 1 or len(self.records) != T or len(self.wasserstein_steps) != T:
            raise ValueError(
                f"Inconsistent trace: {T} thetas, {len(self.dists)} dists, "
                f"{len(self.records)} records, {len(self.wasserstein_steps)} W steps"
            )

    def to_jsonl(self) -> str:
        """One JSON object per round; round 0 carries the starting distribution."""
        self.check()
        lines = [json.dumps({
            "round": 0, "kind": self.kind, "p": self.p, "dist": self.dists[0].to_dict(),
        })]
        for t in range(1, self.T + 1):
            record = self.records[t - 1]
            lines.append(json.dumps({
                "round": t,
                "theta": self.thetas[t - 1].tolist(),
                "m": record.m_changed,
                "indices": list(record.indices),
                "displacement": list(record.per_point_displacement),
                "w_step": self.wasserstein_steps[t - 1],
                "dist": self.dists[t].to_dict(),
            }))
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> RermTrace:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("round") != 0:
            raise ValueError("Trace must start with a round-0 line")
        trace = cls(kind=rows[0].get("kind", "rerm"), p=float(rows[0].get("p", 2.0)))
        trace.dists.append(EmpiricalDistribution.from_dict(rows[0]["dist"]))
        for expected, row in enumerate(rows[1:], start=1):
            if row.get("round") != expected:
                raise ValueError(f"Trace rounds out of order at line {expected}")
            trace.thetas.append(np.asarray(row["theta"], dtype=np.float64))
            trace.dists.append(EmpiricalDistribution.from_dict(row["dist"]))
            trace.records.append(ShiftRecord.from_dict({
                "m_changed": row["m"],
                "indices": row["indices"],
                "per_point_displacement": row["displacement"],
            }))
            trace.wasserstein_steps.append(row["w_step"])
        trace.check()
        return trace

    @classmethod
    def read_jsonl(cls, path: str | Path) -> RermTrace:
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))

    def summary(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "T": self.T,
            "n": self.n,
            "shift_counts": self.shift_counts,
            "m_max": self.m_max,
            "M_T": self.M_T,
            "wasserstein_steps": self.wasserstein_steps,
            "final_theta": self.thetas[-1].tolist() if self.thetas else None,
        }


def _step_distance(
    before: EmpiricalDistribution,
    after: EmpiricalDistribution,
    p: float,
    record_wasserstein: bool,
    transport_cfg: Optional[TransportConfig],
    warned: list[bool],
) -> Optional[float]:
    if not record_wasserstein:
        return None
    if not within_cap(before, after, transport_cfg):
        if not warned:
            logger.warning("Support of %d exceeds the exact transport cap; W_p steps not recorded",
                           before.n)
            warned.append(True)
        return None
    return wp_exact(before, after, p, transport_cfg)[0]


def _fit(
    dist: EmpiricalDistribution, cfg: FitConfig, init: Optional[np.ndarray], t: int
) -> np.ndarray:
    try:
        return erm_fit(dist, cfg, init=init).theta
    except (ConvergenceError, ValueError) as exc:
        raise RermError(t, exc) from exc


def run_rerm(
    dist0: EmpiricalDistribution,
    tmap: TransitionMap,
    T: int,
    fit_cfg: FitConfig,
    p: float = 2.0,
    record_wasserstein: bool = True,
    transport_cfg: Optional[TransportConfig] = None,
) -> RermTrace:
    """
    T rounds of fit-then-deploy on a sample.

    Each refit warm-starts from the previous theta; strong convexity makes the
    optimum independent of the start.

    Raises:
        ValueError: If T < 1.
        RermError: If a fit fails (carries the round index).
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    trace = RermTrace(kind="rerm", p=p)
    trace.dists.append(dist0)
    warned: list[bool] = []
    theta: Optional[np.ndarray] = None
    for t in range(1, T + 1):
        prev = trace.dists[-1]
        theta = _fit(prev, fit_cfg, theta, t)
        shifted, record = apply_transition(tmap, prev, theta)
        trace.thetas.append(theta)
        trace.dists.append(shifted)
        trace.records.append(record)
        trace.wasserstein_steps.append(
            _step_distance(prev, shifted, p, record_wasserstein, transport_cfg, warned)
        )
        logger.info("RERM round %d: m_t=%d", t, record.m_changed)
    return trace


def run_rrm(
    population: EmpiricalDistribution,
    tmap: TransitionMap,
    theta_start: np.ndarray,
    rounds: int,
    fit_cfg: FitConfig,
    p: float = 2.0,
    record_wasserstein: bool = True,
    transport_cfg: Optional[TransportConfig] = None,
) -> RermTrace:
    """
    Population-level repeated risk minimization seeded by a deployed model.

    Round 1 deploys theta_start; every later round deploys the minimizer on
    the previous round's population.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    trace = RermTrace(kind="rrm", p=p)
    trace.dists.append(population)
    warned: list[bool] = []
    theta = np.asarray(theta_start, dtype=np.float64)
    for t in range(1, rounds + 1):
        prev = trace.dists[-1]
        if t > 1:
            theta = _fit(prev, fit_cfg, theta, t)
        shifted, record = apply_transition(tmap, prev, theta)
        trace.thetas.append(theta)
        trace.dists.append(shifted)
        trace.records.append(record)
        trace.wasserstein_steps.append(
            _step_distance(prev, shifted, p, record_wasserstein, transport_cfg, warned)
        )
        logger.info("RRM round %d: m_t=%d", t, record.m_changed)
    return trace
