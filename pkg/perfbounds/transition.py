"""
Transition maps Tr(d, theta) and shift accounting.

A map returns a new support for the same weights; apply_transition diffs the
old and new supports by index to produce the ShiftRecord, so every map kind is
counted the same way. A unit "changes" when any of its coordinates differ
after the application, even if it held that value in some earlier round.

Usage:
    from perfbounds.transition import TopXiLabelFlip, apply_transition

    flip = TopXiLabelFlip(xi=0.1)
    shifted, record = apply_transition(flip, dist, theta)
    print(record.m_changed)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, ClassVar, Optional, Sequence

import numpy as np

from .domain import EmpiricalDistribution, _readonly, fit_to_box
from .logistic import predict_proba
from .transport import TransportConfig, wp_exact

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShiftRecord:
    """Which support points a transition changed, and how far each moved."""

    indices: tuple[int, ...] = ()
    per_point_displacement: tuple[float, ...] = ()

    @property
    def m_changed(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict[str, Any]:
        return {
            "m_changed": self.m_changed,
            "indices": list(self.indices),
            "per_point_displacement": list(self.per_point_displacement),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ShiftRecord:
        record = cls(
            indices=tuple(int(i) for i in data.get("indices", ())),
            per_point_displacement=tuple(float(v) for v in data.get("per_point_displacement", ())),
        )
        if "m_changed" in data and data["m_changed"] != record.m_changed:
            raise ValueError("m_changed disagrees with the recorded indices")
        return record


def diff_record(before: EmpiricalDistribution, after: EmpiricalDistribution) -> ShiftRecord:
    """Index-wise support difference between two same-size distributions."""
    if before.points.shape != after.points.shape:
        raise ValueError("Shift accounting needs supports of equal shape")
    changed = np.flatnonzero(np.any(before.points != after.points, axis=1))
    moved = np.linalg.norm(after.points[changed] - before.points[changed], axis=1)
    return ShiftRecord(
        indices=tuple(int(i) for i in changed),
        per_point_displacement=tuple(float(v) for v in moved),
    )


def top_xi_selection(dist: EmpiricalDistribution, theta: np.ndarray, xi: float) -> list[int]:
    """
    Indices of the ceil(xi * n) highest-scoring units under sigma(theta^T x).

    Ties go to the smaller original index.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi={xi} outside [0, 1]")
    k = min(dist.n, math.ceil(xi * dist.n - 1e-9))
    if k <= 0:
        return []
    scores = predict_proba(dist.features, theta)
    order = np.lexsort((np.arange(dist.n), -scores))
    return [int(i) for i in order[:k]]


@dataclass(frozen=True)
class TransitionMap:
    """Base class; subclasses implement _move and declare a ``kind``."""

    kind: ClassVar[str] = ""
    certified_eps: Optional[float] = field(default=None, kw_only=True)

    def _move(self, dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.kind}
        if self.certified_eps is not None:
            data["certified_eps"] = self.certified_eps
        return data


@dataclass(frozen=True)
class IdentityMap(TransitionMap):
    kind: ClassVar[str] = "identity"

    def _move(self, dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
        return dist.points


@dataclass(frozen=True, eq=False)
class ConstantMap(TransitionMap):
    """Ignores its inputs and returns a fixed support."""

    kind: ClassVar[str] = "constant"
    target: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", _readonly(self.target))

    def _move(self, dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
        if self.target.shape != dist.points.shape:
            raise ValueError(
                f"constant map target has shape {self.target.shape}, "
                f"distribution has {dist.points.shape}"
            )
        try:
            return fit_to_box(self.target, dist.box)
        except ValueError as exc:
            raise ValueError(f"constant map target: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {**super().to_dict(), "target": self.target.tolist()}


@dataclass(frozen=True)
class TopXiLabelFlip(TransitionMap):
    """
    Flip the label of treated units: the ceil(xi * n) highest-risk units whose
    label equals source_label are set to target_label.

    effectiveness < 1 keeps floor(effectiveness * k) of the k eligible units,
    chosen by a permutation seeded with ``seed``.
    """

    kind: ClassVar[str] = "top_xi_label_flip"
    xi: float = 0.0
    effectiveness: float = 1.0
    seed: int = 0
    source_label: float = 1.0
    target_label: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi={self.xi} outside [0, 1]")
        if not 0.0 <= self.effectiveness <= 1.0:
            raise ValueError(f"effectiveness={self.effectiveness} outside [0, 1]")

    def _move(self, dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
        selected = np.array(top_xi_selection(dist, theta, self.xi), dtype=np.int64)
        eligible = selected[dist.labels[selected] == self.source_label]
        if self.effectiveness < 1.0 and eligible.size:
            keep = math.floor(self.effectiveness * eligible.size + 1e-9)
            permuted = np.random.default_rng(self.seed).permutation(eligible)
            eligible = np.sort(permuted[:keep])
        points = np.array(dist.points, copy=True)
        points[eligible, 0] = self.target_label
        return points

    def to_dict(self) -> dict[str, Any]:
        return {
            **super().to_dict(),
            "xi": self.xi,
            "effectiveness": self.effectiveness,
            "seed": self.seed,
            "source_label": self.source_label,
            "target_label": self.target_label,
        }


@dataclass(frozen=True)
class BoundedFeatureShift(TransitionMap):
    """Add shift_vector to the features of the top-xi units, clipped to the box."""

    kind: ClassVar[str] = "bounded_feature_shift"
    xi: float = 0.0
    shift_vector: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi={self.xi} outside [0, 1]")
        object.__setattr__(self, "shift_vector", tuple(float(v) for v in self.shift_vector))
        if not all(math.isfinite(v) for v in self.shift_vector):
            raise ValueError("shift_vector must be finite")

    def _move(self, dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
        if len(self.shift_vector) != dist.box.dim_x:
            raise ValueError(
                f"shift_vector has {len(self.shift_vector)} entries, box has "
                f"{dist.box.dim_x} features"
            )
        selected = top_xi_selection(dist, theta, self.xi)
        points = np.array(dist.points, copy=True)
        if selected:
            dy = dist.box.dim_y
            moved = points[selected, dy:] + np.asarray(self.shift_vector)
            points[selected, dy:] = np.clip(
                moved, dist.box.lower_array[dy:], dist.box.upper_array[dy:]
            )
        return points

    def to_dict(self) -> dict[str, Any]:
        return {**super().to_dict(), "xi": self.xi, "shift_vector": list(self.shift_vector)}


@dataclass(frozen=True)
class CompositeMap(TransitionMap):
    """Apply sub-maps in declaration order, all with the same theta."""

    kind: ClassVar[str] = "composite"
    maps: tuple[TransitionMap, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValueError("composite map needs at least one sub-map")

    def _move(self, dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
        current = dist
        for sub in self.maps:
            current = current.with_points(sub._move(current, theta))
        return current.points

    def to_dict(self) -> dict[str, Any]:
        return {**super().to_dict(), "maps": [m.to_dict() for m in self.maps]}


MAP_KINDS: dict[str, type[TransitionMap]] = {
    cls.kind: cls
    for cls in (IdentityMap, ConstantMap, TopXiLabelFlip, BoundedFeatureShift, CompositeMap)
}


def map_from_dict(data: dict[str, Any]) -> TransitionMap:
    """Build a map from its JSON form {kind, xi, effectiveness, seed, shift_vector, ...}."""
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in MAP_KINDS:
        raise ValueError(f"Unknown transition kind: {kind!r}")
    cls: Any = MAP_KINDS[kind]
    unknown = sorted(set(data) - {f.name for f in fields(cls)})
    if unknown:
        raise ValueError(f"Unknown {kind} keys: {', '.join(unknown)}")
    if kind == "composite":
        data["maps"] = tuple(map_from_dict(m) for m in data.get("maps", ()))
    elif kind == "constant":
        data["target"] = np.asarray(data["target"], dtype=np.float64)
    elif "shift_vector" in data:
        data["shift_vector"] = tuple(data["shift_vector"])
    return cls(**data)


def with_certified_eps(tmap: TransitionMap, eps: float) -> TransitionMap:
    """Copy of ``tmap`` carrying a certified sensitivity."""
    if not eps >= 0.0:
        raise ValueError("certified sensitivity must be nonnegative")
    return replace(tmap, certified_eps=float(eps))


def apply_transition(
    tmap: TransitionMap, dist: EmpiricalDistribution, theta: np.ndarray
) -> tuple[EmpiricalDistribution, ShiftRecord]:
    """
    Deploy theta on dist and observe the induced distribution.

    Weights are never touched; only points move or labels flip.
    """
    points = tmap._move(dist, np.asarray(theta, dtype=np.float64))
    shifted = dist.with_points(points)
    record = diff_record(dist, shifted)
    logger.debug("%s changed %d of %d units", tmap.kind, record.m_changed, dist.n)
    return shifted, record


Probe = tuple[EmpiricalDistribution, np.ndarray, EmpiricalDistribution, np.ndarray]


def estimate_sensitivity(
    tmap: TransitionMap,
    probe_pairs: Sequence[Probe],
    p: float,
    cfg: Optional[TransportConfig] = None,
) -> float:
    """
    Largest observed ratio W_p(Tr(d, t), Tr(d', t')) / (W_p(d, d') + ||t - t'||).

    This is a lower bound on any valid joint sensitivity constant.

    Raises:
        ValueError: If every probe has a zero denominator.
    """
    ratios: list[float] = []
    for d, theta, d_prime, theta_prime in probe_pairs:
        denom = wp_exact(d, d_prime, p, cfg)[0] + float(
            np.linalg.norm(np.asarray(theta) - np.asarray(theta_prime))
        )
        if denom <= 0.0:
            continue
        out, _ = apply_transition(tmap, d, theta)
        out_prime, _ = apply_transition(tmap, d_prime, theta_prime)
        ratios.append(wp_exact(out, out_prime, p, cfg)[0] / denom)
    if not ratios:
        raise ValueError("Every probe pair has zero input distance; sensitivity is undefined")
    return max(ratios)


def certify_sensitivity(
    tmap: TransitionMap,
    probe_pairs: Sequence[Probe],
    p: float,
    floor: float = 1.0,
    cfg: Optional[TransportConfig] = None,
) -> TransitionMap:
    """
    Audit ``tmap`` on the probes and attach certified_eps = max(floor, estimate).

    Flip and shift maps move a changed unit no farther than D_Z, so the default
    floor of 1 keeps the certificate at or above the identity's sensitivity.
    """
    estimate = estimate_sensitivity(tmap, probe_pairs, p, cfg)
    eps = max(floor, estimate)
    logger.info("Certified %s sensitivity %.6g (estimate %.6g)", tmap.kind, eps, estimate)
    return with_certified_eps(tmap, eps)
