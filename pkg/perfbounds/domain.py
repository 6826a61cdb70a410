"""
Domain containers - data box, empirical distributions, parameter space, constants.

Every bound formula in this package consumes a ConstantsProfile, and every
simulation step moves an EmpiricalDistribution inside a DomainBox. Populations
are simply large EmpiricalDistributions; there is no continuous-density support.

Usage:
    from perfbounds.domain import DomainBox, empirical_from_points

    box = DomainBox.unit(dim_x=4)
    dist = empirical_from_points([[1, 0.2, 0.3, 0.1, 0.9]], box)
    print(box.diameter, dist.n)
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import numbers
from dataclasses import MISSING, asdict, dataclass, fields
from typing import Any, Literal, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Points outside the box by at most this much are clamped, larger violations rejected
BOX_TOLERANCE = 1e-9
WEIGHT_TOLERANCE = 1e-12


def check_schema(data: dict[str, Any], kind: str) -> dict[str, Any]:
    """Strip and verify the ``schema`` key of a config dict."""
    if not isinstance(data, dict):
        raise ValueError(f"{kind} config must be an object")
    data = dict(data)
    version = data.pop("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"Unsupported {kind} schema version: {version!r}")
    return data


def _reject_unknown(data: dict[str, Any], allowed: set[str], kind: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"Unknown {kind} keys: {', '.join(unknown)}")


def _is_number(value: Any) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _readonly(values: Any, dtype: Any = np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DomainBox:
    """Bounded data space Z = Y x X as a coordinate box (labels first)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    dim_y: int = 1
    dim_x: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if len(self.lower) != self.dim_y + self.dim_x:
            raise ValueError(
                f"box has {len(self.lower)} coordinates but dim_y + dim_x = "
                f"{self.dim_y + self.dim_x}"
            )
        bad = [i for i, (lo, hi) in enumerate(zip(self.lower, self.upper)) if not lo <= hi]
        if bad:
            raise ValueError(f"lower > upper at coordinates {bad}")
        if not all(math.isfinite(v) for v in self.lower + self.upper):
            raise ValueError("box bounds must be finite")

    @classmethod
    def unit(cls, dim_x: int, dim_y: int = 1) -> DomainBox:
        """Box with every coordinate in [0, 1]."""
        nu = dim_x + dim_y
        return cls(lower=(0.0,) * nu, upper=(1.0,) * nu, dim_y=dim_y, dim_x=dim_x)

    @property
    def nu(self) -> int:
        return self.dim_y + self.dim_x

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def diameter(self) -> float:
        return domain_diameter(self)

    @property
    def feature_diameter(self) -> float:
        """Euclidean diameter of the feature block X alone (D_X)."""
        span = self.upper_array[self.dim_y:] - self.lower_array[self.dim_y:]
        return float(np.linalg.norm(span))

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "dim_y": self.dim_y,
            "dim_x": self.dim_x,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DomainBox:
        data = check_schema(data, "box")
        _reject_unknown(data, {"lower", "upper", "dim_y", "dim_x"}, "box")
        return cls(
            lower=tuple(data["lower"]),
            upper=tuple(data["upper"]),
            dim_y=int(data.get("dim_y", 1)),
            dim_x=int(data.get("dim_x", len(data["lower"]) - int(data.get("dim_y", 1)))),
        )


def domain_diameter(box: DomainBox) -> float:
    """
    Diameter D_Z of the box: Euclidean length of (upper - lower).

    Raises:
        ValueError: If the box is degenerate (zero diameter).
    """
    diameter = float(np.linalg.norm(box.upper_array - box.lower_array))
    if diameter <= 0.0:
        raise ValueError("Degenerate box: diameter is zero")
    return diameter


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Finite weighted point set inside a DomainBox; rows are (y, x) points."""

    points: np.ndarray
    weights: np.ndarray
    box: DomainBox

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _readonly(self.points))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError("points must be a nonempty 2-d array")
        if self.points.shape[1] != self.box.nu:
            raise ValueError(
                f"points have {self.points.shape[1]} coordinates, box expects {self.box.nu}"
            )
        object.__setattr__(self, "points", _readonly(fit_to_box(self.points, self.box)))
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("weights must have one entry per point")
        if abs(float(self.weights.sum()) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, expected 1")

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def labels(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def features(self) -> np.ndarray:
        return self.points[:, self.box.dim_y:]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= WEIGHT_TOLERANCE))

    def with_points(self, points: np.ndarray) -> EmpiricalDistribution:
        """Same weights and box, new support; points must lie in the box."""
        return EmpiricalDistribution(points=points, weights=self.weights, box=self.box)

    def same_as(self, other: EmpiricalDistribution) -> bool:
        """Bit-identical comparison of support, weights, order and box."""
        return (
            self.box == other.box
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "box": self.box.to_dict(),
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EmpiricalDistribution:
        return cls(
            points=np.asarray(data["points"], dtype=np.float64),
            weights=np.asarray(data["weights"], dtype=np.float64),
            box=DomainBox.from_dict(data["box"]),
        )


def fit_to_box(points: np.ndarray, box: DomainBox) -> np.ndarray:
    """
    Points checked against the box; sub-tolerance round-off is clamped onto it.

    Raises:
        ValueError: On non-finite points, or points outside the box beyond
            BOX_TOLERANCE (message lists the offending indices).
    """
    if not np.all(np.isfinite(points)):
        raise ValueError("points must be finite")
    lower, upper = box.lower_array, box.upper_array
    excess = np.maximum(lower - points, 0.0) + np.maximum(points - upper, 0.0)
    outside = np.flatnonzero(np.any(excess > BOX_TOLERANCE, axis=1))
    if outside.size:
        raise ValueError(f"Points outside the box at indices {outside.tolist()}")
    if np.any(excess > 0.0):
        logger.debug("Clamping %d boundary round-off coordinates", int(np.sum(excess > 0.0)))
        return np.clip(points, lower, upper)
    return points


def empirical_from_points(
    points: Sequence[Sequence[float]] | np.ndarray,
    box: DomainBox,
    weights: Optional[Sequence[float] | np.ndarray] = None,
) -> EmpiricalDistribution:
    """
    Build a validated EmpiricalDistribution.

    Args:
        points: (n, nu) array-like of (y, x) rows
        box: Box the points must lie in
        weights: Nonnegative weights; omitted means uniform 1/n

    Returns:
        EmpiricalDistribution with normalized weights

    Raises:
        ValueError: On empty input, points outside the box beyond tolerance
            (message lists the offending indices), negative or all-zero weights.
    """
    arr = np.array(points, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.size == 0 or arr.shape[0] == 0:
        raise ValueError("At least one point is required")
    if arr.shape[1] != box.nu:
        raise ValueError(f"points have {arr.shape[1]} coordinates, box expects {box.nu}")
    arr = fit_to_box(arr, box)

    n = arr.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.array(weights, dtype=np.float64, copy=True)
        if w.shape != (n,):
            raise ValueError("weights must have one entry per point")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = float(w.sum())
        if total <= 0.0:
            raise ValueError("weights carry no mass")
        w = w / total
        # Push the last ulp of normalization error onto the largest weight
        w[int(np.argmax(w))] += 1.0 - float(w.sum())

    return EmpiricalDistribution(points=arr, weights=w, box=box)


@dataclass(frozen=True)
class ParamSpace:
    """Compact parameter set Theta: a Euclidean ball or a coordinate box."""

    dim: int
    kind: Literal["ball", "box"] = "ball"
    radius: Optional[float] = None
    lower: Optional[tuple[float, ...]] = None
    upper: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("parameter dimension must be at least 1")
        if self.kind == "ball":
            if self.radius is None or not (0.0 < self.radius < math.inf):
                raise ValueError("ball parameter space needs a finite positive radius")
        elif self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ValueError("box parameter space needs lower and upper")
            object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
            object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
            if len(self.lower) != self.dim or len(self.upper) != self.dim:
                raise ValueError("box bounds must match the parameter dimension")
            if not all(math.isfinite(v) for v in self.lower + self.upper):
                raise ValueError("box parameter space must be finite")
            if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("parameter box has lower > upper")
        else:
            raise ValueError(f"Unknown parameter space kind: {self.kind!r}")

    @classmethod
    def ball(cls, dim: int, radius: float) -> ParamSpace:
        return cls(dim=dim, kind="ball", radius=radius)

    @classmethod
    def cube(cls, dim: int, half_width: float) -> ParamSpace:
        return cls(dim=dim, kind="box", lower=(-half_width,) * dim, upper=(half_width,) * dim)

    @property
    def diameter(self) -> float:
        """D_Theta."""
        if self.kind == "ball":
            assert self.radius is not None
            return 2.0 * self.radius
        assert self.lower is not None and self.upper is not None
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    @property
    def max_norm(self) -> float:
        """Largest Euclidean norm of any member."""
        if self.kind == "ball":
            assert self.radius is not None
            return self.radius
        assert self.lower is not None and self.upper is not None
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return float(np.linalg.norm(corner))

    def project(self, theta: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the set."""
        if self.kind == "ball":
            assert self.radius is not None
            norm = float(np.linalg.norm(theta))
            if norm <= self.radius:
                return theta
            return theta * (self.radius / norm)
        return np.clip(theta, self.lower, self.upper)

    def contains(self, theta: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.project(theta) - theta) <= tol)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"dim": self.dim, "kind": self.kind}
        if self.kind == "ball":
            data["radius"] = self.radius
        else:
            data["lower"] = list(self.lower or ())
            data["upper"] = list(self.upper or ())
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ParamSpace:
        _reject_unknown(data, {"dim", "kind", "radius", "lower", "upper"}, "parameter space")
        return cls(
            dim=int(data["dim"]),
            kind=data.get("kind", "ball"),
            radius=data.get("radius"),
            lower=tuple(data["lower"]) if data.get("lower") is not None else None,
            upper=tuple(data["upper"]) if data.get("upper") is not None else None,
        )


@dataclass(frozen=True)
class ConstantsProfile:
    """
    Audited record of every constant the bound formulas consume.

    ``L_a_tilde`` is derived as 1 / (1 + L_a) when omitted. ``L_ell_sampling``
    optionally replaces L_ell inside sampling terms only. ``c_inf`` and ``c_l2``
    override the computed entropy integrals. ``complexity_form`` selects how the
    Gen-Gap complexity inner term treats the domain diameter ("normalized" sets
    it to 1 there).
    """

    L_ell: float
    L_a: float
    L_f: float
    gamma: float
    kappa: float
    eps_sens: float
    p: float
    nu: int
    D_Z: float
    D_Theta: float
    delta: float
    C_a: float = 1.0
    C_b: float = 1.0
    F: float = 1.0
    B: float = 0.0
    L_a_tilde: Optional[float] = None
    L_ell_sampling: Optional[float] = None
    c_inf: Optional[float] = None
    c_l2: Optional[float] = None
    complexity_form: Literal["theorem", "normalized"] = "theorem"

    def __post_init__(self) -> None:
        if self.L_a_tilde is None:
            object.__setattr__(self, "L_a_tilde", 1.0 / (1.0 + self.L_a))
        positive = {
            "L_ell": self.L_ell, "L_f": self.L_f, "gamma": self.gamma,
            "kappa": self.kappa, "eps_sens": self.eps_sens, "p": self.p,
            "nu": self.nu, "D_Z": self.D_Z, "D_Theta": self.D_Theta,
            "C_a": self.C_a, "C_b": self.C_b, "F": self.F,
        }
        bad = sorted(name for name, value in positive.items() if not value > 0)
        if bad:
            raise ValueError(f"Constants must be positive: {', '.join(bad)}")
        if self.L_a < 0 or self.B < 0:
            raise ValueError("L_a and B must be nonnegative")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError(f"Wasserstein order p={self.p} outside [1, 2]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta={self.delta} outside (0, 1)")
        assert self.L_a_tilde is not None
        if abs(self.L_a_tilde * (1.0 + self.L_a) - 1.0) > 1e-12:
            raise ValueError("L_a_tilde must equal 1 / (1 + L_a)")
        if self.L_ell_sampling is not None and not self.L_ell_sampling > 0:
            raise ValueError("L_ell_sampling must be positive")
        if self.complexity_form not in ("theorem", "normalized"):
            raise ValueError(f"Unknown complexity_form: {self.complexity_form!r}")

    @property
    def sampling_lipschitz(self) -> float:
        """Loss constant used in sampling terms."""
        return self.L_ell_sampling if self.L_ell_sampling is not None else self.L_ell

    @property
    def contraction(self) -> float:
        """epsilon * kappa / gamma, the RERM parameter-step ratio."""
        return self.eps_sens * self.kappa / self.gamma

    def replace(self, **changes: Any) -> ConstantsProfile:
        data = asdict(self)
        if "L_a" in changes and "L_a_tilde" not in changes:
            data["L_a_tilde"] = None
        data.update(changes)
        return ConstantsProfile(**data)

    def to_dict(self) -> dict[str, Any]:
        return {"schema": SCHEMA_VERSION, **asdict(self)}

    def digest(self) -> str:
        """sha256 of the canonical JSON form; provenance for BoundReports."""
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ConstantsProfile:
        data = check_schema(data, "profile")
        _reject_unknown(data, {f.name for f in fields(cls)}, "profile")
        missing = sorted(f.name for f in fields(cls) if f.default is MISSING and f.name not in data)
        if missing:
            raise ValueError(f"Missing profile keys: {', '.join(missing)}")
        not_numeric = sorted(
            name for name, value in data.items()
            if name != "complexity_form" and value is not None and not _is_number(value)
        )
        if not_numeric:
            raise ValueError(f"Profile values must be numbers: {', '.join(not_numeric)}")
        return cls(**data)


def default_kappa(D_Z: float, gamma: float) -> float:
    """Standard logistic Hessian bound D_Z^2 / 4 + gamma, used when kappa is not supplied."""
    return D_Z * D_Z / 4.0 + gamma


def constants_audit(profile: ConstantsProfile) -> list[str]:
    """
    Flag regimes where the bound statements lose their guarantees.

    Pure: the same profile always yields the same list.
    """
    warnings: list[str] = []
    if profile.nu <= 2 * profile.p:
        warnings.append(
            f"ν ≤ 2p (nu={profile.nu}, p={profile.p}): outside the Wasserstein "
            "convergence regime"
        )
    ratio = profile.contraction
    if ratio >= 1.0:
        warnings.append(
            f"εκ/γ = {ratio:.6g} ≥ 1: performative terms grow geometrically in T"
        )
    if not 0.0 < profile.delta <= 0.5:
        warnings.append(f"δ = {profile.delta} outside (0, 0.5]: confidence below 50%")
    if math.isclose(profile.kappa, default_kappa(profile.D_Z, profile.gamma), rel_tol=1e-12):
        warnings.append("κ equals the default logistic Hessian bound (implementer-supplied)")
    return warnings

