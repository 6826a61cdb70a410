"""
Closed-form generalization and excess-risk bounds under performativity.

Every bound returns a BoundReport whose additive summands live in ``terms``
(their fsum is the total) and whose auxiliary quantities (radius, geometric
factor, A, C, K) live in ``factors``. Confidence levels are reported exactly as
each statement gives them; nothing is re-derived here.

Usage:
    from perfbounds.bounds import gen_gap_bound_rq1

    report = gen_gap_bound_rq1(profile, T=2, m=1816, n=60147)
    print(report.total, report.terms)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .domain import ConstantsProfile

if TYPE_CHECKING:
    from .rerm import RermTrace

logger = logging.getLogger(__name__)

# Ratios this close to 1 use the analytic limit of the geometric sum
GEOMETRIC_LIMIT_TOL = 1e-9


@dataclass
class BoundReport:
    name: str
    terms: dict[str, float]
    confidence: float
    inputs_hash: str = ""
    factors: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        negative = sorted(k for k, v in self.terms.items() if v < 0)
        if negative:
            raise ValueError(f"Negative bound terms: {', '.join(negative)}")

    @property
    def total(self) -> float:
        return math.fsum(self.terms.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "total": self.total,
            "terms": dict(self.terms),
            "factors": dict(self.factors),
            "confidence": self.confidence,
            "inputs_hash": self.inputs_hash,
        }

    def to_row(self) -> dict[str, float]:
        """Flat CSV row: total followed by one column per term."""
        return {"total": self.total, **self.terms}


def _check_mn(m: int, n: int) -> None:
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= m <= n:
        raise ValueError(f"m={m} must lie in [0, n={n}]")


def _geometric_factor(ratio: float, k: int) -> float:
    """(ratio^k - 1) / (ratio - 1), with limit k at ratio = 1."""
    if k <= 0:
        return 0.0
    if abs(ratio - 1.0) < GEOMETRIC_LIMIT_TOL:
        return float(k)
    return (ratio**k - 1.0) / (ratio - 1.0)


def normal_quantile(delta: float) -> float:
    """q(delta): the (1 - delta/2)-quantile of the standard normal."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta={delta} outside (0, 1]")
    return float(norm.ppf(1.0 - delta / 2.0))


def fournier_term(
    n: int, delta: float, p: float, nu: int, C_a: float = 1.0, C_b: float = 1.0
) -> float:
    """(log(C_a / delta) / (C_b n))^(p / nu), the sample-to-population W_p concentration."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta={delta} outside (0, 1)")
    ratio = C_a / delta
    if ratio < 1.0:
        raise ValueError(f"C_a / delta = {ratio:g} < 1 makes the log negative")
    return (math.log(ratio) / (C_b * n)) ** (p / nu)


def in_sample_shift_bound(
    eps: float, T: int, m: int, n: int, p: float, D_Z: float, L_a_tilde: float
) -> float:
    """W_p(d_0, d_T) <= (eps^T - 1)/(eps - 1) * (m/n)^(1/p) * D_Z * L_a_tilde."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if T < 1:
        raise ValueError("T must be at least 1")
    _check_mn(m, n)
    return _geometric_factor(eps, T) * (m / n) ** (1.0 / p) * D_Z * L_a_tilde


def _wald(s_hat: np.ndarray | float, n_eff: int, q: float) -> np.ndarray | float:
    return np.clip(s_hat + q * np.sqrt(s_hat * (1.0 - s_hat) / n_eff), 0.0, 1.0)


def wald_upper(m: int, n: int, delta: float) -> float:
    """Plain Wald upper limit m/n + q(delta) sqrt((m/n)(1 - m/n)/n), clamped to [0, 1]."""
    _check_mn(m, n)
    return float(_wald(m / n, n, normal_quantile(delta)))


def wald_upper_array(m: np.ndarray, n: int, delta: float) -> np.ndarray:
    """Vectorized wald_upper over an array of counts."""
    m = np.asarray(m)
    if np.any(m < 0) or np.any(m > n):
        raise ValueError("every m must lie in [0, n]")
    return np.asarray(_wald(m / n, n, normal_quantile(delta)))


def pooled_wald_upper(m_list: Sequence[int], n: int, delta: float) -> float:
    """Wald upper limit pooled over T rounds: M_T / (T n) with effective size T n."""
    if not m_list:
        raise ValueError("m_list must not be empty")
    for m in m_list:
        _check_mn(m, n)
    n_eff = len(m_list) * n
    return float(_wald(sum(m_list) / n_eff, n_eff, normal_quantile(delta)))


def radius_R(m: int, n: int, delta: float, p: float, D_Z: float, L_a_tilde: float) -> float:
    """Auxiliary radius: max of the population (Wald) and sample-side shift radii."""
    _check_mn(m, n)
    population = wald_upper(m, n, delta) ** (1.0 / p) * D_Z
    sample = (m / n) ** (1.0 / p) * D_Z * L_a_tilde
    return max(population, sample)


def _complexity(value: Optional[float], fallback: Optional[float], name: str) -> float:
    chosen = value if value is not None else fallback
    if chosen is None:
        raise ValueError(f"{name} not given and the profile has no override")
    if chosen < 0:
        raise ValueError(f"{name} must be nonnegative")
    return chosen


def _rademacher(profile: ConstantsProfile, n: int, c_l2: float) -> float:
    return (
        profile.F * profile.L_ell / math.sqrt(n)
        * (24.0 * c_l2 + 2.0 * math.sqrt(2.0 * math.log(1.0 / profile.delta)))
    )


def excess_risk_bound(
    profile: ConstantsProfile,
    T: int,
    m: int,
    n: int,
    complexity_L2: Optional[float] = None,
) -> BoundReport:
    """
    Excess risk of theta_T trained on performative samples (confidence 1 - delta/2).

    The performative summand carries no L_a_tilde factor, unlike the corollary.
    """
    _check_mn(m, n)
    c_l2 = _complexity(complexity_L2, profile.c_l2, "complexity_L2")
    geo = _geometric_factor(profile.contraction, T)
    C = fournier_term(n, profile.delta, profile.p, profile.nu, profile.C_a, profile.C_b)
    terms = {
        "sampling": profile.sampling_lipschitz * C,
        "performative": profile.L_ell * profile.L_a * geo * (m / n) ** (1.0 / profile.p)
        * profile.D_Z,
        "rademacher": _rademacher(profile, n, c_l2),
    }
    return BoundReport(
        name="excess_risk",
        terms=terms,
        confidence=1.0 - profile.delta / 2.0,
        inputs_hash=profile.digest(),
        factors={"geometric_factor": geo, "C": C},
    )


def gen_gap_bound_rq1(profile: ConstantsProfile, T: int, m: int, n: int) -> BoundReport:
    """Generalization gap of theta_T: sampling plus in-sample shift (confidence 1 - delta/2)."""
    if T < 1:
        raise ValueError("T must be at least 1")
    _check_mn(m, n)
    geo = _geometric_factor(profile.eps_sens, T - 1)
    C = fournier_term(n, profile.delta, profile.p, profile.nu, profile.C_a, profile.C_b)
    assert profile.L_a_tilde is not None
    terms = {
        "sampling": profile.sampling_lipschitz * C,
        "performative": geo * profile.L_ell * (m / n) ** (1.0 / profile.p)
        * profile.D_Z * profile.L_a_tilde,
    }
    return BoundReport(
        name="gen_gap_rq1",
        terms=terms,
        confidence=1.0 - profile.delta / 2.0,
        inputs_hash=profile.digest(),
        factors={"geometric_factor": geo, "C": C},
    )


def perf_excess_risk_bound(
    profile: ConstantsProfile,
    T: int,
    m: int,
    n: int,
    complexity_L2: Optional[float] = None,
    response_upper: Optional[float] = None,
) -> BoundReport:
    """
    Performative excess risk of theta_T (confidence 1 - delta/4).

    ``response_upper`` replaces the single-round Wald limit on the population
    response rate, e.g. with pooled_wald_upper over the observed rounds.
    """
    _check_mn(m, n)
    c_l2 = _complexity(complexity_L2, profile.c_l2, "complexity_L2")
    p = profile.p
    s_up = wald_upper(m, n, profile.delta) if response_upper is None else response_upper
    if not 0.0 <= s_up <= 1.0:
        raise ValueError(f"response_upper={s_up} outside [0, 1]")
    A = 2.0 * profile.D_Z * s_up ** (1.0 / p)
    C = fournier_term(n, profile.delta, p, profile.nu, profile.C_a, profile.C_b)
    geo = _geometric_factor(profile.contraction, T)
    K = geo * (m / n) ** (1.0 / p)
    L = profile.L_ell
    terms = {
        "population_shift": L * 2.0 * A,
        "sampling": profile.sampling_lipschitz * C,
        "rademacher": L * 2.0 * profile.F / math.sqrt(n)
        * (12.0 * c_l2 + math.sqrt(2.0 * math.log(1.0 / profile.delta))),
        "performative": L * profile.L_a * profile.D_Z * (A + K),
    }
    return BoundReport(
        name="perf_excess_risk",
        terms=terms,
        confidence=1.0 - profile.delta / 4.0,
        inputs_hash=profile.digest(),
        factors={"A": A, "C": C, "K": K, "geometric_factor": geo, "response_upper": s_up},
    )


def perf_excess_risk_bound_pooled(
    profile: ConstantsProfile,
    m_list: Sequence[int],
    n: int,
    complexity_L2: Optional[float] = None,
) -> BoundReport:
    """Performative excess risk with the response rate pooled over all observed rounds."""
    s_up = pooled_wald_upper(m_list, n, profile.delta)
    report = perf_excess_risk_bound(
        profile, len(m_list), max(m_list), n, complexity_L2, response_upper=s_up
    )
    report.name = "perf_excess_risk_pooled"
    return report


@dataclass
class TightestRound:
    round: int
    total: float
    totals: list[float]


def tightest_round(
    profile: ConstantsProfile,
    m_list: Sequence[int],
    n: int,
    complexity_L2: Optional[float] = None,
) -> TightestRound:
    """
    Which of theta_0 .. theta_T has the smallest performative excess risk bound.

    Round t is evaluated with m = max(m_1 .. m_t) (m_1 for round 0). Ties go to
    the earliest round.
    """
    if not m_list:
        raise ValueError("m_list must not be empty")
    totals = []
    for t in range(len(m_list) + 1):
        m = max(m_list[: max(t, 1)])
        totals.append(perf_excess_risk_bound(profile, t, m, n, complexity_L2).total)
    best = int(np.argmin(totals))
    return TightestRound(round=best, total=totals[best], totals=totals)


def _gen_gap_shared(
    profile: ConstantsProfile, n: int, R: float, c_inf: float, inner: float, name: str,
    factors: dict[str, float],
) -> BoundReport:
    terms = {
        "complexity": 48.0 / math.sqrt(n) * (c_inf + inner),
        "sampling": profile.F * math.sqrt(2.0 * math.log(2.0 / profile.delta) / n),
        "performative": 2.0 * profile.L_ell * R,
    }
    return BoundReport(
        name=name,
        terms=terms,
        confidence=1.0 - profile.delta,
        inputs_hash=profile.digest(),
        factors={"radius": R, "inner": inner, **factors},
    )


def gen_gap_I(
    profile: ConstantsProfile, n: int, R: float, complexity_inf: Optional[float] = None
) -> BoundReport:
    """
    Performative generalization gap when every model is L_f-Lipschitz.

    With complexity_form "normalized" the inner term is L_ell L_f R^(1-p);
    "theorem" multiplies it by D_Z^p.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    p = profile.p
    if R < 0:
        raise ValueError("R must be nonnegative")
    if R == 0 and p > 1:
        raise ValueError("R = 0 makes R^(1-p) singular; evaluate on a xi > 0 grid")
    c_inf = _complexity(complexity_inf, profile.c_inf, "complexity_inf")
    inner = profile.L_ell * profile.L_f * R ** (1.0 - p)
    if profile.complexity_form == "theorem":
        inner *= profile.D_Z**p
    return _gen_gap_shared(profile, n, R, c_inf, inner, "gen_gap_I", {})


def gen_gap_II(
    profile: ConstantsProfile,
    n: int,
    R: float,
    complexity_inf: Optional[float] = None,
    B: Optional[float] = None,
) -> BoundReport:
    """Gen-Gap I with the inner term B 2^(p-1) (1 + D_Z / R)^p (D_Z -> 1 when normalized)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not R > 0:
        raise ValueError("R must be positive; evaluate on a xi > 0 grid")
    B = profile.B if B is None else B
    if B < 0:
        raise ValueError("B must be nonnegative")
    c_inf = _complexity(complexity_inf, profile.c_inf, "complexity_inf")
    p = profile.p
    scale = profile.D_Z if profile.complexity_form == "theorem" else 1.0
    inner = B * 2.0 ** (p - 1.0) * (1.0 + scale / R) ** p
    return _gen_gap_shared(profile, n, R, c_inf, inner, "gen_gap_II", {"B": B})


def cumulative_bound(
    profile: ConstantsProfile,
    T: int,
    T_tilde: int,
    m: int,
    n: int,
    complexity_L2: Optional[float] = None,
) -> BoundReport:
    """Cumulative performative excess risk up to round T_tilde (confidence 1 - delta/5)."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if T_tilde < T:
        raise ValueError(f"T_tilde={T_tilde} must be at least T={T}")
    base = perf_excess_risk_bound(profile, T, m, n, complexity_L2)
    per_round = (
        profile.L_ell * profile.L_a * wald_upper(m, n, profile.delta) ** (1.0 / profile.p)
        * profile.D_Z
    )
    terms = {**base.terms, "cumulative_population": (T_tilde - T + 1) * per_round}
    return BoundReport(
        name="cumulative",
        terms=terms,
        confidence=1.0 - profile.delta / 5.0,
        inputs_hash=profile.digest(),
        factors={**base.factors, "per_round": per_round},
    )


def excess_risk_bound_from_trace(
    profile: ConstantsProfile, trace: RermTrace, complexity_L2: Optional[float] = None
) -> BoundReport:
    return excess_risk_bound(profile, trace.T, trace.m_max, trace.n, complexity_L2)


def gen_gap_bound_rq1_from_trace(profile: ConstantsProfile, trace: RermTrace) -> BoundReport:
    return gen_gap_bound_rq1(profile, trace.T, trace.m_max, trace.n)


def in_sample_shift_bound_from_trace(
    profile: ConstantsProfile, trace: RermTrace, eps: Optional[float] = None
) -> float:
    """In-sample shift bound for a trace, using m = max m_t."""
    assert profile.L_a_tilde is not None
    return in_sample_shift_bound(
        profile.eps_sens if eps is None else eps,
        trace.T, trace.m_max, trace.n, profile.p, profile.D_Z, profile.L_a_tilde,
    )


def pooled_wald_upper_from_trace(trace: RermTrace, delta: float) -> float:
    return pooled_wald_upper(trace.shift_counts, trace.n, delta)


VARIANTS = (
    "rq1", "rq1-corollary", "rq2", "rq2-pooled", "gen-gap-1", "gen-gap-2",
    "cumulative", "wald", "pooled-wald", "in-sample-shift", "radius",
)


def _require(params: dict[str, Any], *names: str) -> None:
    missing = [name for name in names if params.get(name) is None]
    if missing:
        raise ValueError(f"Missing parameters: {', '.join(missing)}")


def _scalar(name: str, value: float, confidence: float, profile: ConstantsProfile) -> BoundReport:
    return BoundReport(name=name, terms={"value": value}, confidence=confidence,
                       inputs_hash=profile.digest())


def compute_bound(variant: str, profile: ConstantsProfile, **params: Any) -> BoundReport:
    """
    Evaluate a bound by name.

    Recognized params: T, T_tilde, m, n, m_list, R, eps, complexity, B. For the
    gen-gap variants R defaults to radius_R(m, n, ...).
    """
    p = profile.p
    delta = profile.delta
    assert profile.L_a_tilde is not None
    complexity = params.get("complexity")

    if variant == "rq1":
        _require(params, "T", "m", "n")
        return excess_risk_bound(profile, params["T"], params["m"], params["n"], complexity)
    if variant == "rq1-corollary":
        _require(params, "T", "m", "n")
        return gen_gap_bound_rq1(profile, params["T"], params["m"], params["n"])
    if variant == "rq2":
        _require(params, "T", "m", "n")
        return perf_excess_risk_bound(profile, params["T"], params["m"], params["n"], complexity)
    if variant == "rq2-pooled":
        _require(params, "m_list", "n")
        return perf_excess_risk_bound_pooled(profile, params["m_list"], params["n"], complexity)
    if variant in ("gen-gap-1", "gen-gap-2"):
        _require(params, "n")
        R = params.get("R")
        if R is None:
            _require(params, "m")
            R = radius_R(params["m"], params["n"], delta, p, profile.D_Z, profile.L_a_tilde)
        if variant == "gen-gap-1":
            return gen_gap_I(profile, params["n"], R, complexity)
        return gen_gap_II(profile, params["n"], R, complexity, params.get("B"))
    if variant == "cumulative":
        _require(params, "T", "T_tilde", "m", "n")
        return cumulative_bound(
            profile, params["T"], params["T_tilde"], params["m"], params["n"], complexity
        )
    if variant == "wald":
        _require(params, "m", "n")
        return _scalar("wald", wald_upper(params["m"], params["n"], delta), 1.0 - delta, profile)
    if variant == "pooled-wald":
        _require(params, "m_list", "n")
        value = pooled_wald_upper(params["m_list"], params["n"], delta)
        return _scalar("pooled_wald", value, 1.0 - delta, profile)
    if variant == "in-sample-shift":
        _require(params, "T", "m", "n")
        eps = params.get("eps")
        value = in_sample_shift_bound(
            profile.eps_sens if eps is None else eps, params["T"], params["m"], params["n"],
            p, profile.D_Z, profile.L_a_tilde,
        )
        return _scalar("in_sample_shift", value, 1.0, profile)
    if variant == "radius":
        _require(params, "m", "n")
        value = radius_R(params["m"], params["n"], delta, p, profile.D_Z, profile.L_a_tilde)
        return _scalar("radius", value, 1.0 - delta, profile)
    raise ValueError(f"Unknown bound variant: {variant!r} (expected one of {', '.join(VARIANTS)})")
