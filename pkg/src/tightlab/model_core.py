"""Structural labor-demand model with congestion-dependent hiring costs.

Closed forms for unit labor cost, the wage and tightness elasticities of
firm labor demand, the hiring-cost share calibration, and the aggregate
feedback cycle that runs through labor market tightness.

Conventions
-----------
* The price elasticity of product demand is stored as a nonnegative
  magnitude; formulas apply the negative sign internally.
* All currency magnitudes (wages, hiring costs) must share one consistent
  per-period unit; nothing in this module converts units.
* Power terms ``W**phi1 * theta**phi2`` are evaluated in log space, and
  exponents outside the representable range raise :class:`ModelDomainError`
  instead of overflowing to ``inf``.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass

DAYS_PER_YEAR = 365.25

_MAX_LOG = math.log(sys.float_info.max)


class ModelDomainError(ValueError):
    """Inputs leave the numeric domain of a closed-form expression."""


class CalibrationInfeasibleError(ValueError):
    """The hiring-cost share calibration produced a non-positive denominator."""

    def __init__(self, denominator: float):
        self.denominator = denominator
        super().__init__(
            "hiring-cost share is infeasible: the term "
            f"(delta + r) * (phi2 * eta_lw / eta_lt - phi1) = {denominator:.6g} "
            "must be strictly positive"
        )


class FeedbackDivergenceError(ValueError):
    """The tightness feedback loop does not converge (|omega| >= 1)."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class TechnologyParams:
    """Technology-side determinants of the labor demand elasticity.

    sigma
        Elasticity of substitution between labor and capital (>= 0).
    eta_yp
        Price elasticity of product demand, stored as a magnitude (>= 0).
    s_l
        Share of labor in total cost, strictly between 0 and 1.
    """

    sigma: float
    eta_yp: float
    s_l: float

    def __post_init__(self):
        _require(self.sigma >= 0, "sigma must be >= 0")
        _require(self.eta_yp >= 0, "eta_yp must be stored as a magnitude >= 0")
        _require(0.0 < self.s_l < 1.0, "s_l must lie in (0, 1)")

    def demand_cost_elasticity(self) -> float:
        """Elasticity of labor demand with respect to unit labor cost."""
        return -(1.0 - self.s_l) * self.sigma - self.s_l * self.eta_yp


@dataclass(frozen=True)
class HiringCostParams:
    """Parameters of the per-hire cost function and of the wage curve.

    The pre-match component is ``c * W**phi1 * theta**phi2``; ``psi`` is the
    fixed post-match cost per hire.  ``gamma`` and ``w_scale`` parameterize
    the optional wage curve ``W = w_scale * theta**gamma``.
    """

    c: float
    phi1: float
    phi2: float
    psi: float = 0.0
    gamma: float = 0.0
    w_scale: float = 1.0

    def __post_init__(self):
        _require(self.c >= 0, "c must be >= 0")
        _require(self.phi2 >= 0, "phi2 must be >= 0")
        _require(self.psi >= 0, "psi must be >= 0")
        _require(self.gamma >= 0, "gamma must be >= 0")
        _require(self.w_scale > 0, "w_scale must be > 0")


@dataclass(frozen=True)
class AmortizationParams:
    """Per-period amortization of hiring outlays.

    delta
        Exogenous separation rate per period, in (0, 1].
    r
        Subjective discount rate per period (>= 0).
    """

    delta: float
    r: float

    def __post_init__(self):
        _require(0.0 < self.delta <= 1.0, "delta must lie in (0, 1]")
        _require(self.r >= 0, "r must be >= 0")

    @property
    def rate(self) -> float:
        return self.delta + self.r


@dataclass(frozen=True)
class MarketState:
    """Wage rate and labor market tightness (vacancies per job seeker)."""

    wage: float
    theta: float

    def __post_init__(self):
        _require(self.wage > 0, "wage must be > 0")
        _require(self.theta > 0, "theta must be > 0")


@dataclass(frozen=True)
class ElasticityPair:
    """Own-wage and tightness elasticities of labor demand."""

    eta_lw: float
    eta_lt: float

    def __post_init__(self):
        _require(math.isfinite(self.eta_lw), "eta_lw must be finite")
        _require(math.isfinite(self.eta_lt), "eta_lt must be finite")


def prematch_hiring_cost(hc: HiringCostParams, state: MarketState) -> float:
    """Search cost per hire, ``c * W**phi1 * theta**phi2``."""
    if hc.c == 0.0:
        return 0.0
    log_term = (
        math.log(hc.c)
        + hc.phi1 * math.log(state.wage)
        + hc.phi2 * math.log(state.theta)
    )
    if not math.isfinite(log_term) or log_term >= _MAX_LOG:
        raise ModelDomainError(
            f"pre-match cost exponent {log_term!r} is outside the representable range"
        )
    return math.exp(log_term)


def unit_hiring_cost(hc: HiringCostParams, state: MarketState) -> float:
    """Total cost per hire: pre-match search cost plus post-match cost."""
    return prematch_hiring_cost(hc, state) + hc.psi


def unit_labor_cost(
    hc: HiringCostParams, am: AmortizationParams, state: MarketState
) -> float:
    """Wage plus amortized hiring cost, ``W + (delta + r) * C``."""
    cost = state.wage + am.rate * unit_hiring_cost(hc, state)
    if not math.isfinite(cost):
        raise ModelDomainError("unit labor cost is not finite")
    return cost


def wage_elasticity(
    tech: TechnologyParams,
    hc: HiringCostParams,
    am: AmortizationParams,
    state: MarketState,
) -> float:
    """Own-wage elasticity of labor demand under hiring frictions.

    The wedge between unit labor cost and the wage rescales the frictionless
    substitution-and-scale elasticity: the first factor is the elasticity of
    unit labor cost with respect to the wage (wage weight 1, pre-match weight
    ``phi1``, post-match weight 0).
    """
    wstar = unit_labor_cost(hc, am, state)
    if wstar <= 0:
        raise ModelDomainError("unit labor cost must be positive")
    amortized_prematch = am.rate * prematch_hiring_cost(hc, state)
    cost_pass_through = (state.wage + hc.phi1 * amortized_prematch) / wstar
    return cost_pass_through * tech.demand_cost_elasticity()


def tightness_elasticity(
    tech: TechnologyParams,
    hc: HiringCostParams,
    am: AmortizationParams,
    state: MarketState,
) -> float:
    """Tightness elasticity of labor demand, zero absent pre-match costs."""
    wstar = unit_labor_cost(hc, am, state)
    if wstar <= 0:
        raise ModelDomainError("unit labor cost must be positive")
    amortized_prematch = am.rate * prematch_hiring_cost(hc, state)
    return hc.phi2 * amortized_prematch / wstar * tech.demand_cost_elasticity()


def tightness_elasticity_wage_curve(
    tech: TechnologyParams,
    hc: HiringCostParams,
    am: AmortizationParams,
    state: MarketState,
) -> float:
    """Tightness elasticity when wages themselves respond to tightness.

    With wage-curve slope ``gamma``, a tightness change moves the wage and,
    through it, the pre-match cost; ``gamma = 0`` reduces exactly to
    :func:`tightness_elasticity`.
    """
    wstar = unit_labor_cost(hc, am, state)
    if wstar <= 0:
        raise ModelDomainError("unit labor cost must be positive")
    amortized_prematch = am.rate * prematch_hiring_cost(hc, state)
    pass_through = (
        hc.gamma * state.wage + (hc.gamma * hc.phi1 + hc.phi2) * amortized_prematch
    ) / wstar
    return pass_through * tech.demand_cost_elasticity()


def elasticity_ratio(
    hc: HiringCostParams, am: AmortizationParams, state: MarketState
) -> float:
    """Ratio of the tightness to the own-wage elasticity of labor demand.

    The technology factor cancels, leaving
    ``phi2 (delta+r) Phi / (W + phi1 (delta+r) Phi)`` with
    ``Phi = c W**phi1 theta**phi2``.
    """
    phi = prematch_hiring_cost(hc, state)
    denominator = state.wage + hc.phi1 * am.rate * phi
    if denominator == 0:
        raise ModelDomainError("elasticity ratio denominator is zero")
    return hc.phi2 * am.rate * phi / denominator


def prematch_cost_share(
    am: AmortizationParams, phi1: float, phi2: float, eta: ElasticityPair
) -> float:
    """Pre-match hiring cost as a fraction of per-period wage payments.

    Inverts the elasticity ratio:
    ``Phi/W = ((delta + r) * (phi2 * eta_lw / eta_lt - phi1))**-1``.

    Raises
    ------
    CalibrationInfeasibleError
        If the denominator is zero or negative; the offending value is
        attached to the exception for diagnostics.
    """
    _require(am.rate > 0, "delta + r must be positive")
    if eta.eta_lt == 0:
        raise CalibrationInfeasibleError(float("nan"))
    denominator = am.rate * (phi2 * eta.eta_lw / eta.eta_lt - phi1)
    if not denominator > 0:
        raise CalibrationInfeasibleError(denominator)
    return 1.0 / denominator


def annualize_separation_rate(daily_rate: float) -> float:
    """Convert a day-to-day separation rate into a yearly rate."""
    _require(0.0 <= daily_rate <= 1.0, "daily rate must lie in [0, 1]")
    return 1.0 - (1.0 - daily_rate) ** DAYS_PER_YEAR


def feedback_nu(mu: float, dlnu_dlnl: float) -> float:
    """Tightness response to a one-percent change in aggregate employment.

    ``nu = (1 / (1 - mu)) * (1 - dlnU/dlnL)`` where ``mu`` is the matching
    elasticity on job seekers.
    """
    _require(0.0 < mu < 1.0, "mu must lie strictly in (0, 1)")
    return (1.0 - dlnu_dlnl) / (1.0 - mu)


def vacancy_matching_elasticity(nu: float, dlnu_dlnl: float) -> float:
    """Invert :func:`feedback_nu` for the vacancy-side matching elasticity ``1 - mu``."""
    _require(nu != 0, "nu must be nonzero")
    return (1.0 - dlnu_dlnl) / nu


def aggregate_wage_elasticity(eta_lw: float, eta_lt: float, nu: float) -> float:
    """Own-wage elasticity of aggregate labor demand after reallocation.

    Sums the self-dampening feedback cycle ``omega = nu * eta_lt`` to its
    geometric limit, yielding ``eta_lw / (1 - omega)``.

    Raises
    ------
    FeedbackDivergenceError
        If ``|omega| >= 1`` so the cycle does not converge.
    """
    omega = nu * eta_lt
    if abs(omega) >= 1.0:
        raise FeedbackDivergenceError(
            f"feedback factor omega = {omega:.6g} has modulus >= 1; "
            "the feedback series diverges"
        )
    return eta_lw / (1.0 - omega)


def feedback_partial_sums(omega: float, horizon: int) -> list[float]:
    """Partial sums of the feedback series ``sum_{t=0..T} omega**t`` for T up to ``horizon``."""
    _require(horizon >= 0, "horizon must be >= 0")
    sums = []
    total = 0.0
    power = 1.0
    for _ in range(horizon + 1):
        total += power
        sums.append(total)
        power *= omega
    return sums


# --- calibration (de)serialization -------------------------------------------

_CALIBRATION_FIELDS = ("delta", "r", "eta_lw", "eta_lt", "phi1", "phi2")


@dataclass(frozen=True)
class CalibrationInputs:
    """Flat parameter set for the hiring-cost share calibration."""

    delta: float
    r: float
    eta_lw: float
    eta_lt: float
    phi1: float
    phi2: float

    @classmethod
    def from_json(cls, text: str) -> "CalibrationInputs":
        raw = json.loads(text)
        missing = [k for k in _CALIBRATION_FIELDS if k not in raw]
        if missing:
            raise ValueError(f"calibration JSON is missing fields: {missing}")
        return cls(**{k: float(raw[k]) for k in _CALIBRATION_FIELDS})

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def calibrate_prematch_share(inputs: CalibrationInputs) -> dict:
    """Run the hiring-cost share calibration; returns inputs plus ``phi_over_w``."""
    am = AmortizationParams(delta=inputs.delta, r=inputs.r)
    eta = ElasticityPair(eta_lw=inputs.eta_lw, eta_lt=inputs.eta_lt)
    share = prematch_cost_share(am, inputs.phi1, inputs.phi2, eta)
    out = asdict(inputs)
    out["phi_over_w"] = share
    return out
