"""Synthetic economy generator with known ground truth.

Produces firm panels whose wage and tightness elasticities of labor demand
are set by configuration, together with the market stocks that rationalize
firm-specific tightness.  A latent firm-level demand shock feeds both wage
growth and employment growth, which is exactly the failure mode that biases
naive least squares upward and that the shift-share instruments remove.

Two layers are generated.  Occupation-by-region market cells evolve with
exogenous national growth plus regional noise; firms react to them, which
keeps the firm-level identification experiment clean.  Regional aggregates
additionally impose the matching steady state ``M(U, theta U) = delta L``
with a configurable job-seeker response to employment, so regressions of
regional tightness growth on employment growth have a known target.

The module also carries the structural pieces the closed-form elasticities
abstract from: a CES technology with a constant-elasticity product demand
curve (solved numerically for the labor-demand point), the Cobb-Douglas
matching function, and the steady-state tightness formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.optimize

from . import model_core
from .model_core import (
    AmortizationParams,
    HiringCostParams,
    MarketState,
    TechnologyParams,
)


@dataclass(frozen=True)
class MatchingParams:
    """Cobb-Douglas matching function ``M(U, V) = kappa U**mu V**(1-mu)``."""

    kappa: float = 0.5
    mu: float = 0.46

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must lie strictly in (0, 1)")


def matches(u: float, v: float, m: MatchingParams) -> float:
    """Hires produced from job seekers and vacancies; degree-one homogeneous."""
    return m.kappa * u**m.mu * v ** (1.0 - m.mu)


def steady_state_tightness(
    delta: float, employment: float, kappa: float, job_seekers: float, mu: float
) -> float:
    """Tightness at which matches exactly replace separations.

    ``theta = (delta L / (kappa U)) ** (1 / (1 - mu))``.
    """
    return (delta * employment / (kappa * job_seekers)) ** (1.0 / (1.0 - mu))


def apply_feedback_cycle(
    first_round_dlnl: float, nu: float, eta_lt: float, horizon: int
) -> float:
    """Cumulative employment change after the tightness feedback plays out.

    Each round's change moves tightness by factor ``nu`` which feeds back
    into labor demand with elasticity ``eta_lt``; the cumulative change is
    the first round times the partial geometric sum of ``omega = nu * eta_lt``.
    """
    omega = nu * eta_lt
    partial = model_core.feedback_partial_sums(omega, horizon)[-1]
    return first_round_dlnl * partial


# --- structural labor demand ----------------------------------------------------


@dataclass(frozen=True)
class ProductionParams:
    """CES technology and product-demand primitives.

    ``demand_scale`` is the quantity demanded at ``price``; the demand curve
    has constant elasticity (the magnitude lives in
    :class:`~tightlab.model_core.TechnologyParams`).  ``capital`` and
    ``reference_labor`` double as solver starting points.
    """

    price: float
    capital: float
    capital_rate: float
    tfp: float
    labor_weight: float
    demand_scale: float
    reference_labor: float

    def __post_init__(self):
        for name in ("price", "capital", "capital_rate", "tfp", "demand_scale",
                     "reference_labor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 < self.labor_weight < 1.0:
            raise ValueError("labor_weight must lie in (0, 1)")


@dataclass(frozen=True)
class LaborDemandPoint:
    labor: float
    capital: float
    price: float
    output: float
    labor_share: float


def calibrated_production(
    tech: TechnologyParams,
    hc: HiringCostParams,
    am: AmortizationParams,
    state: MarketState,
    labor: float = 1000.0,
    capital: float = 5000.0,
    price: float = 1.0,
    capital_rate: float = 0.2,
) -> ProductionParams:
    """Back out production primitives so that (labor, capital, price) is the
    profit-maximizing point at the given market state."""
    wstar = model_core.unit_labor_cost(hc, am, state)
    sigma = tech.sigma
    if sigma == 1.0:
        x = (wstar * labor) / (capital_rate * capital)
        alpha = x / (1.0 + x)
        ln_y = math.log(wstar) - math.log(price) - math.log(alpha) + math.log(labor)
        tfp = math.exp(ln_y) / (labor**alpha * capital ** (1.0 - alpha))
        demand_scale = math.exp(ln_y)
    else:
        rho = (sigma - 1.0) / sigma
        x = (wstar / capital_rate) * (labor / capital) ** (1.0 - rho)
        alpha = x / (1.0 + x)
        g = alpha * labor**rho + (1.0 - alpha) * capital**rho
        ln_tfp = (
            math.log(wstar)
            - math.log(price)
            - math.log(alpha)
            - ((1.0 - rho) / rho) * math.log(g)
            - (rho - 1.0) * math.log(labor)
        )
        tfp = math.exp(ln_tfp)
        demand_scale = tfp * g ** (1.0 / rho)
    return ProductionParams(
        price=price,
        capital=capital,
        capital_rate=capital_rate,
        tfp=tfp,
        labor_weight=alpha,
        demand_scale=demand_scale,
        reference_labor=labor,
    )


def structural_labor_demand(
    tech: TechnologyParams,
    hc: HiringCostParams,
    am: AmortizationParams,
    prod: ProductionParams,
    state: MarketState,
) -> LaborDemandPoint:
    """Solve the firm's optimality conditions for labor, capital, and price.

    The marginal revenue products of labor and capital equal unit labor
    cost and the capital rate, and output clears the constant-elasticity
    demand curve.  Solved in logs with a root finder started from the
    calibration anchors.
    """
    wstar = model_core.unit_labor_cost(hc, am, state)
    sigma, eta = tech.sigma, tech.eta_yp
    alpha = prod.labor_weight
    ln_a = math.log(prod.tfp)
    ln_wstar, ln_r = math.log(wstar), math.log(prod.capital_rate)
    ln_y0, ln_p0 = math.log(prod.demand_scale), math.log(prod.price)

    if sigma == 1.0:

        def system(v):
            ln_l, ln_k, ln_p = v
            ln_y = ln_a + alpha * ln_l + (1.0 - alpha) * ln_k
            return [
                ln_p + math.log(alpha) + ln_y - ln_l - ln_wstar,
                ln_p + math.log(1.0 - alpha) + ln_y - ln_k - ln_r,
                ln_y - ln_y0 + eta * (ln_p - ln_p0),
            ]

    else:
        rho = (sigma - 1.0) / sigma

        def system(v):
            ln_l, ln_k, ln_p = v
            g = alpha * math.exp(rho * ln_l) + (1.0 - alpha) * math.exp(rho * ln_k)
            ln_y = ln_a + math.log(g) / rho
            marginal = ln_p + rho * ln_a + (1.0 - rho) * ln_y
            return [
                marginal + math.log(alpha) + (rho - 1.0) * ln_l - ln_wstar,
                marginal + math.log(1.0 - alpha) + (rho - 1.0) * ln_k - ln_r,
                ln_y - ln_y0 + eta * (ln_p - ln_p0),
            ]

    guess = [
        math.log(prod.reference_labor),
        math.log(prod.capital),
        math.log(prod.price),
    ]
    solution = scipy.optimize.root(system, guess, tol=1e-12)
    if not solution.success:
        raise RuntimeError(f"labor demand solver failed: {solution.message}")
    ln_l, ln_k, ln_p = solution.x
    labor, capital, price = math.exp(ln_l), math.exp(ln_k), math.exp(ln_p)
    if sigma == 1.0:
        output = prod.tfp * labor**alpha * capital ** (1.0 - alpha)
    else:
        rho = (sigma - 1.0) / sigma
        output = prod.tfp * (
            alpha * labor**rho + (1.0 - alpha) * capital**rho
        ) ** (1.0 / rho)
    return LaborDemandPoint(
        labor=labor,
        capital=capital,
        price=price,
        output=output,
        labor_share=wstar * labor / (price * output),
    )


# --- synthetic panel -------------------------------------------------------------


@dataclass(frozen=True)
class EconomyConfig:
    """Configuration of the synthetic economy.

    The three shock scales control identification: ``national_shock_sd``
    drives the instruments, ``idiosyncratic_sd`` is firm-specific wage
    noise, and ``demand_confound_sd`` scales the latent firm shock that
    enters both wage and employment growth (the source of least-squares
    bias).  ``firm_cluster_sd`` adds a persistent firm-level growth trend
    so that errors are correlated within firms.  ``dlnu_dlnl`` is the
    regional job-seeker response to employment used by the steady-state
    regional layer.
    """

    n_occupations: int = 30
    n_regions: int = 6
    n_firms: int = 2000
    n_years: int = 8
    base_year: int = 2012
    seed: int = 0
    true_eta_lw: float = -0.7
    true_eta_lt: float = -0.05
    national_shock_sd: float = 0.05
    idiosyncratic_sd: float = 0.05
    demand_confound_sd: float = 0.03
    firm_cluster_sd: float = 0.01
    employment_noise_sd: float = 0.05
    wage_growth_mean: float = 0.02
    vacancy_growth_mean: float = 0.05
    seeker_growth_mean: float = -0.03
    regional_market_sd: float = 0.02
    occupations_per_firm: int = 3
    dirichlet_alpha: float = 2.0
    region_occupation_tilt: float = 0.5
    mean_firm_size: float = 20.0
    firm_size_sd: float = 1.0
    matching: MatchingParams = field(default_factory=MatchingParams)
    separation_rate: float = 0.33
    dlnu_dlnl: float = -4.0
    regional_seeker_noise_sd: float = 0.01
    integer_employment: bool = False

    def __post_init__(self):
        for name in ("n_occupations", "n_regions", "n_firms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_years < 2:
            raise ValueError("n_years must be >= 2 to difference anything")
        for name in (
            "national_shock_sd",
            "idiosyncratic_sd",
            "demand_confound_sd",
            "firm_cluster_sd",
            "employment_noise_sd",
            "regional_market_sd",
            "regional_seeker_noise_sd",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.occupations_per_firm < 1:
            raise ValueError("occupations_per_firm must be >= 1")
        if not 0.0 < self.separation_rate <= 1.0:
            raise ValueError("separation_rate must lie in (0, 1]")
        if self.national_shock_sd == 0.0:
            raise ValueError(
                "degenerate configuration: national_shock_sd = 0 makes every "
                "instrument constant within a year (collinear with year effects)"
            )


def occupation_codes(n: int) -> list:
    """Synthetic 5-digit occupation codes with a valid requirement digit."""
    return [f"{k + 1:04d}{(k % 4) + 1}" for k in range(n)]


def region_codes(n: int) -> list:
    return [f"z{r:02d}" for r in range(n)]


@dataclass
class SyntheticPanel:
    """Simulated firms, markets, and regional aggregates plus the truth.

    ``firms`` and ``markets`` match the CSV schemas of the pipeline;
    ``firm_year`` is the wide per-firm table with the tightness the firms
    actually responded to; ``shocks`` retains the generating disturbances
    for oracle checks; ``truth`` records the configured elasticities and
    the implied regional feedback parameters.
    """

    firms: pd.DataFrame
    markets: pd.DataFrame
    firm_year: pd.DataFrame
    region_panel: pd.DataFrame
    national: pd.DataFrame
    shocks: pd.DataFrame
    config: EconomyConfig
    truth: dict


def simulate_economy(cfg: EconomyConfig) -> SyntheticPanel:
    """Generate one synthetic economy; bit-identical for identical config."""
    rng = np.random.default_rng(cfg.seed)
    n_f, n_o, n_r, n_t = cfg.n_firms, cfg.n_occupations, cfg.n_regions, cfg.n_years
    years = np.arange(cfg.base_year, cfg.base_year + n_t)
    occupations = occupation_codes(n_o)
    regions = region_codes(n_r)

    # firm composition: region, sparse occupation mix, base size and wage.
    # regions have tilted occupation popularity so that regional composition
    # differs (weighted sampling without replacement via Gumbel top-k)
    region_of = rng.integers(0, n_r, n_f)
    k = min(cfg.occupations_per_firm, n_o)
    popularity = rng.dirichlet(np.full(n_o, cfg.region_occupation_tilt), size=n_r)
    popularity = np.maximum(popularity, 1e-12)
    keys = np.log(popularity[region_of]) + rng.gumbel(size=(n_f, n_o))
    chosen = np.argsort(-keys, axis=1)[:, :k]
    raw = rng.gamma(cfg.dirichlet_alpha, size=(n_f, k))
    share_values = raw / raw.sum(axis=1, keepdims=True)
    shares = np.zeros((n_f, n_o))
    np.put_along_axis(shares, chosen, share_values, axis=1)

    base_employment = np.exp(
        rng.normal(math.log(cfg.mean_firm_size), cfg.firm_size_sd, n_f)
    )
    base_wage = np.exp(rng.normal(math.log(85.0), 0.25, n_f))

    # national growth per occupation-year (the "shifts")
    g_wage = rng.normal(cfg.wage_growth_mean, cfg.national_shock_sd, (n_o, n_t - 1))
    g_vac = rng.normal(cfg.vacancy_growth_mean, cfg.national_shock_sd, (n_o, n_t - 1))
    g_seek = rng.normal(cfg.seeker_growth_mean, cfg.national_shock_sd, (n_o, n_t - 1))

    ln_vac_national = np.cumsum(
        np.column_stack([rng.normal(math.log(3000.0), 0.5, n_o), g_vac]), axis=1
    )
    ln_seek_national = np.cumsum(
        np.column_stack([rng.normal(math.log(8000.0), 0.5, n_o), g_seek]), axis=1
    )

    # occupation-by-region market cells: national level split across regions
    split_v = rng.dirichlet(np.ones(n_r), size=n_o)
    split_u = rng.dirichlet(np.ones(n_r), size=n_o)
    noise_v = rng.normal(0.0, cfg.regional_market_sd, (n_o, n_r, n_t))
    noise_u = rng.normal(0.0, cfg.regional_market_sd, (n_o, n_r, n_t))
    vac_cells = np.exp(
        ln_vac_national[:, None, :] + np.log(split_v)[:, :, None] + noise_v
    )
    seek_cells = np.exp(
        ln_seek_national[:, None, :] + np.log(split_u)[:, :, None] + noise_u
    )
    vac_cells = np.maximum(vac_cells, 1.0)
    seek_cells = np.maximum(seek_cells, 1.0)

    # firm-specific tightness from the cells the firm recruits in
    ratio_cells = vac_cells / seek_cells
    theta = np.empty((n_f, n_t))
    for r in range(n_r):
        in_region = region_of == r
        if in_region.any():
            theta[in_region] = shares[in_region] @ ratio_cells[:, r, :]
    dln_theta = np.diff(np.log(theta), axis=1)

    # wage growth: national mix + latent demand shock + idiosyncratic noise
    confound = rng.normal(0.0, cfg.demand_confound_sd, (n_f, n_t - 1))
    wage_noise = rng.normal(0.0, cfg.idiosyncratic_sd, (n_f, n_t - 1))
    dln_wage = shares @ g_wage + confound + wage_noise
    ln_wage = np.cumsum(np.column_stack([np.log(base_wage), dln_wage]), axis=1)

    # employment growth: true elasticities + confound + clustered noise
    firm_trend = rng.normal(0.0, cfg.firm_cluster_sd, n_f)
    employment_noise = rng.normal(0.0, cfg.employment_noise_sd, (n_f, n_t - 1))
    dln_emp = (
        cfg.true_eta_lw * dln_wage
        + cfg.true_eta_lt * dln_theta
        + confound
        + firm_trend[:, None]
        + employment_noise
    )
    ln_emp = np.cumsum(np.column_stack([np.log(base_employment), dln_emp]), axis=1)
    employment = np.exp(ln_emp)
    if cfg.integer_employment:
        employment = np.round(employment)

    firms = _long_firm_frame(
        employment, ln_wage, shares, chosen, region_of, years, occupations, regions
    )
    markets = _market_frame(vac_cells, seek_cells, years, occupations, regions)
    firm_year = pd.DataFrame(
        {
            "firm_id": np.repeat(np.arange(n_f), n_t),
            "year": np.tile(years, n_f),
            "region": np.repeat([regions[r] for r in region_of], n_t),
            "employment": employment.ravel(),
            "wage": np.exp(ln_wage).ravel(),
            "tightness": theta.ravel(),
        }
    )
    shocks = pd.DataFrame(
        {
            "firm_id": np.repeat(np.arange(n_f), n_t - 1),
            "year": np.tile(years[1:], n_f),
            "confound": confound.ravel(),
            "wage_noise": wage_noise.ravel(),
            "employment_noise": employment_noise.ravel(),
            "firm_trend": np.repeat(firm_trend, n_t - 1),
        }
    )

    region_panel, feedback_truth = _region_layer(
        cfg, rng, employment, region_of, seek_cells, years, regions
    )

    national_employment = employment.T @ shares  # (T, O)
    wage_index = np.exp(
        np.cumsum(np.column_stack([np.zeros(n_o), g_wage]), axis=1)
    )
    national = pd.DataFrame(
        {
            "occupation": np.repeat(occupations, n_t),
            "year": np.tile(years, n_o),
            "vacancies": vac_cells.sum(axis=1).ravel(),
            "job_seekers": seek_cells.sum(axis=1).ravel(),
            "employment": national_employment.T.ravel(),
            "wage_index": wage_index.ravel(),
        }
    )

    truth = {
        "eta_lw": cfg.true_eta_lw,
        "eta_lt": cfg.true_eta_lt,
        **feedback_truth,
    }
    return SyntheticPanel(
        firms=firms,
        markets=markets,
        firm_year=firm_year,
        region_panel=region_panel,
        national=national,
        shocks=shocks,
        config=cfg,
        truth=truth,
    )


def _long_firm_frame(
    employment, ln_wage, shares, chosen, region_of, years, occupations, regions
):
    n_f, n_t = employment.shape
    k = chosen.shape[1]
    # row order: firm-major, then year, then the firm's occupations
    firm_ids = np.repeat(np.arange(n_f), k * n_t)
    year_rep = np.tile(np.repeat(years, k), n_f)
    occ_idx = np.repeat(chosen, n_t, axis=0).ravel()
    occ_share = np.take_along_axis(shares, chosen, axis=1)  # (F, k)
    emp = (employment[:, :, None] * occ_share[:, None, :]).reshape(n_f, -1)
    wage = np.exp(ln_wage)
    frame = pd.DataFrame(
        {
            "firm_id": firm_ids,
            "year": year_rep,
            "occupation": np.asarray(occupations)[occ_idx],
            "region": np.repeat([regions[r] for r in region_of], k * n_t),
            "employment": emp.ravel(),
            "wage_daily": np.repeat(wage, k, axis=1).ravel(),
        }
    )
    return frame.sort_values(["firm_id", "year", "occupation"]).reset_index(drop=True)


def _market_frame(vac_cells, seek_cells, years, occupations, regions):
    n_o, n_r, n_t = vac_cells.shape
    return pd.DataFrame(
        {
            "occupation": np.repeat(occupations, n_r * n_t),
            "region": np.tile(np.repeat(regions, n_t), n_o),
            "year": np.tile(years, n_o * n_r),
            "registered_vacancies": vac_cells.ravel(),
            "job_seekers": seek_cells.ravel(),
        }
    )


def _region_layer(cfg, rng, employment, region_of, seek_cells, years, regions):
    """Regional aggregates satisfying the matching steady state.

    Job seekers respond to regional employment growth with the configured
    elasticity; tightness then follows from the steady-state condition, so
    matches exactly replace separations in every region-year.
    """
    n_r, n_t = len(regions), len(years)
    regional_employment = np.zeros((n_r, n_t))
    for r in range(n_r):
        regional_employment[r] = employment[region_of == r].sum(axis=0)
    regional_employment = np.maximum(regional_employment, 1.0)

    dln_l = np.diff(np.log(regional_employment), axis=1)
    seeker_noise = rng.normal(0.0, cfg.regional_seeker_noise_sd, (n_r, n_t - 1))
    base_seekers = np.maximum(seek_cells[:, :, 0].sum(axis=0), 1.0)
    dln_u = cfg.dlnu_dlnl * dln_l + seeker_noise
    ln_seekers = np.cumsum(
        np.column_stack([np.log(base_seekers), dln_u]), axis=1
    )
    seekers = np.exp(ln_seekers)

    m = cfg.matching
    theta = (
        cfg.separation_rate * regional_employment / (m.kappa * seekers)
    ) ** (1.0 / (1.0 - m.mu))
    vacancies = theta * seekers

    panel = pd.DataFrame(
        {
            "region": np.repeat(regions, n_t),
            "year": np.tile(years, n_r),
            "employment": regional_employment.ravel(),
            "job_seekers": seekers.ravel(),
            "vacancies": vacancies.ravel(),
            "tightness": theta.ravel(),
        }
    )
    truth = {
        "dlnu_dlnl": cfg.dlnu_dlnl,
        "nu": (1.0 - cfg.dlnu_dlnl) / (1.0 - m.mu),
        "vacancy_matching_elasticity": 1.0 - m.mu,
    }
    return panel, truth
