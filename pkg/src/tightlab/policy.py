"""Downstream policy analyses built on the estimated elasticities.

Minimum-wage employment simulation with simulated standard errors, the
worker-level triple-difference wage-effect regression, counterfactual
employment paths under frozen tightness, and the wage/skill concession
regressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import estimator


@dataclass(frozen=True)
class Estimate:
    """A point estimate with its standard error."""

    value: float
    se: float

    def __post_init__(self):
        if self.se < 0:
            raise ValueError("standard error must be >= 0")


@dataclass(frozen=True)
class MinWageInputs:
    """Ingredients of the minimum-wage employment simulation.

    ``wage_effect`` is the aggregate proportional wage change (the
    triple-difference coefficient times the mean bite).  ``draws``
    independent normal draws of elasticity and wage effect simulate the
    standard error of the employment change.
    """

    elasticity: Estimate
    wage_effect: Estimate
    workforce: float
    draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        if self.workforce <= 0:
            raise ValueError("workforce must be > 0")


@dataclass
class MinWageResult:
    employment_change: float
    se: float
    draws: int

    def to_dict(self) -> dict:
        return {
            "employment_change": self.employment_change,
            "se": self.se,
            "draws": self.draws,
        }


def minwage_effect(inp: MinWageInputs) -> MinWageResult:
    """Aggregate employment change from a wage-floor induced wage shift.

    Point estimate ``elasticity * wage_effect * workforce``; the standard
    error comes from independent normal parameter draws around the two
    estimates (no covariance, matching the simulation protocol), and is
    deterministic given the seed.
    """
    point = inp.elasticity.value * inp.wage_effect.value * inp.workforce
    rng = np.random.default_rng(inp.seed)
    elasticity = rng.normal(inp.elasticity.value, inp.elasticity.se, inp.draws)
    wage_effect = rng.normal(inp.wage_effect.value, inp.wage_effect.se, inp.draws)
    simulated = elasticity * wage_effect * inp.workforce
    se = float(np.std(simulated, ddof=1)) if inp.draws > 1 else 0.0
    return MinWageResult(employment_change=point, se=se, draws=inp.draws)


def didid_wage_effect(
    workers: pd.DataFrame,
    outcome: str = "d2_log_wage",
    bite_col: str = "bite",
    cohort_col: str = "cohort",
    cluster: str | None = None,
) -> tuple[Estimate, estimator.EstimateReport]:
    """Triple-difference wage effect of a minimum-wage introduction.

    Regresses two-year wage growth on the bite, the cohort dummy, and their
    interaction; the interaction coefficient is the causal wage effect on
    affected workers.  Returns it with its standard error plus the full
    regression report.
    """
    data = workers.copy()
    data["bite_x_cohort"] = data[bite_col] * data[cohort_col]
    spec = estimator.RegressionSpec(
        dependent=outcome,
        exog=(bite_col, cohort_col, "bite_x_cohort"),
        cluster=cluster,
    )
    report = estimator.ols(spec, data)
    return (
        Estimate(report.params["bite_x_cohort"], report.se["bite_x_cohort"]),
        report,
    )


@dataclass(frozen=True)
class CounterfactualInputs:
    """Employment and tightness series for the frozen-tightness scenario.

    ``employment`` has columns (year, group, employment); ``tightness``
    has columns (year, tightness) and must cover the same years.
    ``elasticities`` maps each group to its tightness elasticity of labor
    demand.  The base year defaults to the first year of the series.
    """

    employment: pd.DataFrame
    tightness: pd.DataFrame
    elasticities: dict
    base_year: int | None = None
    draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        years = set(self.employment["year"])
        missing = years - set(self.tightness["year"])
        if missing:
            raise ValueError(f"tightness series lacks years: {sorted(missing)}")
        if (self.tightness["tightness"] <= 0).any():
            raise ValueError("tightness must be positive")
        for group in self.employment["group"].unique():
            if group not in self.elasticities:
                raise ValueError(f"no elasticity supplied for group {group!r}")


@dataclass
class CounterfactualResult:
    by_group: pd.DataFrame
    totals: pd.DataFrame
    gap: float
    gap_se: float

    def to_dict(self) -> dict:
        return {
            "gap": self.gap,
            "gap_se": self.gap_se,
            "totals": self.totals.to_dict(orient="records"),
        }


def _scenario_factors(
    cumulative: np.ndarray, steps: np.ndarray, elasticity: float, application: str
) -> np.ndarray:
    """Per-year multipliers turning factual into counterfactual employment."""
    if application == "from_base":
        return 1.0 - elasticity * cumulative
    if application == "chained":
        return np.cumprod(1.0 - elasticity * steps)
    raise ValueError("application must be 'from_base' or 'chained'")


def counterfactual_employment(
    inp: CounterfactualInputs,
    convention: str = "log",
    application: str = "from_base",
) -> CounterfactualResult:
    """Employment path had tightness stayed at its base-year level.

    Each year's factual employment is scaled by one minus the group's
    tightness elasticity times the tightness change since the base year
    (cumulative log change by default; ``convention="level"`` uses the
    relative level change).  ``application="chained"`` instead compounds
    one-year adjustments.  The gap is the final-year difference between the
    counterfactual and factual totals, with a standard error simulated from
    normal draws of the elasticities.
    """
    if convention not in ("log", "level"):
        raise ValueError("convention must be 'log' or 'level'")
    tightness = inp.tightness.sort_values("year").reset_index(drop=True)
    base_year = inp.base_year if inp.base_year is not None else int(tightness["year"].min())
    base_theta = float(
        tightness.loc[tightness["year"] == base_year, "tightness"].iloc[0]
    )
    theta = tightness["tightness"].to_numpy(dtype=float)
    if convention == "log":
        cumulative = np.log(theta) - np.log(base_theta)
        steps = np.diff(np.log(theta), prepend=np.log(theta[0]))
    else:
        cumulative = theta / base_theta - 1.0
        steps = np.concatenate([[0.0], theta[1:] / theta[:-1] - 1.0])
    years_all = tightness["year"].astype(int).to_numpy()
    cum_by_year = dict(zip(years_all, cumulative))
    step_by_year = dict(zip(years_all, steps))

    rng = np.random.default_rng(inp.seed)
    group_tables = []
    gap_draw_total = None
    for group, block in inp.employment.groupby("group", sort=True):
        block = block.sort_values("year")
        years = block["year"].astype(int).to_numpy()
        factual = block["employment"].to_numpy(dtype=float)
        cum = np.array([cum_by_year[y] for y in years])
        stp = np.array([step_by_year[y] for y in years])
        eta = inp.elasticities[group]
        factors = _scenario_factors(cum, stp, eta.value, application)
        counterfactual = factual * factors
        draws = rng.normal(eta.value, eta.se, inp.draws)
        factor_draws = np.vstack(
            [_scenario_factors(cum, stp, e, application) for e in draws]
        )
        path_draws = factual[None, :] * factor_draws
        lo, hi = np.percentile(path_draws, [2.5, 97.5], axis=0)
        group_tables.append(
            pd.DataFrame(
                {
                    "year": years,
                    "group": group,
                    "factual": factual,
                    "counterfactual": counterfactual,
                    "lo": lo,
                    "hi": hi,
                }
            )
        )
        final_gap_draws = path_draws[:, -1] - factual[-1]
        gap_draw_total = (
            final_gap_draws
            if gap_draw_total is None
            else gap_draw_total + final_gap_draws
        )

    by_group = pd.concat(group_tables, ignore_index=True)
    totals = (
        by_group.groupby("year", as_index=False)[["factual", "counterfactual", "lo", "hi"]]
        .sum()
        .sort_values("year")
        .reset_index(drop=True)
    )
    last = totals.iloc[-1]
    gap = float(last["counterfactual"] - last["factual"])
    gap_se = float(np.std(gap_draw_total, ddof=1)) if inp.draws > 1 else 0.0
    return CounterfactualResult(
        by_group=by_group, totals=totals, gap=gap, gap_se=gap_se
    )


def concession_regressions(
    data: pd.DataFrame,
    wage_growth: str = "d_wage",
    tightness_growth: str = "d_tightness",
    unskilled_change: str | None = "d_unskilled_share",
    instruments: tuple = ("z_w", "z_v", "z_u"),
    fixed_effects: tuple = ("year",),
    cluster: str | None = "firm_id",
) -> dict:
    """Wage and skill concession regressions under tight labor markets.

    Wage concessions: wage growth on instrumented tightness growth, using
    the vacancy and job-seeker instruments (the wage instrument cannot
    appear when wages are the outcome).  Skill concessions: change in the
    unskilled employment share on instrumented wage and tightness growth
    with all three instruments.  Pure composition of the regression engine.
    """
    missing = [c for c in instruments if c not in data.columns]
    if missing:
        raise KeyError(f"instrument columns missing from data: {missing}")
    non_wage = tuple(z for z in instruments if z != "z_w")
    reports = {}
    wage_spec = estimator.RegressionSpec(
        dependent=wage_growth,
        endogenous=(tightness_growth,),
        instruments=non_wage,
        fixed_effects=fixed_effects,
        cluster=cluster,
    )
    reports["wage_concession"] = estimator.tsls(wage_spec, data)
    if unskilled_change is not None and unskilled_change in data.columns:
        skill_spec = estimator.RegressionSpec(
            dependent=unskilled_change,
            endogenous=(wage_growth, tightness_growth),
            instruments=tuple(instruments),
            fixed_effects=fixed_effects,
            cluster=cluster,
        )
        reports["skill_concession"] = estimator.tsls(skill_spec, data)
    return reports
