"""End-to-end compositions of the toolkit modules.

Each function takes plain frames plus a few options and returns report
objects; the command-line layer only handles files and configuration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import estimator, shift_share, tightness, zones


@dataclass
class FirmEstimation:
    """OLS and IV estimates of the first-difference labor-demand equation."""

    ols: estimator.EstimateReport
    tsls: estimator.EstimateReport
    data: pd.DataFrame
    lag: int

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "ols": self.ols.to_dict(),
            "tsls": self.tsls.to_dict(),
        }


def estimation_frame(
    firm_panel: pd.DataFrame,
    markets: pd.DataFrame,
    lag: int = 2,
    base_year: int | None = None,
    estimation_start: int | None = None,
    notification: tightness.NotificationShares | None = None,
    weighted_wages: bool = True,
    max_missing_share: float = shift_share.MISSING_GROWTH_CAP,
    tightness_missing_cap: float = tightness.MISSING_RATIO_CAP,
) -> tuple[pd.DataFrame, shift_share.InstrumentSet]:
    """Differenced firm-year dataset with tightness and instruments attached.

    Builds firm tightness from the market cells, collapses the long panel to
    firm-years, takes log differences over ``lag`` years, and merges the
    three shift-share instruments.
    """
    years = firm_panel["year"]
    if base_year is None:
        base_year = int(years.min())
    if estimation_start is None:
        estimation_start = base_year + 1

    theta = tightness.build_firm_tightness(
        firm_panel,
        markets,
        notification=notification,
        max_missing_share=tightness_missing_cap,
    )
    firm_years = (
        firm_panel.groupby(["firm_id", "year"], as_index=False)
        .agg(
            employment=("employment", "sum"),
            wage=("wage_daily", "first"),
            region=("region", "first"),
        )
        .merge(theta[["firm_id", "year", "tightness"]], on=["firm_id", "year"])
    )
    diffed, _ = estimator.first_difference(
        firm_years.assign(region=firm_years.region),
        lag,
        ["employment", "wage", "tightness"],
    )
    diffed = diffed.merge(
        firm_years[["firm_id", "year", "region"]], on=["firm_id", "year"], how="left"
    )
    instruments = shift_share.build_instruments(
        firm_panel,
        markets,
        base_year=base_year,
        estimation_start=estimation_start,
        lag=lag,
        weighted_wages=weighted_wages,
        max_missing_share=max_missing_share,
    )
    merged = diffed.merge(instruments.table, on=["firm_id", "year"], how="inner")
    merged = merged.dropna(
        subset=["d_employment", "d_wage", "d_tightness", "z_w", "z_v", "z_u"]
    ).reset_index(drop=True)
    return merged, instruments


def run_firm_estimation(
    firm_panel: pd.DataFrame,
    markets: pd.DataFrame,
    lag: int = 2,
    fixed_effects: tuple = ("year",),
    cluster: str = "firm_id",
    weak_f_threshold: float = estimator.WEAK_INSTRUMENT_F,
    suppress_weak_warning: bool = False,
    **frame_options,
) -> FirmEstimation:
    """Estimate the labor-demand equation by OLS and 2SLS on one panel."""
    data, _ = estimation_frame(firm_panel, markets, lag=lag, **frame_options)
    iv_spec = estimator.RegressionSpec(
        dependent="d_employment",
        endogenous=("d_wage", "d_tightness"),
        instruments=("z_w", "z_v", "z_u"),
        fixed_effects=fixed_effects,
        cluster=cluster,
        lag=lag,
    )
    ols_spec = estimator.RegressionSpec(
        dependent="d_employment",
        exog=("d_wage", "d_tightness"),
        fixed_effects=fixed_effects,
        cluster=cluster,
        lag=lag,
    )
    with warnings.catch_warnings():
        if suppress_weak_warning:
            warnings.simplefilter("ignore", estimator.WeakInstrumentWarning)
        iv = estimator.tsls(
            iv_spec, data, weak_f_threshold=weak_f_threshold, with_reduced_form=True
        )
        least_squares = estimator.ols(ols_spec, data)
    return FirmEstimation(ols=least_squares, tsls=iv, data=data, lag=lag)


def run_rotemberg(
    firm_panel: pd.DataFrame,
    markets: pd.DataFrame,
    endogenous: str = "wage",
    lag: int = 2,
    base_year: int | None = None,
    estimation_start: int | None = None,
    normalize_growth: bool = False,
    weighted_wages: bool = True,
) -> estimator.RotembergReport:
    """Shift-share weight diagnostics for one instrument family.

    ``endogenous`` picks the single-endogenous specification: ``"wage"``
    decomposes the wage instrument, ``"vacancies"`` and ``"job_seekers"``
    the two tightness instruments.
    """
    if endogenous not in ("wage", "vacancies", "job_seekers"):
        raise ValueError("endogenous must be wage, vacancies, or job_seekers")
    years = firm_panel["year"]
    if base_year is None:
        base_year = int(years.min())
    if estimation_start is None:
        estimation_start = base_year + 1

    data, _ = estimation_frame(
        firm_panel,
        markets,
        lag=lag,
        base_year=base_year,
        estimation_start=estimation_start,
        weighted_wages=weighted_wages,
    )
    shares = shift_share.base_year_shares(
        firm_panel, base_year=base_year, estimation_start=estimation_start
    )
    if endogenous == "wage":
        growth = shift_share.national_growth(
            firm_panel,
            value_col="wage_daily",
            lag=lag,
            how="wmean" if weighted_wages else "mean",
            weight_col="employment" if weighted_wages else None,
        )
        regressor = "d_wage"
    elif endogenous == "vacancies":
        growth = shift_share.national_growth(
            markets, value_col="registered_vacancies", lag=lag
        )
        regressor = "d_tightness"
    else:
        growth = shift_share.national_growth(markets, value_col="job_seekers", lag=lag)
        regressor = "d_tightness"
    growth = growth.dropna(subset=["growth"])
    return estimator.rotemberg(
        data,
        dependent="d_employment",
        endogenous=regressor,
        shares=shares.table,
        growth=growth,
        fixed_effects=("year",),
        normalize_growth=normalize_growth,
    )


def run_zone_sweep(
    commuting: pd.DataFrame,
    labor_force: pd.DataFrame,
    adjacency: pd.DataFrame | None,
    thresholds,
    contiguity: str = "split",
) -> tuple[zones.Partition, list, zones.CommutingGraph]:
    """Delineate commuting zones: sweep, select by modularity, enforce contiguity."""
    graph = zones.CommutingGraph.from_frames(commuting, labor_force, adjacency)
    sweep = zones.sweep_thresholds(graph, thresholds)
    best = sweep.best
    if graph.adjacency is not None:
        best = zones.enforce_contiguity(graph, best, mode=contiguity)
    return best, sweep.trace, graph


def flow_adjusted_markets(
    markets: pd.DataFrame,
    transitions: pd.DataFrame,
    occupation_employment: pd.DataFrame,
    notification: tightness.NotificationShares | None = None,
) -> pd.DataFrame:
    """Apply notification grossing and flow adjustment to every region-year.

    Returns the market table with provenance columns: raw stocks, the
    notification share used, grossed-up totals, and flow-adjusted stocks.
    """
    tm = tightness.TransitionMatrix.from_frames(transitions, occupation_employment)
    weights = tightness.flow_weights(tm)
    order = {occ: i for i, occ in enumerate(weights.occupations)}

    cells = markets.copy()
    if notification is not None:
        levels = cells["occupation"].astype(str).map(tightness.notification_level)
        share_used = np.array(
            [
                notification.share(y, lvl)
                for y, lvl in zip(cells["year"].astype(int), levels)
            ]
        )
    else:
        share_used = np.ones(len(cells))
    cells["notification_share"] = share_used
    cells["total_vacancies"] = cells["registered_vacancies"] / share_used

    adjusted_v = np.full(len(cells), np.nan)
    adjusted_u = np.full(len(cells), np.nan)
    for (_, _), block in cells.groupby(["region", "year"]):
        unknown = set(block["occupation"].astype(str)) - set(order)
        if unknown:
            raise ValueError(
                f"occupations missing from the transition matrix: {sorted(unknown)[:5]}"
            )
        vacancies = np.zeros(len(order))
        seekers = np.zeros(len(order))
        rows = block.index.to_numpy()
        positions = block["occupation"].astype(str).map(order).to_numpy()
        vacancies[positions] = block["total_vacancies"].to_numpy()
        seekers[positions] = block["job_seekers"].to_numpy()
        v_adj, u_adj = tightness.flow_adjusted_stocks(weights, vacancies, seekers)
        adjusted_v[rows] = v_adj[positions]
        adjusted_u[rows] = u_adj[positions]
    cells["adjusted_vacancies"] = adjusted_v
    cells["adjusted_job_seekers"] = adjusted_u
    return cells
