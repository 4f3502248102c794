"""Base-year exposure shares and firm-level shift-share instruments.

An instrument is the inner product of predetermined occupation employment
shares within a unit (firm or region) and national occupation-level growth
rates: one series each for average wages, vacancy stocks, and job-seeker
stocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

MISSING_GROWTH_CAP = 0.05


@dataclass
class BaseShares:
    """Predetermined occupation shares per unit, frozen at each unit's base year.

    ``table`` columns: unit id, ``base_year``, ``occupation``, ``share``;
    ``excluded`` holds units dropped at extraction with a reason code.
    """

    table: pd.DataFrame
    excluded: pd.DataFrame
    id_col: str = "firm_id"

    def pivot(self) -> pd.DataFrame:
        return self.table.pivot(
            index=self.id_col, columns="occupation", values="share"
        ).fillna(0.0)


def base_year_shares(
    panel: pd.DataFrame,
    base_year: int,
    estimation_start: int,
    id_col: str = "firm_id",
    year_col: str = "year",
    occupation_col: str = "occupation",
    employment_col: str = "employment",
) -> BaseShares:
    """Extract occupation employment shares at each unit's base year.

    The base year is the earliest observed year at or after ``base_year``;
    units whose earliest usable year falls inside the estimation window
    (``>= estimation_start``) are excluded with reason ``in_estimation_window``,
    and units with zero total employment in their base year with reason
    ``zero_base_employment``.  Shares never touch estimation-window data.
    """
    if base_year >= estimation_start:
        raise ValueError("base_year must precede estimation_start")
    usable = panel[panel[year_col] >= base_year]
    first_year = usable.groupby(id_col)[year_col].min().rename("base_year")

    excluded = []
    late = first_year[first_year >= estimation_start]
    for unit, year in late.items():
        excluded.append(
            {id_col: unit, "reason": "in_estimation_window", "year": int(year)}
        )
    first_year = first_year[first_year < estimation_start]

    merged = usable.merge(first_year, left_on=id_col, right_index=True)
    snapshot = merged[merged[year_col] == merged["base_year"]]
    totals = snapshot.groupby(id_col)[employment_col].transform("sum")
    zero_units = snapshot.loc[totals <= 0, id_col].unique()
    for unit in zero_units:
        year = int(first_year.loc[unit])
        excluded.append({id_col: unit, "reason": "zero_base_employment", "year": year})
    snapshot = snapshot[totals > 0].copy()
    snapshot["share"] = snapshot[employment_col] / snapshot.groupby(id_col)[
        employment_col
    ].transform("sum")
    snapshot = (
        snapshot.groupby([id_col, "base_year", occupation_col], as_index=False)[
            "share"
        ]
        .sum()
        .rename(columns={occupation_col: "occupation"})
    )
    excluded_df = pd.DataFrame(excluded, columns=[id_col, "reason", "year"])
    return BaseShares(table=snapshot, excluded=excluded_df, id_col=id_col)


def national_growth(
    frame: pd.DataFrame,
    value_col: str,
    lag: int,
    occupation_col: str = "occupation",
    year_col: str = "year",
    how: str = "sum",
    weight_col: str | None = None,
) -> pd.DataFrame:
    """National log growth per occupation: aggregate over regions/units first,
    then take ``ln X_ot - ln X_{o,t-lag}``.

    ``how`` is ``"sum"`` for stocks and ``"wmean"`` for employment-weighted
    averages (used for wages); ``"mean"`` gives the unweighted alternative.
    Non-positive national values yield missing growth for the affected pairs.
    """
    if how == "sum":
        national = frame.groupby([occupation_col, year_col])[value_col].sum()
    elif how == "mean":
        national = frame.groupby([occupation_col, year_col])[value_col].mean()
    elif how == "wmean":
        if weight_col is None:
            raise ValueError("how='wmean' requires weight_col")
        weighted = frame[value_col] * frame[weight_col]
        grouped = frame.assign(_wx=weighted).groupby([occupation_col, year_col])
        national = grouped["_wx"].sum() / grouped[weight_col].sum()
    else:
        raise ValueError(f"unknown aggregation {how!r}")

    wide = national.unstack(year_col)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(wide.where(wide > 0))
    growth = logs - logs.shift(lag, axis=1)
    out = (
        growth.reset_index()
        .melt(id_vars=occupation_col, var_name=year_col, value_name="growth")
        .rename(columns={occupation_col: "occupation", year_col: "year"})
        .sort_values(["occupation", "year"])
        .reset_index(drop=True)
    )
    # years with no lagged observation carry no growth at all
    first_years = sorted(wide.columns)[:lag]
    out = out[~out["year"].isin(first_years)].reset_index(drop=True)
    return out


@dataclass
class InstrumentSet:
    """Per unit-year values of the shift-share instruments.

    ``table`` columns: unit id, ``year``, one column per instrument; rows
    where more than ``cap`` of share mass lacked national growth carry NaN.
    """

    table: pd.DataFrame
    dropped: pd.DataFrame = field(default_factory=pd.DataFrame)
    id_col: str = "firm_id"


def bartik(
    shares: BaseShares,
    growth: pd.DataFrame,
    name: str = "z",
    max_missing_share: float = MISSING_GROWTH_CAP,
) -> pd.DataFrame:
    """Inner product of base-year shares with national growth rates.

    For each unit-year, occupations whose national growth is missing are
    renormalized away as long as their combined share mass stays at or
    below ``max_missing_share``; beyond the cap the instrument is missing
    for that unit-year.  Returns columns (id, year, ``name``,
    ``name + "_missing_share"``).
    """
    id_col = shares.id_col
    years = np.sort(growth["year"].unique())
    grid = shares.table.merge(pd.DataFrame({"year": years}), how="cross")
    grid = grid.merge(growth, on=["occupation", "year"], how="left")

    grid["available"] = grid["growth"].notna()
    grid["share_avail"] = grid["share"].where(grid["available"], 0.0)
    grid["contrib"] = grid["share_avail"] * grid["growth"].fillna(0.0)

    agg = grid.groupby([id_col, "year"], as_index=False).agg(
        total_share=("share", "sum"),
        avail_share=("share_avail", "sum"),
        contrib=("contrib", "sum"),
    )
    missing = agg["total_share"] - agg["avail_share"]
    with np.errstate(divide="ignore", invalid="ignore"):
        value = agg["contrib"] / agg["avail_share"] * agg["total_share"]
    value = value.where(missing <= max_missing_share * agg["total_share"])
    out = agg[[id_col, "year"]].copy()
    out[name] = value
    out[f"{name}_missing_share"] = missing / agg["total_share"]
    n_dropped = int(value.isna().sum())
    if n_dropped:
        log.info(
            "%s: %d unit-years dropped (missing growth above %.0f%% of share mass)",
            name,
            n_dropped,
            100 * max_missing_share,
        )
    return out


def build_instruments(
    firm_panel: pd.DataFrame,
    markets: pd.DataFrame,
    base_year: int,
    estimation_start: int,
    lag: int = 2,
    weighted_wages: bool = True,
    max_missing_share: float = MISSING_GROWTH_CAP,
    id_col: str = "firm_id",
    vacancy_col: str = "registered_vacancies",
) -> InstrumentSet:
    """Construct the wage, vacancy, and job-seeker instruments for a firm panel.

    National wage growth uses employment-weighted occupation averages by
    default (``weighted_wages=False`` switches to unweighted means); vacancy
    and job-seeker growth aggregate stocks over regions before differencing.
    """
    shares = base_year_shares(
        firm_panel, base_year=base_year, estimation_start=estimation_start,
        id_col=id_col,
    )
    growth_w = national_growth(
        firm_panel,
        value_col="wage_daily",
        lag=lag,
        how="wmean" if weighted_wages else "mean",
        weight_col="employment" if weighted_wages else None,
    )
    growth_v = national_growth(markets, value_col=vacancy_col, lag=lag)
    growth_u = national_growth(markets, value_col="job_seekers", lag=lag)

    z_w = bartik(shares, growth_w, "z_w", max_missing_share)
    z_v = bartik(shares, growth_v, "z_v", max_missing_share)
    z_u = bartik(shares, growth_u, "z_u", max_missing_share)
    table = z_w.merge(z_v, on=[id_col, "year"]).merge(z_u, on=[id_col, "year"])
    table = table[
        [id_col, "year", "z_w", "z_v", "z_u"]
        + [c for c in table.columns if c.endswith("_missing_share")]
    ]
    return InstrumentSet(table=table, dropped=shares.excluded, id_col=id_col)


def regional_employment_instrument(
    firm_panel: pd.DataFrame,
    base_year: int,
    estimation_start: int,
    lag: int = 1,
    region_col: str = "region",
) -> pd.DataFrame:
    """Shift-share instrument for regional employment growth.

    Region-level occupation shares at the base year interacted with national
    occupation employment growth; feeds the regional feedback regressions.
    Returns columns (region, year, z_l).
    """
    shares = base_year_shares(
        firm_panel,
        base_year=base_year,
        estimation_start=estimation_start,
        id_col=region_col,
    )
    growth_l = national_growth(firm_panel, value_col="employment", lag=lag)
    out = bartik(shares, growth_l, "z_l")
    return out[[region_col, "year", "z_l"]]
