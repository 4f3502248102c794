"""Market-level and firm-specific labor market tightness.

Tightness is the ratio of open vacancies to job seekers in an
occupation-by-region-by-year cell.  Registered vacancy counts can be
grossed up to totals with notification shares keyed by skill requirement
level, and stocks can be flow-adjusted so that neighboring occupations
count according to observed worker-transition weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

# 5th digit of the occupation code designates the skill requirement level
_LEVELS = {"1": "helper", "2": "professional", "3": "specialist", "4": "expert"}

# specialists and experts are pooled for notification shares
_POOLED = {
    "helper": "helper",
    "professional": "professional",
    "specialist": "specialist_expert",
    "expert": "specialist_expert",
}

NOTIFICATION_LEVELS = ("helper", "professional", "specialist_expert")

# weights this large usually indicate a tiny target occupation; they are
# kept but logged for inspection
EXTREME_WEIGHT = 50.0

MISSING_RATIO_CAP = 1.0


def requirement_level(occupation_code: str) -> str:
    """Skill requirement level encoded in the 5th digit of an occupation code."""
    code = str(occupation_code)
    if len(code) != 5:
        raise ValueError(f"occupation code {code!r} must have 5 digits")
    try:
        return _LEVELS[code[4]]
    except KeyError:
        raise ValueError(
            f"occupation code {code!r} has invalid requirement digit {code[4]!r}"
        ) from None


def notification_level(occupation_code: str) -> str:
    """Requirement level pooled the way notification shares are reported."""
    return _POOLED[requirement_level(occupation_code)]


@dataclass(frozen=True)
class NotificationShares:
    """Share of all vacancies registered with the employment agency,
    by year and pooled requirement level."""

    shares: dict

    def __post_init__(self):
        for key, value in self.shares.items():
            if not 0.0 < value <= 1.0:
                raise ValueError(f"notification share {key} = {value} not in (0, 1]")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "NotificationShares":
        """Build from a frame with columns (year, level, share)."""
        shares = {}
        for _, row in frame.iterrows():
            level = str(row["level"])
            if level not in NOTIFICATION_LEVELS:
                raise ValueError(
                    f"unknown notification level {level!r}; "
                    f"expected one of {NOTIFICATION_LEVELS}"
                )
            shares[(int(row["year"]), level)] = float(row["share"])
        return cls(shares)

    def share(self, year: int, level: str) -> float:
        try:
            return self.shares[(int(year), level)]
        except KeyError:
            raise KeyError(
                f"no notification share for year={year}, level={level!r}"
            ) from None


@dataclass(frozen=True)
class MarketCell:
    """Stocks for one occupation-region-year labor market."""

    occupation: str
    region: str
    year: int
    registered_vacancies: float
    job_seekers: float
    total_vacancies: float | None = None

    def __post_init__(self):
        if self.registered_vacancies < 0 or self.job_seekers < 0:
            raise ValueError("stocks must be nonnegative")
        if (
            self.total_vacancies is not None
            and self.total_vacancies < self.registered_vacancies - 1e-9
        ):
            raise ValueError("total vacancies cannot fall below registered ones")


def total_vacancies(
    registered: float, shares: NotificationShares, year: int, occupation_code: str
) -> float:
    """Gross registered vacancies up by the notification share of the cell's level."""
    level = notification_level(occupation_code)
    return registered / shares.share(year, level)


def market_tightness(cell: MarketCell) -> float | None:
    """Vacancies per job seeker; ``None`` (not zero) when there are no seekers."""
    if cell.job_seekers == 0:
        return None
    vac = (
        cell.total_vacancies
        if cell.total_vacancies is not None
        else cell.registered_vacancies
    )
    return vac / cell.job_seekers


def firm_tightness(shares, ratios) -> float:
    """Employment-share weighted tightness over a firm's occupations.

    ``shares`` must sum to one and every occupation with positive share
    needs a defined vacancy-to-seeker ratio; undefined cells are handled
    upstream (see :func:`build_firm_tightness`).
    """
    shares = np.asarray(shares, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    if shares.shape != ratios.shape:
        raise ValueError("shares and ratios must align")
    if abs(shares.sum() - 1.0) > 1e-8:
        raise ValueError(f"shares must sum to 1, got {shares.sum()!r}")
    if np.any(~np.isfinite(ratios[shares > 0])):
        raise ValueError("every occupation with positive share needs a defined ratio")
    return float(shares @ ratios)


def build_firm_tightness(
    firm_panel: pd.DataFrame,
    markets: pd.DataFrame,
    notification: NotificationShares | None = None,
    max_missing_share: float = MISSING_RATIO_CAP,
    id_col: str = "firm_id",
) -> pd.DataFrame:
    """Firm-specific tightness for every firm-year in a long panel.

    Contemporaneous occupation employment shares weight the firm's regional
    vacancy-to-seeker ratios.  Cells without job seekers (or missing from
    ``markets``) have undefined tightness: their share mass is renormalized
    away and reported in ``missing_share``; a firm-year whose missing mass
    exceeds ``max_missing_share`` (or with zero employment) gets NaN.
    Firms spanning several regions are rejected.

    Returns columns (id, year, tightness, missing_share).
    """
    regions_per_firm = firm_panel.groupby(id_col)["region"].nunique()
    multi = regions_per_firm[regions_per_firm > 1]
    if len(multi):
        raise ValueError(
            f"firms must be single-region; offending ids: {list(multi.index)[:5]}"
        )

    cells = markets.copy()
    if notification is not None:
        levels = cells["occupation"].astype(str).map(notification_level)
        share_vals = [
            notification.share(y, lvl)
            for y, lvl in zip(cells["year"].astype(int), levels)
        ]
        cells["vacancies"] = cells["registered_vacancies"] / np.asarray(share_vals)
    else:
        cells["vacancies"] = cells["registered_vacancies"]
    with np.errstate(divide="ignore", invalid="ignore"):
        cells["ratio"] = np.where(
            cells["job_seekers"] > 0, cells["vacancies"] / cells["job_seekers"], np.nan
        )

    merged = firm_panel.merge(
        cells[["occupation", "region", "year", "ratio"]],
        on=["occupation", "region", "year"],
        how="left",
    )
    merged["defined"] = merged["ratio"].notna()
    merged["emp_defined"] = merged["employment"].where(merged["defined"], 0.0)
    merged["weighted"] = merged["emp_defined"] * merged["ratio"].fillna(0.0)

    agg = merged.groupby([id_col, "year"], as_index=False).agg(
        employment=("employment", "sum"),
        emp_defined=("emp_defined", "sum"),
        weighted=("weighted", "sum"),
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        tightness = agg["weighted"] / agg["emp_defined"]
        missing = np.where(
            agg["employment"] > 0,
            1.0 - agg["emp_defined"] / agg["employment"],
            np.nan,
        )
    out = agg[[id_col, "year"]].copy()
    out["tightness"] = tightness.where(
        (agg["employment"] > 0) & (missing <= max_missing_share) & (agg["emp_defined"] > 0)
    )
    out["missing_share"] = missing
    n_undefined = int(out["tightness"].isna().sum())
    if n_undefined:
        log.info(
            "firm tightness undefined for %d firm-years (no seekers or missing cells)",
            n_undefined,
        )
    return out


# --- flow adjustment -----------------------------------------------------------


@dataclass(frozen=True)
class TransitionMatrix:
    """Yearly worker transition probabilities between occupations.

    ``probs[o, h]`` is the probability that a worker in occupation ``o``
    works in occupation ``h`` one year later; rows must sum to one.
    ``employment`` holds the occupation employment totals used to normalize
    for market size.  Transitions should be pooled over regions and years
    before constructing weights so the weighting matrix is stable.
    """

    occupations: tuple
    probs: np.ndarray
    employment: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        emp = np.asarray(self.employment, dtype=float)
        n = len(self.occupations)
        if probs.shape != (n, n) or emp.shape != (n,):
            raise ValueError("transition matrix dimensions do not match occupations")
        row_sums = probs.sum(axis=1)
        bad = np.where(np.abs(row_sums - 1.0) > 1e-9)[0]
        if bad.size:
            raise ValueError(
                f"transition rows must sum to 1; offending occupations: "
                f"{[self.occupations[i] for i in bad[:5]]}"
            )
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "employment", emp)
        object.__setattr__(self, "occupations", tuple(self.occupations))

    @classmethod
    def from_frames(
        cls, transitions: pd.DataFrame, employment: pd.DataFrame
    ) -> "TransitionMatrix":
        """Build from (from_occupation, to_occupation, probability) and
        (occupation, employment) frames."""
        occupations = tuple(sorted(employment["occupation"].astype(str)))
        index = {occ: i for i, occ in enumerate(occupations)}
        probs = np.zeros((len(occupations), len(occupations)))
        for _, row in transitions.iterrows():
            src, dst = str(row["from_occupation"]), str(row["to_occupation"])
            if src not in index or dst not in index:
                raise ValueError(f"transition references unknown occupation {src!r}/{dst!r}")
            probs[index[src], index[dst]] = float(row["probability"])
        emp = (
            employment.assign(occupation=employment["occupation"].astype(str))
            .set_index("occupation")["employment"]
            .reindex(occupations)
            .to_numpy(dtype=float)
        )
        return cls(occupations, probs, emp)


@dataclass(frozen=True)
class FlowWeights:
    """Cross-occupation weights; own occupation always carries weight one."""

    occupations: tuple
    weights: np.ndarray


def flow_weights(
    tm: TransitionMatrix, extreme_threshold: float = EXTREME_WEIGHT
) -> FlowWeights:
    """Relative value of a vacancy (or seeker) in a neighboring occupation.

    ``w[o, h] = (P(h|o) / P(o|o)) * (L_o / L_h)`` with the diagonal pinned
    to one exactly.  Weights above ``extreme_threshold`` (typically caused
    by tiny target occupations) are kept but logged.
    """
    diag = np.diag(tm.probs)
    zero_diag = np.where(diag == 0)[0]
    if zero_diag.size:
        raise ValueError(
            "occupations with zero own-transition probability: "
            f"{[tm.occupations[i] for i in zero_diag[:5]]}"
        )
    zero_emp = np.where(tm.employment == 0)[0]
    if zero_emp.size:
        raise ValueError(
            "occupations with zero employment: "
            f"{[tm.occupations[i] for i in zero_emp[:5]]}"
        )
    weights = (tm.probs / diag[:, None]) * (
        tm.employment[:, None] / tm.employment[None, :]
    )
    np.fill_diagonal(weights, 1.0)
    extreme = np.argwhere(weights > extreme_threshold)
    for o, h in extreme[:10]:
        log.warning(
            "extreme flow weight %.1f from %s to %s",
            weights[o, h],
            tm.occupations[o],
            tm.occupations[h],
        )
    return FlowWeights(tm.occupations, weights)


def flow_adjusted_stocks(weights: FlowWeights, vacancies, job_seekers):
    """Weighted cross-occupation sums of the stocks within one region-year.

    Every occupation's adjusted vacancy count is the weighted sum over all
    occupations' vacancies in the region, and analogously for seekers; with
    zero cross-flows the adjusted stocks equal the raw ones, with all-ones
    weights every occupation sees the region totals.
    """
    v = np.asarray(vacancies, dtype=float)
    u = np.asarray(job_seekers, dtype=float)
    n = len(weights.occupations)
    if v.shape != (n,) or u.shape != (n,):
        raise ValueError("stock vectors must align with the weight matrix")
    return weights.weights @ v, weights.weights @ u


def flow_adjusted_firm_tightness(shares, adjusted_vacancies, adjusted_seekers) -> float:
    """Firm tightness over flow-adjusted stocks."""
    v = np.asarray(adjusted_vacancies, dtype=float)
    u = np.asarray(adjusted_seekers, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(u > 0, v / u, np.nan)
    return firm_tightness(shares, ratios)
