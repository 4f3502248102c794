"""First-difference panel regression engine.

OLS, two-stage least squares, and weighted least squares with fixed-effect
absorption, cluster-robust sandwich covariance, first-stage and reduced-form
reporting, and the decomposition of a shift-share IV estimate into
just-identified per-share estimates with sensitivity weights.

Numerical core: all least-squares solves go through a pivoted QR
factorization; normal equations are never formed for the solve itself.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg

log = logging.getLogger(__name__)

WEAK_INSTRUMENT_F = 10.0

_DEMEAN_TOL = 1e-12
_DEMEAN_MAX_ITER = 500


class RankDeficiencyError(ValueError):
    """Design matrix is rank deficient; names the collinear columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient in columns: {self.columns}")


class UnderIdentifiedError(ValueError):
    """Fewer instruments than endogenous regressors."""


class WeakInstrumentWarning(UserWarning):
    """First-stage excluded-instrument F below the configured threshold."""


@dataclass(frozen=True)
class RegressionSpec:
    """Specification of one first-difference regression.

    Column names refer to the (already differenced) estimation dataset.
    ``fixed_effects`` entries are column names; interactions can be given
    as ``"a*b"`` and are combined into a single grouping.
    """

    dependent: str
    endogenous: tuple = ()
    instruments: tuple = ()
    exog: tuple = ()
    fixed_effects: tuple = ()
    cluster: str | None = None
    weights: str | None = None
    lag: int = 2

    def __post_init__(self):
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        object.__setattr__(self, "exog", tuple(self.exog))
        object.__setattr__(self, "fixed_effects", tuple(self.fixed_effects))
        if self.endogenous and len(self.instruments) < len(self.endogenous):
            raise UnderIdentifiedError(
                f"{len(self.endogenous)} endogenous regressors but only "
                f"{len(self.instruments)} instruments"
            )


@dataclass
class FirstStage:
    """First-stage results for one endogenous regressor."""

    endogenous: str
    coefficients: dict
    f_excluded: float


@dataclass
class EstimateReport:
    """Coefficients, cluster-robust covariance, and diagnostics."""

    params: dict
    se: dict
    vcov: np.ndarray
    param_names: list
    nobs: int
    n_clusters: int
    dof_absorbed: int = 0
    first_stages: list = field(default_factory=list)
    reduced_form: "EstimateReport | None" = None
    n_dropped: int = 0

    def tstat(self, name: str) -> float:
        return self.params[name] / self.se[name]

    def to_dict(self) -> dict:
        out = {
            "params": self.params,
            "se": self.se,
            "nobs": self.nobs,
            "n_clusters": self.n_clusters,
            "first_stages": [
                {
                    "endogenous": fs.endogenous,
                    "coefficients": fs.coefficients,
                    "f_excluded": fs.f_excluded,
                }
                for fs in self.first_stages
            ],
        }
        if self.reduced_form is not None:
            out["reduced_form"] = {
                "params": self.reduced_form.params,
                "se": self.reduced_form.se,
            }
        return out

    def text_table(self, title: str = "") -> str:
        """Plain-text table: coefficient rows with SEs in parentheses, then F rows."""
        width = max([len(n) for n in self.param_names] + [12])
        lines = []
        if title:
            lines.append(title)
        lines.append("-" * (width + 24))
        for name in self.param_names:
            stars = _stars(abs(self.tstat(name)))
            lines.append(f"{name:<{width}}  {self.params[name]:>12.4f}{stars}")
            lines.append(f"{'':<{width}}  ({self.se[name]:>10.4f})")
        lines.append("-" * (width + 24))
        for fs in self.first_stages:
            lines.append(f"{'F: ' + fs.endogenous:<{width}}  {fs.f_excluded:>12.1f}")
        lines.append(f"{'Observations':<{width}}  {self.nobs:>12d}")
        lines.append(f"{'Clusters':<{width}}  {self.n_clusters:>12d}")
        return "\n".join(lines)


def _stars(t: float) -> str:
    if t >= 2.576:
        return "***"
    if t >= 1.960:
        return "**"
    if t >= 1.645:
        return "*"
    return ""


# --- differencing -------------------------------------------------------------


def first_difference(
    panel: pd.DataFrame,
    lag: int,
    columns,
    id_col: str = "firm_id",
    year_col: str = "year",
    log_transform: bool = True,
    prefix: str = "d_",
):
    """Long differences ``ln x_t - ln x_{t-lag}`` within units.

    Rows without the lagged observation are dropped; the number of dropped
    rows is returned alongside the differenced frame.  With
    ``log_transform=False`` plain differences are taken instead.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    columns = list(columns)
    current = panel[[id_col, year_col] + columns].copy()
    lagged = current.copy()
    lagged[year_col] = lagged[year_col] + lag
    merged = current.merge(
        lagged, on=[id_col, year_col], how="inner", suffixes=("", "_lagged")
    )
    for col in columns:
        now = merged[col].to_numpy(dtype=float)
        before = merged[f"{col}_lagged"].to_numpy(dtype=float)
        if log_transform:
            with np.errstate(divide="ignore", invalid="ignore"):
                merged[prefix + col] = np.log(now) - np.log(before)
        else:
            merged[prefix + col] = now - before
    merged = merged.drop(columns=[f"{col}_lagged" for col in columns])
    n_dropped = len(current) - len(merged)
    return merged, n_dropped


# --- fixed effects ------------------------------------------------------------


def _group_codes(frame: pd.DataFrame, fe_spec: str) -> np.ndarray:
    parts = [p.strip() for p in fe_spec.split("*")]
    if len(parts) == 1:
        codes, _ = pd.factorize(frame[parts[0]], sort=True)
        return codes
    key = frame[parts[0]].astype(str)
    for part in parts[1:]:
        key = key + "\x1f" + frame[part].astype(str)
    codes, _ = pd.factorize(key, sort=True)
    return codes


def _weighted_group_demean(x: np.ndarray, codes: np.ndarray, w: np.ndarray) -> np.ndarray:
    sums = np.zeros((codes.max() + 1, x.shape[1]))
    wsum = np.bincount(codes, weights=w)
    for j in range(x.shape[1]):
        sums[:, j] = np.bincount(codes, weights=w * x[:, j])
    means = sums / wsum[:, None]
    return x - means[codes]

def absorb_fixed_effects(
    matrix: np.ndarray,
    code_list,
    weights: np.ndarray | None = None,
    tol: float = _DEMEAN_TOL,
    max_iter: int = _DEMEAN_MAX_ITER,
) -> np.ndarray:
    """Within-transform ``matrix`` by the groupings in ``code_list``.

    One grouping is demeaned exactly in a single pass; several groupings are
    absorbed by alternating projections iterated to ``tol``.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x = x.copy()
    if not code_list:
        return x
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if len(code_list) == 1:
        return _weighted_group_demean(x, code_list[0], w)
    for _ in range(max_iter):
        delta = 0.0
        for codes in code_list:
            new = _weighted_group_demean(x, codes, w)
            delta = max(delta, float(np.max(np.abs(new - x))) if x.size else 0.0)
            x = new
        if delta < tol:
            break
    else:
        log.warning("fixed-effect absorption did not converge below %g", tol)
    return x


def _absorbed_dof(code_list) -> int:
    """Degrees of freedom consumed by absorbed fixed effects (incl. intercept)."""
    if not code_list:
        return 0
    dof = int(code_list[0].max()) + 1
    for codes in code_list[1:]:
        dof += int(codes.max())
    return dof


# --- QR least squares ---------------------------------------------------------


def qr_solve(x: np.ndarray, y: np.ndarray, names=None):
    """Least-squares solve via pivoted QR with an explicit rank check.

    Returns ``(beta, rinv)`` where ``rinv`` reconstructs ``(X'X)^{-1}`` as
    ``rinv @ rinv.T``.  Raises :class:`RankDeficiencyError` naming the
    collinear columns when the design is numerically rank deficient.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, k = x.shape
    if n < k:
        raise ValueError(f"more columns ({k}) than rows ({n})")
    q, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k:
        if names is None:
            names = [f"x{j}" for j in range(k)]
        dropped = [names[j] for j in piv[rank:]]
        raise RankDeficiencyError(dropped)
    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_piv
    rinv_piv = scipy.linalg.solve_triangular(r, np.eye(k))
    # undo the column pivoting so that rinv @ rinv.T == (X'X)^{-1}
    rinv = np.empty_like(rinv_piv)
    rinv[piv, :] = rinv_piv
    return beta, rinv


def projection_fitted(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Fitted values of each column of ``x`` projected on the span of ``z``."""
    q, r, piv = scipy.linalg.qr(np.asarray(z, dtype=float), mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(z.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    q = q[:, :rank]
    return q @ (q.T @ x)


def _cluster_sandwich(
    xhat: np.ndarray,
    resid: np.ndarray,
    rinv: np.ndarray,
    cluster_codes: np.ndarray,
    k_total: int,
    small_sample: bool = True,
):
    """CR0-style sandwich covariance with the common finite-sample factor."""
    n = xhat.shape[0]
    k = xhat.shape[1]
    xu = xhat * resid[:, None]
    n_clusters = int(cluster_codes.max()) + 1
    scores = np.zeros((n_clusters, k))
    for j in range(k):
        scores[:, j] = np.bincount(cluster_codes, weights=xu[:, j])
    meat = scores.T @ scores
    bread = rinv @ rinv.T
    vcov = bread @ meat @ bread
    if small_sample:
        g = n_clusters
        if g > 1 and n > k_total:
            vcov *= (g / (g - 1)) * ((n - 1) / (n - k_total))
    return vcov, n_clusters


# --- design assembly ----------------------------------------------------------


def _prepare(spec: RegressionSpec, data: pd.DataFrame):
    cols = (
        [spec.dependent]
        + list(spec.endogenous)
        + list(spec.exog)
        + list(spec.instruments)
    )
    needed = list(dict.fromkeys(cols))
    fe_cols = []
    for fe in spec.fixed_effects:
        fe_cols.extend(p.strip() for p in fe.split("*"))
    check = needed + fe_cols + ([spec.cluster] if spec.cluster else [])
    check += [spec.weights] if spec.weights else []
    missing = [c for c in check if c not in data.columns]
    if missing:
        raise KeyError(f"data is missing columns: {missing}")

    frame = data.dropna(subset=needed).reset_index(drop=True)
    n_dropped = len(data) - len(frame)

    codes = [_group_codes(frame, fe) for fe in spec.fixed_effects]
    add_const = not spec.fixed_effects

    if spec.weights:
        w = frame[spec.weights].to_numpy(dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        w = w / w.mean()
    else:
        w = None

    y = frame[spec.dependent].to_numpy(dtype=float)
    x_names = list(spec.endogenous) + list(spec.exog)
    x = frame[x_names].to_numpy(dtype=float) if x_names else np.empty((len(frame), 0))
    z_names = list(spec.instruments) + list(spec.exog)
    z = frame[z_names].to_numpy(dtype=float) if z_names else np.empty((len(frame), 0))

    if add_const:
        x = np.column_stack([x, np.ones(len(frame))])
        x_names = x_names + ["const"]
        z = np.column_stack([z, np.ones(len(frame))])
        z_names = z_names + ["const"]

    ymat = absorb_fixed_effects(y, codes, weights=w)
    xmat = absorb_fixed_effects(x, codes, weights=w)
    zmat = absorb_fixed_effects(z, codes, weights=w)

    if w is not None:
        root = np.sqrt(w)[:, None]
        ymat = ymat * root
        xmat = xmat * root
        zmat = zmat * root

    if spec.cluster:
        cluster_codes, _ = pd.factorize(frame[spec.cluster], sort=True)
    else:
        cluster_codes = np.arange(len(frame))

    dof_absorbed = _absorbed_dof(codes)
    return ymat[:, 0], xmat, x_names, zmat, z_names, cluster_codes, dof_absorbed, n_dropped


def _first_stage_f(
    x_j: np.ndarray,
    z_excluded: np.ndarray,
    z_exog: np.ndarray,
    dof_absorbed: int,
) -> float:
    """Homoskedastic F of the excluded instruments in one first stage."""
    n = x_j.shape[0]
    q = z_excluded.shape[1]
    full = np.column_stack([z_excluded, z_exog]) if z_exog.size else z_excluded
    fitted = projection_fitted(full, x_j[:, None])[:, 0]
    rss_u = float(np.sum((x_j - fitted) ** 2))
    if z_exog.size:
        fitted_r = projection_fitted(z_exog, x_j[:, None])[:, 0]
        rss_r = float(np.sum((x_j - fitted_r) ** 2))
    else:
        rss_r = float(x_j @ x_j)
    dof = n - full.shape[1] - dof_absorbed
    if dof <= 0 or rss_u <= 0:
        return float("inf") if rss_r > rss_u else 0.0
    return max(rss_r - rss_u, 0.0) / q / (rss_u / dof)


# --- estimators ----------------------------------------------------------------


def ols(spec: RegressionSpec, data: pd.DataFrame) -> EstimateReport:
    """Least squares with fixed-effect absorption and clustered covariance."""
    y, x, names, _, _, clusters, dof_absorbed, n_dropped = _prepare(spec, data)
    beta, rinv = qr_solve(x, y, names)
    resid = y - x @ beta
    k_total = x.shape[1] + dof_absorbed
    vcov, n_clusters = _cluster_sandwich(x, resid, rinv, clusters, k_total)
    se = np.sqrt(np.diag(vcov))
    return EstimateReport(
        params=dict(zip(names, beta.tolist())),
        se=dict(zip(names, se.tolist())),
        vcov=vcov,
        param_names=names,
        nobs=len(y),
        n_clusters=n_clusters,
        dof_absorbed=dof_absorbed,
        n_dropped=n_dropped,
    )


def tsls(
    spec: RegressionSpec,
    data: pd.DataFrame,
    weak_f_threshold: float = WEAK_INSTRUMENT_F,
    with_reduced_form: bool = False,
) -> EstimateReport:
    """Two-stage least squares.

    Endogenous regressors are projected on the instrument set (excluded
    instruments plus included exogenous regressors); the second stage runs
    on fitted values, while residuals for the sandwich covariance use the
    original regressors so that inference accounts for the two-step
    procedure.  The excluded-instrument F is reported per endogenous
    regressor and a :class:`WeakInstrumentWarning` is emitted below
    ``weak_f_threshold``.
    """
    if not spec.endogenous:
        raise ValueError("tsls requires at least one endogenous regressor")
    y, x, x_names, z, z_names, clusters, dof_absorbed, n_dropped = _prepare(spec, data)

    n_endog = len(spec.endogenous)
    x_endog = x[:, :n_endog]
    x_exog = x[:, n_endog:]
    exog_names = x_names[n_endog:]

    n_excl = len(spec.instruments)
    z_excl = z[:, :n_excl]
    z_exog = z[:, n_excl:]

    fitted_endog = projection_fitted(z, x_endog)
    xhat = np.column_stack([fitted_endog, x_exog])
    names = list(spec.endogenous) + exog_names
    beta, rinv = qr_solve(xhat, y, names)

    resid = y - x @ beta
    k_total = xhat.shape[1] + dof_absorbed
    vcov, n_clusters = _cluster_sandwich(xhat, resid, rinv, clusters, k_total)
    se = np.sqrt(np.diag(vcov))

    first_stages = []
    for j, endog_name in enumerate(spec.endogenous):
        pi, _ = qr_solve(z, x_endog[:, j], z_names)
        f_stat = _first_stage_f(x_endog[:, j], z_excl, z_exog, dof_absorbed)
        if f_stat < weak_f_threshold:
            warnings.warn(
                f"excluded-instrument F for {endog_name} is {f_stat:.2f} "
                f"(below {weak_f_threshold:g})",
                WeakInstrumentWarning,
                stacklevel=2,
            )
        first_stages.append(
            FirstStage(
                endogenous=endog_name,
                coefficients=dict(zip(z_names, pi.tolist())),
                f_excluded=f_stat,
            )
        )

    report = EstimateReport(
        params=dict(zip(names, beta.tolist())),
        se=dict(zip(names, se.tolist())),
        vcov=vcov,
        param_names=names,
        nobs=len(y),
        n_clusters=n_clusters,
        dof_absorbed=dof_absorbed,
        first_stages=first_stages,
        n_dropped=n_dropped,
    )
    if with_reduced_form:
        report.reduced_form = reduced_form(spec, data)
    return report


def reduced_form(spec: RegressionSpec, data: pd.DataFrame) -> EstimateReport:
    """OLS of the outcome directly on the instruments (plus fixed effects)."""
    rf_spec = RegressionSpec(
        dependent=spec.dependent,
        endogenous=(),
        instruments=(),
        exog=tuple(spec.instruments) + tuple(spec.exog),
        fixed_effects=spec.fixed_effects,
        cluster=spec.cluster,
        weights=spec.weights,
        lag=spec.lag,
    )
    return ols(rf_spec, data)


# --- shift-share sensitivity decomposition -------------------------------------


@dataclass
class RotembergReport:
    """Per-share decomposition of a shift-share IV estimate.

    ``table`` has one row per (occupation, period) instrument with its
    sensitivity weight ``alpha``, national growth ``growth``, just-identified
    estimate ``beta``, and first-stage F.  ``bartik_estimate`` is the
    estimate using the aggregated instrument; ``sum(alpha * beta)``
    reproduces it up to ``identity_gap``.
    """

    table: pd.DataFrame
    bartik_estimate: float
    sum_alpha: float
    identity_gap: float
    skipped: list

    def by_sign(self) -> pd.DataFrame:
        tab = self.table.dropna(subset=["alpha"])
        sign = np.where(tab["alpha"] >= 0, "positive", "negative")
        grouped = tab.groupby(sign)["alpha"].agg(["sum", "mean", "count"])
        grouped["share"] = grouped["sum"].abs() / grouped["sum"].abs().sum()
        return grouped

    def by_year(self) -> pd.DataFrame:
        return self.table.groupby("year")["alpha"].agg(["sum", "mean"])

    def by_occupation(self, top: int | None = None) -> pd.DataFrame:
        agg = (
            self.table.groupby("occupation")
            .agg(alpha=("alpha", "sum"), growth=("growth", "mean"))
            .sort_values("alpha", ascending=False)
        )
        return agg.head(top) if top else agg

    def to_dict(self) -> dict:
        return {
            "bartik_estimate": self.bartik_estimate,
            "sum_alpha": self.sum_alpha,
            "identity_gap": self.identity_gap,
            "n_instruments": int(len(self.table)),
            "n_skipped": len(self.skipped),
            "weights": self.table.to_dict(orient="records"),
        }


def rotemberg(
    data: pd.DataFrame,
    dependent: str,
    endogenous: str,
    shares: pd.DataFrame,
    growth: pd.DataFrame,
    fixed_effects=("year",),
    id_col: str = "firm_id",
    year_col: str = "year",
    occupation_col: str = "occupation",
    normalize_growth: bool = False,
    identity_tol: float = 1e-6,
) -> RotembergReport:
    """Decompose a single-endogenous shift-share IV estimate.

    For every (occupation, period) the base-year share column acts as one
    instrument: ``beta_k`` is the just-identified IV estimate from that
    share alone and ``alpha_k`` is proportional to the product of national
    growth and the covariance between the share and the residualized
    endogenous regressor.  The weights sum to one and weight the per-share
    estimates back to the aggregated estimate; the reproduction error is
    checked against ``identity_tol``.

    The decomposition is defined for single-endogenous specifications only;
    with two endogenous regressors run it once per instrument family on the
    corresponding single-endogenous specification.

    ``normalize_growth`` subtracts the per-period mean growth across
    occupations before computing weights.  With period-refining fixed
    effects this leaves the aggregate estimate unchanged and only shifts
    how the weights spread across occupations.
    """
    frame = data.dropna(subset=[dependent, endogenous]).reset_index(drop=True)
    codes = [_group_codes(frame, fe) for fe in fixed_effects]
    if codes:
        for code in codes:
            spans = pd.DataFrame({"g": code, "t": frame[year_col]})
            if spans.groupby("g")["t"].nunique().max() > 1:
                raise ValueError(
                    "fixed effects must refine periods for the share decomposition"
                )
    else:
        codes = []

    y = frame[dependent].to_numpy(dtype=float)
    x = frame[endogenous].to_numpy(dtype=float)
    if not codes:
        ones = np.zeros(len(frame), dtype=np.int64)
        codes = [ones]
    y_t = absorb_fixed_effects(y, codes)[:, 0]
    x_t = absorb_fixed_effects(x, codes)[:, 0]

    growth = growth.copy()
    if normalize_growth:
        growth["growth"] = growth["growth"] - growth.groupby(year_col)[
            "growth"
        ].transform("mean")

    share_map = shares.set_index([id_col, occupation_col])["share"]
    years = np.sort(frame[year_col].unique())
    year_masks = {t: (frame[year_col] == t).to_numpy() for t in years}
    fe_dof = _absorbed_dof(codes)
    n = len(frame)

    rows = []
    skipped = []
    denominator = 0.0
    for occ, block in growth.groupby(occupation_col, sort=True):
        share_col = (
            frame[id_col].map(share_map.xs(occ, level=occupation_col)).fillna(0.0)
        ).to_numpy(dtype=float)
        share_t = absorb_fixed_effects(share_col, codes)[:, 0]
        for _, rec in block.sort_values(year_col).iterrows():
            t = rec[year_col]
            g = rec["growth"]
            if t not in year_masks or not np.isfinite(g):
                continue
            mask = year_masks[t]
            zx = float(share_t[mask] @ x_t[mask])
            zy = float(share_t[mask] @ y_t[mask])
            zz = float(share_t[mask] @ share_t[mask])
            denominator += g * zx
            if zx == 0.0:
                beta_k = float("nan")
                f_k = float("nan")
                skipped.append((occ, int(t)))
            else:
                beta_k = zy / zx
                rss = float(x_t @ x_t) - zx**2 / zz if zz > 0 else float("nan")
                dof = n - 1 - fe_dof
                f_k = (zx**2 / zz) / (rss / dof) if rss and rss > 0 else float("inf")
            rows.append(
                {
                    "occupation": occ,
                    "year": int(t),
                    "growth": float(g),
                    "alpha_raw": g * zx,
                    "beta": beta_k,
                    "first_stage_f": f_k,
                }
            )

    if denominator == 0.0:
        raise ValueError("shift-share instrument is orthogonal to the regressor")

    table = pd.DataFrame(rows)
    table["alpha"] = table["alpha_raw"] / denominator
    # a share with zero covariance carries no identifying variation: its
    # just-identified estimate is undefined and its weight reported missing
    table.loc[table["beta"].isna(), "alpha"] = np.nan
    table = table.drop(columns=["alpha_raw"])

    # aggregated instrument and the estimate it implies
    bartik = np.zeros(n)
    for occ, block in growth.groupby(occupation_col, sort=True):
        share_col = (
            frame[id_col].map(share_map.xs(occ, level=occupation_col)).fillna(0.0)
        ).to_numpy(dtype=float)
        series = block.set_index(year_col)["growth"]
        g_per_row = frame[year_col].map(series).fillna(0.0).to_numpy(dtype=float)
        bartik += share_col * g_per_row
    bartik_t = absorb_fixed_effects(bartik, codes)[:, 0]
    bartik_estimate = float(bartik_t @ y_t) / float(bartik_t @ x_t)

    contributions = (table["alpha"] * table["beta"]).dropna()
    recombined = float(contributions.sum())
    identity_gap = abs(recombined - bartik_estimate) / max(abs(bartik_estimate), 1e-300)
    if skipped:
        log.warning(
            "%d share instruments had zero covariance with the regressor; "
            "identity checked over the remaining mass (gap %.2e)",
            len(skipped),
            identity_gap,
        )
    elif identity_gap > identity_tol:
        raise AssertionError(
            f"weight identity violated: gap {identity_gap:.3e} > {identity_tol:g}"
        )

    return RotembergReport(
        table=table,
        bartik_estimate=bartik_estimate,
        sum_alpha=float(table["alpha"].sum(skipna=True)),
        identity_gap=identity_gap,
        skipped=skipped,
    )


# --- regional feedback regression ----------------------------------------------


def feedback_regression(
    region_panel: pd.DataFrame,
    outcome: str = "tightness",
    employment_col: str = "employment",
    instrument_col: str = "z_l",
    region_col: str = "region",
    year_col: str = "year",
    lag: int = 1,
    cluster: bool = True,
) -> EstimateReport:
    """IV regression of regional tightness (or job-seeker) growth on employment growth.

    Differences the outcome and employment columns over ``lag`` years within
    regions, instruments employment growth with the supplied regional
    shift-share column (already in growth form), and clusters by region.
    """
    regions = region_panel[region_col].nunique()
    if regions < 2:
        raise ValueError("feedback regression needs at least two regions")
    diffed, _ = first_difference(
        region_panel,
        lag,
        [outcome, employment_col],
        id_col=region_col,
        year_col=year_col,
    )
    merged = diffed.merge(
        region_panel[[region_col, year_col, instrument_col]],
        on=[region_col, year_col],
        how="left",
    )
    spec = RegressionSpec(
        dependent=f"d_{outcome}",
        endogenous=(f"d_{employment_col}",),
        instruments=(instrument_col,),
        cluster=region_col if cluster else None,
        lag=lag,
    )
    return tsls(spec, merged)
