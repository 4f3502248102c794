import numpy as np
import pandas as pd
import pytest

from tightlab import estimator as est


def toy_panel(rng, n_firms=40, n_years=6):
    rows = []
    for i in range(n_firms):
        level = rng.uniform(10, 100)
        wage = rng.uniform(50, 120)
        for t in range(n_years):
            level *= np.exp(rng.normal(0.01, 0.05))
            wage *= np.exp(rng.normal(0.02, 0.03))
            rows.append(
                {"firm_id": i, "year": 2012 + t, "employment": level, "wage": wage}
            )
    return pd.DataFrame(rows)


class TestFirstDifference:
    def test_constant_series_gives_zeros(self):
        panel = pd.DataFrame(
            {"firm_id": [1] * 4, "year": [2012, 2013, 2014, 2015], "x": [7.0] * 4}
        )
        out, dropped = est.first_difference(panel, 1, ["x"])
        assert np.allclose(out["d_x"], 0.0)
        assert dropped == 1

    def test_exponential_growth_recovers_rate(self):
        years = np.arange(2012, 2019)
        panel = pd.DataFrame(
            {"firm_id": 1, "year": years, "x": np.exp(0.03 * (years - 2012))}
        )
        out, _ = est.first_difference(panel, 2, ["x"])
        assert np.allclose(out["d_x"], 0.06, atol=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        panel = toy_panel(rng, n_firms=8, n_years=5)
        out, dropped = est.first_difference(panel, 2, ["employment", "wage"])
        # brute force over rows
        raw = panel.set_index(["firm_id", "year"])
        count = 0
        for (i, t), row in raw.iterrows():
            if (i, t - 2) in raw.index:
                expect = np.log(row["employment"]) - np.log(
                    raw.loc[(i, t - 2), "employment"]
                )
                got = out[(out.firm_id == i) & (out.year == t)]["d_employment"].iloc[0]
                assert got == pytest.approx(expect, rel=1e-12)
                count += 1
        assert count == len(out)
        assert dropped == len(panel) - len(out)


class TestOls:
    def test_exact_fit_line(self):
        x = np.linspace(0, 1, 30)
        data = pd.DataFrame({"y": 2.0 + 3.0 * x, "x": x})
        spec = est.RegressionSpec(dependent="y", exog=("x",))
        report = est.ols(spec, data)
        assert report.params["x"] == pytest.approx(3.0, abs=1e-10)
        assert report.params["const"] == pytest.approx(2.0, abs=1e-10)

    def test_equal_weights_match_unweighted(self):
        rng = np.random.default_rng(3)
        n = 200
        data = pd.DataFrame(
            {
                "y": rng.normal(size=n),
                "x": rng.normal(size=n),
                "w": np.full(n, 3.7),
                "g": rng.integers(0, 5, size=n),
            }
        )
        spec_u = est.RegressionSpec(dependent="y", exog=("x",), cluster="g")
        spec_w = est.RegressionSpec(dependent="y", exog=("x",), cluster="g", weights="w")
        ru, rw = est.ols(spec_u, data), est.ols(spec_w, data)
        assert rw.params["x"] == pytest.approx(ru.params["x"], rel=1e-12)
        assert rw.se["x"] == pytest.approx(ru.se["x"], rel=1e-12)

    def test_varying_weights_match_manual_wls(self):
        rng = np.random.default_rng(7)
        n = 150
        data = pd.DataFrame(
            {"x": rng.normal(size=n), "w": rng.uniform(0.5, 4.0, size=n)}
        )
        data["y"] = 1.0 + 2.0 * data.x + rng.normal(size=n)
        spec = est.RegressionSpec(dependent="y", exog=("x",), weights="w")
        report = est.ols(spec, data)
        design = np.column_stack([data.x, np.ones(n)])
        wmat = np.diag(data.w)
        beta = np.linalg.solve(
            design.T @ wmat @ design, design.T @ wmat @ data.y
        )
        assert report.params["x"] == pytest.approx(beta[0], rel=1e-10)
        assert report.params["const"] == pytest.approx(beta[1], rel=1e-10)

    def test_fe_absorption_equals_dummies(self):
        rng = np.random.default_rng(11)
        n = 300
        data = pd.DataFrame(
            {
                "x": rng.normal(size=n),
                "year": rng.integers(0, 4, size=n),
                "grp": rng.integers(0, 6, size=n),
            }
        )
        data["y"] = (
            1.5 * data.x + 0.3 * data.year + 0.7 * data.grp + rng.normal(size=n)
        )
        spec = est.RegressionSpec(
            dependent="y", exog=("x",), fixed_effects=("year", "grp")
        )
        absorbed = est.ols(spec, data)
        dummies = pd.get_dummies(data, columns=["year", "grp"], dtype=float)
        design = np.column_stack(
            [
                data.x.to_numpy(),
                dummies.filter(like="year_").to_numpy(),
                dummies.filter(like="grp_").to_numpy()[:, 1:],
            ]
        )
        beta, *_ = np.linalg.lstsq(design, data.y.to_numpy(), rcond=None)
        assert absorbed.params["x"] == pytest.approx(beta[0], abs=1e-9)

    def test_singleton_clusters_equal_hc1(self):
        rng = np.random.default_rng(19)
        n = 120
        data = pd.DataFrame({"x": rng.normal(size=n)})
        data["y"] = 0.5 * data.x + rng.normal(size=n) * (1 + data.x.abs())
        spec = est.RegressionSpec(dependent="y", exog=("x",))
        report = est.ols(spec, data)
        # HC1 by hand
        x = np.column_stack([data.x, np.ones(n)])
        beta = np.linalg.lstsq(x, data.y, rcond=None)[0]
        u = data.y.to_numpy() - x @ beta
        bread = np.linalg.inv(x.T @ x)
        meat = (x * u[:, None]).T @ (x * u[:, None])
        hc1 = bread @ meat @ bread * n / (n - 2)
        assert report.se["x"] == pytest.approx(np.sqrt(hc1[0, 0]), rel=1e-10)

    def test_rank_deficiency_names_columns(self):
        rng = np.random.default_rng(23)
        n = 60
        data = pd.DataFrame({"a": rng.normal(size=n)})
        data["b"] = 2 * data.a
        data["y"] = data.a + rng.normal(size=n)
        spec = est.RegressionSpec(dependent="y", exog=("a", "b"))
        with pytest.raises(est.RankDeficiencyError) as err:
            est.ols(spec, data)
        assert set(err.value.columns) & {"a", "b"}

    def test_upward_bias_with_confounded_regressor(self):
        rng = np.random.default_rng(29)
        n = 4000
        confound = rng.normal(size=n)
        x = rng.normal(size=n) + confound
        y = -0.7 * x + confound + 0.3 * rng.normal(size=n)
        data = pd.DataFrame({"y": y, "x": x})
        report = est.ols(est.RegressionSpec(dependent="y", exog=("x",)), data)
        assert report.params["x"] > -0.7 + 0.2


def iv_data(n=3000, beta=-0.5, seed=101, weak=False):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    confound = rng.normal(size=n)
    strength = 0.05 if weak else 1.0
    x = strength * z + confound + 0.5 * rng.normal(size=n)
    y = beta * x + confound + 0.5 * rng.normal(size=n)
    return pd.DataFrame({"y": y, "x": x, "z": z})


class TestTsls:
    def test_self_instrumenting_equals_ols(self):
        rng = np.random.default_rng(31)
        n = 500
        data = pd.DataFrame({"x": rng.normal(size=n), "c2": rng.normal(size=n)})
        data["y"] = 1.0 + 2.0 * data.x - 0.5 * data.c2 + rng.normal(size=n)
        spec_iv = est.RegressionSpec(
            dependent="y", endogenous=("x",), instruments=("x",), exog=("c2",)
        )
        spec_ls = est.RegressionSpec(dependent="y", exog=("x", "c2"))
        iv, ls = est.tsls(spec_iv, data), est.ols(spec_ls, data)
        assert iv.params["x"] == pytest.approx(ls.params["x"], rel=1e-8)
        assert iv.params["c2"] == pytest.approx(ls.params["c2"], rel=1e-8)

    def test_wald_ratio_in_just_identified_case(self):
        data = iv_data()
        spec = est.RegressionSpec(dependent="y", endogenous=("x",), instruments=("z",))
        report = est.tsls(spec, data)
        z, x, y = data.z.to_numpy(), data.x.to_numpy(), data.y.to_numpy()
        wald = np.cov(z, y)[0, 1] / np.cov(z, x)[0, 1]
        assert report.params["x"] == pytest.approx(wald, rel=1e-10)

    def test_removes_confounding_bias(self):
        data = iv_data(beta=-0.5)
        spec = est.RegressionSpec(dependent="y", endogenous=("x",), instruments=("z",))
        report = est.tsls(spec, data)
        assert report.params["x"] == pytest.approx(-0.5, abs=0.05)
        ls = est.ols(est.RegressionSpec(dependent="y", exog=("x",)), data)
        assert ls.params["x"] > report.params["x"] + 0.2

    def test_iv_chain_identity(self):
        data = iv_data()
        spec = est.RegressionSpec(dependent="y", endogenous=("x",), instruments=("z",))
        report = est.tsls(spec, data, with_reduced_form=True)
        first = report.first_stages[0].coefficients["z"]
        reduced = report.reduced_form.params["z"]
        assert report.params["x"] * first == pytest.approx(reduced, rel=1e-8)

    def test_weak_instrument_warns(self):
        data = iv_data(weak=True, n=400)
        spec = est.RegressionSpec(dependent="y", endogenous=("x",), instruments=("z",))
        with pytest.warns(est.WeakInstrumentWarning):
            est.tsls(spec, data)

    def test_strong_instrument_f_large(self):
        data = iv_data()
        spec = est.RegressionSpec(dependent="y", endogenous=("x",), instruments=("z",))
        report = est.tsls(spec, data)
        assert report.first_stages[0].f_excluded > 100

    def test_under_identification_rejected(self):
        with pytest.raises(est.UnderIdentifiedError):
            est.RegressionSpec(dependent="y", endogenous=("x", "w"), instruments=("z",))

    def test_cluster_covariance_psd_and_counts(self):
        data = iv_data()
        data["g"] = np.arange(len(data)) % 25
        spec = est.RegressionSpec(
            dependent="y", endogenous=("x",), instruments=("z",), cluster="g"
        )
        report = est.tsls(spec, data)
        eigvals = np.linalg.eigvalsh(report.vcov)
        assert eigvals.min() > -1e-12
        assert report.n_clusters == 25
        assert np.allclose(report.vcov, report.vcov.T)


class TestReducedForm:
    def test_matches_direct_ols_on_instruments(self):
        data = iv_data()
        spec = est.RegressionSpec(dependent="y", endogenous=("x",), instruments=("z",))
        rf = est.reduced_form(spec, data)
        direct = est.ols(est.RegressionSpec(dependent="y", exog=("z",)), data)
        assert rf.params["z"] == pytest.approx(direct.params["z"], rel=1e-12)


def shift_share_fixture(seed=7, n_firms=80, occupations=("a", "b"), periods=(2014, 2015)):
    rng = np.random.default_rng(seed)
    shares = []
    for i in range(n_firms):
        raw = rng.dirichlet(np.ones(len(occupations)))
        for occ, s in zip(occupations, raw):
            shares.append({"firm_id": i, "occupation": occ, "share": s})
    shares = pd.DataFrame(shares)
    growth = pd.DataFrame(
        [
            {"occupation": occ, "year": t, "growth": rng.normal(0.05, 0.08)}
            for occ in occupations
            for t in periods
        ]
    )
    share_map = shares.pivot(index="firm_id", columns="occupation", values="share")
    rows = []
    for i in range(n_firms):
        for t in periods:
            g = growth.set_index(["occupation", "year"])["growth"]
            b = sum(share_map.loc[i, occ] * g.loc[(occ, t)] for occ in occupations)
            noise = rng.normal(0, 0.05)
            x = 2.0 * b + noise + rng.normal(0, 0.02)
            y = -0.6 * x + noise + rng.normal(0, 0.02)
            rows.append({"firm_id": i, "year": t, "x": x, "y": y, "bartik": b})
    return pd.DataFrame(rows), shares, growth


class TestRotemberg:
    def test_single_instrument_weight_is_one(self):
        data, shares, growth = shift_share_fixture(
            occupations=("a",), periods=(2014,), n_firms=60
        )
        report = est.rotemberg(
            data, "y", "x", shares, growth, fixed_effects=("year",)
        )
        assert len(report.table) == 1
        assert report.table["alpha"].iloc[0] == pytest.approx(1.0, abs=1e-12)
        assert report.table["beta"].iloc[0] == pytest.approx(
            report.bartik_estimate, rel=1e-12
        )

    def test_weights_sum_to_one_and_identity(self):
        data, shares, growth = shift_share_fixture()
        report = est.rotemberg(data, "y", "x", shares, growth)
        assert report.sum_alpha == pytest.approx(1.0, abs=1e-8)
        combined = float((report.table["alpha"] * report.table["beta"]).sum())
        assert combined == pytest.approx(report.bartik_estimate, rel=1e-6)

    def test_bartik_estimate_matches_brute_force_iv(self):
        data, shares, growth = shift_share_fixture(seed=13)
        report = est.rotemberg(data, "y", "x", shares, growth)
        # brute force: residualize on year dummies, just-identified IV with the
        # aggregated instrument
        dummies = pd.get_dummies(data.year, dtype=float).to_numpy()
        proj = dummies @ np.linalg.lstsq(dummies, np.column_stack(
            [data.y, data.x, data.bartik]
        ), rcond=None)[0]
        resid = np.column_stack([data.y, data.x, data.bartik]) - proj
        beta = (resid[:, 2] @ resid[:, 0]) / (resid[:, 2] @ resid[:, 1])
        assert report.bartik_estimate == pytest.approx(beta, rel=1e-10)

    def test_normalized_growth_keeps_estimate(self):
        data, shares, growth = shift_share_fixture(seed=17)
        plain = est.rotemberg(data, "y", "x", shares, growth)
        normed = est.rotemberg(data, "y", "x", shares, growth, normalize_growth=True)
        assert normed.bartik_estimate == pytest.approx(
            plain.bartik_estimate, rel=1e-10
        )
        assert normed.sum_alpha == pytest.approx(1.0, abs=1e-8)

    def test_aggregations(self):
        data, shares, growth = shift_share_fixture(seed=19)
        report = est.rotemberg(data, "y", "x", shares, growth)
        assert report.by_year()["sum"].sum() == pytest.approx(1.0, abs=1e-8)
        assert report.by_occupation()["alpha"].sum() == pytest.approx(1.0, abs=1e-8)
        by_sign = report.by_sign()
        assert by_sign["share"].sum() == pytest.approx(1.0)

    def test_zero_covariance_share_reported_missing(self):
        data, shares, growth = shift_share_fixture(seed=29)
        # an extra occupation with identical shares across firms carries no
        # cross-sectional variation within a year: weight must come back
        # missing while the identity holds over the remaining mass
        flat = pd.DataFrame(
            {
                "firm_id": shares.firm_id.unique(),
                "occupation": "flat",
                "share": 0.5,
            }
        )
        shares_aug = pd.concat([shares, flat], ignore_index=True)
        growth_aug = pd.concat(
            [
                growth,
                pd.DataFrame(
                    [
                        {"occupation": "flat", "year": t, "growth": 0.05}
                        for t in growth.year.unique()
                    ]
                ),
            ],
            ignore_index=True,
        )
        report = est.rotemberg(data, "y", "x", shares_aug, growth_aug)
        flat_rows = report.table[report.table.occupation == "flat"]
        assert flat_rows["alpha"].isna().all()
        assert flat_rows["beta"].isna().all()
        assert len(report.skipped) == len(flat_rows)
        assert report.sum_alpha == pytest.approx(1.0, abs=1e-8)
        combined = float((report.table["alpha"] * report.table["beta"]).sum())
        assert combined == pytest.approx(report.bartik_estimate, rel=1e-6)

    def test_requires_period_refining_fixed_effects(self):
        data, shares, growth = shift_share_fixture(seed=23)
        data["blob"] = 1
        with pytest.raises(ValueError, match="refine"):
            est.rotemberg(data, "y", "x", shares, growth, fixed_effects=("blob",))


class TestFeedbackRegression:
    def test_single_region_rejected(self):
        panel = pd.DataFrame(
            {
                "region": ["r0"] * 4,
                "year": [2012, 2013, 2014, 2015],
                "tightness": [0.2, 0.25, 0.3, 0.35],
                "employment": [100, 105, 108, 110],
                "z_l": [0.01, 0.02, 0.01, 0.02],
            }
        )
        with pytest.raises(ValueError, match="two regions"):
            est.feedback_regression(panel)
