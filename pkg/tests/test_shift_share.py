import numpy as np
import pandas as pd
import pytest

from tightlab import shift_share as ss


def small_panel():
    rows = []
    # firm 0 present in base year, firm 1 born 2005, firm 2 born inside window
    entries = {0: 1999, 1: 2005, 2: 2013}
    shares = {0: {"a": 0.5, "b": 0.5}, 1: {"a": 1.0}, 2: {"b": 1.0}}
    for firm, born in entries.items():
        for year in range(born, 2016):
            for occ, s in shares[firm].items():
                rows.append(
                    {
                        "firm_id": firm,
                        "year": year,
                        "occupation": occ,
                        "region": "r0",
                        "employment": 10 * s * (1 + 0.1 * (year - born)),
                        "wage_daily": 80.0 + firm,
                    }
                )
    return pd.DataFrame(rows)


class TestBaseYearShares:
    def test_firm_present_in_base_year(self):
        shares = ss.base_year_shares(small_panel(), 1999, 2012)
        f0 = shares.table[shares.table.firm_id == 0]
        assert set(f0.occupation) == {"a", "b"}
        assert f0.share.sum() == pytest.approx(1.0)
        assert (f0.base_year == 1999).all()

    def test_later_entrant_uses_birth_year(self):
        shares = ss.base_year_shares(small_panel(), 1999, 2012)
        f1 = shares.table[shares.table.firm_id == 1]
        assert (f1.base_year == 2005).all()
        assert f1.share.tolist() == [1.0]

    def test_entrant_inside_window_excluded(self):
        shares = ss.base_year_shares(small_panel(), 1999, 2012)
        assert 2 not in set(shares.table.firm_id)
        reasons = shares.excluded.set_index("firm_id")["reason"]
        assert reasons.loc[2] == "in_estimation_window"

    def test_zero_employment_base_excluded(self):
        panel = small_panel()
        panel.loc[
            (panel.firm_id == 0) & (panel.year == 1999), "employment"
        ] = 0.0
        shares = ss.base_year_shares(panel, 1999, 2012)
        assert 0 not in set(shares.table.firm_id)
        reasons = shares.excluded.set_index("firm_id")["reason"]
        assert reasons.loc[0] == "zero_base_employment"

    def test_no_leakage_from_estimation_window(self):
        panel = small_panel()
        before = ss.base_year_shares(panel, 1999, 2012)
        perturbed = panel.copy()
        window = perturbed.year >= 2012
        perturbed.loc[window, "employment"] *= 3.7
        after = ss.base_year_shares(perturbed, 1999, 2012)
        pd.testing.assert_frame_equal(before.table, after.table)


def market_frame():
    rows = []
    for occ in ["a", "b"]:
        for region in ["r0", "r1"]:
            for year in range(2012, 2016):
                rows.append(
                    {
                        "occupation": occ,
                        "region": region,
                        "year": year,
                        "registered_vacancies": 100.0 * (1.1 ** (year - 2012)),
                        "job_seekers": 200.0,
                    }
                )
    return pd.DataFrame(rows)


class TestNationalGrowth:
    def test_constant_series_zero_growth(self):
        growth = ss.national_growth(market_frame(), "job_seekers", lag=1)
        assert np.allclose(growth["growth"], 0.0)

    def test_doubling_gives_log_two(self):
        frame = market_frame()
        frame["registered_vacancies"] = 50.0 * 2.0 ** (frame.year - 2012)
        growth = ss.national_growth(frame, "registered_vacancies", lag=1)
        assert np.allclose(growth["growth"], np.log(2.0))

    def test_aggregates_regions_before_logs(self):
        # lopsided regional noise must cancel in the sum, not average of logs
        frame = market_frame()
        frame.loc[frame.region == "r0", "registered_vacancies"] = 10.0
        frame.loc[frame.region == "r1", "registered_vacancies"] = 1000.0
        growth = ss.national_growth(frame, "registered_vacancies", lag=1)
        assert np.allclose(growth["growth"], 0.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        frame = market_frame()
        frame["registered_vacancies"] = rng.uniform(10, 500, len(frame))
        growth = ss.national_growth(frame, "registered_vacancies", lag=2)
        for occ in ["a", "b"]:
            for year in [2014, 2015]:
                top = frame[(frame.occupation == occ) & (frame.year == year)][
                    "registered_vacancies"
                ].sum()
                bottom = frame[(frame.occupation == occ) & (frame.year == year - 2)][
                    "registered_vacancies"
                ].sum()
                got = growth[(growth.occupation == occ) & (growth.year == year)][
                    "growth"
                ].iloc[0]
                assert got == pytest.approx(np.log(top) - np.log(bottom), rel=1e-12)

    def test_weighted_wage_growth(self):
        rows = [
            {"occupation": "a", "year": y, "wage_daily": w, "employment": e}
            for y, pairs in {
                2012: [(100.0, 1.0), (200.0, 3.0)],
                2013: [(110.0, 1.0), (220.0, 3.0)],
            }.items()
            for w, e in pairs
        ]
        frame = pd.DataFrame(rows)
        growth = ss.national_growth(
            frame, "wage_daily", lag=1, how="wmean", weight_col="employment"
        )
        expected = np.log((110 + 3 * 220) / 4) - np.log((100 + 3 * 200) / 4)
        assert growth["growth"].iloc[0] == pytest.approx(expected, rel=1e-12)


def share_fixture():
    table = pd.DataFrame(
        [
            {"firm_id": 0, "base_year": 1999, "occupation": "a", "share": 1.0},
            {"firm_id": 1, "base_year": 1999, "occupation": "a", "share": 0.25},
            {"firm_id": 1, "base_year": 1999, "occupation": "b", "share": 0.75},
        ]
    )
    return ss.BaseShares(table=table, excluded=pd.DataFrame())


class TestBartik:
    def test_single_occupation_passes_growth_through(self):
        growth = pd.DataFrame(
            [
                {"occupation": "a", "year": 2014, "growth": 0.07},
                {"occupation": "b", "year": 2014, "growth": -0.02},
            ]
        )
        out = ss.bartik(share_fixture(), growth, "z")
        z0 = out[out.firm_id == 0]["z"].iloc[0]
        assert z0 == pytest.approx(0.07, rel=1e-12)

    def test_uniform_growth_reaches_every_firm(self):
        growth = pd.DataFrame(
            [
                {"occupation": "a", "year": 2014, "growth": 0.05},
                {"occupation": "b", "year": 2014, "growth": 0.05},
            ]
        )
        out = ss.bartik(share_fixture(), growth, "z")
        assert np.allclose(out["z"], 0.05)

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(11)
        occs = [f"o{k}" for k in range(6)]
        shares_rows = []
        for firm in range(20):
            raw = rng.dirichlet(np.ones(6))
            for occ, s in zip(occs, raw):
                shares_rows.append(
                    {"firm_id": firm, "base_year": 1999, "occupation": occ, "share": s}
                )
        shares = ss.BaseShares(pd.DataFrame(shares_rows), pd.DataFrame())
        growth_rows = [
            {"occupation": occ, "year": year, "growth": rng.normal(0, 0.1)}
            for occ in occs
            for year in [2013, 2014]
        ]
        growth = pd.DataFrame(growth_rows)
        out = ss.bartik(shares, growth, "z").set_index(["firm_id", "year"])["z"]
        gmap = growth.set_index(["occupation", "year"])["growth"]
        for firm in range(20):
            for year in [2013, 2014]:
                expected = 0.0
                for row in shares_rows:
                    if row["firm_id"] == firm:
                        expected += row["share"] * gmap.loc[(row["occupation"], year)]
                assert out.loc[(firm, year)] == pytest.approx(expected, rel=1e-10)

    def test_linear_in_growth_constant_shift(self):
        rng = np.random.default_rng(13)
        growth = pd.DataFrame(
            [
                {"occupation": occ, "year": 2014, "growth": rng.normal()}
                for occ in ["a", "b"]
            ]
        )
        base = ss.bartik(share_fixture(), growth, "z")
        shifted_growth = growth.assign(growth=growth.growth + 0.123)
        shifted = ss.bartik(share_fixture(), shifted_growth, "z")
        assert np.allclose(shifted["z"], base["z"] + 0.123)

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(17)
        growth = pd.DataFrame(
            [
                {"occupation": occ, "year": 2014, "growth": rng.normal()}
                for occ in ["a", "b"]
            ]
        )
        base = ss.bartik(share_fixture(), growth, "z")
        relabel = {"a": "b", "b": "a"}
        shares_swapped = share_fixture()
        shares_swapped.table["occupation"] = shares_swapped.table["occupation"].map(
            relabel
        )
        growth_swapped = growth.assign(occupation=growth.occupation.map(relabel))
        swapped = ss.bartik(shares_swapped, growth_swapped, "z")
        pd.testing.assert_frame_equal(base, swapped)

    def test_missing_growth_cap(self):
        shares = share_fixture()
        growth = pd.DataFrame(
            [
                {"occupation": "a", "year": 2014, "growth": 0.07},
                {"occupation": "b", "year": 2014, "growth": np.nan},
            ]
        )
        out = ss.bartik(shares, growth, "z", max_missing_share=0.05)
        # firm 1 has 75% of mass missing: dropped; firm 0 unaffected
        z = out.set_index("firm_id")["z"]
        assert z.loc[0] == pytest.approx(0.07)
        assert np.isnan(z.loc[1])
        # with a generous cap, firm 1 renormalizes to occupation a alone
        out_loose = ss.bartik(shares, growth, "z", max_missing_share=0.8)
        assert out_loose.set_index("firm_id")["z"].loc[1] == pytest.approx(0.07)


class TestBuildInstruments:
    def test_three_instruments_emitted(self):
        panel = small_panel()
        markets = market_frame()
        inst = ss.build_instruments(
            panel, markets, base_year=1999, estimation_start=2012, lag=1
        )
        assert {"z_w", "z_v", "z_u"} <= set(inst.table.columns)
        assert inst.table.year.min() == 2013
        # vacancies grow 10% a year in the fixture, seekers are flat
        assert np.allclose(inst.table["z_v"].dropna(), np.log(1.1))
        assert np.allclose(inst.table["z_u"].dropna(), 0.0)
