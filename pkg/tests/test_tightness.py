import numpy as np
import pandas as pd
import pytest

from tightlab import tightness as tg


class TestRequirementLevel:
    @pytest.mark.parametrize(
        "code,expected",
        [
            ("71401", "helper"),
            ("71402", "professional"),
            ("71403", "specialist"),
            ("71404", "expert"),
        ],
    )
    def test_digit_rule(self, code, expected):
        assert tg.requirement_level(code) == expected

    def test_specialists_and_experts_pool(self):
        assert tg.notification_level("71403") == "specialist_expert"
        assert tg.notification_level("71404") == "specialist_expert"

    def test_invalid_digit_rejected(self):
        with pytest.raises(ValueError, match="invalid requirement digit"):
            tg.requirement_level("71409")

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError, match="5 digits"):
            tg.requirement_level("714")


def shares_fixture():
    frame = pd.DataFrame(
        [
            {"year": 2014, "level": "helper", "share": 0.461},
            {"year": 2014, "level": "professional", "share": 0.456},
            {"year": 2014, "level": "specialist_expert", "share": 0.311},
            {"year": 2015, "level": "helper", "share": 1.0},
        ]
    )
    return tg.NotificationShares.from_frame(frame)


class TestTotalVacancies:
    def test_division_by_reported_average_share(self):
        got = tg.total_vacancies(46.1, shares_fixture(), 2014, "12341")
        assert got == pytest.approx(100.0, rel=1e-10)

    def test_share_of_one_is_identity(self):
        assert tg.total_vacancies(37.0, shares_fixture(), 2015, "12341") == 37.0

    def test_zero_registered_stays_zero(self):
        assert tg.total_vacancies(0.0, shares_fixture(), 2014, "12342") == 0.0

    def test_missing_share_raises(self):
        with pytest.raises(KeyError, match="no notification share"):
            tg.total_vacancies(10.0, shares_fixture(), 1999, "12341")

    def test_monotone_in_share(self):
        small = tg.total_vacancies(50.0, shares_fixture(), 2014, "12343")
        large = tg.total_vacancies(50.0, shares_fixture(), 2014, "12341")
        assert small > large  # specialist share 0.311 < helper share 0.461

    def test_invalid_share_rejected(self):
        with pytest.raises(ValueError, match="not in"):
            tg.NotificationShares({(2014, "helper"): 0.0})


class TestMarketTightness:
    def test_simple_ratio(self):
        cell = tg.MarketCell("12341", "r0", 2014, registered_vacancies=4, job_seekers=2)
        assert tg.market_tightness(cell) == 2.0

    def test_zero_vacancies(self):
        cell = tg.MarketCell("12341", "r0", 2014, registered_vacancies=0, job_seekers=5)
        assert tg.market_tightness(cell) == 0.0

    def test_no_seekers_is_missing_not_zero(self):
        cell = tg.MarketCell("12341", "r0", 2014, registered_vacancies=3, job_seekers=0)
        assert tg.market_tightness(cell) is None

    def test_aggregate_ratio_2019(self):
        cell = tg.MarketCell(
            "00000", "de", 2019, registered_vacancies=1_999_790, job_seekers=4_226_751
        )
        assert tg.market_tightness(cell) == pytest.approx(0.47312701, abs=5e-7)


class TestFirmTightness:
    def test_single_occupation(self):
        assert tg.firm_tightness([1.0], [0.5]) == 0.5

    def test_convex_combination(self):
        assert tg.firm_tightness([0.5, 0.5], [1.0, 3.0]) == 2.0

    def test_matches_brute_force_weighted_sum(self):
        rng = np.random.default_rng(3)
        shares = rng.dirichlet(np.ones(7))
        ratios = rng.uniform(0.1, 2.0, size=7)
        expected = sum(s * r for s, r in zip(shares, ratios))
        assert tg.firm_tightness(shares, ratios) == pytest.approx(expected, rel=1e-12)

    def test_invariant_to_splitting_rows(self):
        shares = np.array([0.6, 0.4])
        ratios = np.array([1.2, 0.3])
        split_shares = np.array([0.3, 0.3, 0.4])
        split_ratios = np.array([1.2, 1.2, 0.3])
        assert tg.firm_tightness(shares, ratios) == pytest.approx(
            tg.firm_tightness(split_shares, split_ratios), rel=1e-12
        )

    def test_rejects_undefined_ratio_with_positive_share(self):
        with pytest.raises(ValueError, match="defined ratio"):
            tg.firm_tightness([0.5, 0.5], [1.0, np.nan])

    def test_rejects_unnormalized_shares(self):
        with pytest.raises(ValueError, match="sum to 1"):
            tg.firm_tightness([0.5, 0.2], [1.0, 1.0])


def panel_and_markets():
    firm_panel = pd.DataFrame(
        [
            {"firm_id": 0, "year": 2014, "occupation": "11111", "region": "r0",
             "employment": 6.0, "wage_daily": 90.0},
            {"firm_id": 0, "year": 2014, "occupation": "22222", "region": "r0",
             "employment": 4.0, "wage_daily": 90.0},
            {"firm_id": 1, "year": 2014, "occupation": "22222", "region": "r1",
             "employment": 5.0, "wage_daily": 70.0},
        ]
    )
    markets = pd.DataFrame(
        [
            {"occupation": "11111", "region": "r0", "year": 2014,
             "registered_vacancies": 10.0, "job_seekers": 20.0},
            {"occupation": "22222", "region": "r0", "year": 2014,
             "registered_vacancies": 30.0, "job_seekers": 10.0},
            {"occupation": "22222", "region": "r1", "year": 2014,
             "registered_vacancies": 8.0, "job_seekers": 0.0},
        ]
    )
    return firm_panel, markets


class TestBuildFirmTightness:
    def test_weighted_ratios(self):
        firm_panel, markets = panel_and_markets()
        out = tg.build_firm_tightness(firm_panel, markets)
        theta0 = out[out.firm_id == 0]["tightness"].iloc[0]
        assert theta0 == pytest.approx(0.6 * 0.5 + 0.4 * 3.0, rel=1e-12)

    def test_no_seekers_propagates_missing(self):
        firm_panel, markets = panel_and_markets()
        out = tg.build_firm_tightness(firm_panel, markets)
        row1 = out[out.firm_id == 1].iloc[0]
        assert np.isnan(row1["tightness"])
        assert row1["missing_share"] == pytest.approx(1.0)

    def test_renormalization_and_audit_trail(self):
        firm_panel, markets = panel_and_markets()
        # firm 0's first occupation loses its seekers: mass renormalizes to
        # the second occupation, and the dropped mass is reported
        markets.loc[0, "job_seekers"] = 0.0
        out = tg.build_firm_tightness(firm_panel, markets)
        row0 = out[out.firm_id == 0].iloc[0]
        assert row0["tightness"] == pytest.approx(3.0)
        assert row0["missing_share"] == pytest.approx(0.6)
        strict = tg.build_firm_tightness(firm_panel, markets, max_missing_share=0.5)
        assert np.isnan(strict[strict.firm_id == 0]["tightness"].iloc[0])

    def test_notification_adjustment_monotone(self):
        firm_panel, markets = panel_and_markets()
        shares = tg.NotificationShares.from_frame(
            pd.DataFrame(
                [
                    {"year": 2014, "level": "helper", "share": 0.5},
                    {"year": 2014, "level": "professional", "share": 0.4},
                ]
            )
        )
        raw = tg.build_firm_tightness(firm_panel, markets)
        adjusted = tg.build_firm_tightness(firm_panel, markets, notification=shares)
        both = raw.merge(adjusted, on=["firm_id", "year"], suffixes=("_raw", "_adj"))
        defined = both.dropna(subset=["tightness_raw"])
        assert (defined["tightness_adj"] > defined["tightness_raw"]).all()

    def test_multi_region_firm_rejected(self):
        firm_panel, markets = panel_and_markets()
        firm_panel.loc[1, "region"] = "r1"
        with pytest.raises(ValueError, match="single-region"):
            tg.build_firm_tightness(firm_panel, markets)


def transition_fixture():
    transitions = pd.DataFrame(
        [
            {"from_occupation": "a", "to_occupation": "a", "probability": 0.8},
            {"from_occupation": "a", "to_occupation": "b", "probability": 0.2},
            {"from_occupation": "b", "to_occupation": "a", "probability": 0.2},
            {"from_occupation": "b", "to_occupation": "b", "probability": 0.8},
        ]
    )
    employment = pd.DataFrame(
        [
            {"occupation": "a", "employment": 100.0},
            {"occupation": "b", "employment": 100.0},
        ]
    )
    return tg.TransitionMatrix.from_frames(transitions, employment)


class TestFlowWeights:
    def test_hand_computed_off_diagonal(self):
        weights = tg.flow_weights(transition_fixture())
        assert weights.weights[0, 1] == pytest.approx(0.25)
        assert weights.weights[1, 0] == pytest.approx(0.25)

    def test_identity_transitions_give_identity_weights(self):
        tm = tg.TransitionMatrix(("a", "b"), np.eye(2), np.array([50.0, 70.0]))
        weights = tg.flow_weights(tm)
        assert np.array_equal(weights.weights, np.eye(2))

    def test_uniform_rows_and_equal_sizes_give_all_ones(self):
        tm = tg.TransitionMatrix(
            ("a", "b", "c"), np.full((3, 3), 1 / 3), np.array([10.0, 10.0, 10.0])
        )
        weights = tg.flow_weights(tm)
        assert np.allclose(weights.weights, 1.0)

    def test_diagonal_exactly_one(self):
        rng = np.random.default_rng(5)
        probs = rng.dirichlet(np.ones(4), size=4)
        tm = tg.TransitionMatrix(
            ("a", "b", "c", "d"), probs, rng.uniform(10, 1000, 4)
        )
        weights = tg.flow_weights(tm)
        assert np.array_equal(np.diag(weights.weights), np.ones(4))

    def test_zero_own_transition_names_occupation(self):
        probs = np.array([[0.0, 1.0], [0.5, 0.5]])
        tm = tg.TransitionMatrix(("aa", "bb"), probs, np.array([10.0, 10.0]))
        with pytest.raises(ValueError, match="aa"):
            tg.flow_weights(tm)

    def test_row_sum_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            tg.TransitionMatrix(
                ("a", "b"), np.array([[0.7, 0.2], [0.2, 0.8]]), np.array([1.0, 1.0])
            )


class TestFlowAdjustedStocks:
    def test_zero_cross_flows_collapse_to_raw(self):
        tm = tg.TransitionMatrix(("a", "b"), np.eye(2), np.array([10.0, 20.0]))
        weights = tg.flow_weights(tm)
        v, u = tg.flow_adjusted_stocks(weights, [5.0, 7.0], [11.0, 13.0])
        assert np.array_equal(v, [5.0, 7.0])
        assert np.array_equal(u, [11.0, 13.0])

    def test_all_ones_weights_give_zone_totals(self):
        weights = tg.FlowWeights(("a", "b", "c"), np.ones((3, 3)))
        v, u = tg.flow_adjusted_stocks(weights, [1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        assert np.allclose(v, 6.0)
        assert np.allclose(u, 15.0)

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(7)
        probs = rng.dirichlet(np.ones(3), size=3)
        emp = rng.uniform(10, 100, 3)
        tm = tg.TransitionMatrix(("a", "b", "c"), probs, emp)
        weights = tg.flow_weights(tm)
        vac = rng.uniform(1, 50, 3)
        seek = rng.uniform(1, 50, 3)
        v_adj, u_adj = tg.flow_adjusted_stocks(weights, vac, seek)
        for o in range(3):
            expected_v = sum(weights.weights[o, h] * vac[h] for h in range(3))
            expected_u = sum(weights.weights[o, h] * seek[h] for h in range(3))
            assert v_adj[o] == pytest.approx(expected_v, rel=1e-12)
            assert u_adj[o] == pytest.approx(expected_u, rel=1e-12)

    def test_adjusted_stocks_never_below_raw(self):
        weights = tg.flow_weights(transition_fixture())
        v, u = tg.flow_adjusted_stocks(weights, [5.0, 7.0], [11.0, 13.0])
        assert (v >= [5.0, 7.0]).all()
        assert (u >= [11.0, 13.0]).all()


class TestFlowAdjustedFirmTightness:
    def test_single_occupation_equals_unadjusted(self):
        weights = tg.FlowWeights(("a",), np.ones((1, 1)))
        v, u = tg.flow_adjusted_stocks(weights, [6.0], [12.0])
        got = tg.flow_adjusted_firm_tightness([1.0], v, u)
        assert got == pytest.approx(0.5)

    def test_mirrors_plain_weighted_sum(self):
        rng = np.random.default_rng(9)
        weights = tg.flow_weights(transition_fixture())
        vac = rng.uniform(5, 20, 2)
        seek = rng.uniform(5, 20, 2)
        v_adj, u_adj = tg.flow_adjusted_stocks(weights, vac, seek)
        shares = np.array([0.3, 0.7])
        expected = shares @ (v_adj / u_adj)
        got = tg.flow_adjusted_firm_tightness(shares, v_adj, u_adj)
        assert got == pytest.approx(expected, rel=1e-12)
