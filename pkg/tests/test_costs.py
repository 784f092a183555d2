# -*- coding: utf-8 -*-

""" Tests for modjoint.costs. """

import dataclasses

import numpy as np
import pytest

from modjoint.choice import ChoiceParams, Mode, choice_probabilities
from modjoint.costs import (
    AlphaEntry,
    CostModel,
    ExpectedCostTable,
    RealizedCost,
    SharedTripRecord,
    SteadyStateCell,
    SteadyStateModel,
    TripCostEstimator,
    UtilizationInputs,
    calibrate_cell,
    cell_utilization,
    estimate_alpha_table,
    estimate_theta_table,
    expected_shared_operational_cost,
    flow_residual,
    load_alpha_table,
    load_theta_table,
    miles,
    region_profit_rates,
    retrospective_cost,
    save_alpha_table,
    save_theta_table,
    solve_utilization,
    throughput,
    update_expected_costs,
)
from modjoint.errors import (
    CalibrationError,
    ConfigError,
    EmptySupplyError,
    ParameterError,
)
from modjoint.matching import Request
from modjoint.network import kmeans_cluster


def cost_model(**kw):
    params = dict(c0=np.full((2, 2), 10.0), per_mile_cost=2.0, c_p=5.0)
    params.update(kw)
    return CostModel(**params)


def open_cell(**kw):
    params = dict(
        L_e=10.0, L_s=5.0, O_e=4.0, O_s=1.0, T_e=600.0, T_s=750.0, A_e=120.0, A_s=60.0
    )
    params.update(kw)
    return SteadyStateCell(**params)


class TestMiles:
    def test_miles(self):
        assert miles(1609.344) == pytest.approx(1.0)
        assert miles(0.0) == 0.0


class TestExpectedCostTable:
    def test_defaults(self):
        table = ExpectedCostTable(3)
        assert table.get((0, 2)) == 0.0
        assert table.samples_at((0, 2)) == 0

    def test_copy_is_independent(self):
        table = ExpectedCostTable(2)
        other = table.copy()
        other.values[0, 1] = 4.0
        assert table.get((0, 1)) == 0.0

    def test_csv(self, tmp_path):
        table = ExpectedCostTable(2)
        table.values[1, 0] = 3.5
        table.samples[1, 0] = 2
        path = str(tmp_path / "costs.csv")
        table.to_csv(path)
        loaded = ExpectedCostTable.from_csv(path, 2)
        assert loaded.get((1, 0)) == 3.5
        assert loaded.samples_at((1, 0)) == 2
        assert loaded.get((0, 0)) == 0.0

    def test_csv_outside_grid(self, tmp_path):
        path = tmp_path / "costs.csv"
        path.write_text("o_cluster,d_cluster,expected_cost,samples\n0,5,1.0,1\n")
        with pytest.raises(ConfigError):
            ExpectedCostTable.from_csv(str(path), 2)

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "costs.csv"
        path.write_text("o,d,cost\n0,1,1.0\n")
        with pytest.raises(ConfigError) as exc_info:
            ExpectedCostTable.from_csv(str(path), 2)
        assert "must have header" in str(exc_info.value)


class TestExpectedSharedOperationalCost:
    def test_no_joiners(self):
        assert expected_shared_operational_cost(cost_model(), (0, 1)) == 10.0

    def test_joiners(self):
        model = cost_model(
            alpha_table={
                (0, 1): [
                    AlphaEntry(request_class=(1, 1), alpha=0.2, cost=15.0, price=8.0),
                    AlphaEntry(request_class=(0, 0), alpha=0.3, cost=12.0, price=5.0),
                ]
            }
        )
        assert expected_shared_operational_cost(model, (0, 1)) == pytest.approx(8.5)
        assert expected_shared_operational_cost(
            model, (0, 1), c0=20.0
        ) == pytest.approx(13.5)

    def test_alpha_row_above_one(self):
        entry = AlphaEntry(request_class=(0, 0), alpha=0.7, cost=1.0, price=1.0)
        with pytest.raises(ParameterError):
            cost_model(alpha_table={(0, 0): [entry, entry]})

    def test_invalid_multiplier(self):
        with pytest.raises(ParameterError):
            cost_model(retrospective_multiplier=1.5)


class TestSteadyStateCell:
    def test_wait_and_throughput(self):
        cell = open_cell()
        assert cell.L == 15.0
        assert cell.wait(Mode.EXCLUSIVE) == pytest.approx(60.0)
        assert cell.throughput(Mode.EXCLUSIVE) == pytest.approx(6.0 / 660.0)
        assert cell.wait(Mode.SHARED) == pytest.approx(60.0)
        assert cell.throughput(Mode.SHARED) == pytest.approx(4.0 / 810.0)

    def test_flow_balance(self):
        cell = open_cell(zeta_s=1.5)
        assert flow_residual(cell, Mode.EXCLUSIVE) == pytest.approx(0.0, abs=1e-12)
        assert flow_residual(cell, Mode.SHARED) == pytest.approx(0.0, abs=1e-12)

    def test_all_open(self):
        cell = open_cell(O_e=10.0)
        assert cell.throughput(Mode.EXCLUSIVE) == 0.0

    def test_no_open_vehicles(self):
        cell = open_cell(O_s=0.0)
        with pytest.raises(EmptySupplyError):
            cell.wait(Mode.SHARED)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            open_cell(O_e=11.0)
        with pytest.raises(ParameterError):
            open_cell(zeta_s=2.5)


class TestSteadyStateModel:
    def test_intervals(self):
        model = SteadyStateModel(2, 3, 600.0)
        assert model.interval_of(0.0) == 0
        assert model.interval_of(1250.0) == 2
        assert model.interval_of(1800.0) == 0
        assert model.remaining_in_period(1250.0) == 550.0

    def test_missing_cell_has_no_throughput(self):
        model = SteadyStateModel(2, 3, 600.0, {(0, 1): open_cell()})
        assert throughput(model, (1, 1), Mode.EXCLUSIVE) == 0.0
        assert throughput(model, (0, 1), Mode.EXCLUSIVE) == pytest.approx(6 / 660)

    def test_csv(self, tmp_path):
        model = SteadyStateModel(2, 3, 600.0, {(1, 2): open_cell(price_e=12.0)})
        path = str(tmp_path / "steady.csv")
        model.to_csv(path)
        loaded = SteadyStateModel.from_csv(path, 2, 3, 600.0)
        assert loaded.cell(1, 2) == model.cell(1, 2)
        assert loaded.cell(0, 0) is None

    def test_csv_outside_grid(self, tmp_path):
        model = SteadyStateModel(2, 3, 600.0, {(1, 2): open_cell()})
        path = str(tmp_path / "steady.csv")
        model.to_csv(path)
        with pytest.raises(ConfigError):
            SteadyStateModel.from_csv(path, 2, 2, 600.0)


class TestCalibrateCell:
    params = ChoiceParams(beta_p=-0.1, beta_w=-0.004, beta_t=-0.002)
    cell_args = dict(
        L_e=10.0,
        L_s=5.0,
        T_e=600.0,
        T_s=750.0,
        A_e=120.0,
        A_s=120.0,
        zeta_s=1.2,
        cost_e=2.0,
        cost_s=1.5,
        choice_params=params,
        u_o=-1.0,
    )

    def test_no_demand(self):
        cell = calibrate_cell(demand_rate=0.0, **self.cell_args)
        assert cell.O_e == 10.0
        assert cell.O_s == 5.0
        assert cell.throughput(Mode.EXCLUSIVE) == 0.0

    def test_balanced_and_consistent(self):
        demand_rate = 0.05
        cell = calibrate_cell(demand_rate=demand_rate, grid=20, **self.cell_args)
        assert 0 < cell.O_e < cell.L_e
        assert 0 < cell.O_s < cell.L_s
        assert flow_residual(cell, Mode.EXCLUSIVE) == pytest.approx(0.0, abs=1e-9)
        assert flow_residual(cell, Mode.SHARED) == pytest.approx(0.0, abs=1e-9)
        beta = self.params.effective_beta_p
        u_e = beta * cell.price_e + self.params.beta_w * cell.wait(Mode.EXCLUSIVE)
        u_e += self.params.beta_t * cell.T_e
        u_s = beta * cell.price_s + self.params.beta_w * cell.wait(Mode.SHARED)
        u_s += self.params.beta_t * cell.T_s
        probs = choice_probabilities(u_e, u_s, -1.0)
        assert probs.p_e == pytest.approx(
            cell.throughput(Mode.EXCLUSIVE) / demand_rate
        )
        assert probs.p_s == pytest.approx(cell.throughput(Mode.SHARED) / demand_rate)

    def test_maximises_profit_rate(self):
        demand_rate = 0.05
        # the grid of 4 is a subset of the grid of 9
        best = calibrate_cell(demand_rate=demand_rate, grid=9, **self.cell_args)

        def rate(cell):
            return cell.throughput(Mode.EXCLUSIVE) * (
                cell.price_e - cell.cost_e
            ) + cell.throughput(Mode.SHARED) * (cell.price_s - cell.cost_s)

        coarse = calibrate_cell(demand_rate=demand_rate, grid=4, **self.cell_args)
        assert rate(best) >= rate(coarse) - 1e-9

    def test_demand_too_low(self):
        with pytest.raises(CalibrationError):
            calibrate_cell(demand_rate=1e-4, **self.cell_args)


class TestSolveUtilization:
    inputs = UtilizationInputs(
        L_s=20.0,
        O_s=5.0,
        eta_s=60.0,
        T_s=600.0,
        O_s_prime=2.0,
        eta_s_prime=60.0,
        T_s_prime=300.0,
    )

    def test_balance(self):
        model = solve_utilization(self.inputs)
        assert model.L_s == pytest.approx(20.0)
        assert model.P01 == model.P12
        assert model.P10 == pytest.approx(1 / 600.0)
        assert model.P21 == pytest.approx(1 / 300.0)
        assert model.N1 == pytest.approx(
            2.0 + 60.0 * model.N2 / 300.0 + 600.0 * (model.N0 - 5.0) / 60.0
        )
        assert model.N0 >= 5.0
        assert 0.0 < model.zeta_s < 2.0
        assert model.Y_s == pytest.approx((model.N0 - 5.0) / 60.0)

    def test_detailed_balance(self):
        model = solve_utilization(self.inputs)
        assert model.N1 / model.N0 == pytest.approx(model.P01 * 600.0)
        assert model.N2 / model.N1 == pytest.approx(model.P12 * 300.0)

    def test_known_pickup_rate(self):
        inputs = dataclasses.replace(self.inputs, pickup_rate=1 / 600.0)
        model = solve_utilization(inputs)
        assert (model.N0, model.N1, model.N2) == pytest.approx((8.0, 8.0, 4.0))
        assert model.zeta_s == pytest.approx(0.8)
        assert model.P01 == 1 / 600.0

    def test_invalid_pickup_rate(self):
        with pytest.raises(ParameterError):
            solve_utilization(dataclasses.replace(self.inputs, pickup_rate=0.0))

    def test_empty_fleet(self):
        with pytest.raises(ParameterError):
            solve_utilization(
                UtilizationInputs(
                    L_s=0.0,
                    O_s=0.0,
                    eta_s=60.0,
                    T_s=600.0,
                    O_s_prime=0.0,
                    eta_s_prime=60.0,
                    T_s_prime=300.0,
                )
            )


class TestCellUtilization:
    def test_closed_form(self):
        cell = open_cell()
        x = cell.throughput(Mode.SHARED) / cell.O_s * cell.T_s
        assert cell_utilization(cell) == pytest.approx(
            (x + 2 * x * x) / (1 + x + x * x)
        )

    def test_busier_cell_is_fuller(self):
        quiet = cell_utilization(open_cell(O_s=4.0))
        busy = cell_utilization(open_cell(O_s=1.0))
        assert 0.0 < quiet < busy < 2.0

    def test_without_shared_trips(self):
        assert cell_utilization(open_cell(L_s=0.0, O_s=0.0)) is None
        assert cell_utilization(open_cell(O_s=5.0)) is None


class TestRegionProfitRates:
    def test_rates(self):
        cell = open_cell(L_s=0.0, O_s=0.0, price_e=20.0, cost_e=5.0)
        model = SteadyStateModel(2, 1, 600.0, {(0, 0): cell})
        rates = region_profit_rates(model)
        assert rates.rate(Mode.EXCLUSIVE, 0, 0) == pytest.approx(
            (6 / 660) * 15.0 / 10.0
        )
        assert rates.rate(Mode.SHARED, 0, 0) == 0.0
        assert rates.rate(Mode.EXCLUSIVE, 1, 0) == 0.0

    def test_override_and_clamp(self):
        cell = open_cell(L_s=0.0, O_s=0.0, price_e=20.0, cost_e=5.0)
        model = SteadyStateModel(1, 1, 600.0, {(0, 0): cell})
        rates = region_profit_rates(model, {(0, 0): (1.0, 0.0)})
        assert rates.rate(Mode.EXCLUSIVE, 0, 0) == 0.0


class TestRetrospectiveCost:
    def test_formula(self):
        cell = open_cell(L_s=0.0, O_s=0.0, price_e=20.0, cost_e=5.0)
        model = SteadyStateModel(2, 1, 600.0, {(0, 0): cell})
        rates = region_profit_rates(model)
        e_o = rates.rate(Mode.EXCLUSIVE, 0, 0)
        cost = retrospective_cost(rates, Mode.EXCLUSIVE, 0, 1, 100.0, 300.0, 0.5)
        assert cost == pytest.approx(0.5 * (e_o * 100.0 + e_o * 300.0))

    def test_zero_multiplier(self):
        rates = region_profit_rates(SteadyStateModel(1, 1, 600.0, {}))
        assert retrospective_cost(rates, Mode.SHARED, 0, 0, 100.0, 50.0, 0.0) == 0.0


class TestUpdateExpectedCosts:
    def test_running_mean(self):
        table = ExpectedCostTable(2)
        day1, mad1 = update_expected_costs(
            table, [RealizedCost((0, 1), 4.0), RealizedCost((0, 1), 6.0)]
        )
        assert day1.get((0, 1)) == 5.0
        assert day1.samples_at((0, 1)) == 1
        assert mad1 == 5.0
        assert table.get((0, 1)) == 0.0
        day2, mad2 = update_expected_costs(day1, [RealizedCost((0, 1), 7.0)])
        assert day2.get((0, 1)) == 6.0
        assert day2.samples_at((0, 1)) == 2
        assert mad2 == 1.0

    def test_no_trips(self):
        table = ExpectedCostTable(2)
        updated, mad = update_expected_costs(table, [])
        assert mad == 0.0
        assert updated is not table

    def test_keyed_trips(self):
        seen = set()
        day1, mad1 = update_expected_costs(
            ExpectedCostTable(1),
            [RealizedCost((0, 0), 4.0, key=1), RealizedCost((0, 0), 6.0, key=2)],
            seen=seen,
        )
        assert day1.get((0, 0)) == 5.0
        assert day1.samples_at((0, 0)) == 2
        assert mad1 == 5.0
        assert seen == {1, 2}
        day2, mad2 = update_expected_costs(
            day1, [RealizedCost((0, 0), 9.0, key=1)], seen=seen
        )
        assert day2.get((0, 0)) == 5.0
        assert mad2 == 0.0
        day3, mad3 = update_expected_costs(
            day2, [RealizedCost((0, 0), 8.0, key=3)], seen=seen
        )
        assert day3.get((0, 0)) == pytest.approx(6.0)
        assert day3.samples_at((0, 0)) == 3
        assert mad3 == pytest.approx(1.0)

    def test_replayed_day_converges(self):
        seen = set()
        trips = [RealizedCost((0, 1), 2.0, key=0), RealizedCost((1, 0), 3.0, key=1)]
        table = ExpectedCostTable(2)
        mads = []
        for _ in range(3):
            table, mad = update_expected_costs(table, trips, seen=seen)
            mads.append(mad)
        assert mads == [2.5, 0.0, 0.0]

    def test_keyed_needs_keys(self):
        with pytest.raises(ParameterError):
            update_expected_costs(
                ExpectedCostTable(1), [RealizedCost((0, 0), 1.0)], seen=set()
            )

    def test_stationary_costs_converge(self):
        table = ExpectedCostTable(1)
        mads = []
        for _ in range(3):
            table, mad = update_expected_costs(table, [RealizedCost((0, 0), 3.0)])
            mads.append(mad)
        assert mads == [3.0, 0.0, 0.0]


class TestEstimates:
    def test_alpha_table(self):
        records = [
            SharedTripRecord((0, 1), 5.0, (1, 1), 10.0, 3.0),
            SharedTripRecord((0, 1), 5.0, (1, 1), 12.0, 5.0),
            SharedTripRecord((0, 1), 5.0, (0, 0), 8.0, 2.0),
            SharedTripRecord((0, 1), 5.0),
        ]
        table = estimate_alpha_table(records)
        assert table == {
            (0, 1): [
                AlphaEntry(request_class=(0, 0), alpha=0.25, cost=8.0, price=2.0),
                AlphaEntry(request_class=(1, 1), alpha=0.5, cost=11.0, price=4.0),
            ]
        }

    def test_alpha_table_without_joins(self):
        table = estimate_alpha_table([SharedTripRecord((1, 0), 5.0)])
        assert table == {(1, 0): []}

    def test_alpha_csv(self, tmp_path):
        path = str(tmp_path / "alpha.csv")
        alpha = {
            (0, 1): [
                AlphaEntry(request_class=(0, 0), alpha=0.25, cost=8.0, price=2.0),
                AlphaEntry(request_class=(1, 1), alpha=0.5, cost=11.0, price=4.0),
            ],
            (1, 1): [AlphaEntry(request_class=(1, 0), alpha=0.1, cost=6.0, price=3.0)],
        }
        save_alpha_table(alpha, path)
        assert load_alpha_table(path) == alpha

    def test_alpha_out_of_range(self, tmp_path):
        path = tmp_path / "alpha.csv"
        path.write_text(
            "o_cluster,d_cluster,j_o_cluster,j_d_cluster,alpha,cost,price\n"
            "0,1,1,1,1.5,3.0,2.0\n"
        )
        with pytest.raises(ConfigError):
            load_alpha_table(str(path))

    def test_theta_table(self):
        theta = estimate_theta_table(
            [((0, 1), True), ((0, 1), False), ((1, 1), True), ((0, 1), True)]
        )
        assert theta == {(0, 1): pytest.approx(2 / 3), (1, 1): 1.0}

    def test_theta_csv(self, tmp_path):
        path = str(tmp_path / "theta.csv")
        save_theta_table({(0, 1): 0.25, (1, 0): 0.5}, path)
        assert load_theta_table(path) == {(0, 1): 0.25, (1, 0): 0.5}

    def test_theta_out_of_range(self, tmp_path):
        path = tmp_path / "theta.csv"
        path.write_text("o_cluster,d_cluster,theta\n0,1,1.5\n")
        with pytest.raises(ConfigError):
            load_theta_table(str(path))


class TestTripCostEstimator:
    def estimator(self, net, **kw):
        clusters = kmeans_cluster(net, 2, seed=0)
        model = cost_model(**kw)
        steady = SteadyStateModel(2, 1, 600.0)
        rates = region_profit_rates(steady)
        return TripCostEstimator(clusters, model, rates, steady)

    def test_route_cost(self, small_net):
        est = self.estimator(small_net)
        assert est.route_cost(1609.344) == pytest.approx(2.0)

    def test_exclusive_cost_without_retrospective(self, small_net):
        est = self.estimator(small_net)
        r = Request.create(small_net, 0, 0, 4, 0.0, 300.0, 600.0)
        assert est.exclusive_cost(r, 3.0, 0.0) == 3.0
        assert est.shared_cost(r, 2.5, 0.0) == 2.5

    def test_shared_cost_empty_vehicle(self, small_net):
        est = self.estimator(small_net)
        r = Request.create(small_net, 0, 0, 4, 0.0, 300.0, 600.0)
        expected = est.route_cost(250.0) + est.route_cost(750.0)
        cost = est.shared_cost(r, 0.0, 0.0, empty=True, pickup_meters=250.0)
        assert cost == pytest.approx(expected)

    def test_shared_cost_uses_learned_table(self, small_net):
        est = self.estimator(small_net)
        r = Request.create(small_net, 0, 0, 4, 0.0, 300.0, 600.0)
        od = est.od_of(0, 4)
        table = ExpectedCostTable(2)
        table.values[od] = 1.25
        table.samples[od] = 1
        est = est.with_cost_model(cost_model(od_expected_cost=table))
        assert est.shared_cost(r, 0.0, 0.0, empty=True) == 1.25

    def test_shared_cost_uses_alpha_table(self, small_net):
        est = self.estimator(small_net)
        r = Request.create(small_net, 0, 0, 4, 0.0, 300.0, 600.0)
        alone = est.shared_cost(r, 0.0, 0.0, empty=True)
        assert alone == pytest.approx(est.route_cost(r.direct_distance))
        entry = AlphaEntry(request_class=(1, 1), alpha=0.5, cost=4.0, price=3.0)
        est = est.with_cost_model(
            cost_model(alpha_table={est.od_of(0, 4): [entry]})
        )
        assert est.shared_cost(r, 0.0, 0.0, empty=True) == pytest.approx(
            0.5 * alone + 0.5 * 1.0
        )
