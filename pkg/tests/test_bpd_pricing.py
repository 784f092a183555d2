# -*- coding: utf-8 -*-

""" Tests for modjoint.bpd_pricing. """

import math

import numpy as np
import pytest

from modjoint.bpd_pricing import (
    BatchPricingInstance,
    batch_instance_for,
    batch_probabilities,
    batched_expected_profit,
    brute_force_batch,
    concavity_certificate,
    decoupled_start,
    hessian_at,
    optimize_batch_prices,
    price_matching,
    prob_to_price,
    spd_instance_for,
    transformed_gradient,
    transformed_objective,
    value_fixed_prices,
)
from modjoint.errors import DomainError, ParameterError
from modjoint.spd_pricing import (
    SpdInstance,
    expected_profit_spd,
    spd_optimal_prices,
)

POINT = np.array([0.2, 0.3, 0.25, 0.15])


def instance(**kw):
    params = dict(
        c_1e=4.5,
        c_2e=5.0,
        c_1s=4.0,
        c_2s=3.0,
        c_ss=5.0,
        d_1s=0.3,
        d_1e=0.5,
        d_2s=0.2,
        d_2e=0.4,
        D_1=math.exp(-0.3),
        D_2=math.exp(0.1),
        beta_p=-0.2,
    )
    params.update(kw)
    return BatchPricingInstance(**params)


def prices_at(inst, P):
    p_1s, p_1e = prob_to_price(inst, P[0], P[1], 0)
    p_2s, p_2e = prob_to_price(inst, P[2], P[3], 1)
    return (p_1s, p_1e, p_2s, p_2e)


def spd_profit(inst, i):
    c_s, c_e = inst.costs[2 * i], inst.costs[2 * i + 1]
    d_s, d_e = inst.utilities[2 * i], inst.utilities[2 * i + 1]
    spd = SpdInstance(
        u_e_assign=d_e,
        u_s_assign=d_s,
        u_o=float(inst.log_outside[2 * i]),
        c_e=c_e,
        c_s=c_s,
        beta_p=inst.beta_p,
    )
    return spd_optimal_prices(spd).expected_profit


class TestBatchPricingInstance:
    def test_saving(self):
        assert instance().C == 2.0

    def test_invalid(self):
        with pytest.raises(ParameterError):
            instance(beta_p=0.0)
        with pytest.raises(ParameterError):
            instance(D_1=0.0)
        with pytest.raises(ParameterError):
            instance(c_ss=math.inf)


class TestTransformation:
    def test_prices_induce_probabilities(self):
        inst = instance()
        P = batch_probabilities(inst, prices_at(inst, POINT))
        assert P == pytest.approx(POINT)

    def test_profit_is_objective_over_beta(self):
        inst = instance()
        profit = batched_expected_profit(inst, prices_at(inst, POINT))
        assert profit == pytest.approx(transformed_objective(inst, POINT) / -0.2)

    def test_gradient(self):
        inst = instance()
        h = 1e-6
        numeric = []
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            numeric.append(
                (
                    transformed_objective(inst, POINT + step)
                    - transformed_objective(inst, POINT - step)
                )
                / (2 * h)
            )
        assert transformed_gradient(inst, POINT) == pytest.approx(
            np.array(numeric), abs=1e-6
        )

    def test_hessian(self):
        inst = instance()
        H = hessian_at(inst, POINT)
        assert H == pytest.approx(H.T)
        h = 1e-6
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            column = (
                transformed_gradient(inst, POINT + step)
                - transformed_gradient(inst, POINT - step)
            ) / (2 * h)
            assert H[:, k] == pytest.approx(column, abs=1e-4)

    def test_hessian_outside_simplex(self):
        with pytest.raises(DomainError):
            hessian_at(instance(), [0.6, 0.5, 0.2, 0.2])

    def test_prob_to_price_outside_simplex(self):
        inst = instance()
        with pytest.raises(DomainError):
            prob_to_price(inst, 0.0, 0.5, 0)
        with pytest.raises(DomainError):
            prob_to_price(inst, 0.5, 0.5, 1)

    def test_unavailable_exclusive_price(self):
        inst = instance(exclusive_available=(False, True))
        p_s, p_e = prob_to_price(inst, 0.4, 0.0, 0)
        assert p_e is None
        P = batch_probabilities(inst, (p_s, None, 10.0, 10.0))
        assert P[0] == pytest.approx(0.4)
        assert P[1] == 0.0


def certified_instance(rng):
    beta = float(rng.uniform(-0.5, -0.05))
    c_1e = float(rng.uniform(0.0, -1.0 / beta))
    c_2e = float(rng.uniform(0.0, -3.0 / beta))
    c_1s = c_1e * float(rng.uniform(0.3, 1.0))
    c_2s = c_2e * float(rng.uniform(0.3, 1.0))
    # the pooled route is at least as long as either solo route
    c_ss = max(c_1s, c_2s) + float(rng.uniform(0.0, 1.0)) * min(c_1s, c_2s)
    d = rng.uniform(-1.0, 1.0, size=4)
    return BatchPricingInstance(
        c_1e=c_1e,
        c_2e=c_2e,
        c_1s=c_1s,
        c_2s=c_2s,
        c_ss=c_ss,
        d_1s=float(d[0]),
        d_1e=float(d[1]),
        d_2s=float(d[2]),
        d_2e=float(d[3]),
        D_1=math.exp(float(rng.uniform(-1.0, 1.0))),
        D_2=math.exp(float(rng.uniform(-1.0, 1.0))),
        beta_p=beta,
    )


def interior_point(rng):
    while True:
        first = rng.dirichlet([2.0, 2.0, 2.0])
        second = rng.dirichlet([2.0, 2.0, 2.0])
        if min(first.min(), second.min()) >= 0.05:
            return np.array([first[0], first[1], second[0], second[1]])


class TestHessianOnCertifiedInstances:
    def test_positive_semidefinite(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            inst = certified_instance(rng)
            assert concavity_certificate(inst)
            for _ in range(100):
                H = hessian_at(inst, interior_point(rng))
                assert np.linalg.eigvalsh(H).min() >= -1e-8

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        h = 1e-6
        for _ in range(100):
            inst = certified_instance(rng)
            for _ in range(5):
                P = interior_point(rng)
                H = hessian_at(inst, P)
                for k in range(4):
                    step = np.zeros(4)
                    step[k] = h
                    column = (
                        transformed_gradient(inst, P + step)
                        - transformed_gradient(inst, P - step)
                    ) / (2 * h)
                    assert H[:, k] == pytest.approx(column, rel=1e-5, abs=1e-6)


class TestConcavityCertificate:
    def test_cheap_exclusive(self):
        assert concavity_certificate(instance())

    def test_expensive_exclusive(self):
        assert not concavity_certificate(instance(c_1e=20.0, c_2e=20.0))

    def test_no_exclusive_slot(self):
        assert concavity_certificate(instance(exclusive_available=(False, False)))
        assert not concavity_certificate(
            instance(c_ss=-10.0, exclusive_available=(False, False))
        )


class TestOptimizeBatchPrices:
    def test_newton_optimum(self):
        inst = instance()
        quote = optimize_batch_prices(inst)
        assert quote.method == "newton"
        g = transformed_gradient(inst, quote.probabilities)
        assert g == pytest.approx(np.zeros(4), abs=1e-8)
        assert quote.expected_profit == pytest.approx(
            batched_expected_profit(inst, quote.prices)
        )

    def test_agrees_with_grid_search(self):
        inst = instance()
        newton = optimize_batch_prices(inst)
        grid = brute_force_batch(inst, step=0.01)
        assert grid.method == "grid"
        assert grid.expected_profit <= newton.expected_profit + 1e-9
        assert grid.expected_profit == pytest.approx(newton.expected_profit, abs=1e-6)

    def test_beats_decoupled_prices(self):
        inst = instance()
        quote = optimize_batch_prices(inst)
        start = decoupled_start(inst)
        assert quote.expected_profit >= batched_expected_profit(
            inst, prices_at(inst, start)
        )

    def test_no_pooling_saving_decouples(self):
        inst = instance(c_ss=7.0)
        assert inst.C == 0.0
        quote = optimize_batch_prices(inst)
        assert quote.expected_profit == pytest.approx(
            spd_profit(inst, 0) + spd_profit(inst, 1)
        )

    def test_without_certificate_enumerates(self):
        inst = instance(c_1e=20.0, c_2e=20.0)
        quote = optimize_batch_prices(inst, step=0.05)
        assert quote.method == "grid"
        assert quote.expected_profit > 0

    def test_unavailable_exclusive(self):
        inst = instance(
            c_1e=0.0, c_2e=4.5, d_1e=0.0, exclusive_available=(False, True)
        )
        quote = optimize_batch_prices(inst)
        assert quote.p_1e is None
        assert quote.P_1e == 0.0
        assert quote.menu(0) == (None, quote.p_1s)
        assert quote.choice(0).p_e == 0.0

    def test_price_floor_binds(self):
        inst = instance()
        free = optimize_batch_prices(inst)
        floor = max(free.prices) + 1.0
        quote = optimize_batch_prices(inst, price_floor=floor)
        assert quote.prices == (floor, floor, floor, floor)
        assert quote.probabilities == pytest.approx(
            batch_probabilities(inst, quote.prices)
        )
        assert quote.expected_profit == pytest.approx(
            batched_expected_profit(inst, quote.prices)
        )
        assert quote.expected_profit < free.expected_profit

    def test_price_floor_below_prices(self):
        inst = instance()
        free = optimize_batch_prices(inst)
        quote = optimize_batch_prices(inst, price_floor=min(free.prices) - 1.0)
        assert quote.prices == free.prices
        assert quote.expected_profit == free.expected_profit

    def test_price_floor_on_grid(self):
        inst = instance(c_1e=20.0, c_2e=20.0)
        free = brute_force_batch(inst, step=0.05)
        floor = max(p for p in free.prices if p is not None) + 1.0
        quote = brute_force_batch(inst, step=0.05, price_floor=floor)
        assert all(p == floor for p in quote.prices)

    def test_invalid_step(self):
        with pytest.raises(ParameterError):
            brute_force_batch(instance(), step=0.0)


class TestPriceMatching:
    def test_single_request(self, esv_batch):
        matching = esv_batch.matchings()[0]
        requests = esv_batch.requests_of(matching)
        value = price_matching(
            matching, requests, esv_batch.params, [esv_batch.outside]
        )
        inst = spd_instance_for(
            matching, requests[0], esv_batch.params, esv_batch.outside
        )
        quote = spd_optimal_prices(inst)
        assert value.u == pytest.approx(quote.expected_profit)
        assert value.gamma[0] == pytest.approx(quote.probabilities.p_e)
        assert value.gamma[1] == pytest.approx(quote.probabilities.p_s)

    def test_pair(self, esv_batch):
        matching = esv_batch.matchings()[2]
        requests = esv_batch.requests_of(matching)
        outsides = [esv_batch.outside, esv_batch.outside]
        value = price_matching(matching, requests, esv_batch.params, outsides)
        inst = batch_instance_for(matching, requests, esv_batch.params, outsides)
        assert inst.C == pytest.approx(sum(matching.solo_shared_costs) - inst.c_ss)
        P_1s, P_1e, P_2s, P_2e = value.quote.probabilities
        assert value.gamma[1] == pytest.approx(1 - (1 - P_1s) * (1 - P_2s))
        # vehicle 0 is the exclusive vehicle of both requests
        assert value.gamma[0] == pytest.approx(1 - (1 - P_1e) * (1 - P_2e))
        assert all(0.0 <= g <= 1.0 for g in value.gamma.values())

    def test_fixed_prices_single(self, esv_batch):
        matching = esv_batch.matchings()[0]
        requests = esv_batch.requests_of(matching)
        value = value_fixed_prices(
            matching, requests, esv_batch.params, [esv_batch.outside], [(12.0, 9.0)]
        )
        inst = spd_instance_for(
            matching, requests[0], esv_batch.params, esv_batch.outside
        )
        assert value.u == pytest.approx(expected_profit_spd(inst, 12.0, 9.0))
        assert value.menus[0] == (12.0, 9.0)
        assert value.quote is None

    def test_fixed_prices_pair(self, esv_batch):
        matching = esv_batch.matchings()[2]
        requests = esv_batch.requests_of(matching)
        outsides = [esv_batch.outside, esv_batch.outside]
        menus = [(12.0, 9.0), (11.0, 8.0)]
        value = value_fixed_prices(
            matching, requests, esv_batch.params, outsides, menus
        )
        inst = batch_instance_for(matching, requests, esv_batch.params, outsides)
        assert value.u == pytest.approx(
            batched_expected_profit(inst, (9.0, 12.0, 8.0, 11.0))
        )
        assert value.choices[1].p_s > 0

    def test_menus_and_choices(self, esv_batch):
        matching = esv_batch.matchings()[2]
        requests = esv_batch.requests_of(matching)
        outsides = [esv_batch.outside, esv_batch.outside]
        value = price_matching(matching, requests, esv_batch.params, outsides)
        assert value.menus == (value.quote.menu(0), value.quote.menu(1))
        assert value.choices == (value.quote.choice(0), value.quote.choice(1))

    def test_price_floor(self, esv_batch):
        matching = esv_batch.matchings()[2]
        requests = esv_batch.requests_of(matching)
        outsides = [esv_batch.outside, esv_batch.outside]
        free = price_matching(matching, requests, esv_batch.params, outsides)
        floor = max(p for menu in free.menus for p in menu if p is not None) + 1.0
        value = price_matching(
            matching, requests, esv_batch.params, outsides, price_floor=floor
        )
        assert all(p == floor for menu in value.menus for p in menu if p is not None)
        assert value.u < free.u
