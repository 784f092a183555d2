# -*- coding: utf-8 -*-

""" Calibration and sensitivity loops built on repeated simulation runs.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .costs import update_expected_costs
from .demand import build_requests, generate_demand
from .errors import ParameterError
from .simulator import (
    Policy,
    RandomStreams,
    Scenario,
    alpha_to_dict,
    run_simulation,
)

logger = logging.getLogger(__name__)

DEFAULT_MULTIPLIERS = (1.2, 1.4, 1.6, 1.8, 2.0)


def default_retrospective_grid():
    return [round(float(m), 10) for m in np.linspace(0.0, 1.0, 11)]


@dataclass(frozen=True)
class MultiplierCalibration:
    """ The chosen price multiplier and, per candidate, the mean dynamic
        exclusive price against the mean static price of the same demand.
    """

    chosen: float
    rows: List[dict]

    def to_dict(self):
        return {"chosen": self.chosen, "candidates": self.rows}


def calibrate_price_multiplier(
    cfg, candidates=DEFAULT_MULTIPLIERS, policy=Policy.SPD, scenario=None
):
    """ Pick the price multiplier whose mean dynamic price is closest to the
        mean static price on the same demand.

        :param RunConfig cfg:
            The base configuration.
        :param list candidates:
            The multipliers to try.
        :type policy:
            Policy or str
        :param policy:
            The dynamic policy to simulate.
        :type scenario:
            None or Scenario
        :param scenario:
            Preloaded inputs shared by every run.

        :rtype: MultiplierCalibration
    """
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ParameterError("At least one candidate multiplier is needed.")
    if scenario is None:
        scenario = Scenario.from_config(cfg)
    rows = []
    for m in candidates:
        report = run_simulation(
            cfg.with_overrides(price_multiplier=m), policy, scenario=scenario
        )
        gap = report.mean_quoted_exclusive_price - report.mean_static_price
        rows.append(
            {
                "multiplier": m,
                "mean_dynamic_price": report.mean_quoted_exclusive_price,
                "mean_static_price": report.mean_static_price,
                "gap": gap,
                "total_profit": report.total_profit,
            }
        )
        logger.info("Multiplier %.2f: price gap %.4f", m, gap)
    best = min(rows, key=lambda row: (abs(row["gap"]), row["multiplier"]))
    return MultiplierCalibration(chosen=best["multiplier"], rows=rows)


@dataclass(frozen=True)
class RetrospectiveSweep:
    """ Profit per (policy, retrospective multiplier) with the best
        multiplier of each policy.
    """

    rows: List[dict]
    argmax: Dict[str, float]

    def to_dict(self):
        return {"profits": self.rows, "argmax": self.argmax}


def sweep_retrospective_multiplier(
    cfg, grid=None, policies=(Policy.SPD, Policy.BPD), scenario=None
):
    """ Simulate every policy at every retrospective multiplier of a grid.

        The argmax of a policy is the smallest multiplier reaching its
        highest profit.

        :rtype: RetrospectiveSweep
    """
    grid = default_retrospective_grid() if grid is None else [float(g) for g in grid]
    if not grid:
        raise ParameterError("The multiplier grid must not be empty.")
    if scenario is None:
        scenario = Scenario.from_config(cfg)
    rows, argmax = [], {}
    for policy in policies:
        policy = Policy(policy)
        best = None
        for m in grid:
            report = run_simulation(
                cfg.with_overrides(retrospective_multiplier=m),
                policy,
                scenario=scenario,
            )
            rows.append(
                {
                    "policy": policy.value,
                    "multiplier": m,
                    "total_profit": report.total_profit,
                    "market_share": report.market_share,
                }
            )
            if best is None or report.total_profit > best[0]:
                best = (report.total_profit, m)
        argmax[policy.value] = best[1]
        logger.info("%s: best retrospective multiplier %.2f", policy.value, best[1])
    return RetrospectiveSweep(rows=rows, argmax=argmax)


@dataclass(frozen=True)
class CostConvergence:
    """ The mean absolute change of the learned O-D cost table after each
        simulated day but the first, with the final table and joining
        probabilities.
    """

    mad: List[float]
    profits: List[float]
    table: object
    alpha: dict = field(default_factory=dict)

    def to_dict(self):
        cells = []
        K = self.table.K
        for o in range(K):
            for d in range(K):
                if self.table.samples[o, d]:
                    cells.append(
                        {
                            "o_cluster": o,
                            "d_cluster": d,
                            "expected_cost": float(self.table.values[o, d]),
                            "samples": int(self.table.samples[o, d]),
                        }
                    )
        return {
            "mad": self.mad,
            "profits": self.profits,
            "table": cells,
            "alpha": alpha_to_dict(self.alpha),
        }


def _day_requests(cfg, scenario, day, streams):
    records = generate_demand(
        scenario.net,
        scenario.clusters,
        cfg.synthetic_requests_per_day,
        cfg.horizon_s,
        streams.stream("demand-day-{}".format(day)),
        hotspot_cluster=cfg.synthetic_hotspot_cluster,
        hotspot_weight=cfg.synthetic_hotspot_weight,
        interval_s=cfg.period_s,
    )
    return build_requests(records, scenario.net, cfg.max_wait_s, cfg.max_delay_s)


def run_cost_convergence(
    cfg, n_days, vary_demand=True, policy=Policy.BPD, scenario=None
):
    """ Learn the expected shared cost table over consecutive simulated days.

        Each day is simulated with the table and joining probabilities
        learned so far, and its realized shared-first costs are folded into
        the table. With `vary_demand` and no demand file every day draws
        fresh synthetic demand and a cell averages its daily means. Otherwise
        each day repeats the scenario's demand and a cell averages the
        distinct trips seen over all days and keeps the joining probabilities
        of an O-D pair from the first day it opens a shared trip. A day that
        opens no new shared trips then leaves both unchanged, and so does
        every later day.

        :param RunConfig cfg:
            The configuration.
        :param int n_days:
            The number of days, at least 2.

        :rtype: CostConvergence
    """
    if n_days < 2:
        raise ParameterError("Cost convergence needs at least two days.")
    if scenario is None:
        scenario = Scenario.from_config(cfg)
    fresh_demand = vary_demand and cfg.demand is None
    seen = None if fresh_demand else set()
    streams = RandomStreams(cfg.seed)
    table = scenario.cost_model.od_expected_cost.copy()
    alpha = dict(scenario.cost_model.alpha_table)
    mads, profits = [], []
    for day in range(n_days):
        day_scenario = scenario.with_cost_table(table).with_alpha_table(alpha)
        if fresh_demand:
            day_scenario = day_scenario.with_requests(
                _day_requests(cfg, scenario, day, streams)
            )
        report = run_simulation(cfg, policy, scenario=day_scenario)
        table, mad = update_expected_costs(table, report.realized_costs, seen=seen)
        if fresh_demand:
            alpha.update(report.alpha)
        else:
            for od, row in report.alpha.items():
                alpha.setdefault(od, row)
        profits.append(report.total_profit)
        if day > 0:
            mads.append(mad)
        logger.info("Day %d: profit %.2f, MAD %.6f", day, report.total_profit, mad)
    return CostConvergence(mad=mads, profits=profits, table=table, alpha=alpha)

