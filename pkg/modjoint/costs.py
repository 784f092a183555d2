# -*- coding: utf-8 -*-

""" Operational and retrospective cost machinery.

    This module holds the expected shared operational cost of a request, the
    steady-state fleet-flow model of a (cluster, interval) cell, the regional
    profit rates derived from it, the retrospective cost of blocking a vehicle
    on a trip and the day-by-day learning of expected O-D costs.
"""

import collections
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .choice import Mode, price_for_share
from .errors import CalibrationError, ConfigError, EmptySupplyError, ParameterError
from .network import METERS_PER_MILE

logger = logging.getLogger(__name__)

COST_TABLE_COLUMNS = ["o_cluster", "d_cluster", "expected_cost", "samples"]
STEADY_STATE_COLUMNS = [
    "cluster",
    "interval",
    "L_e",
    "L_s",
    "O_e",
    "O_s",
    "T_e",
    "T_s",
    "A_e",
    "A_s",
    "zeta_s",
    "price_e",
    "price_s",
    "cost_e",
    "cost_s",
]
THETA_TABLE_COLUMNS = ["o_cluster", "d_cluster", "theta"]
ALPHA_TABLE_COLUMNS = [
    "o_cluster",
    "d_cluster",
    "j_o_cluster",
    "j_d_cluster",
    "alpha",
    "cost",
    "price",
]


def miles(meters):
    return meters / METERS_PER_MILE


# Expected shared operational cost


@dataclass(frozen=True)
class AlphaEntry:
    """ One future-request class that may join a shared trip.

        * `request_class` is the (origin cluster, destination cluster) of the
          joining request.
        * `alpha` is the probability that such a request joins.
        * `cost` is the operational cost of the combined trip.
        * `price` is the shared price the joining request pays.
    """

    request_class: Tuple[int, int]
    alpha: float
    cost: float
    price: float


class ExpectedCostTable:
    """ The learned expected shared operational cost per O-D cluster pair.

        :param int K:
            The number of clusters.

        Cells start at zero with no samples. `samples` counts the simulated
        days, or with keyed learning the trips, folded into a cell.
    """

    def __init__(self, K):
        if K < 1:
            raise ParameterError("An expected cost table needs at least one cluster.")
        self.K = K
        self.values = np.zeros((K, K))
        self.samples = np.zeros((K, K), dtype=int)

    def get(self, od):
        return float(self.values[od])

    def samples_at(self, od):
        return int(self.samples[od])

    def copy(self):
        table = ExpectedCostTable(self.K)
        table.values = self.values.copy()
        table.samples = self.samples.copy()
        return table

    def to_csv(self, path):
        rows = [
            (o, d, float(self.values[o, d]), int(self.samples[o, d]))
            for o in range(self.K)
            for d in range(self.K)
        ]
        pd.DataFrame(rows, columns=COST_TABLE_COLUMNS).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path, K):
        """ Load a table; cells missing from the file keep their zero default.

            :rtype: ExpectedCostTable
        """
        df = _read_table(path, COST_TABLE_COLUMNS)
        table = cls(K)
        for row in df.itertuples(index=False):
            o, d = int(row.o_cluster), int(row.d_cluster)
            if not (0 <= o < K and 0 <= d < K):
                raise ConfigError(
                    "Cost table {} references cluster pair ({}, {}) outside"
                    " 0..{}.".format(path, o, d, K - 1)
                )
            if not math.isfinite(row.expected_cost) or row.samples < 0:
                raise ConfigError(
                    "Cost table {} has an invalid entry for ({}, {}).".format(
                        path, o, d
                    )
                )
            table.values[o, d] = float(row.expected_cost)
            table.samples[o, d] = int(row.samples)
        return table


def _read_table(path, columns):
    try:
        df = pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise ConfigError("Could not read {}: {}".format(path, err))
    if list(df.columns) != columns:
        raise ConfigError(
            "File {} must have header {!r}.".format(path, ",".join(columns))
        )
    return df


@dataclass
class CostModel:
    """ Cost parameters shared by both pricing frameworks.

        * `c0` is the K x K table of unmatched-ride operational costs between
          cluster representatives.
        * `alpha_table` maps an O-D cluster pair to its list of AlphaEntry.
        * `od_expected_cost` is the learned ExpectedCostTable.
    """

    c0: np.ndarray
    per_mile_cost: float
    c_p: float
    retrospective_multiplier: float = 0.0
    alpha_table: Dict[Tuple[int, int], List[AlphaEntry]] = field(default_factory=dict)
    od_expected_cost: ExpectedCostTable = None

    def __post_init__(self):
        if not 0.0 <= self.retrospective_multiplier <= 1.0:
            raise ParameterError(
                "The retrospective multiplier must lie in [0, 1] (got {}).".format(
                    self.retrospective_multiplier
                )
            )
        if not np.all(np.isfinite(self.c0)):
            raise ParameterError("Unmatched-ride costs must be finite.")
        for od, row in self.alpha_table.items():
            total = sum(entry.alpha for entry in row)
            if total > 1.0 + 1e-12 or any(entry.alpha < 0 for entry in row):
                raise ParameterError(
                    "Alpha row {} must hold nonnegative values summing to at most 1"
                    " (got {}).".format(od, total)
                )
            if not all(math.isfinite(e.cost) and math.isfinite(e.price) for e in row):
                raise ParameterError("Alpha row {} has a non-finite cost.".format(od))
        if self.od_expected_cost is None:
            self.od_expected_cost = ExpectedCostTable(self.c0.shape[0])

    def c0_for(self, od):
        return float(self.c0[od])


def expected_shared_operational_cost(model, od, c0=None):
    """ Return the expected operational cost of serving a request in a shared
        vehicle that is empty at pickup.

        With probability alpha a future request of each class joins, in which
        case the combined trip costs `cost` and the joiner pays `price`;
        otherwise the request rides alone at cost c0.

        :param CostModel model:
            The cost model.
        :param tuple od:
            The (origin cluster, destination cluster) of the request.
        :type c0:
            None or float
        :param c0:
            The request-level unmatched cost. Defaults to the cluster table.

        :rtype: float
    """
    if c0 is None:
        c0 = model.c0_for(od)
    row = model.alpha_table.get(tuple(od), [])
    total_alpha = sum(entry.alpha for entry in row)
    joined = sum(entry.alpha * (entry.cost - entry.price) for entry in row)
    return (1.0 - total_alpha) * c0 + joined


# Steady-state fleet flow


@dataclass(frozen=True)
class SteadyStateCell:
    """ The steady-state operating point of one (cluster, interval) cell.

        L counts vehicles, O open vehicles, T is the mean trip duration in
        seconds and A the coefficient of the wait function F(O) = A / sqrt(O).
        The listed prices and per-trip operational costs are those found by
        `calibrate_cell`.
    """

    L_e: float
    L_s: float
    O_e: float
    O_s: float
    T_e: float
    T_s: float
    A_e: float
    A_s: float
    zeta_s: float = 1.0
    price_e: float = 0.0
    price_s: float = 0.0
    cost_e: float = 0.0
    cost_s: float = 0.0

    def __post_init__(self):
        if min(self.L_e, self.L_s, self.O_e, self.O_s) < 0:
            raise ParameterError("Vehicle counts must be nonnegative.")
        if self.O_e > self.L_e or self.O_s > self.L_s:
            raise ParameterError("Open vehicles cannot exceed the fleet in a cell.")
        if not 0 < self.zeta_s <= 2:
            raise ParameterError("zeta_s must lie in (0, 2].")

    @property
    def L(self):
        return self.L_e + self.L_s

    def wait(self, mode):
        """ Return the expected wait F(O) in seconds for a mode. """
        A, O = (self.A_e, self.O_e) if mode is Mode.EXCLUSIVE else (self.A_s, self.O_s)
        if O <= 0:
            raise EmptySupplyError(
                "The wait function is singular with no open {} vehicles.".format(
                    mode.name.lower()
                )
            )
        return A / math.sqrt(O)

    def throughput(self, mode):
        """ Return the trip throughput in trips per second for a mode.

            A mode with every vehicle open has zero throughput.
        """
        if mode is Mode.EXCLUSIVE:
            L, O, T, zeta = self.L_e, self.O_e, self.T_e, 1.0
        else:
            L, O, T, zeta = self.L_s, self.O_s, self.T_s, self.zeta_s
        if L == O:
            return 0.0
        return zeta * (L - O) / (self.wait(mode) + T)

    def listed(self, mode):
        """ Return the (price, cost) pair listed for a mode. """
        if mode is Mode.EXCLUSIVE:
            return self.price_e, self.cost_e
        return self.price_s, self.cost_s


class SteadyStateModel:
    """ A grid of steady-state cells over K clusters and M time intervals.

        :param int K:
            The number of clusters.
        :param int M:
            The number of time intervals per day.
        :param float period_s:
            The length of one interval in seconds.
        :param dict cells:
            A mapping from (cluster, interval) to SteadyStateCell. Cells may be
            missing; missing cells have no throughput.
    """

    def __init__(self, K, M, period_s, cells=None):
        if K < 1 or M < 1 or period_s <= 0:
            raise ParameterError("A steady-state grid needs K, M and period > 0.")
        self.K = K
        self.M = M
        self.period_s = float(period_s)
        self.cells = dict(cells or {})

    def interval_of(self, t):
        return int(t // self.period_s) % self.M

    def remaining_in_period(self, t):
        return self.period_s - (t % self.period_s)

    def cell(self, cluster, interval):
        return self.cells.get((cluster, interval))

    def to_csv(self, path):
        rows = []
        for (k, m), c in sorted(self.cells.items()):
            rows.append(
                (k, m, c.L_e, c.L_s, c.O_e, c.O_s, c.T_e, c.T_s, c.A_e, c.A_s)
                + (c.zeta_s, c.price_e, c.price_s, c.cost_e, c.cost_s)
            )
        pd.DataFrame(rows, columns=STEADY_STATE_COLUMNS).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path, K, M, period_s):
        """ Load steady-state cells keyed by (cluster, interval).

            :rtype: SteadyStateModel
        """
        df = _read_table(path, STEADY_STATE_COLUMNS)
        cells = {}
        for row in df.to_dict("records"):
            key = (int(row.pop("cluster")), int(row.pop("interval")))
            if not (0 <= key[0] < K and 0 <= key[1] < M):
                raise ConfigError(
                    "Steady-state table {} has cell {} outside the grid.".format(
                        path, key
                    )
                )
            try:
                cells[key] = SteadyStateCell(**{k: float(v) for k, v in row.items()})
            except ParameterError as err:
                raise ConfigError(
                    "Steady-state table {} cell {}: {}".format(path, key, err)
                )
        return cls(K, M, period_s, cells)


def throughput(model, cell, mode):
    """ Return the throughput of a mode in a (cluster, interval) cell.

        :param SteadyStateModel model:
            The steady-state model.
        :param tuple cell:
            The (cluster, interval) key.
        :param Mode mode:
            Mode.EXCLUSIVE or Mode.SHARED.

        :rtype: float
    """
    c = model.cell(*cell)
    if c is None:
        return 0.0
    return c.throughput(mode)


def flow_residual(cell, mode):
    """ Return L - (O + F(O) Y + T Y) for a mode, zero for a balanced cell.

        For the shared mode the throughput is scaled back by zeta_s.
    """
    y = cell.throughput(mode)
    if mode is Mode.EXCLUSIVE:
        L, O, T = cell.L_e, cell.O_e, cell.T_e
    else:
        L, O, T = cell.L_s, cell.O_s, cell.T_s
        y = y / cell.zeta_s
    if L == O:
        return 0.0
    return L - (O + cell.wait(mode) * y + T * y)


def calibrate_cell(
    L_e,
    L_s,
    demand_rate,
    T_e,
    T_s,
    A_e,
    A_s,
    zeta_s,
    cost_e,
    cost_s,
    choice_params,
    u_o,
    grid=50,
):
    """ Find the profit-rate maximising steady state of one cell.

        Open-vehicle counts O_e and O_s are enumerated on a grid strictly
        inside (0, L). Each pair fixes the waits, the throughputs and hence
        the market shares Y / demand_rate, which the MNL model is inverted at
        to recover the listed prices. The pair with the highest profit rate
        Y_e (p_e - cost_e) + Y_s (p_s - cost_s) wins.

        :param float demand_rate:
            Requests per second originating in the cell.
        :param ChoiceParams choice_params:
            The mode-choice coefficients.
        :param float u_o:
            The utility of the outside option.

        :rtype: SteadyStateCell
    """
    base = dict(
        L_e=L_e,
        L_s=L_s,
        T_e=T_e,
        T_s=T_s,
        A_e=A_e,
        A_s=A_s,
        zeta_s=zeta_s,
        cost_e=cost_e,
        cost_s=cost_s,
    )
    if demand_rate <= 0 or L_e <= 0 or L_s <= 0:
        return SteadyStateCell(O_e=L_e, O_s=L_s, **base)

    fractions = np.arange(1, grid + 1) / (grid + 1.0)
    O_e, O_s = np.meshgrid(fractions * L_e, fractions * L_s, indexing="ij")
    eta_e = A_e / np.sqrt(O_e)
    eta_s = A_s / np.sqrt(O_s)
    Y_e = (L_e - O_e) / (eta_e + T_e)
    Y_s = zeta_s * (L_s - O_s) / (eta_s + T_s)
    share_e = Y_e / demand_rate
    share_s = Y_s / demand_rate
    phi = 1.0 - share_e - share_s
    ok = phi > 0
    if not np.any(ok):
        raise CalibrationError(
            "No open-vehicle counts keep the market shares below 1"
            " (demand rate {}).".format(demand_rate)
        )
    cp = choice_params
    beta = cp.effective_beta_p
    d_e = cp.beta_w * eta_e + cp.beta_t * T_e + cp.asc_e
    d_s = cp.beta_w * eta_s + cp.beta_t * T_s + cp.asc_s
    p_e = np.full(phi.shape, np.nan)
    p_s = np.full(phi.shape, np.nan)
    p_e[ok] = price_for_share(beta, d_e[ok], u_o, share_e[ok], share_s[ok])
    p_s[ok] = price_for_share(beta, d_s[ok], u_o, share_s[ok], share_e[ok])
    rate = np.where(ok, Y_e * (p_e - cost_e) + Y_s * (p_s - cost_s), -np.inf)
    i, j = np.unravel_index(np.argmax(rate), rate.shape)
    return SteadyStateCell(
        O_e=float(O_e[i, j]),
        O_s=float(O_s[i, j]),
        price_e=float(p_e[i, j]),
        price_s=float(p_s[i, j]),
        **base,
    )


# Shared-vehicle utilization


@dataclass(frozen=True)
class UtilizationInputs:
    """ Fleet parameters of the shared-vehicle occupancy chain.

        Unprimed quantities describe empty vehicles picking up a first
        customer; primed quantities describe vehicles with one customer
        picking up a second. When `pickup_rate` is known the chain is solved
        at that rate instead of the rate that balances the one-customer flow.
    """

    L_s: float
    O_s: float
    eta_s: float
    T_s: float
    O_s_prime: float
    eta_s_prime: float
    T_s_prime: float
    pickup_rate: Optional[float] = None


@dataclass(frozen=True)
class UtilizationModel:
    """ Shared vehicles counted by onboard headcount, with the transition
        probabilities of the occupancy chain.
    """

    N0: float
    N1: float
    N2: float
    Y_s: float
    O_s_prime: float
    Y_s_prime: float
    eta_s_prime: float
    T_s_prime: float
    P01: float
    P10: float
    P12: float
    P21: float

    @property
    def L_s(self):
        return self.N0 + self.N1 + self.N2

    @property
    def zeta_s(self):
        if self.L_s <= 0:
            return 0.0
        return (self.N1 + 2.0 * self.N2) / self.L_s


def _occupancy(inputs, p):
    T, Tp = inputs.T_s, inputs.T_s_prime
    N0 = inputs.L_s / (1.0 + p * T + p * p * T * Tp)
    N1 = N0 * p * T
    return N0, N1, inputs.L_s - N0 - N1


def _balance_residual(inputs, p):
    N0, N1, N2 = _occupancy(inputs, p)
    return N1 - (
        inputs.O_s_prime
        + inputs.eta_s_prime * N2 / inputs.T_s_prime
        + inputs.T_s * (N0 - inputs.O_s) / inputs.eta_s
    )


def _balancing_rate(inputs):
    ps = np.geomspace(1e-9, 1e3, 200)
    values = np.array([_balance_residual(inputs, p) for p in ps])
    crossings = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]
    if len(crossings) == 0:
        raise CalibrationError(
            "The occupancy chain has no balanced state for {}.".format(inputs)
        )
    k = crossings[0]
    if values[k] == 0:
        p = ps[k]
    else:
        p = brentq(
            lambda x: _balance_residual(inputs, x), ps[k], ps[k + 1], xtol=1e-15
        )
    N0 = _occupancy(inputs, p)[0]
    if N0 < inputs.O_s - 1e-12:
        raise CalibrationError(
            "The balanced occupancy has negative throughput (N0={}, O_s={}).".format(
                N0, inputs.O_s
            )
        )
    return p


def solve_utilization(inputs):
    """ Solve the three-state occupancy chain of the shared fleet.

        Vehicles leave the one- and two-customer states at rates 1/T_s and
        1/T_s' and pick up customers at a common rate p from the zero- and
        one-customer states. Detailed balance then fixes N0, N1, N2 as
        functions of p. Unless the inputs carry a known pickup rate, p is the
        root that makes the one-customer count consistent with the flow of
        vehicles through it.

        :param UtilizationInputs inputs:
            The fleet parameters.

        :rtype: UtilizationModel
    """
    if not inputs.L_s > 0:
        raise ParameterError("The shared fleet must be nonempty.")
    if min(inputs.eta_s, inputs.T_s, inputs.eta_s_prime, inputs.T_s_prime) <= 0:
        raise ParameterError("Waits and trip durations must be positive.")

    if inputs.pickup_rate is not None:
        if not inputs.pickup_rate > 0:
            raise ParameterError(
                "The pickup rate must be positive (got {}).".format(inputs.pickup_rate)
            )
        p = inputs.pickup_rate
    else:
        p = _balancing_rate(inputs)
    N0, N1, N2 = _occupancy(inputs, p)
    model = UtilizationModel(
        N0=N0,
        N1=N1,
        N2=N2,
        Y_s=max(0.0, (N0 - inputs.O_s) / inputs.eta_s),
        O_s_prime=inputs.O_s_prime,
        Y_s_prime=N2 / inputs.T_s_prime,
        eta_s_prime=inputs.eta_s_prime,
        T_s_prime=inputs.T_s_prime,
        P01=p,
        P10=1.0 / inputs.T_s,
        P12=p,
        P21=1.0 / inputs.T_s_prime,
    )
    logger.debug("Solved utilization: zeta_s=%.6f p=%.3g", model.zeta_s, p)
    return model


def cell_utilization(cell):
    """ Return the shared-vehicle utilization implied by a calibrated cell.

        Open shared vehicles pick up customers at the cell's shared
        throughput per open vehicle, and a vehicle stays in each occupied
        state for the cell's shared trip duration.

        :param SteadyStateCell cell:
            The calibrated cell.

        :returns:
            The utilization, or None for a cell without shared trips.
    """
    if not 0 < cell.O_s < cell.L_s:
        return None
    eta = cell.wait(Mode.SHARED)
    inputs = UtilizationInputs(
        L_s=cell.L_s,
        O_s=cell.O_s,
        eta_s=eta,
        T_s=cell.T_s,
        O_s_prime=0.0,
        eta_s_prime=eta,
        T_s_prime=cell.T_s,
        pickup_rate=cell.throughput(Mode.SHARED) / cell.O_s,
    )
    return solve_utilization(inputs).zeta_s


# Regional profit rates and retrospective cost


class RegionProfitRates:
    """ The average profit per second per vehicle of each mode in each
        (cluster, interval) cell.
    """

    def __init__(self, K, M, exclusive=None, shared=None):
        self.K = K
        self.M = M
        self._rates = {
            Mode.EXCLUSIVE: np.zeros((K, M)) if exclusive is None else exclusive,
            Mode.SHARED: np.zeros((K, M)) if shared is None else shared,
        }

    def rate(self, mode, cluster, interval):
        return float(self._rates[mode][cluster, interval])

    def table(self, mode):
        return self._rates[mode]


def region_profit_rates(model, listed_prices=None):
    """ Combine cell throughputs with listed prices into profit rates.

        The rate of a mode is Y (price - cost) / L, clamped at zero.

        :param SteadyStateModel model:
            The steady-state model.
        :type listed_prices:
            None or dict
        :param listed_prices:
            Optional mapping from (cluster, interval) to (price_e, price_s)
            overriding the prices stored on the cells.

        :rtype: RegionProfitRates
    """
    rates = RegionProfitRates(model.K, model.M)
    listed_prices = listed_prices or {}
    for key, cell in model.cells.items():
        override = listed_prices.get(key)
        for i, mode in enumerate((Mode.EXCLUSIVE, Mode.SHARED)):
            L = cell.L_e if mode is Mode.EXCLUSIVE else cell.L_s
            if L <= 0:
                continue
            price, cost = cell.listed(mode)
            if override is not None:
                price = override[i]
            y = cell.throughput(mode)
            rates.table(mode)[key] = max(0.0, y * (price - cost) / L)
    return rates


def retrospective_cost(
    rates, mode, origin_cluster, dest_cluster, t_r, t_r_prime, multiplier, interval=0
):
    """ Return the profit forgone by committing a vehicle to a trip.

        The vehicle misses the origin region's profit rate for the trip
        duration `t_r` and, for the rest of the period `t_r_prime`, earns the
        destination's rate instead of the origin's.

        :rtype: float
    """
    if multiplier == 0:
        return 0.0
    e_o = rates.rate(mode, origin_cluster, interval)
    e_d = rates.rate(mode, dest_cluster, interval)
    return multiplier * (e_o * t_r + (e_o - e_d) * t_r_prime)


# Learning expected costs from simulated days


@dataclass(frozen=True)
class RealizedCost:
    """ The realized operational cost of one shared-first trip, keyed by the
        request that opened it.
    """

    od: Tuple[int, int]
    cost: float
    key: Optional[int] = None


def update_expected_costs(table, trips, seen=None):
    """ Fold one simulated day of realized costs into the expected cost table.

        By default each observed cell becomes the running mean, over the days
        it was observed, of its daily mean realized cost.

        With `seen` the table instead keeps the running mean over distinct
        trips: a trip whose key is already in `seen` adds nothing, and the
        keys of the new trips are added to the set. Replaying the same demand
        then leaves the table unchanged once no new trips appear.

        :param ExpectedCostTable table:
            The table before the day. It is not modified.
        :param trips:
            An iterable of RealizedCost.
        :type seen:
            None or set
        :param seen:
            The keys of the trips folded in so far.

        :returns:
            The updated table and the mean absolute difference between the
            old and new values over the cells updated.
        :rtype: (ExpectedCostTable, float)
    """
    by_cell = collections.defaultdict(list)
    for trip in trips:
        if seen is not None:
            if trip.key is None:
                raise ParameterError("Keyed cost learning needs keyed trips.")
            if trip.key in seen:
                continue
            seen.add(trip.key)
        by_cell[tuple(trip.od)].append(trip.cost)
    updated = table.copy()
    if not by_cell:
        return updated, 0.0
    diffs = []
    for od in sorted(by_cell):
        n = int(table.samples[od])
        old = float(table.values[od])
        costs = by_cell[od] if seen is not None else [np.mean(by_cell[od])]
        new = (old * n + float(np.sum(costs))) / (n + len(costs))
        updated.values[od] = new
        updated.samples[od] = n + len(costs)
        diffs.append(abs(new - old))
    mad = float(np.mean(diffs))
    logger.info("Updated %d O-D cells, MAD %.6f", len(diffs), mad)
    return updated, mad


@dataclass(frozen=True)
class SharedTripRecord:
    """ A logged trip of a rider who boarded an empty shared vehicle.

        `joiner_class`, `joined_cost` and `joiner_price` describe the first
        request that joined the trip, if any. `joined_cost` is the
        operational cost of the combined trip.
    """

    od: Tuple[int, int]
    solo_cost: float
    joiner_class: Tuple[int, int] = None
    joined_cost: float = 0.0
    joiner_price: float = 0.0

    @property
    def joined(self):
        return self.joiner_class is not None


def estimate_alpha_table(records):
    """ Estimate the joining probabilities of future requests per O-D pair.

        :param records:
            An iterable of SharedTripRecord.

        :rtype: dict
    """
    grouped = collections.defaultdict(list)
    for rec in records:
        grouped[tuple(rec.od)].append(rec)
    table = {}
    for od in sorted(grouped):
        recs = grouped[od]
        joins = collections.defaultdict(list)
        for rec in recs:
            if rec.joined:
                joins[tuple(rec.joiner_class)].append(rec)
        table[od] = [
            AlphaEntry(
                request_class=cls,
                alpha=len(joined) / len(recs),
                cost=float(np.mean([r.joined_cost for r in joined])),
                price=float(np.mean([r.joiner_price for r in joined])),
            )
            for cls, joined in sorted(joins.items())
        ]
    return table


def estimate_theta_table(outcomes):
    """ Estimate the probability that a shared rider is pooled, per O-D pair.

        :param outcomes:
            An iterable of ((origin cluster, dest cluster), pooled) pairs.

        :rtype: dict
    """
    counts = collections.defaultdict(lambda: [0, 0])
    for od, pooled in outcomes:
        counts[tuple(od)][0] += int(bool(pooled))
        counts[tuple(od)][1] += 1
    return {od: pooled / total for od, (pooled, total) in sorted(counts.items())}


def save_theta_table(theta, path):
    rows = [(o, d, t) for (o, d), t in sorted(theta.items())]
    pd.DataFrame(rows, columns=THETA_TABLE_COLUMNS).to_csv(path, index=False)


def load_theta_table(path):
    df = _read_table(path, THETA_TABLE_COLUMNS)
    theta = {}
    for row in df.itertuples(index=False):
        if not 0.0 <= row.theta <= 1.0:
            raise ConfigError(
                "Theta table {} has theta {} outside [0, 1].".format(path, row.theta)
            )
        theta[(int(row.o_cluster), int(row.d_cluster))] = float(row.theta)
    return theta


def save_alpha_table(alpha, path):
    rows = [
        (o, d) + tuple(e.request_class) + (e.alpha, e.cost, e.price)
        for (o, d), row in sorted(alpha.items())
        for e in row
    ]
    pd.DataFrame(rows, columns=ALPHA_TABLE_COLUMNS).to_csv(path, index=False)


def load_alpha_table(path):
    """ Load joining probabilities keyed by O-D cluster pair.

        :rtype: dict
    """
    df = _read_table(path, ALPHA_TABLE_COLUMNS)
    alpha = collections.defaultdict(list)
    for row in df.itertuples(index=False):
        if not 0.0 <= row.alpha <= 1.0:
            raise ConfigError(
                "Alpha table {} has alpha {} outside [0, 1].".format(path, row.alpha)
            )
        alpha[(int(row.o_cluster), int(row.d_cluster))].append(
            AlphaEntry(
                request_class=(int(row.j_o_cluster), int(row.j_d_cluster)),
                alpha=float(row.alpha),
                cost=float(row.cost),
                price=float(row.price),
            )
        )
    return dict(alpha)


# Request-level costs


class TripCostEstimator:
    """ Turns route quantities into the request-level exclusive and shared
        costs used by the pricing frameworks. Costs include the retrospective
        term.

        :param ClusterMap clusters:
            The spatial clustering.
        :param CostModel cost_model:
            The cost parameters.
        :param RegionProfitRates rates:
            The regional profit rates.
        :param SteadyStateModel steady_state:
            Supplies the period grid.
        :param bool use_shared_duration:
            Whether the retrospective cost of a shared ride uses the longer
            shared trip duration.
        :param float shared_trip_factor:
            The ratio of shared to exclusive trip duration.
    """

    def __init__(
        self,
        clusters,
        cost_model,
        rates,
        steady_state,
        use_shared_duration=True,
        shared_trip_factor=1.25,
    ):
        self.clusters = clusters
        self.cost_model = cost_model
        self.rates = rates
        self.steady_state = steady_state
        self.use_shared_duration = use_shared_duration
        self.shared_trip_factor = shared_trip_factor

    def with_cost_model(self, cost_model):
        return TripCostEstimator(
            self.clusters,
            cost_model,
            self.rates,
            self.steady_state,
            self.use_shared_duration,
            self.shared_trip_factor,
        )

    def route_cost(self, meters):
        """ Return the operational cost of driving a distance. """
        return self.cost_model.per_mile_cost * miles(meters)

    def od_of(self, origin, dest):
        return (self.clusters.cluster_of(origin), self.clusters.cluster_of(dest))

    def retrospective(self, mode, origin, dest, duration, now, scale=True):
        """ Return the retrospective cost of a trip between two nodes. """
        multiplier = self.cost_model.retrospective_multiplier
        if multiplier == 0:
            return 0.0
        if scale and mode is Mode.SHARED and self.use_shared_duration:
            duration = duration * self.shared_trip_factor
        o, d = self.od_of(origin, dest)
        return retrospective_cost(
            self.rates,
            mode,
            o,
            d,
            duration,
            self.steady_state.remaining_in_period(now),
            multiplier,
            interval=self.steady_state.interval_of(now),
        )

    def exclusive_cost(self, request, marginal_cost, now):
        """ Return c_e for serving a request with the given route cost. """
        return marginal_cost + self.retrospective(
            Mode.EXCLUSIVE, request.origin, request.dest, request.direct_time, now
        )

    def shared_cost(self, request, marginal_cost, now, empty=False, pickup_meters=0.0):
        """ Return c_s for serving a request in a shared vehicle.

            For an empty vehicle the trip cost is the expected shared
            operational cost of the O-D pair (the learned value once it has
            samples, else the expectation over future joiners) plus the cost
            of driving to the pickup. Otherwise it is the marginal route cost.
        """
        retro = self.retrospective(
            Mode.SHARED, request.origin, request.dest, request.direct_time, now
        )
        if not empty:
            return marginal_cost + retro
        od = self.od_of(request.origin, request.dest)
        table = self.cost_model.od_expected_cost
        if table.samples_at(od) > 0:
            trip = table.get(od)
        else:
            trip = expected_shared_operational_cost(
                self.cost_model, od, c0=self.route_cost(request.direct_distance)
            )
        return self.route_cost(pickup_meters) + trip + retro

    def pooled_cost(self, route_meters, first_stop, last_stop, duration, now):
        """ Return c_ss for a route serving two requests together. """
        return self.route_cost(route_meters) + self.retrospective(
            Mode.SHARED, first_stop, last_stop, duration, now, scale=False
        )


def with_retrospective_multiplier(cost_model, multiplier):
    return replace(cost_model, retrospective_multiplier=multiplier)
