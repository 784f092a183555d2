# -*- coding: utf-8 -*-

""" Event-driven simulation of a mixed exclusive and shared fleet.

    Four policies are supported. The sequential policies price and dispatch
    each request when it arrives; the batched policies collect requests for
    a window and then build the ESV matchings, price them, select matchings
    with the assignment program and let the quoted customers choose. The
    static policies replace dynamic prices by the distance and time based
    fare.
"""

import collections
import enum
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .assignment import AssignmentProblem, solve_assignment
from .bpd_pricing import price_matching, value_fixed_prices
from .choice import (
    ChoiceParams,
    Mode,
    ModeOffer,
    choice_probabilities,
    sample_choice,
    utility,
)
from .costs import (
    CostModel,
    ExpectedCostTable,
    RealizedCost,
    SharedTripRecord,
    SteadyStateModel,
    TripCostEstimator,
    calibrate_cell,
    cell_utilization,
    estimate_alpha_table,
    estimate_theta_table,
    load_alpha_table,
    load_theta_table,
    miles,
    region_profit_rates,
    with_retrospective_multiplier,
)
from .demand import build_requests, generate_demand, load_demand
from .errors import CalibrationError, ConfigError, NoPathError, ParameterError
from .matching import (
    EPS,
    Request,
    ServiceType,
    StopAction,
    VehicleState,
    build_esv_graph,
    build_rv_graph,
    build_trips,
    esv_rows,
    feasible_vehicle_request,
    rv_rows,
)
from .network import RoadNetwork, grid_network, kmeans_cluster
from .spd_pricing import PricingContext, spd_handle_request

logger = logging.getLogger(__name__)

UTILIZATION_ROUNDS = 5

SERIES_COLUMNS = [
    "period",
    "start_s",
    "requests",
    "served",
    "declined",
    "lost",
    "fares",
    "operational_cost",
    "penalties",
    "profit",
]


class Policy(enum.Enum):
    """ A pricing and dispatch policy. """

    SPD = "spd"
    BPD = "bpd"
    SEQ_STATIC = "seq-static"
    BATCH_STATIC = "batch-static"

    @property
    def batched(self):
        return self in (Policy.BPD, Policy.BATCH_STATIC)

    @property
    def dynamic(self):
        return self in (Policy.SPD, Policy.BPD)


# Static pricing benchmark


@dataclass(frozen=True)
class StaticPricingParams:
    """ The fare schedule of the static pricing benchmark.

        `f_t` is charged per second and `f_d` per mile of the direct trip.
        The shared price is the exclusive price scaled by
        1 - shared_discount * theta + shared_surcharge, where `theta_table`
        holds the probability that a shared rider of an O-D cluster pair is
        pooled.
    """

    f_min: float
    f_base: float
    f_t: float
    f_d: float
    shared_discount: float = 0.3
    shared_surcharge: float = 0.2
    theta_table: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        fares = (self.f_min, self.f_base, self.f_t, self.f_d)
        if min(fares) < 0 or min(self.shared_discount, self.shared_surcharge) < 0:
            raise ParameterError("Static fare parameters must be nonnegative.")
        for od, theta in self.theta_table.items():
            if not 0.0 <= theta <= 1.0:
                raise ParameterError(
                    "Theta for {} must lie in [0, 1] (got {}).".format(od, theta)
                )

    @classmethod
    def from_config(cls, cfg, theta_table=None):
        return cls(
            f_min=cfg.f_min,
            f_base=cfg.f_base,
            f_t=cfg.f_t,
            f_d=cfg.f_d,
            shared_discount=cfg.shared_discount,
            shared_surcharge=cfg.shared_surcharge,
            theta_table=dict(theta_table or {}),
        )


def static_price(params, request):
    """ Return the static exclusive fare of a request.

        :param StaticPricingParams params:
            The fare schedule.
        :param Request request:
            The request; its direct travel time and distance are charged.

        :rtype: float
    """
    fare = (
        params.f_base
        + params.f_t * request.direct_time
        + params.f_d * miles(request.direct_distance)
    )
    return max(params.f_min, fare)


def static_shared_price(params, p_e, od):
    """ Return the static shared fare for an exclusive fare p_e and an O-D
        cluster pair. Pairs without a theta estimate use theta = 0.
    """
    theta = params.theta_table.get(tuple(od), 0.0)
    return (1.0 - params.shared_discount * theta + params.shared_surcharge) * p_e


# Configuration and inputs


@dataclass(frozen=True)
class SimConfig:
    """ The parameters of one simulation run. """

    n_exclusive: int
    n_shared: int
    batch_window: float
    max_wait: float
    max_delay: float
    horizon: float
    choice_params: ChoiceParams
    static_params: StaticPricingParams
    per_mile_cost: float
    c_p: float
    retrospective_multiplier: float = 0.0
    use_shared_duration: bool = True
    shared_trip_factor: float = 1.25
    outside_wait: float = 300.0
    outside_price_factor: float = 1.0
    rebalance: object = "auto"
    rebalance_idle: float = 300.0
    esv_candidates: int = 1
    workers: int = 1
    price_floor: Optional[float] = None
    brute_force_step: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not self.batch_window > 0:
            raise ParameterError("The batch window must be positive.")
        if self.n_exclusive < 0 or self.n_shared < 0:
            raise ParameterError("Fleet sizes must be nonnegative.")

    @classmethod
    def from_config(cls, cfg, theta_table=None):
        """ Build the run parameters from a RunConfig.

            :rtype: SimConfig
        """
        return cls(
            n_exclusive=cfg.n_exclusive,
            n_shared=cfg.n_shared,
            batch_window=cfg.batch_window_s,
            max_wait=cfg.max_wait_s,
            max_delay=cfg.max_delay_s,
            horizon=cfg.horizon_s,
            choice_params=ChoiceParams.from_config(cfg),
            static_params=StaticPricingParams.from_config(cfg, theta_table),
            per_mile_cost=cfg.per_mile_cost,
            c_p=cfg.c_p,
            retrospective_multiplier=cfg.retrospective_multiplier,
            use_shared_duration=cfg.retrospective_use_shared_duration,
            shared_trip_factor=cfg.shared_trip_factor,
            outside_wait=cfg.outside_wait_s,
            outside_price_factor=cfg.outside_price_factor,
            rebalance=cfg.rebalance,
            rebalance_idle=cfg.rebalance_idle_s,
            esv_candidates=cfg.esv_candidates,
            workers=cfg.workers,
            price_floor=cfg.price_floor,
            brute_force_step=cfg.brute_force_step,
            seed=cfg.seed,
        )

    def rebalance_for(self, policy):
        """ Whether idle vehicles are rebalanced under a policy. "auto"
            rebalances under the batched policies only.
        """
        if self.rebalance == "auto":
            return policy.batched
        return bool(self.rebalance)


class RandomStreams:
    """ Independent random generators derived from one seed by name. """

    def __init__(self, seed):
        self.seed = seed
        self._streams = {}

    def stream(self, name):
        """ Return the generator of a named substream, creating it on first
            use.

            :rtype: numpy.random.Generator
        """
        if name not in self._streams:
            entropy = [self.seed, zlib.crc32(name.encode("utf-8"))]
            self._streams[name] = np.random.default_rng(np.random.SeedSequence(entropy))
        return self._streams[name]


def build_cost_model(cfg, net, clusters, od_expected_cost=None, alpha_table=None):
    """ Build the cost model with unmatched-ride costs between cluster
        representatives. Unreachable pairs cost zero.

        :rtype: CostModel
    """
    K = clusters.K
    c0 = np.zeros((K, K))
    for o in range(K):
        for d in range(K):
            try:
                meters = net.distance(
                    clusters.representatives[o], clusters.representatives[d]
                )
            except NoPathError:
                continue
            c0[o, d] = cfg.per_mile_cost * miles(meters)
    return CostModel(
        c0=c0,
        per_mile_cost=cfg.per_mile_cost,
        c_p=cfg.c_p,
        retrospective_multiplier=cfg.retrospective_multiplier,
        alpha_table=dict(alpha_table or {}),
        od_expected_cost=od_expected_cost,
    )


def _interval_occurrences(m, period_s, M, horizon_s):
    start = m * period_s
    if start >= horizon_s:
        return 0
    return int(math.ceil((horizon_s - start) / (M * period_s)))


def _calibrate_with_utilization(cfg, demand_rate, cell_args):
    """ Calibrate a cell, re-deriving the shared utilization from the
        occupancy chain at each calibrated operating point until it settles.
        Cells without shared trips keep the configured utilization.

        :rtype: SteadyStateCell
    """
    zeta_s = cfg.zeta_s
    for _ in range(UTILIZATION_ROUNDS):
        cell = calibrate_cell(
            demand_rate=demand_rate,
            zeta_s=zeta_s,
            cost_s=cell_args["cost_e"] * cfg.shared_trip_factor / zeta_s,
            **cell_args,
        )
        derived = cell_utilization(cell)
        if derived is None or abs(derived - zeta_s) < 1e-9:
            break
        zeta_s = derived
    return cell


def build_steady_state(cfg, net, clusters, requests, choice_params):
    """ Calibrate one steady-state cell per (origin cluster, interval) from
        the demand.

        The fleet is split over clusters in proportion to the demand they
        originate. The exclusive trip duration and cost of a cluster are the
        means over its requests; shared trips are longer by the shared trip
        factor and the shared utilization of a cell follows from the
        occupancy chain at its operating point. The outside utility is that of
        the outside offer for the cluster's mean trip.

        :rtype: SteadyStateModel
    """
    K, M, period = clusters.K, cfg.n_intervals, cfg.period_s
    model = SteadyStateModel(K, M, period)
    static = StaticPricingParams.from_config(cfg)
    by_cluster = collections.defaultdict(list)
    for r in requests:
        by_cluster[clusters.cluster_of(r.origin)].append(r)
    total = len(requests)
    for k in range(K):
        rs = by_cluster.get(k, [])
        share = len(rs) / total if total else 1.0 / K
        L_e, L_s = cfg.n_exclusive * share, cfg.n_shared * share
        if rs:
            T_e = max(1.0, float(np.mean([r.direct_time for r in rs])))
            meters = np.mean([r.direct_distance for r in rs])
            cost_e = cfg.per_mile_cost * miles(float(meters))
            price = cfg.outside_price_factor * float(
                np.mean([static_price(static, r) for r in rs])
            )
        else:
            T_e, cost_e, price = 1.0, 0.0, static.f_min
        u_o = utility(
            choice_params,
            ModeOffer(price=price, wait=cfg.outside_wait_s, travel=T_e),
            Mode.OUTSIDE,
        )
        counts = collections.Counter(model.interval_of(r.request_time) for r in rs)
        cell_args = dict(
            L_e=L_e,
            L_s=L_s,
            T_e=T_e,
            T_s=T_e * cfg.shared_trip_factor,
            A_e=cfg.wait_coeff_e,
            A_s=cfg.wait_coeff_s,
            cost_e=cost_e,
            choice_params=choice_params,
            u_o=u_o,
            grid=40,
        )
        for m in range(M):
            occurrences = _interval_occurrences(m, period, M, cfg.horizon_s)
            rate = counts[m] / (occurrences * period) if occurrences else 0.0
            try:
                cell = _calibrate_with_utilization(cfg, rate, cell_args)
            except CalibrationError as err:
                logger.warning("Cell (%d, %d) left idle: %s", k, m, err)
                cell = _calibrate_with_utilization(cfg, 0.0, cell_args)
            model.cells[(k, m)] = cell
    return model


def load_network(cfg):
    nodes, edges = cfg.path("network_nodes"), cfg.path("network_edges")
    if nodes is None and edges is None:
        return grid_network(
            cfg.grid_rows, cfg.grid_cols, cfg.grid_spacing_m, cfg.grid_speed_mps
        )
    if nodes is None or edges is None:
        raise ConfigError("network_nodes and network_edges must be given together.")
    return RoadNetwork.from_csv(nodes, edges)


@dataclass(frozen=True)
class Scenario:
    """ The inputs of a run: network, clustering, demand and cost tables.

        `fleet` optionally fixes the initial (service type, node) of every
        vehicle; otherwise vehicles start at random nodes.
    """

    net: RoadNetwork
    clusters: object
    requests: List[Request]
    cost_model: CostModel
    steady_state: SteadyStateModel
    theta_table: Dict[Tuple[int, int], float] = field(default_factory=dict)
    fleet: Optional[List[Tuple[ServiceType, int]]] = None

    @classmethod
    def from_config(cls, cfg, streams=None):
        """ Load or generate every input named by a RunConfig.

            :rtype: Scenario
        """
        streams = streams or RandomStreams(cfg.seed)
        net = load_network(cfg)
        K = min(cfg.n_clusters, len(net.nodes))
        clusters = kmeans_cluster(net, K, seed=cfg.seed)
        if cfg.demand is not None:
            requests = load_demand(
                cfg.path("demand"), net, cfg.max_wait_s, cfg.max_delay_s
            )
        else:
            records = generate_demand(
                net,
                clusters,
                cfg.synthetic_requests_per_day,
                cfg.horizon_s,
                streams.stream("demand"),
                hotspot_cluster=cfg.synthetic_hotspot_cluster,
                hotspot_weight=cfg.synthetic_hotspot_weight,
                interval_s=cfg.period_s,
            )
            requests = build_requests(records, net, cfg.max_wait_s, cfg.max_delay_s)
        return cls.from_parts(cfg, net, requests, clusters=clusters)

    @classmethod
    def from_parts(cls, cfg, net, requests, clusters=None, fleet=None):
        """ Assemble a scenario around a given network and demand, loading
            or deriving the cost tables.

            :rtype: Scenario
        """
        if clusters is None:
            K = min(cfg.n_clusters, len(net.nodes))
            clusters = kmeans_cluster(net, K, seed=cfg.seed)
        late = [r for r in requests if r.request_time >= cfg.horizon_s]
        if late:
            logger.warning("Ignoring %d requests after the horizon.", len(late))
            requests = [r for r in requests if r.request_time < cfg.horizon_s]
        theta = {}
        if cfg.theta_table is not None:
            theta = load_theta_table(cfg.path("theta_table"))
        table = None
        if cfg.cost_table is not None:
            table = ExpectedCostTable.from_csv(cfg.path("cost_table"), clusters.K)
        alpha = None
        if cfg.alpha_table is not None:
            alpha = load_alpha_table(cfg.path("alpha_table"))
        try:
            cost_model = build_cost_model(
                cfg, net, clusters, od_expected_cost=table, alpha_table=alpha
            )
        except ParameterError as err:
            raise ConfigError("Invalid cost inputs: {}".format(err))
        if cfg.steady_state_table is not None:
            steady = SteadyStateModel.from_csv(
                cfg.path("steady_state_table"),
                clusters.K,
                cfg.n_intervals,
                cfg.period_s,
            )
        else:
            steady = build_steady_state(
                cfg, net, clusters, requests, ChoiceParams.from_config(cfg)
            )
        return cls(
            net=net,
            clusters=clusters,
            requests=list(requests),
            cost_model=cost_model,
            steady_state=steady,
            theta_table=theta,
            fleet=fleet,
        )

    def with_requests(self, requests):
        return replace(self, requests=list(requests))

    def with_cost_table(self, table):
        cost_model = replace(self.cost_model, od_expected_cost=table)
        return replace(self, cost_model=cost_model)

    def with_alpha_table(self, alpha):
        cost_model = replace(self.cost_model, alpha_table=dict(alpha))
        return replace(self, cost_model=cost_model)


# Dispatch outcomes


@dataclass(frozen=True)
class Acceptance:
    """ A customer who chose an MoD service, with the quoted price and the
        vehicle planned for them.
    """

    request: Request
    mode: Mode
    price: float
    vehicle_id: int


@dataclass(frozen=True)
class Assignment:
    """ A committed ride. `prior_requests` are the requests the vehicle held
        before the commit.
    """

    request: Request
    mode: Mode
    price: float
    vehicle_id: int
    insertion: object
    was_empty: bool
    prior_requests: Tuple[int, ...] = ()


def _service_of(mode):
    return ServiceType.EXCLUSIVE if mode is Mode.EXCLUSIVE else ServiceType.SHARED


def _reassign(net, vehicles, request, service, taken, now, per_mile_cost):
    best = None
    for v in vehicles:
        if v.service_type is not service:
            continue
        if service is ServiceType.EXCLUSIVE and v.id in taken:
            continue
        ins = feasible_vehicle_request(net, v, request, now, per_mile_cost)
        if ins is None:
            continue
        if best is None or (ins.marginal_cost, v.id) < (
            best[1].marginal_cost,
            best[0].id,
        ):
            best = (v, ins)
    return best


def resolve_overbooking(net, vehicles, acceptances, now, per_mile_cost):
    """ Commit accepting customers to vehicles in order of request time.

        Each customer keeps the planned vehicle if it can still take them: an
        exclusive vehicle not already taken in this round, or a shared
        vehicle whose current schedule admits the request. Otherwise the
        customer is reassigned to the cheapest feasible vehicle of the chosen
        type, or lost. Vehicles are updated in place.

        :param RoadNetwork net:
            The road network.
        :param list vehicles:
            The fleet.
        :param list acceptances:
            The Acceptance list of the round.
        :param float now:
            The current time.
        :param float per_mile_cost:
            The operational cost per mile.

        :returns: The Assignment list and the list of lost requests.
        :rtype: (list, list)
    """
    by_id = {v.id: v for v in vehicles}
    taken = set()
    assignments, lost = [], []
    ordered = sorted(acceptances, key=lambda a: (a.request.request_time, a.request.id))
    for acc in ordered:
        service = _service_of(acc.mode)
        planned = by_id[acc.vehicle_id]
        choice = None
        if not (service is ServiceType.EXCLUSIVE and planned.id in taken):
            ins = feasible_vehicle_request(
                net, planned, acc.request, now, per_mile_cost
            )
            if ins is not None:
                choice = (planned, ins)
        if choice is None:
            choice = _reassign(
                net, vehicles, acc.request, service, taken, now, per_mile_cost
            )
            if choice is not None:
                logger.debug(
                    "Request %d moved from vehicle %d to %d.",
                    acc.request.id,
                    planned.id,
                    choice[0].id,
                )
        if choice is None:
            logger.debug(
                "Request %d lost: no %s vehicle left.", acc.request.id, service.value
            )
            lost.append(acc.request)
            continue
        vehicle, ins = choice
        assignment = Assignment(
            request=acc.request,
            mode=acc.mode,
            price=acc.price,
            vehicle_id=vehicle.id,
            insertion=ins,
            was_empty=vehicle.is_empty,
            prior_requests=tuple(sorted(vehicle.requests)),
        )
        vehicle.commit(ins, [acc.request])
        taken.add(vehicle.id)
        assignments.append(assignment)
    return assignments, lost


# Reporting


@dataclass
class Tally:
    """ Counters of one reporting bucket. """

    requests: int = 0
    served: int = 0
    declined: int = 0
    lost: int = 0
    fares: float = 0.0
    operational_cost: float = 0.0
    penalties: float = 0.0

    @property
    def profit(self):
        return self.fares - self.operational_cost - self.penalties

    def as_dict(self):
        return {
            "requests": self.requests,
            "served": self.served,
            "declined": self.declined,
            "lost": self.lost,
            "fares": self.fares,
            "operational_cost": self.operational_cost,
            "penalties": self.penalties,
            "profit": self.profit,
        }


@dataclass
class ModeTally:
    served: int = 0
    fares: float = 0.0
    operational_cost: float = 0.0
    waits: List[float] = field(default_factory=list)
    pooled: int = 0

    def as_dict(self):
        return {
            "served": self.served,
            "fares": self.fares,
            "operational_cost": self.operational_cost,
            "mean_price": self.fares / self.served if self.served else 0.0,
            "mean_wait": float(np.mean(self.waits)) if self.waits else 0.0,
            "pooled": self.pooled,
        }


@dataclass
class SimDebug:
    """ Per-batch graph and assignment dumps, kept when requested. """

    rv: list = field(default_factory=list)
    esv: list = field(default_factory=list)
    ilp: list = field(default_factory=list)


def _od_key(od):
    return "{}-{}".format(*od)


def alpha_to_dict(alpha):
    return {
        _od_key(od): [
            {
                "request_class": _od_key(e.request_class),
                "alpha": e.alpha,
                "cost": e.cost,
                "price": e.price,
            }
            for e in row
        ]
        for od, row in sorted(alpha.items())
    }


@dataclass
class SimReport:
    """ The outcome of one simulation run.

        Profit is collected fares minus operational costs (rides and
        rebalancing) minus lost-demand penalties. Market share is measured
        against all requests.
    """

    policy: str
    total_profit: float
    fares: float
    operational_cost: float
    rebalancing_cost: float
    penalties: float
    requests_total: int
    served: int
    lost: int
    declined: int
    no_offer: int
    market_share: float
    mean_price: float
    mean_wait: float
    mean_quoted_exclusive_price: float
    mean_static_price: float
    violations: int
    per_mode: dict
    per_day: list
    series: list
    theta: dict
    alpha: dict
    metadata: dict
    realized_costs: list = field(default_factory=list, repr=False)
    shared_trips: list = field(default_factory=list, repr=False)
    debug: Optional[SimDebug] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "policy": self.policy,
            "total_profit": self.total_profit,
            "fares": self.fares,
            "operational_cost": self.operational_cost,
            "rebalancing_cost": self.rebalancing_cost,
            "penalties": self.penalties,
            "requests_total": self.requests_total,
            "served": self.served,
            "lost": self.lost,
            "declined": self.declined,
            "no_offer": self.no_offer,
            "market_share": self.market_share,
            "mean_price": self.mean_price,
            "mean_wait": self.mean_wait,
            "mean_quoted_exclusive_price": self.mean_quoted_exclusive_price,
            "mean_static_price": self.mean_static_price,
            "violations": self.violations,
            "per_mode": self.per_mode,
            "per_day": self.per_day,
            "theta": {_od_key(od): t for od, t in sorted(self.theta.items())},
            "alpha": alpha_to_dict(self.alpha),
            "metadata": self.metadata,
        }


@dataclass
class _OpenRecord:
    od: Tuple[int, int]
    solo_cost: float
    joiner_class: Optional[Tuple[int, int]] = None
    added: float = 0.0
    joiner_price: float = 0.0


# The simulator


class Simulator:
    """ Runs one policy over a scenario.

        :param Scenario scenario:
            The network, demand and cost inputs.
        :param SimConfig sim_cfg:
            The run parameters.
        :param Policy policy:
            The pricing and dispatch policy.
        :param bool record_debug:
            Whether to keep the per-batch graphs and assignment programs.
    """

    def __init__(self, scenario, sim_cfg, policy, record_debug=False):
        self.scenario = scenario
        self.cfg = sim_cfg
        self.policy = policy
        self.net = scenario.net
        self.clusters = scenario.clusters
        self.streams = RandomStreams(sim_cfg.seed)
        self.choice_rng = self.streams.stream("choice")
        self.rates = region_profit_rates(scenario.steady_state)
        cost_model = with_retrospective_multiplier(
            scenario.cost_model, sim_cfg.retrospective_multiplier
        )
        self.estimator = TripCostEstimator(
            self.clusters,
            cost_model,
            self.rates,
            scenario.steady_state,
            use_shared_duration=sim_cfg.use_shared_duration,
            shared_trip_factor=sim_cfg.shared_trip_factor,
        )
        self.pricing = PricingContext(
            self.net, sim_cfg.choice_params, self.estimator, sim_cfg.price_floor
        )
        self.rebalance = sim_cfg.rebalance_for(policy)
        self.requests = {r.id: r for r in scenario.requests}
        self.vehicles = self._initial_fleet()
        self.debug = SimDebug() if record_debug else None
        self._executor = None

        self.totals = Tally()
        self.rebalancing_cost = 0.0
        self.no_offer = 0
        self.violations = 0
        self.quoted_exclusive = []
        self.modes = {Mode.EXCLUSIVE: ModeTally(), Mode.SHARED: ModeTally()}
        self.mode_of = {}
        self.periods = collections.defaultdict(Tally)
        self.days = collections.defaultdict(Tally)
        self.shared_riders = {}
        self.pooled = set()
        self.open_records = {}

    def _initial_fleet(self):
        fleet = self.scenario.fleet
        if fleet is None:
            rng = self.streams.stream("fleet")
            nodes = np.array(self.net.nodes)
            n = self.cfg.n_exclusive + self.cfg.n_shared
            starts = rng.choice(nodes, size=n) if n else []
            fleet = [
                (
                    ServiceType.EXCLUSIVE
                    if i < self.cfg.n_exclusive
                    else ServiceType.SHARED,
                    int(node),
                )
                for i, node in enumerate(starts)
            ]
        return [
            VehicleState(id=i, service_type=service, location=node, time=0.0)
            for i, (service, node) in enumerate(fleet)
        ]

    # bookkeeping

    def _buckets(self, t):
        period = self.scenario.steady_state.period_s
        return (
            self.totals,
            self.periods[int(t // period)],
            self.days[int(t // 86400.0)],
        )

    def _arrive(self, request):
        for tally in self._buckets(request.request_time):
            tally.requests += 1

    def _decline(self, request, offered=True):
        if not offered:
            self.no_offer += 1
        for tally in self._buckets(request.request_time):
            tally.declined += 1

    def _lose(self, request):
        for tally in self._buckets(request.request_time):
            tally.lost += 1
            tally.penalties += self.cfg.c_p

    def _note_quote(self, p_e):
        if p_e is not None:
            self.quoted_exclusive.append(p_e)

    def _account(self, a):
        r = a.request
        cost = a.insertion.marginal_cost
        for tally in self._buckets(r.request_time):
            tally.served += 1
            tally.fares += a.price
            tally.operational_cost += cost
        mode = self.modes[a.mode]
        mode.served += 1
        mode.fares += a.price
        mode.operational_cost += cost
        self.mode_of[r.id] = a.mode
        if a.mode is not Mode.SHARED:
            return
        od = self.estimator.od_of(r.origin, r.dest)
        self.shared_riders[r.id] = od
        if a.prior_requests:
            self.pooled.add(r.id)
            self.pooled.update(p for p in a.prior_requests if p in self.shared_riders)
            for p in a.prior_requests:
                rec = self.open_records.get(p)
                if rec is not None and rec.joiner_class is None:
                    rec.joiner_class = od
                    rec.added = cost
                    rec.joiner_price = a.price
        if a.was_empty:
            self.open_records[r.id] = _OpenRecord(
                od, self.estimator.route_cost(r.direct_distance)
            )

    def _commit(self, acceptances, now):
        assignments, lost = resolve_overbooking(
            self.net, self.vehicles, acceptances, now, self.cfg.per_mile_cost
        )
        for a in assignments:
            self._account(a)
        for r in lost:
            self._lose(r)

    # fleet movement

    def _advance(self, now):
        for v in self.vehicles:
            for stop in v.advance_to(now):
                r = self.requests[stop.request_id]
                if stop.action is StopAction.PICKUP:
                    wait = max(0.0, stop.time - r.request_time)
                    self.modes[self.mode_of[r.id]].waits.append(wait)
                    if stop.time > r.latest_pickup + EPS:
                        self.violations += 1
                elif stop.time > r.latest_dropoff + EPS:
                    self.violations += 1

    def _rebalance(self, now):
        """ Move vehicles idle for long enough to the cluster where the
            profit they can earn over the rest of the period, net of the
            drive, most exceeds what they earn staying put. A cluster only
            receives vehicles of a mode up to its steady-state fleet.
        """
        steady = self.scenario.steady_state
        interval = steady.interval_of(now)
        remaining = steady.remaining_in_period(now)
        present = collections.Counter(
            (v.service_type, self.clusters.cluster_of(v.location))
            for v in self.vehicles
        )
        for v in self.vehicles:
            if not v.is_empty or now - v.time < self.cfg.rebalance_idle:
                continue
            mode = (
                Mode.EXCLUSIVE
                if v.service_type is ServiceType.EXCLUSIVE
                else Mode.SHARED
            )
            here = self.clusters.cluster_of(v.location)
            stay = self.rates.rate(mode, here, interval) * remaining
            best = None
            for k in range(self.clusters.K):
                if k == here:
                    continue
                if present[(v.service_type, k)] >= self._capacity(mode, k, interval):
                    continue
                rep = self.clusters.representatives[k]
                try:
                    tt = self.net.travel_time(v.location, rep)
                except NoPathError:
                    continue
                cost = self.estimator.route_cost(self.net.distance(v.location, rep))
                earned = self.rates.rate(mode, k, interval) * max(0.0, remaining - tt)
                gain = earned - cost - stay
                if gain > 0 and (best is None or gain > best[0]):
                    best = (gain, k, rep, tt, cost)
            if best is None:
                continue
            _, k, rep, tt, cost = best
            present[(v.service_type, here)] -= 1
            present[(v.service_type, k)] += 1
            self.rebalancing_cost += cost
            for tally in self._buckets(now)[1:]:
                tally.operational_cost += cost
            logger.debug("Rebalancing vehicle %d to cluster %d.", v.id, k)
            v.location, v.time = rep, now + tt

    def _capacity(self, mode, cluster, interval):
        cell = self.scenario.steady_state.cell(cluster, interval)
        if cell is None:
            return 0
        return math.ceil(cell.L_e if mode is Mode.EXCLUSIVE else cell.L_s)

    # pricing helpers

    def _outside(self, request):
        price = self.cfg.outside_price_factor * static_price(
            self.cfg.static_params, request
        )
        return ModeOffer(
            price=price, wait=self.cfg.outside_wait, travel=request.direct_time
        )

    def _static_menu(self, request):
        p_e = static_price(self.cfg.static_params, request)
        od = self.estimator.od_of(request.origin, request.dest)
        return p_e, static_shared_price(self.cfg.static_params, p_e, od)

    def _map(self, fn, items):
        if self._executor is None:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))

    # sequential policies

    def _handle_spd(self, request, now):
        decision = spd_handle_request(
            self.pricing, request, self.vehicles, now, self._outside(request)
        )
        if not decision.offered:
            self._decline(request, offered=False)
            return
        self._note_quote(decision.quote.p_e)
        mode = sample_choice(decision.quote.probabilities, self.choice_rng)
        if mode is Mode.OUTSIDE:
            self._decline(request)
            return
        choice = decision.exclusive if mode is Mode.EXCLUSIVE else decision.shared
        self._commit(
            [Acceptance(request, mode, choice.offer.price, choice.vehicle_id)], now
        )

    def _nearest(self, request, service, now):
        best = None
        for v in self.vehicles:
            if v.service_type is not service:
                continue
            ins = feasible_vehicle_request(
                self.net, v, request, now, self.cfg.per_mile_cost
            )
            if ins is None:
                continue
            key = (ins.pickup_time(request.id), v.id)
            if best is None or key < best[0]:
                best = (key, ins)
        return None if best is None else best[1]

    def _handle_static(self, request, now):
        ve = self._nearest(request, ServiceType.EXCLUSIVE, now)
        vs = self._nearest(request, ServiceType.SHARED, now)
        if ve is None and vs is None:
            self._decline(request, offered=False)
            return
        params = self.cfg.choice_params
        p_e, p_s = self._static_menu(request)
        u = {}
        for mode, ins, price in ((Mode.EXCLUSIVE, ve, p_e), (Mode.SHARED, vs, p_s)):
            if ins is None:
                u[mode] = -math.inf
                continue
            offer = ModeOffer(price, ins.wait(request), ins.travel(request))
            u[mode] = utility(params, offer, mode)
        if ve is not None:
            self._note_quote(p_e)
        u_o = utility(params, self._outside(request), Mode.OUTSIDE)
        probs = choice_probabilities(u[Mode.EXCLUSIVE], u[Mode.SHARED], u_o)
        mode = sample_choice(probs, self.choice_rng)
        if mode is Mode.OUTSIDE:
            self._decline(request)
            return
        ins = ve if mode is Mode.EXCLUSIVE else vs
        price = p_e if mode is Mode.EXCLUSIVE else p_s
        self._commit([Acceptance(request, mode, price, ins.vehicle_id)], now)

    def _run_sequential(self):
        handle = self._handle_spd if self.policy is Policy.SPD else self._handle_static
        for request in self.scenario.requests:
            now = request.request_time
            self._arrive(request)
            self._advance(now)
            if self.rebalance:
                self._rebalance(now)
            handle(request, now)

    # batched policies

    def _value(self, matching):
        requests = [self.requests[rid] for rid in matching.requests]
        outsides = [self._outside(r) for r in requests]
        params = self.cfg.choice_params
        if self.policy is Policy.BPD:
            return price_matching(
                matching,
                requests,
                params,
                outsides,
                step=self.cfg.brute_force_step,
                price_floor=self.cfg.price_floor,
            )
        menus = [self._static_menu(r) for r in requests]
        return value_fixed_prices(matching, requests, params, outsides, menus)

    def _close_batch(self, pool, now, batch):
        """ Match, price and dispatch the pooled requests.

            :returns: The requests carried over to the next batch.
            :rtype: list
        """
        pm = self.cfg.per_mile_cost
        rv = build_rv_graph(self.net, pool, self.vehicles, now, pm)
        trips = build_trips(self.net, rv, pool, self.vehicles, now, pm)
        matchings = build_esv_graph(
            rv, trips, pool, self.vehicles, self.estimator, now, self.cfg.esv_candidates
        )
        for m, value in zip(matchings, self._map(self._value, matchings)):
            m.u, m.gamma = value.u, value.gamma
            m.menus, m.choices = value.menus, value.choices
        problem = AssignmentProblem.from_matchings(matchings, self.cfg.c_p)
        solution = solve_assignment(problem)
        if self.debug is not None:
            self.debug.rv.extend(rv_rows(rv, batch))
            self.debug.esv.extend(esv_rows(matchings, batch))
            self.debug.ilp.append(
                {
                    "batch": batch,
                    "time": now,
                    "problem": problem.to_dict(),
                    "solution": solution.to_dict(),
                }
            )

        offers = [
            (self.requests[rid], m, i)
            for m in matchings
            if m.id in solution.selected
            for i, rid in enumerate(m.requests)
        ]
        offers.sort(key=lambda o: (o[0].request_time, o[0].id))
        acceptances = []
        for r, m, i in offers:
            p_e, p_s = m.menus[i]
            self._note_quote(p_e)
            mode = sample_choice(m.choices[i], self.choice_rng)
            if mode is Mode.OUTSIDE:
                self._decline(r)
                continue
            if mode is Mode.EXCLUSIVE:
                acceptances.append(Acceptance(r, mode, p_e, m.exclusive[i].vehicle_id))
            else:
                acceptances.append(Acceptance(r, mode, p_s, m.shared.vehicle_id))
        self._commit(acceptances, now)

        offered = {r.id for r, _, _ in offers}
        carried = []
        for r in pool:
            if r.id in offered:
                continue
            if now + self.cfg.batch_window < r.latest_pickup:
                carried.append(r)
            else:
                self._decline(r, offered=False)
        logger.debug(
            "Batch %d at %.0f: %d requests, %d matchings, %d offered, %d carried",
            batch,
            now,
            len(pool),
            len(matchings),
            len(offered),
            len(carried),
        )
        return carried

    def _run_batched(self):
        requests = self.scenario.requests
        window = self.cfg.batch_window
        i, pool, batch = 0, [], 0
        while i < len(requests) or pool:
            now = (batch + 1) * window
            while i < len(requests) and requests[i].request_time < now:
                self._arrive(requests[i])
                pool.append(requests[i])
                i += 1
            self._advance(now)
            if self.rebalance:
                self._rebalance(now)
            if pool:
                pool = self._close_batch(pool, now, batch)
            batch += 1

    # running

    def run(self):
        """ Simulate the whole demand and return the report.

            :rtype: SimReport
        """
        logger.info(
            "Simulating %s: %d requests, %d vehicles",
            self.policy.value,
            len(self.scenario.requests),
            len(self.vehicles),
        )
        if self.cfg.workers > 1 and self.policy.batched:
            self._executor = ThreadPoolExecutor(max_workers=self.cfg.workers)
        try:
            if self.policy.batched:
                self._run_batched()
            else:
                self._run_sequential()
            self._advance(math.inf)
        finally:
            if self._executor is not None:
                self._executor.shutdown()
                self._executor = None
        report = self._report()
        logger.info(
            "%s: profit %.2f, served %d of %d",
            self.policy.value,
            report.total_profit,
            report.served,
            report.requests_total,
        )
        return report

    def _shared_records(self):
        records, realized = [], []
        for rid in sorted(self.open_records):
            rec = self.open_records[rid]
            if rec.joiner_class is None:
                records.append(SharedTripRecord(rec.od, rec.solo_cost))
                realized.append(RealizedCost(rec.od, rec.solo_cost, key=rid))
                continue
            records.append(
                SharedTripRecord(
                    rec.od,
                    rec.solo_cost,
                    joiner_class=rec.joiner_class,
                    joined_cost=rec.solo_cost + rec.added,
                    joiner_price=rec.joiner_price,
                )
            )
            realized.append(
                RealizedCost(
                    rec.od, rec.solo_cost + rec.added - rec.joiner_price, key=rid
                )
            )
        return records, realized

    def _report(self):
        t = self.totals
        self.modes[Mode.SHARED].pooled = len(self.pooled)
        operational = t.operational_cost + self.rebalancing_cost
        waits = self.modes[Mode.EXCLUSIVE].waits + self.modes[Mode.SHARED].waits
        static_prices = [
            static_price(self.cfg.static_params, r) for r in self.scenario.requests
        ]
        records, realized = self._shared_records()
        outcomes = [
            (od, rid in self.pooled) for rid, od in sorted(self.shared_riders.items())
        ]
        period = self.scenario.steady_state.period_s
        series = []
        for k in sorted(self.periods):
            row = {"period": k, "start_s": k * period}
            row.update(self.periods[k].as_dict())
            series.append(row)
        per_day = []
        for d in sorted(self.days):
            row = {"day": d}
            row.update(self.days[d].as_dict())
            per_day.append(row)
        return SimReport(
            policy=self.policy.value,
            total_profit=t.fares - operational - t.penalties,
            fares=t.fares,
            operational_cost=operational,
            rebalancing_cost=self.rebalancing_cost,
            penalties=t.penalties,
            requests_total=t.requests,
            served=t.served,
            lost=t.lost,
            declined=t.declined,
            no_offer=self.no_offer,
            market_share=t.served / t.requests if t.requests else 0.0,
            mean_price=t.fares / t.served if t.served else 0.0,
            mean_wait=float(np.mean(waits)) if waits else 0.0,
            mean_quoted_exclusive_price=(
                float(np.mean(self.quoted_exclusive)) if self.quoted_exclusive else 0.0
            ),
            mean_static_price=float(np.mean(static_prices)) if static_prices else 0.0,
            violations=self.violations,
            per_mode={
                "exclusive": self.modes[Mode.EXCLUSIVE].as_dict(),
                "shared": self.modes[Mode.SHARED].as_dict(),
            },
            per_day=per_day,
            series=series,
            theta=estimate_theta_table(outcomes),
            alpha=estimate_alpha_table(records),
            metadata={
                "seed": self.cfg.seed,
                "rebalance": self.rebalance,
                "retrospective_multiplier": self.cfg.retrospective_multiplier,
                "price_multiplier": self.cfg.choice_params.price_multiplier,
                "market_share_denominator": "all requests",
                "n_exclusive": sum(
                    v.service_type is ServiceType.EXCLUSIVE for v in self.vehicles
                ),
                "n_shared": sum(
                    v.service_type is ServiceType.SHARED for v in self.vehicles
                ),
            },
            realized_costs=realized,
            shared_trips=records,
            debug=self.debug,
        )


def run_simulation(cfg, policy, scenario=None, record_debug=False):
    """ Run one policy on the inputs named by a configuration.

        :param RunConfig cfg:
            The run configuration.
        :type policy:
            Policy or str
        :param policy:
            The policy, or its name.
        :type scenario:
            None or Scenario
        :param scenario:
            Preloaded inputs. Loaded from the configuration if None.
        :param bool record_debug:
            Whether the report keeps per-batch graph and program dumps.

        :rtype: SimReport
    """
    policy = Policy(policy)
    if scenario is None:
        scenario = Scenario.from_config(cfg)
    sim_cfg = SimConfig.from_config(cfg, theta_table=scenario.theta_table)
    return Simulator(scenario, sim_cfg, policy, record_debug=record_debug).run()
