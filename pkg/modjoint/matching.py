# -*- coding: utf-8 -*-

""" Feasibility checks and shareability graphs for a mixed fleet of
    exclusive (capacity 1) and shared (capacity 2) vehicles.
"""

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import pandas as pd

from .errors import NoPathError, ParameterError
from .network import METERS_PER_MILE

logger = logging.getLogger(__name__)

EPS = 1e-9


class ServiceType(enum.Enum):
    """ The service a driver has chosen to provide. """

    EXCLUSIVE = "exclusive"
    SHARED = "shared"

    @property
    def capacity(self):
        return 1 if self is ServiceType.EXCLUSIVE else 2


class StopAction(enum.Enum):
    PICKUP = "pickup"
    DROPOFF = "dropoff"


@dataclass(frozen=True)
class Request:
    """ A trip request.

        `direct_time` and `direct_distance` are the shortest-path travel time
        and its length from origin to destination. `max_wait` bounds the
        pickup time and `max_delay` the arrival delay, both measured from the
        request time.
    """

    id: int
    origin: int
    dest: int
    request_time: float
    direct_time: float
    direct_distance: float
    max_wait: float
    max_delay: float

    def __post_init__(self):
        if self.max_wait <= 0 or self.max_delay <= 0:
            raise ParameterError("Maximum wait and delay must be positive.")

    @classmethod
    def create(cls, net, id, origin, dest, request_time, max_wait, max_delay):
        """ Build a request, looking up its direct route on the network.

            :rtype: Request
        """
        return cls(
            id=id,
            origin=origin,
            dest=dest,
            request_time=float(request_time),
            direct_time=net.travel_time(origin, dest),
            direct_distance=net.distance(origin, dest),
            max_wait=float(max_wait),
            max_delay=float(max_delay),
        )

    @property
    def latest_pickup(self):
        return self.request_time + self.max_wait

    @property
    def latest_dropoff(self):
        return self.request_time + self.direct_time + self.max_delay


@dataclass(frozen=True)
class Stop:
    """ A scheduled stop. `time` is the planned arrival, None until planned. """

    node: int
    action: StopAction
    request_id: int
    time: Optional[float] = None


@dataclass
class VehicleState:
    """ A vehicle and its pending schedule.

        The vehicle is anchored at `location`, where it executed its last
        stop (or became idle) at `time`. `stops` holds the pending stops in
        order and `requests` every request onboard or committed.
    """

    id: int
    service_type: ServiceType
    location: int
    time: float = 0.0
    onboard: List[int] = field(default_factory=list)
    stops: List[Stop] = field(default_factory=list)
    requests: Dict[int, Request] = field(default_factory=dict)

    @property
    def capacity(self):
        return self.service_type.capacity

    @property
    def is_empty(self):
        return not self.onboard and not self.stops

    def advance_to(self, now):
        """ Execute every pending stop planned at or before `now`.

            :returns: The executed stops.
            :rtype: list
        """
        done = []
        while self.stops and self.stops[0].time <= now + EPS:
            stop = self.stops.pop(0)
            self.location = stop.node
            self.time = stop.time
            if stop.action is StopAction.PICKUP:
                self.onboard.append(stop.request_id)
            else:
                self.onboard.remove(stop.request_id)
                del self.requests[stop.request_id]
            done.append(stop)
        return done

    def commit(self, insertion, requests):
        """ Replace the schedule with an accepted insertion. """
        for r in requests:
            self.requests[r.id] = r
        self.stops = list(insertion.stops)
        self.time = insertion.start_time


@dataclass(frozen=True)
class Insertion:
    """ A feasible schedule for a vehicle after inserting new requests. """

    vehicle_id: int
    stops: Tuple[Stop, ...]
    start_time: float
    meters: float
    marginal_meters: float
    cost: float
    marginal_cost: float
    pickup_meters: float

    def pickup_time(self, request_id):
        return self._time_of(request_id, StopAction.PICKUP)

    def dropoff_time(self, request_id):
        return self._time_of(request_id, StopAction.DROPOFF)

    def _time_of(self, request_id, action):
        for stop in self.stops:
            if stop.request_id == request_id and stop.action is action:
                return stop.time
        raise KeyError(request_id)

    def wait(self, request):
        return max(0.0, self.pickup_time(request.id) - request.request_time)

    def travel(self, request):
        return self.dropoff_time(request.id) - self.pickup_time(request.id)


def _plan(net, location, start_time, onboard, capacity, sequence, requests):
    """ Time a stop sequence, returning (planned stops, meters) or None if
        any wait, delay or capacity limit is violated.
    """
    node, t, load, meters = location, start_time, onboard, 0.0
    planned = []
    try:
        for stop in sequence:
            t += net.travel_time(node, stop.node)
            meters += net.distance(node, stop.node)
            node = stop.node
            r = requests[stop.request_id]
            if stop.action is StopAction.PICKUP:
                load += 1
                if load > capacity or t > r.latest_pickup + EPS:
                    return None
            else:
                load -= 1
                if t > r.latest_dropoff + EPS:
                    return None
            planned.append(Stop(stop.node, stop.action, stop.request_id, t))
    except NoPathError:
        return None
    return tuple(planned), meters


def _route_meters(net, location, stops):
    node, meters = location, 0.0
    for stop in stops:
        meters += net.distance(node, stop.node)
        node = stop.node
    return meters


def _interleavings(stops, new_requests):
    """ Yield every stop list that keeps the order of `stops` and places each
        new request's pickup before its dropoff.
    """
    if not new_requests:
        yield list(stops)
        return
    r, rest = new_requests[0], new_requests[1:]
    pickup = Stop(r.origin, StopAction.PICKUP, r.id)
    dropoff = Stop(r.dest, StopAction.DROPOFF, r.id)
    n = len(stops)
    for i in range(n + 1):
        for j in range(i + 1, n + 2):
            seq = list(stops)
            seq.insert(i, pickup)
            seq.insert(j, dropoff)
            yield from _interleavings(seq, rest)


def _start_time(vehicle, sequence, now):
    if vehicle.stops and sequence and sequence[0] is vehicle.stops[0]:
        return vehicle.time
    return max(vehicle.time, now)


def insert_requests(net, vehicle, new_requests, now, per_mile_cost):
    """ Insert requests into a vehicle's schedule at minimum operational cost.

        Every ordering that keeps the existing stops in order is tried. The
        vehicle leaves its anchor at its anchor time when its first pending
        stop is kept first, and no earlier than `now` otherwise.

        :param RoadNetwork net:
            The road network.
        :param VehicleState vehicle:
            The vehicle; it is not modified.
        :param list new_requests:
            The requests to insert.
        :param float now:
            The current time.
        :param float per_mile_cost:
            The operational cost per mile driven.

        :rtype: None or Insertion
    """
    for r in new_requests:
        try:
            reach = net.travel_time(vehicle.location, r.origin)
        except NoPathError:
            return None
        if vehicle.time + reach > r.latest_pickup + EPS:
            return None
    requests = dict(vehicle.requests)
    requests.update({r.id: r for r in new_requests})
    old_meters = _route_meters(net, vehicle.location, vehicle.stops)
    best = None
    for sequence in _interleavings(vehicle.stops, list(new_requests)):
        start = _start_time(vehicle, sequence, now)
        planned = _plan(
            net,
            vehicle.location,
            start,
            len(vehicle.onboard),
            vehicle.capacity,
            sequence,
            requests,
        )
        if planned is None:
            continue
        stops, meters = planned
        if best is None or meters < best[1] - EPS:
            best = (stops, meters, start)
    if best is None:
        return None
    stops, meters, start = best
    marginal = meters - old_meters
    pickup_meters = 0.0
    if vehicle.is_empty:
        pickup_meters = net.distance(vehicle.location, stops[0].node)
    return Insertion(
        vehicle_id=vehicle.id,
        stops=stops,
        start_time=start,
        meters=meters,
        marginal_meters=marginal,
        cost=per_mile_cost * meters / METERS_PER_MILE,
        marginal_cost=per_mile_cost * marginal / METERS_PER_MILE,
        pickup_meters=pickup_meters,
    )


def feasible_vehicle_request(net, vehicle, request, now, per_mile_cost):
    """ Return the cheapest feasible insertion of one request, or None. """
    return insert_requests(net, vehicle, [request], now, per_mile_cost)


def feasible_vehicle_requests(net, vehicle, r1, r2, now, per_mile_cost):
    """ Return the cheapest feasible joint insertion of two requests, or None.
    """
    if vehicle.capacity < 2:
        return None
    return insert_requests(net, vehicle, [r1, r2], now, per_mile_cost)


def validate_route(net, vehicle, stops, now):
    """ Re-time a stored schedule from the vehicle's anchor and check every
        wait, delay and capacity limit.

        :rtype: bool
    """
    requests = dict(vehicle.requests)
    for stop in stops:
        if stop.request_id not in requests:
            return False
    start = _start_time(vehicle, list(stops), now)
    return (
        _plan(
            net,
            vehicle.location,
            start,
            len(vehicle.onboard),
            vehicle.capacity,
            stops,
            requests,
        )
        is not None
    )


def best_pair_route(net, r1, r2):
    """ Serve two requests in a virtual capacity-2 vehicle that starts at
        r1's origin when both have been requested.

        Only orderings where both customers ride together are considered.

        :returns: (stops, meters) of the shortest feasible ordering, or None.
    """
    p1 = Stop(r1.origin, StopAction.PICKUP, r1.id)
    p2 = Stop(r2.origin, StopAction.PICKUP, r2.id)
    d1 = Stop(r1.dest, StopAction.DROPOFF, r1.id)
    d2 = Stop(r2.dest, StopAction.DROPOFF, r2.id)
    start = max(r1.request_time, r2.request_time)
    requests = {r1.id: r1, r2.id: r2}
    best = None
    for sequence in ([p1, p2, d1, d2], [p1, p2, d2, d1]):
        planned = _plan(net, r1.origin, start, 0, 2, sequence, requests)
        if planned is not None and (best is None or planned[1] < best[1] - EPS):
            best = planned
    return best


def feasible_pair(net, r1, r2):
    """ Return True if r1 and r2 can share a capacity-2 vehicle starting at
        r1's origin.
    """
    return best_pair_route(net, r1, r2) is not None


@dataclass
class RvGraph:
    """ The request-vehicle graph.

        `request_pairs` lists the shareable request pairs (low id first);
        `insertions` maps (request id, vehicle id) to the cheapest feasible
        Insertion.
    """

    request_pairs: List[Tuple[int, int]]
    insertions: Dict[Tuple[int, int], Insertion]

    def vehicles_for(self, request_id):
        return sorted(v for r, v in self.insertions if r == request_id)

    def edges(self):
        rr = [("rr", a, b) for a, b in self.request_pairs]
        rv = [("rv", r, v) for r, v in sorted(self.insertions)]
        return rr + rv


def build_rv_graph(net, requests, vehicles, now, per_mile_cost):
    """ Build the request-vehicle graph of a batch.

        :rtype: RvGraph
    """
    requests = sorted(requests, key=lambda r: r.id)
    vehicles = sorted(vehicles, key=lambda v: v.id)
    pairs = []
    for a, b in itertools.combinations(requests, 2):
        if feasible_pair(net, a, b) or feasible_pair(net, b, a):
            pairs.append((a.id, b.id))
    insertions = {}
    for r in requests:
        for v in vehicles:
            ins = feasible_vehicle_request(net, v, r, now, per_mile_cost)
            if ins is not None:
                insertions[(r.id, v.id)] = ins
    logger.debug(
        "RV graph: %d requests, %d vehicles, %d rr edges, %d rv edges",
        len(requests),
        len(vehicles),
        len(pairs),
        len(insertions),
    )
    return RvGraph(request_pairs=pairs, insertions=insertions)


def build_trips(net, rv, requests, vehicles, now, per_mile_cost):
    """ Return the two-request trips of the batch with the shared vehicles
        that can serve each of them.

        :returns:
            A mapping from (r1 id, r2 id) to a dict of vehicle id ->
            Insertion for the joint insertion.
        :rtype: dict
    """
    by_id = {r.id: r for r in requests}
    shared = sorted(
        (v for v in vehicles if v.service_type is ServiceType.SHARED),
        key=lambda v: v.id,
    )
    trips = {}
    for a, b in rv.request_pairs:
        served = {}
        for v in shared:
            if (a, v.id) not in rv.insertions or (b, v.id) not in rv.insertions:
                continue
            ins = feasible_vehicle_requests(
                net, v, by_id[a], by_id[b], now, per_mile_cost
            )
            if ins is not None:
                served[v.id] = ins
        if served:
            trips[(a, b)] = served
    return trips


@dataclass
class VehicleSlot:
    """ A vehicle placed in an ESV matching with its route and cost. """

    vehicle_id: int
    service_type: ServiceType
    insertion: Insertion
    cost: float


@dataclass
class EsvMatching:
    """ A candidate matching of one or two requests to vehicles.

        `exclusive` holds one optional slot per request. `solo_shared_costs`
        holds, for two-request matchings, the cost of serving each request
        alone in the shared vehicle. `u`, `menus`, `choices` and `gamma` are
        filled in by pricing.
    """

    requests: Tuple[int, ...]
    shared: Optional[VehicleSlot]
    exclusive: Tuple[Optional[VehicleSlot], ...]
    solo_shared_costs: Tuple[float, ...] = ()
    solo_shared_insertions: Tuple[Insertion, ...] = ()
    id: int = -1
    u: float = 0.0
    menus: tuple = ()
    choices: tuple = ()
    gamma: Dict[int, float] = field(default_factory=dict)

    @property
    def vehicle_ids(self):
        ids = [s.vehicle_id for s in self.exclusive if s is not None]
        if self.shared is not None:
            ids.append(self.shared.vehicle_id)
        return sorted(ids)

    def sort_key(self):
        return (
            len(self.requests),
            self.requests,
            -1 if self.shared is None else self.shared.vehicle_id,
            tuple(-1 if s is None else s.vehicle_id for s in self.exclusive),
        )


def _ranked_slots(rv, vehicles_by_id, request, service_type, cost_fn):
    slots = []
    for vid in rv.vehicles_for(request.id):
        v = vehicles_by_id[vid]
        if v.service_type is not service_type:
            continue
        ins = rv.insertions[(request.id, vid)]
        slots.append(VehicleSlot(vid, service_type, ins, cost_fn(v, ins)))
    slots.sort(key=lambda s: (s.cost, s.vehicle_id))
    return slots


def build_esv_graph(rv, trips, requests, vehicles, estimator, now, esv_candidates=1):
    """ Build the exclusive-sharing-vehicle matchings of a batch.

        A one-request matching pairs a request with its best exclusive and
        best shared vehicle (and, for `esv_candidates` > 1, the next-best
        ones). A two-request matching pairs a shareable trip with the
        cheapest shared vehicle that serves both and each request's best
        exclusive vehicle. Trips whose pooled cost exceeds the two solo
        shared costs are dropped. Matchings are returned in canonical order
        with ids assigned.

        :param TripCostEstimator estimator:
            Turns insertions into request-level costs.

        :rtype: list
    """
    by_id = {r.id: r for r in requests}
    vehicles_by_id = {v.id: v for v in vehicles}

    def exclusive_cost(r):
        return lambda v, ins: estimator.exclusive_cost(r, ins.marginal_cost, now)

    def shared_cost(r):
        return lambda v, ins: estimator.shared_cost(
            r,
            ins.marginal_cost,
            now,
            empty=v.is_empty,
            pickup_meters=ins.pickup_meters,
        )

    best_exclusive = {}
    matchings = []
    for r in sorted(requests, key=lambda r: r.id):
        ex = _ranked_slots(
            rv, vehicles_by_id, r, ServiceType.EXCLUSIVE, exclusive_cost(r)
        )
        sh = _ranked_slots(
            rv, vehicles_by_id, r, ServiceType.SHARED, shared_cost(r)
        )
        best_exclusive[r.id] = ex[0] if ex else None
        for rank in range(max(1, esv_candidates)):
            e = ex[rank] if rank < len(ex) else None
            s = sh[rank] if rank < len(sh) else None
            if e is None and s is None:
                break
            if rank > 0 and (e is None or s is None):
                break
            matchings.append(EsvMatching(requests=(r.id,), shared=s, exclusive=(e,)))

    for (a, b), served in sorted(trips.items()):
        ra, rb = by_id[a], by_id[b]
        slots = []
        for vid, ins in served.items():
            first = min(ins.stops, key=lambda s: s.time)
            last = max(ins.stops, key=lambda s: s.time)
            c_ss = estimator.pooled_cost(
                ins.marginal_meters,
                first.node,
                last.node,
                last.time - first.time,
                now,
            )
            slots.append(VehicleSlot(vid, ServiceType.SHARED, ins, c_ss))
        slots.sort(key=lambda s: (s.cost, s.vehicle_id))
        slot = slots[0]
        v = vehicles_by_id[slot.vehicle_id]
        solo = (rv.insertions[(a, v.id)], rv.insertions[(b, v.id)])
        solo_costs = (
            shared_cost(ra)(v, solo[0]),
            shared_cost(rb)(v, solo[1]),
        )
        if solo_costs[0] + solo_costs[1] - slot.cost < 0:
            logger.debug("Dropping trip %s: pooling saves nothing.", (a, b))
            continue
        matchings.append(
            EsvMatching(
                requests=(a, b),
                shared=slot,
                exclusive=(best_exclusive[a], best_exclusive[b]),
                solo_shared_costs=solo_costs,
                solo_shared_insertions=solo,
            )
        )

    matchings.sort(key=EsvMatching.sort_key)
    for i, m in enumerate(matchings):
        m.id = i
    return matchings


RV_COLUMNS = ["batch", "kind", "a", "b"]
ESV_COLUMNS = ["batch", "matching", "requests", "shared_vehicle", "exclusive", "u"]


def rv_rows(rv, batch=None):
    return [(batch,) + edge for edge in rv.edges()]


def esv_rows(matchings, batch=None):
    rows = []
    for m in matchings:
        rows.append(
            (
                batch,
                m.id,
                " ".join(str(r) for r in m.requests),
                "" if m.shared is None else m.shared.vehicle_id,
                " ".join("-" if s is None else str(s.vehicle_id) for s in m.exclusive),
                m.u,
            )
        )
    return rows


def write_rows(rows, columns, path):
    """ Write debug rows (see `rv_rows` and `esv_rows`) as CSV. """
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
