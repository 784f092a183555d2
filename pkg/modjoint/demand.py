# -*- coding: utf-8 -*-

""" Demand files and synthetic demand.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DemandError, NetworkError, NoPathError, ParameterError
from .matching import Request

logger = logging.getLogger(__name__)

DEMAND_COLUMNS = ["request_time_s", "origin_node", "dest_node"]
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class DemandRecord:
    """ One row of a demand file. `line` is its 1-based line number. """

    request_time: float
    origin: int
    dest: int
    line: int = None


def _parse_row(values, line):
    time_s, origin, dest = values
    try:
        t = float(time_s)
    except ValueError:
        raise DemandError("invalid request time {!r}".format(time_s), line=line)
    if not math.isfinite(t) or t < 0:
        raise DemandError("request time must be a finite nonnegative number", line=line)
    nodes = []
    for label, value in (("origin", origin), ("destination", dest)):
        try:
            nodes.append(int(value))
        except ValueError:
            raise DemandError("invalid {} node {!r}".format(label, value), line=line)
    return DemandRecord(t, nodes[0], nodes[1], line)


def read_demand_csv(path):
    """ Read a demand file with header `request_time_s,origin_node,dest_node`.

        :rtype: list
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DemandError("demand file {} is empty".format(path), line=1)
    except (OSError, pd.errors.ParserError) as err:
        raise DemandError("could not read demand file {}: {}".format(path, err))
    if list(df.columns) != DEMAND_COLUMNS:
        raise DemandError(
            "demand file must have header {!r}".format(",".join(DEMAND_COLUMNS)),
            line=1,
        )
    return [
        _parse_row(tuple(v.strip() for v in row), line)
        for line, row in enumerate(df.itertuples(index=False, name=None), start=2)
    ]


def write_demand_csv(records, path):
    pd.DataFrame(
        [(r.request_time, r.origin, r.dest) for r in records], columns=DEMAND_COLUMNS
    ).to_csv(path, index=False)


def validate_demand(records, net):
    """ Check that every node in the demand exists and that the nodes used
        are mutually reachable.
    """
    for r in records:
        for node in (r.origin, r.dest):
            if not net.has_node(node):
                raise DemandError("unknown node {}".format(node), line=r.line)
    nodes = {r.origin for r in records} | {r.dest for r in records}
    net.check_strongly_connected(nodes)


def build_requests(records, net, max_wait, max_delay):
    """ Turn demand records into requests, ordered by request time with ids
        assigned in that order.

        :rtype: list
    """
    validate_demand(records, net)
    ordered = sorted(records, key=lambda r: (r.request_time, r.line or 0))
    requests = []
    for i, rec in enumerate(ordered):
        try:
            requests.append(
                Request.create(
                    net, i, rec.origin, rec.dest, rec.request_time, max_wait, max_delay
                )
            )
        except (NoPathError, NetworkError) as err:
            raise DemandError(str(err), line=rec.line)
    return requests


def load_demand(path, net, max_wait, max_delay):
    """ Load and validate a demand file.

        :rtype: list
    """
    records = read_demand_csv(path)
    requests = build_requests(records, net, max_wait, max_delay)
    logger.info("Loaded %d requests from %s", len(requests), path)
    return requests


def daily_profile(t):
    """ The relative demand intensity at time t: a base level with morning
        and evening peaks.
    """
    h = (np.asarray(t, dtype=float) % SECONDS_PER_DAY) / 3600.0
    return 0.4 + np.exp(-(((h - 8.0) / 1.5) ** 2)) + np.exp(-(((h - 18.0) / 2.0) ** 2))


def _profile_mean():
    grid = np.linspace(0.0, SECONDS_PER_DAY, 2881)
    return float(np.mean(daily_profile(grid)))


def _pair_weights(clusters, nodes, hotspot_cluster, hotspot_weight):
    """ The share of demand of each (origin cluster, destination cluster)
        pair. Without a hotspot origins and destinations are uniform over
        distinct nodes.
    """
    K, N = clusters.K, len(nodes)
    sizes = np.array([len(clusters.members(k)) for k in range(K)], dtype=float)
    origin = sizes / N
    if hotspot_cluster is not None and hotspot_weight > 0:
        hot = np.zeros(K)
        hot[hotspot_cluster] = 1.0
        origin = (1.0 - hotspot_weight) * origin + hotspot_weight * hot
    dest = (sizes[None, :] - np.eye(K)) / (N - 1)
    return origin[:, None] * dest


def _interval_profile(t0, t1):
    return float(np.mean(daily_profile(np.linspace(t0, t1, 21))))


def generate_demand(
    net,
    clusters,
    requests_per_day,
    horizon_s,
    rng,
    hotspot_cluster=None,
    hotspot_weight=0.0,
    interval_s=1200.0,
):
    """ Sample demand from a time-inhomogeneous Poisson process per
        (origin cluster, destination cluster) pair.

        Each pair's rate follows the daily profile, held constant over
        intervals of `interval_s`. Within an interval arrival times are
        uniform, the origin is a uniform member of the origin cluster and the
        destination a uniform member of the destination cluster other than
        the origin. With probability `hotspot_weight` a request originates in
        `hotspot_cluster`.

        :param RoadNetwork net:
            The network.
        :param ClusterMap clusters:
            The clustering of the network nodes.
        :param int requests_per_day:
            The expected number of requests per day.
        :param float horizon_s:
            The length of the sampled period.
        :param numpy.random.Generator rng:
            The random source.

        :rtype: list
    """
    if requests_per_day < 0 or horizon_s <= 0 or interval_s <= 0:
        raise ParameterError(
            "Demand rate must be nonnegative and horizon and interval positive."
        )
    nodes = net.nodes
    if len(nodes) < 2:
        raise ParameterError("Synthetic demand needs at least two nodes.")
    if not 0.0 <= hotspot_weight <= 1.0:
        raise ParameterError("The hotspot weight must lie in [0, 1].")
    if hotspot_cluster is not None and not 0 <= hotspot_cluster < clusters.K:
        raise ParameterError(
            "Hotspot cluster {} is not a cluster id.".format(hotspot_cluster)
        )
    weights = _pair_weights(clusters, nodes, hotspot_cluster, hotspot_weight)
    members = [np.array(clusters.members(k)) for k in range(clusters.K)]
    scale = requests_per_day / SECONDS_PER_DAY / _profile_mean()

    arrivals = []
    for t0 in np.arange(0.0, horizon_s, interval_s):
        t1 = min(t0 + interval_s, horizon_s)
        counts = rng.poisson(weights * scale * _interval_profile(t0, t1) * (t1 - t0))
        for (a, b), n in np.ndenumerate(counts):
            if n == 0:
                continue
            times = rng.uniform(t0, t1, size=n)
            picks = rng.integers(0, len(members[a]), size=n)
            if a == b:
                offsets = rng.integers(1, len(members[a]), size=n)
                targets = (picks + offsets) % len(members[a])
            else:
                targets = rng.integers(0, len(members[b]), size=n)
            arrivals.extend(zip(times, members[a][picks], members[b][targets]))

    arrivals.sort(key=lambda arrival: arrival[0])
    records = [
        DemandRecord(float(round(t, 3)), int(o), int(d), line=i + 2)
        for i, (t, o, d) in enumerate(arrivals)
    ]
    logger.info("Generated %d synthetic requests", len(records))
    return records
