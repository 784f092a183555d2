# -*- coding: utf-8 -*-

""" Road network, travel-time queries and spatial clustering.
"""

import logging
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Dict, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from sklearn.cluster import KMeans

from .errors import NetworkError, NoPathError, ParameterError

logger = logging.getLogger(__name__)

METERS_PER_MILE = 1609.344

NODE_COLUMNS = ["node_id", "x", "y"]
EDGE_COLUMNS = ["src", "dst", "travel_time_s", "length_m"]


class RoadNetwork:
    """ A directed road network with static travel times.

        :param dict nodes:
            A mapping from node id to (x, y) coordinates.
        :param list edges:
            A list of (src, dst, travel_time_s, length_m) tuples.

        The network is immutable after construction. Shortest-path queries
        are computed single-source on demand and memoized; the memo is
        guarded by a lock so that queries may be issued from several threads.
    """

    def __init__(self, nodes, edges):
        self._coords = {int(n): (float(x), float(y)) for n, (x, y) in nodes.items()}
        graph = nx.DiGraph()
        for n in sorted(self._coords):
            graph.add_node(n)
        for src, dst, travel_time, length in edges:
            src, dst = int(src), int(dst)
            if src not in self._coords or dst not in self._coords:
                raise NetworkError(
                    "Edge {} -> {} references an unknown node.".format(src, dst)
                )
            if not travel_time > 0:
                raise NetworkError(
                    "Edge {} -> {} must have a positive travel time.".format(src, dst)
                )
            if not length >= 0:
                raise NetworkError(
                    "Edge {} -> {} must have a nonnegative length.".format(src, dst)
                )
            graph.add_edge(
                src, dst, travel_time=float(travel_time), length=float(length)
            )
        self._graph = graph
        self._lock = threading.Lock()
        self._memo = {}

    @classmethod
    def from_csv(cls, nodes_path, edges_path):
        """ Load a network from a node file and an edge list file.

            :param str nodes_path:
                CSV file with header `node_id,x,y`.
            :param str edges_path:
                CSV file with header `src,dst,travel_time_s,length_m`.

            :rtype: RoadNetwork
        """
        nodes_df = _read_csv(nodes_path, NODE_COLUMNS)
        edges_df = _read_csv(edges_path, EDGE_COLUMNS)
        nodes = {
            int(row.node_id): (float(row.x), float(row.y))
            for row in nodes_df.itertuples(index=False)
        }
        if len(nodes) != len(nodes_df):
            raise NetworkError(
                "Node file {} has duplicate node ids.".format(nodes_path)
            )
        edges = [
            (int(r.src), int(r.dst), float(r.travel_time_s), float(r.length_m))
            for r in edges_df.itertuples(index=False)
        ]
        return cls(nodes, edges)

    def to_csv(self, nodes_path, edges_path):
        """ Write the network as a node file and an edge list file. """
        pd.DataFrame(
            [(n, x, y) for n, (x, y) in sorted(self._coords.items())],
            columns=NODE_COLUMNS,
        ).to_csv(nodes_path, index=False)
        pd.DataFrame(
            [
                (u, v, d["travel_time"], d["length"])
                for u, v, d in sorted(self._graph.edges(data=True))
            ],
            columns=EDGE_COLUMNS,
        ).to_csv(edges_path, index=False)

    @property
    def nodes(self):
        return sorted(self._coords)

    @property
    def edge_count(self):
        return self._graph.number_of_edges()

    def has_node(self, node):
        return node in self._coords

    def coords(self, node):
        return self._coords[node]

    def coordinate_array(self):
        """ Return the node coordinates as an (n, 2) array in node order. """
        return np.array([self._coords[n] for n in self.nodes], dtype=float)

    def _single_source(self, origin):
        with self._lock:
            cached = self._memo.get(origin)
        if cached is not None:
            return cached
        times, paths = nx.single_source_dijkstra(
            self._graph, origin, weight="travel_time"
        )
        lengths = {}
        for dest, path in paths.items():
            lengths[dest] = sum(
                self._graph[u][v]["length"] for u, v in zip(path[:-1], path[1:])
            )
        cached = (times, lengths)
        with self._lock:
            self._memo.setdefault(origin, cached)
        return cached

    def _check_nodes(self, origin, dest):
        for node in (origin, dest):
            if node not in self._coords:
                raise NetworkError("Unknown node {!r}.".format(node))

    def travel_time(self, origin, dest):
        """ Return the minimum travel time in seconds from origin to dest. """
        self._check_nodes(origin, dest)
        times, _ = self._single_source(origin)
        if dest not in times:
            raise NoPathError("No path from node {} to node {}.".format(origin, dest))
        return times[dest]

    def distance(self, origin, dest):
        """ Return the length in meters of the minimum-travel-time path. """
        self._check_nodes(origin, dest)
        _, lengths = self._single_source(origin)
        if dest not in lengths:
            raise NoPathError("No path from node {} to node {}.".format(origin, dest))
        return lengths[dest]

    def check_strongly_connected(self, nodes):
        """ Raise a NetworkError unless every pair of the given nodes is
            mutually reachable.
        """
        nodes = sorted(set(nodes))
        if not nodes:
            return
        root = nodes[0]
        forward = nx.descendants(self._graph, root) | {root}
        backward = nx.ancestors(self._graph, root) | {root}
        for node in nodes:
            if node not in forward or node not in backward:
                raise NetworkError(
                    "Node {} is not mutually reachable with node {}.".format(
                        node, root
                    )
                )


def _read_csv(path, columns):
    try:
        df = pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise NetworkError("Could not read {}: {}".format(path, err))
    if list(df.columns) != columns:
        raise NetworkError(
            "File {} must have header {!r}.".format(path, ",".join(columns))
        )
    return df


def shortest_travel_time(net, origin, dest):
    """ Return the minimum travel time in seconds from origin to dest. """
    return net.travel_time(origin, dest)


def shortest_distance(net, origin, dest):
    """ Return the length in meters of the minimum-travel-time path. """
    return net.distance(origin, dest)


def grid_network(rows, cols, spacing_m=400.0, speed_mps=8.0):
    """ Build a bidirectional grid network.

        Node ids run row by row from 0; coordinates are in meters.

        :rtype: RoadNetwork
    """
    if rows < 1 or cols < 1:
        raise ParameterError("A grid network needs at least one row and column.")
    nodes = {}
    for r in range(rows):
        for c in range(cols):
            nodes[r * cols + c] = (c * spacing_m, r * spacing_m)
    travel_time = spacing_m / speed_mps
    edges = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                edges.append((n, n + 1, travel_time, spacing_m))
                edges.append((n + 1, n, travel_time, spacing_m))
            if r + 1 < rows:
                edges.append((n, n + cols, travel_time, spacing_m))
                edges.append((n + cols, n, travel_time, spacing_m))
    return RoadNetwork(nodes, edges)


@dataclass(frozen=True)
class ClusterMap:
    """ A partition of the network nodes into K spatial clusters.

        * `assignment` maps node id to cluster id.
        * `centroids` maps cluster id to (x, y).
        * `representatives` maps cluster id to the node nearest its centroid.
        * `travel_times` is the K x K matrix of travel times between
          representatives (inf where unreachable).
    """

    K: int
    assignment: Dict[int, int]
    centroids: Dict[int, Tuple[float, float]]
    representatives: Dict[int, int] = field(default_factory=dict)
    travel_times: np.ndarray = field(default=None, compare=False)

    def cluster_of(self, node):
        return self.assignment[node]

    def members(self, cluster):
        return sorted(n for n, k in self.assignment.items() if k == cluster)

    def cluster_travel_time(self, k1, k2):
        return float(self.travel_times[k1, k2])


def kmeans_cluster(net, K, seed=0, max_iter=100):
    """ Cluster the network nodes by their coordinates.

        Uses k-means++ seeding followed by Lloyd iterations until no
        assignment changes or `max_iter` iterations have run. Cluster ids are
        relabelled so that clusters are numbered in order of their smallest
        member node id.

        :rtype: ClusterMap
    """
    nodes = net.nodes
    if not isinstance(K, (int, np.integer)) or K < 1 or K > len(nodes):
        raise ParameterError(
            "K must be between 1 and the node count {} (got {!r}).".format(
                len(nodes), K
            )
        )
    points = net.coordinate_array()
    km = KMeans(
        n_clusters=K,
        init="k-means++",
        n_init=1,
        max_iter=max_iter,
        tol=0.0,
        random_state=seed,
        algorithm="lloyd",
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        labels = km.fit_predict(points)
    centers = km.cluster_centers_

    # relabel by smallest member so the ids do not depend on sklearn internals
    first_member = {}
    for node, label in zip(nodes, labels):
        first_member.setdefault(int(label), node)
    if len(first_member) != K:
        raise ParameterError(
            "k-means produced {} nonempty clusters instead of {}; node coordinates"
            " may contain duplicates.".format(len(first_member), K)
        )
    order = sorted(first_member, key=first_member.get)
    relabel = {old: new for new, old in enumerate(order)}
    assignment = {node: relabel[int(label)] for node, label in zip(nodes, labels)}
    centroids = {relabel[old]: tuple(map(float, centers[old])) for old in order}

    representatives = {}
    for k in range(K):
        cx, cy = centroids[k]
        members = [n for n in nodes if assignment[n] == k]

        def offset(n):
            x, y = net.coords(n)
            return ((x - cx) ** 2 + (y - cy) ** 2, n)

        representatives[k] = min(members, key=offset)
    travel_times = np.full((K, K), math.inf)
    for k1 in range(K):
        for k2 in range(K):
            try:
                travel_times[k1, k2] = net.travel_time(
                    representatives[k1], representatives[k2]
                )
            except NoPathError:
                pass
    logger.debug("Clustered %d nodes into %d clusters.", len(nodes), K)
    return ClusterMap(
        K=K,
        assignment=assignment,
        centroids=centroids,
        representatives=representatives,
        travel_times=travel_times,
    )
