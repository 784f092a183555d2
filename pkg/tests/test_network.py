# -*- coding: utf-8 -*-

""" Tests for modjoint.network. """

import math

import pytest

from modjoint.errors import NetworkError, NoPathError, ParameterError
from modjoint.network import (
    RoadNetwork,
    grid_network,
    kmeans_cluster,
    shortest_distance,
    shortest_travel_time,
)


class TestRoadNetwork:
    def test_from_csv(self, small_net):
        assert small_net.nodes == [0, 1, 2, 3, 4]
        assert small_net.edge_count == 10
        assert small_net.coords(4) == (500.0, 400.0)

    def test_travel_time_takes_fastest_route(self, small_net):
        assert small_net.travel_time(0, 4) == 90.0
        assert small_net.travel_time(4, 0) == 90.0
        assert small_net.travel_time(0, 1) == 50.0
        assert small_net.travel_time(2, 2) == 0.0

    def test_distance_follows_fastest_route(self, small_net):
        assert small_net.distance(0, 4) == 750.0
        assert small_net.distance(1, 3) == 650.0
        assert small_net.distance(3, 3) == 0.0

    def test_unknown_node(self, small_net):
        with pytest.raises(NetworkError) as exc_info:
            small_net.travel_time(0, 9)
        assert str(exc_info.value) == "Unknown node 9."

    def test_no_path(self):
        net = RoadNetwork({0: (0, 0), 1: (1, 0)}, [(0, 1, 10.0, 100.0)])
        assert net.travel_time(0, 1) == 10.0
        with pytest.raises(NoPathError):
            net.travel_time(1, 0)
        with pytest.raises(NetworkError):
            net.check_strongly_connected([0, 1])

    def test_strongly_connected(self, small_net):
        small_net.check_strongly_connected(small_net.nodes)
        small_net.check_strongly_connected([])

    def test_edge_to_unknown_node(self):
        with pytest.raises(NetworkError):
            RoadNetwork({0: (0, 0)}, [(0, 1, 10.0, 100.0)])

    def test_nonpositive_travel_time(self):
        with pytest.raises(NetworkError):
            RoadNetwork({0: (0, 0), 1: (1, 0)}, [(0, 1, 0.0, 100.0)])

    def test_bad_header(self, tmp_path, fixture_files):
        nodes = tmp_path / "nodes.csv"
        nodes.write_text("id,x,y\n0,0,0\n")
        with pytest.raises(NetworkError) as exc_info:
            RoadNetwork.from_csv(str(nodes), str(fixture_files / "edges.csv"))
        assert "must have header 'node_id,x,y'" in str(exc_info.value)

    def test_csv_round_trip(self, small_net, tmp_path):
        nodes, edges = tmp_path / "n.csv", tmp_path / "e.csv"
        small_net.to_csv(str(nodes), str(edges))
        net = RoadNetwork.from_csv(str(nodes), str(edges))
        assert net.nodes == small_net.nodes
        assert net.edge_count == small_net.edge_count
        assert net.travel_time(1, 3) == small_net.travel_time(1, 3)


class TestShortestPaths:
    def test_helpers(self, small_net):
        assert shortest_travel_time(small_net, 1, 3) == 80.0
        assert shortest_distance(small_net, 1, 3) == 650.0

    def test_triangle_inequality(self, small_net):
        nodes = small_net.nodes
        for a in nodes:
            for b in nodes:
                for c in nodes:
                    assert shortest_travel_time(small_net, a, c) <= (
                        shortest_travel_time(small_net, a, b)
                        + shortest_travel_time(small_net, b, c)
                    )


class TestGridNetwork:
    def test_shape(self, grid_net):
        assert grid_net.nodes == list(range(9))
        # 12 undirected neighbour pairs
        assert grid_net.edge_count == 24
        assert grid_net.coords(5) == (800.0, 400.0)

    def test_travel_times(self, grid_net):
        assert grid_net.travel_time(0, 8) == 400.0
        assert grid_net.distance(0, 8) == 1600.0

    def test_invalid(self):
        with pytest.raises(ParameterError):
            grid_network(0, 3)


class TestKmeansCluster:
    def test_partition(self, grid_net):
        clusters = kmeans_cluster(grid_net, 3, seed=1)
        assert clusters.K == 3
        assert sorted(clusters.assignment) == grid_net.nodes
        assert set(clusters.assignment.values()) == {0, 1, 2}
        assert clusters.cluster_of(0) == 0
        members = [clusters.members(k) for k in range(3)]
        assert sorted(n for m in members for n in m) == grid_net.nodes

    def test_ids_follow_smallest_member(self, grid_net):
        clusters = kmeans_cluster(grid_net, 3, seed=2)
        firsts = [clusters.members(k)[0] for k in range(3)]
        assert firsts == sorted(firsts)

    def test_representatives_are_members(self, grid_net):
        clusters = kmeans_cluster(grid_net, 2, seed=0)
        for k, node in clusters.representatives.items():
            assert clusters.cluster_of(node) == k
        assert clusters.cluster_travel_time(0, 0) == 0.0
        assert math.isfinite(clusters.cluster_travel_time(0, 1))

    def test_deterministic(self, grid_net):
        assert kmeans_cluster(grid_net, 3, seed=5) == kmeans_cluster(
            grid_net, 3, seed=5
        )

    def test_single_cluster(self, small_net):
        clusters = kmeans_cluster(small_net, 1)
        assert clusters.members(0) == small_net.nodes

    @pytest.mark.parametrize("K", [0, 6, 2.5])
    def test_invalid_k(self, small_net, K):
        with pytest.raises(ParameterError):
            kmeans_cluster(small_net, K)
