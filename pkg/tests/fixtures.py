# -*- coding: utf-8 -*-

""" Pytest fixtures for tests. """

import pathlib

import numpy as np
import pytest

from modjoint.choice import ChoiceParams, ModeOffer
from modjoint.config import RunConfig
from modjoint.costs import (
    CostModel,
    SteadyStateModel,
    TripCostEstimator,
    region_profit_rates,
)
from modjoint.matching import (
    Request,
    ServiceType,
    VehicleState,
    build_esv_graph,
    build_rv_graph,
    build_trips,
)
from modjoint.network import RoadNetwork, grid_network, kmeans_cluster

FIXTURE_FILES = pathlib.Path(__file__).parent / "fixture_files"


def fixture_file(name):
    return str(FIXTURE_FILES / name)


@pytest.fixture
def fixture_files():
    """ The directory holding the data fixtures. """
    return FIXTURE_FILES


@pytest.fixture
def cfg():
    """ The configuration of the five node fixture network. """
    return RunConfig.load(fixture_file("modjoint.yml"))


@pytest.fixture
def small_net():
    """ Five nodes with a fast lower route 0 -> 2 -> 3 -> 4 and a slower
        upper route 0 -> 1 -> 4.
    """
    return RoadNetwork.from_csv(fixture_file("nodes.csv"), fixture_file("edges.csv"))


@pytest.fixture
def grid_net():
    """ A 3 x 3 grid with 100 s between neighbours. """
    return grid_network(3, 3, spacing_m=400.0, speed_mps=4.0)


class EsvBatch:
    """ Two shareable requests 0 -> 4 and 2 -> 4 on the fixture network with
        an exclusive vehicle at node 0 and a shared vehicle at node 2.
    """

    per_mile_cost = 1.0

    def __init__(self, net):
        self.net = net
        self.requests = [
            Request.create(net, 0, 0, 4, 0.0, 300.0, 600.0),
            Request.create(net, 1, 2, 4, 0.0, 300.0, 600.0),
        ]
        self.vehicles = [
            VehicleState(0, ServiceType.EXCLUSIVE, location=0),
            VehicleState(1, ServiceType.SHARED, location=2),
        ]
        clusters = kmeans_cluster(net, 2, seed=0)
        model = CostModel(
            c0=np.zeros((2, 2)), per_mile_cost=self.per_mile_cost, c_p=5.0
        )
        steady = SteadyStateModel(2, 1, 600.0)
        self.estimator = TripCostEstimator(
            clusters, model, region_profit_rates(steady), steady
        )
        self.params = ChoiceParams(beta_p=-0.2, beta_w=-0.004, beta_t=-0.002)
        self.outside = ModeOffer(price=10.0, wait=300.0, travel=90.0)

    def matchings(self):
        rv = build_rv_graph(
            self.net, self.requests, self.vehicles, 0.0, self.per_mile_cost
        )
        trips = build_trips(
            self.net, rv, self.requests, self.vehicles, 0.0, self.per_mile_cost
        )
        return build_esv_graph(
            rv, trips, self.requests, self.vehicles, self.estimator, 0.0
        )

    def requests_of(self, matching):
        by_id = {r.id: r for r in self.requests}
        return [by_id[i] for i in matching.requests]


@pytest.fixture
def esv_batch(small_net):
    return EsvBatch(small_net)
