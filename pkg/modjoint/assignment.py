# -*- coding: utf-8 -*-

""" Exact selection of ESV matchings with an overbooking penalty.

    Each selected matching i earns its expected profit u_i. A vehicle j
    that appears in several selected matchings is expected to be needed
    sum_i gamma_ij times; every expected use beyond the first costs
    c_p + eps_j, where eps_j is the mean expected profit of the vehicle's
    matchings. Each request may be covered by at most one selected matching.
"""

import collections
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Tuple

from .errors import ParameterError, ProblemSizeError

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 20
TOL = 1e-12


@dataclass(frozen=True)
class CandidateMatching:
    """ A matching as seen by the assignment program. """

    id: int
    u: float
    requests: Tuple[int, ...]
    gamma: Dict[int, float] = field(default_factory=dict)


@dataclass
class AssignmentProblem:
    """ The matching-selection program of one batch.

        :param list matchings:
            The CandidateMatching list.
        :param dict vehicles:
            Maps each vehicle id to its mean expected profit eps_j.
        :param float c_p:
            The lost-demand penalty.
    """

    matchings: list
    vehicles: Dict[int, float]
    c_p: float

    def __post_init__(self):
        ids = [m.id for m in self.matchings]
        if len(set(ids)) != len(ids):
            raise ParameterError("Matching ids must be unique.")
        for m in self.matchings:
            for vid, g in m.gamma.items():
                if vid not in self.vehicles:
                    raise ParameterError(
                        "Matching {} references unknown vehicle {}.".format(m.id, vid)
                    )
                if not 0.0 <= g <= 1.0:
                    raise ParameterError(
                        "Matching {} has gamma {} outside [0, 1].".format(m.id, g)
                    )

    @classmethod
    def from_matchings(cls, matchings, c_p):
        """ Build the program from priced matchings, computing each vehicle's
            mean expected profit over the matchings it appears in.

            :param list matchings:
                Objects with `id`, `u`, `requests` and `gamma`.

            :rtype: AssignmentProblem
        """
        candidates = [
            CandidateMatching(m.id, float(m.u), tuple(m.requests), dict(m.gamma))
            for m in matchings
        ]
        by_vehicle = collections.defaultdict(list)
        for m in candidates:
            for vid in m.gamma:
                by_vehicle[vid].append(m.u)
        vehicles = {vid: sum(us) / len(us) for vid, us in sorted(by_vehicle.items())}
        return cls(candidates, vehicles, c_p)

    def weight(self, vehicle_id):
        return self.c_p + self.vehicles[vehicle_id]

    def matchings_with_request(self, request_id):
        return [m.id for m in self.matchings if request_id in m.requests]

    def matchings_with_vehicle(self, vehicle_id):
        return [m.id for m in self.matchings if vehicle_id in m.gamma]

    def to_dict(self):
        return {
            "c_p": self.c_p,
            "vehicles": {str(v): e for v, e in self.vehicles.items()},
            "matchings": [
                {
                    "id": m.id,
                    "u": m.u,
                    "requests": list(m.requests),
                    "gamma": {str(v): g for v, g in sorted(m.gamma.items())},
                }
                for m in self.matchings
            ],
        }


@dataclass(frozen=True)
class AssignmentSolution:
    selected: FrozenSet[int]
    penalties: Dict[int, float]
    objective: float

    def to_dict(self):
        return {
            "selected": sorted(self.selected),
            "penalties": {str(v): w for v, w in sorted(self.penalties.items())},
            "objective": self.objective,
        }


def penalties_for(prob, selected):
    """ Return the tight overbooking penalty w_j of every vehicle. """
    gamma_sum = collections.defaultdict(float)
    for m in prob.matchings:
        if m.id in selected:
            for vid, g in m.gamma.items():
                gamma_sum[vid] += g
    return {
        vid: max(0.0, prob.weight(vid) * (gamma_sum[vid] - 1.0))
        for vid in prob.vehicles
    }


def objective_value(prob, selected):
    """ Return sum u_i - sum w_j for a selection of matching ids. """
    u = sum(m.u for m in prob.matchings if m.id in selected)
    return u - sum(penalties_for(prob, selected).values())


def _solution(prob, selected):
    selected = frozenset(selected)
    penalties = penalties_for(prob, selected)
    u = sum(m.u for m in prob.matchings if m.id in selected)
    return AssignmentSolution(selected, penalties, u - sum(penalties.values()))


def _components(prob):
    """ Split the matchings into groups linked by a request or a vehicle. """
    parent = list(range(len(prob.matchings)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for i, m in enumerate(prob.matchings):
        keys = [("r", r) for r in m.requests] + [("v", v) for v in m.gamma]
        for key in keys:
            if key in owner:
                a, b = find(owner[key]), find(i)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                owner[key] = i
    groups = collections.defaultdict(list)
    for i, m in enumerate(prob.matchings):
        groups[find(i)].append(m)
    return [groups[k] for k in sorted(groups)]


class _BranchAndBound:
    """ Depth-first search over one component in order of descending u. """

    def __init__(self, prob, matchings):
        self.prob = prob
        self.order = sorted(matchings, key=lambda m: (-m.u, m.id))
        self.vehicles = sorted({v for m in matchings for v in m.gamma})
        self.monotone = all(prob.weight(v) >= 0 for v in self.vehicles)
        self.best_value = None
        self.best = ()

    def _penalty(self, gamma_sum):
        return sum(
            max(0.0, self.prob.weight(v) * (gamma_sum[v] - 1.0))
            for v in self.vehicles
        )

    def solve(self):
        self._search(0, [], set(), collections.defaultdict(float), 0.0)
        return self.best

    def _search(self, k, chosen, used, gamma_sum, u_sum):
        penalty = self._penalty(gamma_sum)
        value = u_sum - penalty
        if self.best_value is None or value > self.best_value + TOL:
            self.best_value, self.best = value, tuple(chosen)
        if k == len(self.order):
            return
        optimistic = sum(
            m.u
            for m in self.order[k:]
            if m.u > 0 and not used.intersection(m.requests)
        )
        bound = u_sum + optimistic - (penalty if self.monotone else 0.0)
        if bound <= self.best_value + TOL:
            return
        m = self.order[k]
        if not used.intersection(m.requests):
            for v, g in m.gamma.items():
                gamma_sum[v] += g
            used.update(m.requests)
            chosen.append(m.id)
            self._search(k + 1, chosen, used, gamma_sum, u_sum + m.u)
            chosen.pop()
            used.difference_update(m.requests)
            for v, g in m.gamma.items():
                gamma_sum[v] -= g
        self._search(k + 1, chosen, used, gamma_sum, u_sum)


def solve_assignment(prob):
    """ Return an optimal selection of matchings.

        The program is split into independent components, each solved by
        branch and bound. The bound adds the positive values of the
        remaining compatible matchings to the current value.

        :param AssignmentProblem prob:
            The program.

        :rtype: AssignmentSolution
    """
    selected = []
    components = _components(prob)
    for matchings in components:
        selected.extend(_BranchAndBound(prob, matchings).solve())
    solution = _solution(prob, selected)
    logger.debug(
        "Assignment: %d matchings in %d components, %d selected, objective %.4f",
        len(prob.matchings),
        len(components),
        len(solution.selected),
        solution.objective,
    )
    return solution


def brute_force_assignment(prob):
    """ Return an optimal selection by enumerating every feasible subset.

        :raises ProblemSizeError: for more than 20 matchings.

        :rtype: AssignmentSolution
    """
    n = len(prob.matchings)
    if n > BRUTE_FORCE_LIMIT:
        raise ProblemSizeError(
            "Brute force is limited to {} matchings (got {}).".format(
                BRUTE_FORCE_LIMIT, n
            )
        )
    best, best_value = (), None
    for mask in itertools.product((False, True), repeat=n):
        chosen = [m for m, pick in zip(prob.matchings, mask) if pick]
        requests = [r for m in chosen for r in m.requests]
        if len(requests) != len(set(requests)):
            continue
        ids = [m.id for m in chosen]
        value = objective_value(prob, ids)
        if best_value is None or value > best_value + TOL:
            best, best_value = ids, value
    return _solution(prob, best)
