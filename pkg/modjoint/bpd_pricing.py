# -*- coding: utf-8 -*-

""" Batched pricing of a two-request matching.

    Two requests offered the shared service may end up pooled in the same
    vehicle, which couples their menus through the pooling saving
    C = c_1s + c_2s - c_ss. The expected profit is not concave in the four
    prices, but after replacing each price by the choice probability it
    induces, minimising

        G(P) = sum_i sum_m P_im (log(D_i P_im / phi_i) - d_im - beta c_im)
               + beta C P_1s P_2s,      phi_i = 1 - P_is - P_ie

    is equivalent to maximising profit (profit = G / beta), and G is convex
    whenever min(c_1e, c_2e) <= -1 / beta.

    Coordinates are ordered (P_1s, P_1e, P_2s, P_2e) throughout.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .choice import (
    ChoiceProbabilities,
    Mode,
    ModeOffer,
    choice_probabilities,
    utility,
    utility_parts,
)
from .errors import DomainError, ParameterError
from .spd_pricing import (
    SpdInstance,
    apply_price_floor,
    expected_profit_spd,
    quote_probabilities,
    spd_optimal_prices,
    spd_single_quote,
)

logger = logging.getLogger(__name__)

INTERIOR = 1e-9
GRADIENT_TOL = 1e-9
MAX_NEWTON_ITER = 100
ARMIJO = 1e-4


@dataclass(frozen=True)
class BatchPricingInstance:
    """ The pricing problem of a two-request matching.

        `D_1` and `D_2` are the exponentiated outside utilities. A request
        whose exclusive slot is empty has `exclusive_available` False and
        its exclusive probability is held at zero.
    """

    c_1e: float
    c_2e: float
    c_1s: float
    c_2s: float
    c_ss: float
    d_1s: float
    d_1e: float
    d_2s: float
    d_2e: float
    D_1: float
    D_2: float
    beta_p: float
    exclusive_available: Tuple[bool, bool] = (True, True)

    def __post_init__(self):
        if not self.beta_p < 0:
            raise ParameterError(
                "beta_p must be negative (got {}).".format(self.beta_p)
            )
        if not (self.D_1 > 0 and self.D_2 > 0):
            raise ParameterError("Exponentiated outside utilities must be positive.")
        if not all(math.isfinite(v) for v in self.costs) or not all(
            math.isfinite(v) for v in self.utilities
        ):
            raise ParameterError("Batch pricing instance fields must be finite.")

    @property
    def C(self):
        """ The saving from pooling both requests in one vehicle. """
        return self.c_1s + self.c_2s - self.c_ss

    @property
    def costs(self):
        return np.array([self.c_1s, self.c_1e, self.c_2s, self.c_2e])

    @property
    def utilities(self):
        return np.array([self.d_1s, self.d_1e, self.d_2s, self.d_2e])

    @property
    def log_outside(self):
        return np.log(np.array([self.D_1, self.D_1, self.D_2, self.D_2]))

    @property
    def active(self):
        """ The mask of coordinates that are free variables. """
        a1, a2 = self.exclusive_available
        return np.array([True, bool(a1), True, bool(a2)])


@dataclass(frozen=True)
class BatchQuote:
    """ Prices and choice probabilities for both requests of a matching. """

    p_1s: Optional[float]
    p_1e: Optional[float]
    p_2s: Optional[float]
    p_2e: Optional[float]
    P_1s: float
    P_1e: float
    P_2s: float
    P_2e: float
    expected_profit: float
    method: str = "newton"

    @property
    def prices(self):
        return (self.p_1s, self.p_1e, self.p_2s, self.p_2e)

    @property
    def probabilities(self):
        return np.array([self.P_1s, self.P_1e, self.P_2s, self.P_2e])

    def menu(self, i):
        """ Return the (exclusive, shared) prices offered to request i. """
        if i == 0:
            return self.p_1e, self.p_1s
        return self.p_2e, self.p_2s

    def choice(self, i):
        if i == 0:
            return _probs(self.P_1e, self.P_1s)
        return _probs(self.P_2e, self.P_2s)


def _probs(p_e, p_s):
    p_e, p_s = float(p_e), float(p_s)
    return ChoiceProbabilities(p_e, p_s, max(0.0, 1.0 - p_e - p_s))


def _phi(P):
    return np.array([1.0 - P[0] - P[1], 1.0 - P[2] - P[3]])


def _check_interior(inst, P):
    P = np.asarray(P, dtype=float)
    active = inst.active
    phi = _phi(P)
    if np.any(P[active] <= 0) or np.any(P[~active] != 0) or np.any(phi <= 0):
        raise DomainError(
            "Probabilities {} are not strictly inside the simplex.".format(list(P))
        )
    return P


def prob_to_price(inst, P_is, P_ie, i):
    """ Return the (shared, exclusive) prices of request i that induce the
        given choice probabilities.

        :param BatchPricingInstance inst:
            The pricing problem.
        :param float P_is:
            The shared probability.
        :param float P_ie:
            The exclusive probability, zero if the exclusive slot is empty.
        :param int i:
            The request index, 0 or 1.

        :rtype: tuple
    """
    D, d_s, d_e = (
        (inst.D_1, inst.d_1s, inst.d_1e) if i == 0 else (inst.D_2, inst.d_2s, inst.d_2e)
    )
    has_exclusive = inst.exclusive_available[i]
    phi = 1.0 - P_is - P_ie
    if P_is <= 0 or phi <= 0 or (P_ie <= 0 if has_exclusive else P_ie != 0):
        raise DomainError(
            "Probabilities ({}, {}) are not strictly inside the simplex.".format(
                P_is, P_ie
            )
        )
    beta = inst.beta_p
    p_s = (math.log(D * P_is / phi) - d_s) / beta
    p_e = (math.log(D * P_ie / phi) - d_e) / beta if has_exclusive else None
    return p_s, p_e


def batch_probabilities(inst, prices):
    """ Return the MNL probabilities (P_1s, P_1e, P_2s, P_2e) of a price
        vector ordered (p_1s, p_1e, p_2s, p_2e). None prices are not offered.
    """
    out = []
    for i in (0, 1):
        p_s, p_e = prices[2 * i], prices[2 * i + 1]
        d_s, d_e, D = (
            (inst.d_1s, inst.d_1e, inst.D_1)
            if i == 0
            else (inst.d_2s, inst.d_2e, inst.D_2)
        )
        u_s = -math.inf if p_s is None else inst.beta_p * p_s + d_s
        u_e = -math.inf if p_e is None else inst.beta_p * p_e + d_e
        probs = choice_probabilities(u_e, u_s, math.log(D))
        out.extend([probs.p_s, probs.p_e])
    return np.array(out)


def batched_expected_profit(inst, prices):
    """ Return the expected profit of a two-request menu.

        :param BatchPricingInstance inst:
            The pricing problem.
        :param tuple prices:
            (p_1s, p_1e, p_2s, p_2e); None for a service not offered.

        :rtype: float
    """
    P = batch_probabilities(inst, prices)
    c = inst.costs
    profit = 0.0
    for k, p in enumerate(prices):
        if p is not None and P[k] > 0:
            profit += P[k] * (p - c[k])
    return profit + P[0] * P[2] * inst.C


def transformed_objective(inst, P):
    """ Return G(P); the expected profit at P is G(P) / beta_p. """
    P = np.asarray(P, dtype=float)
    phi = _phi(P)
    phis = np.repeat(phi, 2)
    active = inst.active
    terms = np.zeros(4)
    a = active & (P > 0)
    terms[a] = P[a] * (
        inst.log_outside[a]
        + np.log(P[a])
        - np.log(phis[a])
        - inst.utilities[a]
        - inst.beta_p * inst.costs[a]
    )
    return float(terms.sum() + inst.beta_p * inst.C * P[0] * P[2])


def transformed_gradient(inst, P):
    """ Return the gradient of G, zero on held coordinates. """
    P = np.asarray(P, dtype=float)
    phis = np.repeat(_phi(P), 2)
    active = inst.active
    g = np.zeros(4)
    g[active] = (
        inst.log_outside[active]
        + np.log(P[active])
        - np.log(phis[active])
        + 1.0 / phis[active]
        - inst.utilities[active]
        - inst.beta_p * inst.costs[active]
    )
    coupling = inst.beta_p * inst.C
    g[0] += coupling * P[2]
    g[2] += coupling * P[0]
    return g


def _hessian(inst, P):
    phi = _phi(P)
    H = np.zeros((4, 4))
    for i in (0, 1):
        b = 1.0 / phi[i] + 1.0 / phi[i] ** 2
        block = slice(2 * i, 2 * i + 2)
        H[block, block] = b
        for k in (2 * i, 2 * i + 1):
            if P[k] > 0:
                H[k, k] += 1.0 / P[k]
    H[0, 2] = H[2, 0] = inst.beta_p * inst.C
    active = inst.active
    H[~active, :] = 0.0
    H[:, ~active] = 0.0
    return H


def hessian_at(inst, P):
    """ Return the 4 x 4 Hessian of G at an interior point.

        :rtype: numpy.ndarray
    """
    P = _check_interior(inst, P)
    return _hessian(inst, P)


def concavity_certificate(inst):
    """ Return True if the expected profit is jointly concave in the choice
        probabilities, i.e. min(c_1e, c_2e) <= -1 / beta_p.

        Without any exclusive slot the coupling bound |beta_p| C <= 1 is used
        instead.
    """
    exclusive = [
        c
        for c, ok in zip((inst.c_1e, inst.c_2e), inst.exclusive_available)
        if ok
    ]
    if not exclusive:
        return abs(inst.beta_p) * inst.C <= 1.0
    return min(exclusive) <= -1.0 / inst.beta_p


def _is_interior(P, active):
    phi = _phi(P)
    return bool(np.all(P[active] > 0) and np.all(phi > 0))


def _newton(inst, P0, free):
    """ Minimise G over the coordinates in `free`, holding the rest at P0.

        Damped Newton with backtracking that keeps the iterate strictly
        inside the simplex and enforces sufficient decrease.

        :returns: (P, converged)
    """
    P = P0.copy()
    idx = np.nonzero(free)[0]
    value = transformed_objective(inst, P)
    for _ in range(MAX_NEWTON_ITER):
        g = transformed_gradient(inst, P)[idx]
        if np.linalg.norm(g) <= GRADIENT_TOL:
            return P, True
        H = _hessian(inst, P)[np.ix_(idx, idx)]
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            return P, False
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        slope = float(g @ step)
        alpha = 1.0
        while alpha > 1e-20:
            trial = P.copy()
            trial[idx] += alpha * step
            if _is_interior(trial, inst.active):
                trial_value = transformed_objective(inst, trial)
                near = np.linalg.norm(g) < 1e-6
                if near or trial_value <= value + ARMIJO * alpha * slope:
                    break
            alpha *= 0.5
        else:
            return P, False
        P, value = trial, trial_value
    g = transformed_gradient(inst, P)[idx]
    return P, bool(np.linalg.norm(g) <= GRADIENT_TOL)


def _interiorise(P, active):
    P = np.where(active, np.clip(P, INTERIOR, 1.0 - INTERIOR), 0.0)
    for i in (0, 1):
        total = P[2 * i] + P[2 * i + 1]
        if total > 1.0 - INTERIOR:
            P[2 * i : 2 * i + 2] *= (1.0 - 2 * INTERIOR) / total
    return P


def decoupled_start(inst):
    """ Return the probabilities of pricing each request on its own. """
    P = np.zeros(4)
    for i in (0, 1):
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
        if inst.exclusive_available[i]:
            quote = spd_optimal_prices(spd)
        else:
            quote = spd_single_quote(spd, Mode.SHARED)
        P[2 * i] = quote.probabilities.p_s
        P[2 * i + 1] = quote.probabilities.p_e
    return _interiorise(P, inst.active)


def _quote(inst, P, method, price_floor=None):
    p_1s, p_1e = prob_to_price(inst, P[0], P[1], 0)
    p_2s, p_2e = prob_to_price(inst, P[2], P[3], 1)
    prices = (p_1s, p_1e, p_2s, p_2e)
    if price_floor is not None:
        prices = tuple(apply_price_floor(p, price_floor) for p in prices)
        p_1s, p_1e, p_2s, p_2e = prices
        P = batch_probabilities(inst, prices)
    profit = batched_expected_profit(inst, prices)
    if profit < 0:
        logger.debug("Batch optimum loses money; quoting the no-sale boundary.")
        return BatchQuote(
            None, None, None, None, 0.0, 0.0, 0.0, 0.0, 0.0, method="no-sale"
        )
    return BatchQuote(
        p_1s=p_1s,
        p_1e=p_1e,
        p_2s=p_2s,
        p_2e=p_2e,
        P_1s=float(P[0]),
        P_1e=float(P[1]),
        P_2s=float(P[2]),
        P_2e=float(P[3]),
        expected_profit=profit,
        method=method,
    )


def _solve_fixed_first(inst, p1s, start):
    P0 = start.copy()
    P0[0] = p1s
    room = 1.0 - p1s
    if inst.exclusive_available[0]:
        P0[1] = min(max(P0[1], INTERIOR), room / 2.0)
    P0 = np.where(inst.active, P0, 0.0)
    free = inst.active.copy()
    free[0] = False
    P, _ = _newton(inst, P0, free)
    return P, transformed_objective(inst, P)


def brute_force_batch(inst, step=0.01, price_floor=None):
    """ Price a two-request matching by enumerating P_1s.

        For each grid value of P_1s the remaining problem is convex and
        solved by Newton's method. The best grid value is then refined by a
        bounded scalar search within one step on either side.

        :param BatchPricingInstance inst:
            The pricing problem.
        :param float step:
            The grid step, in (0, 0.5].
        :type price_floor:
            None or float
        :param price_floor:
            An optional lower bound applied to every price after the
            optimization.

        :rtype: BatchQuote
    """
    if not 0 < step <= 0.5:
        raise ParameterError(
            "The grid step must lie in (0, 0.5] (got {}).".format(step)
        )
    start = decoupled_start(inst)
    grid = np.clip(np.arange(0.0, 1.0 + step / 2.0, step), INTERIOR, 1.0 - INTERIOR)
    best_P, best_value, best_x = None, math.inf, None
    for x in grid:
        P, value = _solve_fixed_first(inst, float(x), start)
        if value < best_value:
            best_P, best_value, best_x = P, value, float(x)

    lo = max(INTERIOR, best_x - step)
    hi = min(1.0 - INTERIOR, best_x + step)
    if hi > lo:
        res = minimize_scalar(
            lambda x: _solve_fixed_first(inst, x, start)[1],
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        P, value = _solve_fixed_first(inst, float(res.x), start)
        if value < best_value:
            best_P, best_value = P, value
    return _quote(inst, best_P, "grid", price_floor)


def optimize_batch_prices(inst, step=0.01, price_floor=None):
    """ Return the profit-maximising prices of a two-request matching.

        When the concavity certificate holds the transformed problem is
        solved by damped Newton from the decoupled prices; otherwise, or if
        Newton fails, by `brute_force_batch`. Prices below `price_floor` are
        raised to it and the choice probabilities follow the raised prices.

        :rtype: BatchQuote
    """
    if not concavity_certificate(inst):
        logger.debug("No concavity certificate; enumerating P_1s.")
        return brute_force_batch(inst, step, price_floor)
    P, converged = _newton(inst, decoupled_start(inst), inst.active)
    if not converged:
        logger.warning("Newton did not converge on %s; enumerating P_1s.", inst)
        return brute_force_batch(inst, step, price_floor)
    return _quote(inst, P, "newton", price_floor)


# Pricing ESV matchings


@dataclass(frozen=True)
class MatchingValue:
    """ The expected profit u and vehicle-use probabilities gamma of one ESV
        matching, with the (exclusive, shared) menu and choice probabilities
        of each of its requests. `quote` is the optimized quote, or None for
        given prices.
    """

    quote: object
    u: float
    gamma: dict
    menus: tuple
    choices: tuple


def _offer_parts(params, insertion, request, mode, price=0.0):
    offer = ModeOffer(
        price=price, wait=insertion.wait(request), travel=insertion.travel(request)
    )
    return utility_parts(params, offer, mode).assignment_part


def _gamma(matching, probs):
    # one exclusive vehicle may fill both slots: used if either request takes it
    idle = {}
    for i, slot in enumerate(matching.exclusive):
        if slot is not None:
            vid = slot.vehicle_id
            idle[vid] = idle.get(vid, 1.0) * (1.0 - probs[i].p_e)
    gamma = {vid: 1.0 - p for vid, p in idle.items()}
    if matching.shared is not None:
        none_accept = 1.0
        for p in probs:
            none_accept *= 1.0 - p.p_s
        gamma[matching.shared.vehicle_id] = 1.0 - none_accept
    return gamma


def spd_instance_for(matching, request, params, outside):
    """ Return the single-request pricing problem of a one-request matching.
    """
    e, s = matching.exclusive[0], matching.shared
    return SpdInstance(
        u_e_assign=0.0
        if e is None
        else _offer_parts(params, e.insertion, request, Mode.EXCLUSIVE),
        u_s_assign=0.0
        if s is None
        else _offer_parts(params, s.insertion, request, Mode.SHARED),
        u_o=utility(params, outside, Mode.OUTSIDE),
        c_e=0.0 if e is None else e.cost,
        c_s=0.0 if s is None else s.cost,
        beta_p=params.effective_beta_p,
    )


def batch_instance_for(matching, requests, params, outsides):
    """ Return the pricing problem of a two-request matching. """
    s = matching.shared
    fields = {}
    available = []
    for i, (r, slot, label) in enumerate(zip(requests, matching.exclusive, "12")):
        fields["c_{}s".format(label)] = matching.solo_shared_costs[i]
        fields["d_{}s".format(label)] = _offer_parts(
            params, s.insertion, r, Mode.SHARED
        )
        fields["D_{}".format(label)] = math.exp(
            utility(params, outsides[i], Mode.OUTSIDE)
        )
        if slot is None:
            fields["c_{}e".format(label)] = 0.0
            fields["d_{}e".format(label)] = 0.0
        else:
            fields["c_{}e".format(label)] = slot.cost
            fields["d_{}e".format(label)] = _offer_parts(
                params, slot.insertion, r, Mode.EXCLUSIVE
            )
        available.append(slot is not None)
    return BatchPricingInstance(
        c_ss=s.cost,
        beta_p=params.effective_beta_p,
        exclusive_available=tuple(available),
        **fields,
    )


def price_matching(matching, requests, params, outsides, step=0.01, price_floor=None):
    """ Price an ESV matching and derive its expected profit and gamma.

        One-request matchings are priced like a sequential request;
        two-request matchings by `optimize_batch_prices`.

        :param EsvMatching matching:
            The matching.
        :param list requests:
            Its requests, in matching order.
        :param ChoiceParams params:
            The choice coefficients.
        :param list outsides:
            The outside-option offer of each request.

        :rtype: MatchingValue
    """
    if len(requests) == 1:
        inst = spd_instance_for(matching, requests[0], params, outsides[0])
        if matching.exclusive[0] is not None and matching.shared is not None:
            quote = spd_optimal_prices(inst, price_floor)
        elif matching.exclusive[0] is not None:
            quote = spd_single_quote(inst, Mode.EXCLUSIVE, price_floor)
        else:
            quote = spd_single_quote(inst, Mode.SHARED, price_floor)
        menus = ((quote.p_e, quote.p_s),)
        probs = [quote.probabilities]
    else:
        inst = batch_instance_for(matching, requests, params, outsides)
        quote = optimize_batch_prices(inst, step, price_floor)
        menus = (quote.menu(0), quote.menu(1))
        probs = [quote.choice(0), quote.choice(1)]
    return MatchingValue(
        quote=quote,
        u=quote.expected_profit,
        gamma=_gamma(matching, probs),
        menus=menus,
        choices=tuple(probs),
    )


def value_fixed_prices(matching, requests, params, outsides, menus):
    """ Value an ESV matching at given (exclusive, shared) prices per request.

        Services without a vehicle slot are not offered.

        :rtype: MatchingValue
    """
    if len(requests) == 1:
        inst = spd_instance_for(matching, requests[0], params, outsides[0])
        p_e, p_s = menus[0]
        p_e = p_e if matching.exclusive[0] is not None else None
        p_s = p_s if matching.shared is not None else None
        profit = expected_profit_spd(inst, p_e, p_s)
        probs = [quote_probabilities(inst, p_e, p_s)]
        menus = ((p_e, p_s),)
    else:
        inst = batch_instance_for(matching, requests, params, outsides)
        prices = []
        clean = []
        for i, (p_e, p_s) in enumerate(menus):
            p_e = p_e if matching.exclusive[i] is not None else None
            prices.extend([p_s, p_e])
            clean.append((p_e, p_s))
        profit = batched_expected_profit(inst, prices)
        P = batch_probabilities(inst, prices)
        probs = [
            _probs(P[1], P[0]),
            _probs(P[3], P[2]),
        ]
        menus = tuple(clean)
    return MatchingValue(
        quote=None,
        u=profit,
        gamma=_gamma(matching, probs),
        menus=tuple(menus),
        choices=tuple(probs),
    )
