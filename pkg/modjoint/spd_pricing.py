# -*- coding: utf-8 -*-

""" Sequential pricing of the exclusive and shared services for a single
    request.

    The expected profit of a menu (p_e, p_s) under MNL choice has a unique
    critical point in which both services carry the same markup
    (1 + W) / -beta_p, where W is the Lambert W function evaluated at the
    ratio of the exponentiated cost-adjusted utilities of the MoD services
    to that of the outside option.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from .choice import (
    ChoiceProbabilities,
    Mode,
    ModeOffer,
    choice_probabilities,
    utility,
    utility_parts,
)
from .errors import DomainError, ParameterError
from .matching import ServiceType, feasible_vehicle_request

logger = logging.getLogger(__name__)

LAMBERT_W_MAX_ITER = 100
# beyond this exponent e^t overflows long before W(e^t) does
LAMBERT_W_EXP_SWITCH = 20.0


def lambert_w(x):
    """ Return the principal branch of the Lambert W function at x >= 0.

        Uses Halley's iteration from a logarithmic initial guess.

        :param float x:
            The argument.

        :rtype: float
    """
    if not x >= 0:
        raise DomainError(
            "lambert_w is only defined here for x >= 0 (got {}).".format(x)
        )
    if x == 0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x < math.e:
        w = math.log1p(x)
    else:
        L1 = math.log(x)
        w = L1 - math.log(L1) if L1 > 1 else 1.0
    for _ in range(LAMBERT_W_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w_exp(t):
    """ Return W(e^t) without forming e^t.

        For large t this solves w + log(w) = t by Newton's method.
    """
    if t < LAMBERT_W_EXP_SWITCH:
        return lambert_w(math.exp(t))
    w = t - math.log(t)
    for _ in range(LAMBERT_W_MAX_ITER):
        dw = (w + math.log(w) - t) / (1.0 + 1.0 / w)
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


@dataclass(frozen=True)
class SpdInstance:
    """ A single-request two-product pricing problem.

        `u_e_assign` and `u_s_assign` are the non-price utilities of the
        exclusive and shared offers, `u_o` the full outside utility. `c_e`
        and `c_s` are total costs (operational plus retrospective).
    """

    u_e_assign: float
    u_s_assign: float
    u_o: float
    c_e: float
    c_s: float
    beta_p: float

    def __post_init__(self):
        if not self.beta_p < 0:
            raise ParameterError(
                "beta_p must be negative (got {}).".format(self.beta_p)
            )
        values = (self.u_e_assign, self.u_s_assign, self.u_o, self.c_e, self.c_s)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError("Pricing instance fields must be finite.")


@dataclass(frozen=True)
class PriceQuote:
    """ A price menu. A price of None means the service is not offered. """

    p_e: Optional[float]
    p_s: Optional[float]
    expected_profit: float
    probabilities: ChoiceProbabilities


def _logits(inst, p_e, p_s):
    z_e = -math.inf if p_e is None else inst.beta_p * p_e + inst.u_e_assign
    z_s = -math.inf if p_s is None else inst.beta_p * p_s + inst.u_s_assign
    return z_e, z_s, inst.u_o


def quote_probabilities(inst, p_e, p_s):
    """ Return the choice probabilities of a menu. """
    return choice_probabilities(*_logits(inst, p_e, p_s))


def expected_profit_spd(inst, p_e, p_s):
    """ Return the expected profit of a menu.

        :param SpdInstance inst:
            The pricing problem.
        :type p_e:
            None or float
        :param p_e:
            The exclusive price, or None if the service is not offered.
        :type p_s:
            None or float
        :param p_s:
            The shared price, or None if the service is not offered.

        :rtype: float
    """
    probs = quote_probabilities(inst, p_e, p_s)
    profit = 0.0
    if p_e is not None and probs.p_e > 0:
        profit += probs.p_e * (p_e - inst.c_e)
    if p_s is not None and probs.p_s > 0:
        profit += probs.p_s * (p_s - inst.c_s)
    return profit


def apply_price_floor(price, floor):
    if price is None or floor is None:
        return price
    return max(price, floor)


def _best_of(inst, p_e, p_s):
    profit = expected_profit_spd(inst, p_e, p_s)
    if profit < 0:
        # pricing both services out is always available
        logger.debug("Critical point loses money; quoting the no-sale boundary.")
        return PriceQuote(
            p_e=None,
            p_s=None,
            expected_profit=0.0,
            probabilities=ChoiceProbabilities(0.0, 0.0, 1.0),
        )
    return PriceQuote(
        p_e=p_e,
        p_s=p_s,
        expected_profit=profit,
        probabilities=quote_probabilities(inst, p_e, p_s),
    )


def spd_optimal_prices(inst, price_floor=None):
    """ Return the profit-maximising exclusive and shared prices.

        :param SpdInstance inst:
            The pricing problem.
        :type price_floor:
            None or float
        :param price_floor:
            An optional lower bound applied to both prices.

        :rtype: PriceQuote
    """
    beta = inst.beta_p
    log_k = np.logaddexp(
        0.0, inst.u_s_assign - inst.u_e_assign + beta * (inst.c_s - inst.c_e)
    )
    t = float(log_k) + inst.u_e_assign + beta * inst.c_e - 1.0 - inst.u_o
    w = lambert_w_exp(t)
    p_e = inst.c_e - (1.0 + w) / beta
    p_s = p_e - (inst.c_e - inst.c_s)
    return _best_of(
        inst, apply_price_floor(p_e, price_floor), apply_price_floor(p_s, price_floor)
    )


def spd_single_price(d, c, u_o, beta_p, tol=1e-12):
    """ Return the optimal price when only one service is offered.

        The expected profit e^(beta p + d) (p - c) / (e^(beta p + d) + e^u_o)
        has a single critical point, the root of
        1 + beta (p - c) (1 - P(p)) where P is the choice probability. It is
        found by bisection on a bracket starting at p = c.

        :rtype: float
    """
    if not beta_p < 0:
        raise ParameterError("beta_p must be negative (got {}).".format(beta_p))

    def foc(p):
        share = choice_probabilities(beta_p * p + d, -math.inf, u_o).p_e
        return 1.0 + beta_p * (p - c) * (1.0 - share)

    lo, step = c, -1.0 / beta_p
    hi = c + step
    while foc(hi) > 0:
        lo, hi = hi, hi + step
        step *= 2.0
    return bisect(foc, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def spd_single_quote(inst, mode, price_floor=None):
    """ Return the optimal menu offering a single service.

        :rtype: PriceQuote
    """
    if mode is Mode.EXCLUSIVE:
        p = spd_single_price(inst.u_e_assign, inst.c_e, inst.u_o, inst.beta_p)
        return _best_of(inst, apply_price_floor(p, price_floor), None)
    p = spd_single_price(inst.u_s_assign, inst.c_s, inst.u_o, inst.beta_p)
    return _best_of(inst, None, apply_price_floor(p, price_floor))


@dataclass(frozen=True)
class VehicleChoice:
    """ The vehicle picked for one service with its route, cost and offer. """

    vehicle_id: int
    insertion: object
    cost: float
    offer: ModeOffer


@dataclass(frozen=True)
class SpdDecision:
    """ The outcome of pricing one request on arrival.

        `quote` is None when no vehicle can serve the request (no offer).
    """

    request_id: int
    quote: Optional[PriceQuote]
    exclusive: Optional[VehicleChoice]
    shared: Optional[VehicleChoice]
    outside: ModeOffer

    @property
    def offered(self):
        return self.quote is not None


@dataclass(frozen=True)
class PricingContext:
    """ Everything request-level pricing reads besides the fleet. """

    net: object
    choice_params: object
    estimator: object
    price_floor: Optional[float] = None


def _best_vehicle(ctx, request, vehicles, service_type, now):
    best = None
    for v in vehicles:
        if v.service_type is not service_type:
            continue
        ins = feasible_vehicle_request(
            ctx.net, v, request, now, ctx.estimator.cost_model.per_mile_cost
        )
        if ins is None:
            continue
        if service_type is ServiceType.EXCLUSIVE:
            cost = ctx.estimator.exclusive_cost(request, ins.marginal_cost, now)
        else:
            cost = ctx.estimator.shared_cost(
                request,
                ins.marginal_cost,
                now,
                empty=v.is_empty,
                pickup_meters=ins.pickup_meters,
            )
        if best is None or (cost, v.id) < (best.cost, best.vehicle_id):
            best = VehicleChoice(
                vehicle_id=v.id,
                insertion=ins,
                cost=cost,
                offer=ModeOffer(
                    price=0.0, wait=ins.wait(request), travel=ins.travel(request)
                ),
            )
    return best


def spd_handle_request(ctx, request, vehicles, now, outside):
    """ Pick a vehicle of each service type for a request and price the menu.

        :param PricingContext ctx:
            The network, choice model and cost estimator.
        :param Request request:
            The request being priced.
        :param list vehicles:
            A consistent snapshot of the fleet.
        :param float now:
            The current time.
        :param ModeOffer outside:
            The customer's outside option.

        :rtype: SpdDecision
    """
    params = ctx.choice_params
    ve = _best_vehicle(ctx, request, vehicles, ServiceType.EXCLUSIVE, now)
    vs = _best_vehicle(ctx, request, vehicles, ServiceType.SHARED, now)
    if ve is None and vs is None:
        logger.debug("Request %s: no feasible vehicle, no offer.", request.id)
        return SpdDecision(request.id, None, None, None, outside)
    u_o = utility(params, outside, Mode.OUTSIDE)
    u_e = 0.0 if ve is None else utility_parts(params, ve.offer, Mode.EXCLUSIVE)
    u_s = 0.0 if vs is None else utility_parts(params, vs.offer, Mode.SHARED)
    inst = SpdInstance(
        u_e_assign=0.0 if ve is None else u_e.assignment_part,
        u_s_assign=0.0 if vs is None else u_s.assignment_part,
        u_o=u_o,
        c_e=0.0 if ve is None else ve.cost,
        c_s=0.0 if vs is None else vs.cost,
        beta_p=params.effective_beta_p,
    )
    if ve is not None and vs is not None:
        quote = spd_optimal_prices(inst, ctx.price_floor)
    elif ve is not None:
        quote = spd_single_quote(inst, Mode.EXCLUSIVE, ctx.price_floor)
    else:
        quote = spd_single_quote(inst, Mode.SHARED, ctx.price_floor)
    logger.debug(
        "Request %s: p_e=%s p_s=%s profit=%.4f",
        request.id,
        quote.p_e,
        quote.p_s,
        quote.expected_profit,
    )
    return SpdDecision(
        request.id,
        quote,
        _priced(ve, quote.p_e),
        _priced(vs, quote.p_s),
        outside,
    )


def _priced(choice, price):
    if choice is None or price is None:
        return None
    offer = ModeOffer(price=price, wait=choice.offer.wait, travel=choice.offer.travel)
    return VehicleChoice(choice.vehicle_id, choice.insertion, choice.cost, offer)
