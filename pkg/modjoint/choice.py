# -*- coding: utf-8 -*-

""" Multinomial logit mode choice over exclusive, shared and outside options.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import DomainError, ParameterError


class Mode(enum.Enum):
    """ A customer's travel mode. """

    EXCLUSIVE = "e"
    SHARED = "s"
    OUTSIDE = "o"


@dataclass(frozen=True)
class ChoiceParams:
    """ Coefficients of the mode-choice utility.

        `beta_p` is the utility per currency unit and is scaled by
        `price_multiplier`; `beta_w` and `beta_t` are the utilities per second
        of waiting and travel. `asc_e`, `asc_s` and `asc_o` are optional
        alternative-specific constants.
    """

    beta_p: float
    beta_w: float
    beta_t: float
    price_multiplier: float = 1.0
    asc_e: float = 0.0
    asc_s: float = 0.0
    asc_o: float = 0.0

    def __post_init__(self):
        if self.price_multiplier <= 0:
            raise ParameterError("The price multiplier must be positive.")
        if not self.effective_beta_p < 0:
            raise ParameterError(
                "The effective price coefficient must be negative (got {}).".format(
                    self.effective_beta_p
                )
            )

    @property
    def effective_beta_p(self):
        return self.price_multiplier * self.beta_p

    @classmethod
    def from_config(cls, cfg):
        return cls(
            beta_p=cfg.beta_p,
            beta_w=cfg.beta_w,
            beta_t=cfg.beta_t,
            price_multiplier=cfg.price_multiplier,
            asc_e=cfg.asc_e,
            asc_s=cfg.asc_s,
            asc_o=cfg.asc_o,
        )

    def constant(self, mode):
        if mode is None:
            return 0.0
        return {
            Mode.EXCLUSIVE: self.asc_e,
            Mode.SHARED: self.asc_s,
            Mode.OUTSIDE: self.asc_o,
        }[mode]


@dataclass(frozen=True)
class ModeOffer:
    """ The price, expected wait and expected travel time of one mode. """

    price: float
    wait: float
    travel: float

    def __post_init__(self):
        if self.wait < 0 or self.travel < 0:
            raise ParameterError("Wait and travel times must be nonnegative.")


@dataclass(frozen=True)
class ChoiceProbabilities:
    """ A point on the (exclusive, shared, outside) probability simplex. """

    p_e: float
    p_s: float
    p_o: float

    def __post_init__(self):
        for p in (self.p_e, self.p_s, self.p_o):
            if not 0.0 <= p <= 1.0:
                raise ParameterError("Probabilities must lie in [0, 1].")
        if abs(self.p_e + self.p_s + self.p_o - 1.0) > 1e-12:
            raise ParameterError("Probabilities must sum to 1.")

    def of(self, mode):
        if mode is Mode.EXCLUSIVE:
            return self.p_e
        if mode is Mode.SHARED:
            return self.p_s
        return self.p_o

    def as_dict(self):
        return {"p_e": self.p_e, "p_s": self.p_s, "p_o": self.p_o}


@dataclass(frozen=True)
class UtilityParts:
    """ A utility split into its price term and the remaining (assignment)
        term.
    """

    price_part: float
    assignment_part: float

    @property
    def total(self):
        return self.price_part + self.assignment_part


def utility_parts(params, offer, mode=None):
    """ Return the price and non-price parts of the utility of an offer.

        :param ChoiceParams params:
            The choice coefficients.
        :param ModeOffer offer:
            The offer being valued.
        :type mode:
            None or Mode
        :param mode:
            The mode of the offer, used to add its alternative-specific
            constant to the non-price part.

        :rtype: UtilityParts
    """
    return UtilityParts(
        price_part=params.effective_beta_p * offer.price,
        assignment_part=(
            params.beta_w * offer.wait
            + params.beta_t * offer.travel
            + params.constant(mode)
        ),
    )


def utility(params, offer, mode=None):
    """ Return the utility of an offer. """
    return utility_parts(params, offer, mode).total


def choice_probabilities(u_e, u_s, u_o):
    """ Return the MNL choice probabilities for three utilities.

        :rtype: ChoiceProbabilities
    """
    p = softmax(np.array([u_e, u_s, u_o], dtype=float))
    p_e, p_s = float(p[0]), float(p[1])
    # the outside share absorbs rounding so the point stays on the simplex
    p_o = max(0.0, 1.0 - p_e - p_s)
    return ChoiceProbabilities(p_e=p_e, p_s=p_s, p_o=p_o)


def sample_choice(probs, rng):
    """ Sample a mode by inverse-CDF in the fixed order exclusive, shared,
        outside.

        :param ChoiceProbabilities probs:
            The choice probabilities.
        :param numpy.random.Generator rng:
            The random source. Exactly one draw is consumed.

        :rtype: Mode
    """
    u = rng.random()
    if u < probs.p_e:
        return Mode.EXCLUSIVE
    if u < probs.p_e + probs.p_s:
        return Mode.SHARED
    return Mode.OUTSIDE


def price_for_share(beta_p, d, u_o, share, other_share):
    """ Invert the MNL map for one mode of a two-product menu.

        Returns the price at which the mode with non-price utility `d` has
        choice probability `share` when the other MoD mode has probability
        `other_share` and the outside option has utility `u_o`. Array
        arguments are inverted element-wise.
    """
    share = np.asarray(share, dtype=float)
    other_share = np.asarray(other_share, dtype=float)
    phi = 1.0 - share - other_share
    if np.any(share <= 0) or np.any(other_share < 0) or np.any(phi <= 0):
        raise DomainError(
            "Shares ({}, {}) must lie strictly inside the simplex.".format(
                share, other_share
            )
        )
    price = (u_o + np.log(share) - np.log(phi) - d) / beta_p
    return float(price) if price.ndim == 0 else price
