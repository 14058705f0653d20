"""Concave surrogate of the secrecy rate shared by every subproblem.

Rates are handled in nats inside the programs.  With noise normalized to 1,
a receiver with signal power S and jamming power J has rate
``ln(S + J + 1) - ln(J + 1)``.  The concave piece of the user rate is kept
exactly through an exponential cone; the convex piece is replaced by its
tangent ``-t (J + 1) + ln t + 1`` (tight at ``t = 1/(J + 1)``).  For eves the
roles swap: ``ln(S + J + 1) <= t (S + J + 1) - ln t - 1`` (tight at
``t = 1/(S + J + 1)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sdp import Affine, ConicProgram

LN2 = math.log(2.0)
RATE_TIE_BREAK = 1e-4  # nats per watt


def tangent_t(x):
    """Multiplier that makes the tangent bound of ``ln x`` tight."""
    return 1.0 / x


def upper_log(x, t):
    """``t x - ln t - 1``, an upper bound on ``ln x`` for every ``t > 0``."""
    return t * x - math.log(t) - 1.0


def lower_neg_log(x, t):
    """``-t x + ln t + 1``, a lower bound on ``-ln x`` for every ``t > 0``."""
    return -t * x + math.log(t) + 1.0


def add_rate_surrogate(p: ConicProgram, S_u, J_u, S_e, J_e, t_u, t_e, slack, tag=""):
    """Add the eve constraints and return the user-rate expression (nats).

    ``S_*``/``J_*`` are affine expressions for signal and jamming powers;
    every eve constraint bounds its surrogate rate by ``slack``.
    """
    u = p.scalar(f"u{tag}")
    p.add_log(u, Affine.wrap(S_u) + J_u + 1.0)
    phi_u = u + lower_neg_log(0.0, t_u) - Affine.wrap(J_u) * t_u - t_u
    for k, (s, j) in enumerate(zip(S_e, J_e)):
        w = p.scalar(f"w{tag}{k}")
        p.add_log(w, Affine.wrap(j) + 1.0)
        p.add_le((Affine.wrap(s) + j + 1.0) * t_e[k] - w - (math.log(t_e[k]) + 1.0), slack)
    return phi_u


def rate_nats(S, J):
    return math.log1p(S / (J + 1.0))


def secrecy_nats(S_u, J_u, S_e, J_e):
    """Unclamped secrecy rate in nats from powers (noise = 1)."""
    return rate_nats(S_u, J_u) - max(rate_nats(s, j) for s, j in zip(S_e, J_e))


@dataclass
class StepConfig:
    """What a subproblem optimizes.

    mode "ee": rate - eta * power; "rate": rate only; "power": minimize
    transmit power.  ``rate_floor`` (bits) adds the secrecy-rate constraint.
    """

    mode: str = "ee"
    eta: float = 0.0
    rate_floor: float | None = None
    bandwidth: float = 1.0
    amplifier: float = 1.0


def set_objective(p: ConicProgram, phi_u, slack, tx_power, step: StepConfig):
    rate = phi_u - slack
    scale = LN2 / step.bandwidth
    if step.rate_floor is not None:
        p.add_ge(rate, step.rate_floor * scale)
    if step.mode == "power":
        p.maximize(Affine.wrap(tx_power) * -step.amplifier)
    elif tx_power is None:
        p.maximize(rate)
    elif step.mode == "rate":
        # the rate optimum is often a set (spare jamming power is free); the
        # tiny power charge picks its cheapest point so results are reproducible
        p.maximize(rate - Affine.wrap(tx_power) * RATE_TIE_BREAK)
    else:
        p.maximize(rate - Affine.wrap(tx_power) * (scale * step.eta * step.amplifier))


def herm_outer(a):
    """Hermitian ``a^H a`` for a row vector so that ``|a x|^2 = tr(M x x^H)``."""
    a = np.asarray(a)
    return np.outer(np.conj(a), a)
