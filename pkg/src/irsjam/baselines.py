"""Comparison schemes built on the same alternating machinery."""
from __future__ import annotations

import enum
from dataclasses import replace

import numpy as np

from .alternating import AlternatingSolver, BeamformingSolution, Problem
from .channel import ChannelSet
from .metrics import _eff_rows


class BaselineKind(enum.Enum):
    RateIrs = "rate-irs"
    PowerIrs = "power-irs"
    EfficiencyNoIrs = "efficiency-noirs"
    EfficiencyNoAngle = "efficiency-noangle"
    MrtIrs = "mrt-irs"


def _scenario(scenario, opts):
    return scenario if opts is None else replace(scenario, solver=opts)


def solve_rate_max(scenario, channels: ChannelSet, opts=None) -> BeamformingSolution:
    """Maximize the secrecy rate; power only enters through the budgets."""
    prob = Problem(_scenario(scenario, opts), channels)
    return AlternatingSolver(prob, "rate", BaselineKind.RateIrs.value).run()


def solve_power_min(scenario, channels: ChannelSet, opts=None) -> BeamformingSolution:
    """Minimize transmit power subject to the secrecy-rate floor."""
    prob = Problem(_scenario(scenario, opts), channels)
    return AlternatingSolver(prob, "power", BaselineKind.PowerIrs.value).run()


def solve_no_irs(scenario, channels: ChannelSet, opts=None) -> BeamformingSolution:
    """Efficiency maximization with every IRS path removed and no IRS circuit power."""
    prob = Problem(_scenario(scenario, opts), channels.without_irs(), with_irs=False, optimize_phases=False)
    return AlternatingSolver(prob, "ee", BaselineKind.EfficiencyNoIrs.value).run()


def solve_no_angle(scenario, channels: ChannelSet, opts=None) -> BeamformingSolution:
    """Efficiency maximization over the beams only; every reflection phase stays 0."""
    prob = Problem(_scenario(scenario, opts), channels, optimize_phases=False)
    return AlternatingSolver(prob, "ee", BaselineKind.EfficiencyNoAngle.value).run()


def mrt_directions(ch: ChannelSet, refl, f1=None, f2=None):
    """Unit beam directions for the MRT scheme.

    ``u1`` is matched to the user's effective channel.  ``u2`` aims at the
    eve that leaks most along ``u1`` and is projected so that the user
    receives no jamming.  A zero vector is returned for ``u2`` when the
    projection leaves nothing (single antenna or collinear channels).
    """
    hu, gu, he, ge = _eff_rows(ch, refl)
    n = np.linalg.norm(hu)
    u1 = np.conj(hu) / n if n > 0 else np.eye(len(hu))[0].astype(complex)
    k = int(np.argmax(np.abs(he @ u1)))
    x = np.conj(ge[k])
    ng = np.vdot(gu, gu).real
    if ng > 0:
        x = x - (gu @ x) / ng * np.conj(gu)
    nx = np.linalg.norm(x)
    u2 = x / nx if nx > 1e-12 * max(1.0, np.linalg.norm(ge[k])) else np.zeros_like(x)
    return u1, u2


def solve_mrt(scenario, channels: ChannelSet, opts=None) -> BeamformingSolution:
    """Efficiency maximization with MRT beam directions; powers and phases are optimized."""
    prob = Problem(_scenario(scenario, opts), channels, directions=mrt_directions)
    return AlternatingSolver(prob, "ee", BaselineKind.MrtIrs.value).run()


SOLVERS = {
    BaselineKind.RateIrs: solve_rate_max,
    BaselineKind.PowerIrs: solve_power_min,
    BaselineKind.EfficiencyNoIrs: solve_no_irs,
    BaselineKind.EfficiencyNoAngle: solve_no_angle,
    BaselineKind.MrtIrs: solve_mrt,
}


def solve_baseline(kind: BaselineKind, scenario, channels: ChannelSet, opts=None) -> BeamformingSolution:
    return SOLVERS[BaselineKind(kind)](scenario, channels, opts)
