"""Perfect-CSI subproblems: beams for fixed reflections, reflections for fixed beams.

All routines here work in the noise-normalized domain (channels divided by
sigma, so noise power is 1); the public closed forms take ``a0`` so they can
also be used with raw channels.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import AugmentedChannels, ChannelSet
from .metrics import effective
from .sdp import OPTIMAL, ConicProgram, tr
from .surrogate import StepConfig, add_rate_surrogate, herm_outer, set_objective


@dataclass(frozen=True)
class BeamQuadratics:
    """Gram matrices of the effective channels for one reflection vector.

    ``tr(A_u F1)`` is the user's signal power, ``tr(B_u F2)`` the jamming it
    receives; ``A_e[k]``/``B_e[k]`` are the same for eve k.
    """

    A_u: np.ndarray
    B_u: np.ndarray
    A_e: np.ndarray
    B_e: np.ndarray


def beam_quadratics(ch: ChannelSet, refl) -> BeamQuadratics:
    K = ch.dims[2]
    A_e = np.stack([herm_outer(effective(ch.h_BE[k], ch.h_IE_bar[k], ch.H_BI, refl)) for k in range(K)])
    B_e = np.stack([herm_outer(effective(ch.g_JE[k], ch.g_IE_bar[k], ch.G_JI, refl)) for k in range(K)])
    return BeamQuadratics(
        herm_outer(effective(ch.h_BU, ch.h_IU, ch.H_BI, refl)),
        herm_outer(effective(ch.g_JU, ch.g_IU, ch.G_JI, refl)),
        A_e, B_e,
    )


def lifted_beam_quadratics(aug: AugmentedChannels, wbar) -> BeamQuadratics:
    """Same matrices built from the stacked channels and ``wbar = [refl; 1]``."""
    row = lambda H: wbar @ H  # noqa: E731
    return BeamQuadratics(
        herm_outer(row(aug.H_U)), herm_outer(row(aug.G_U)),
        np.stack([herm_outer(row(H)) for H in aug.H_E]),
        np.stack([herm_outer(row(G)) for G in aug.G_E]),
    )


def _tr(A, X):
    return float(np.real(np.trace(A @ X)))


def beam_powers(q: BeamQuadratics, F1, F2):
    """(S_u, J_u, S_e, J_e) for relaxed beams."""
    S_e = [_tr(A, F1) for A in q.A_e]
    J_e = [_tr(B, F2) for B in q.B_e]
    return _tr(q.A_u, F1), _tr(q.B_u, F2), S_e, J_e


def update_t_perfect(F1, F2, q: BeamQuadratics, a0=1.0):
    """Closed-form multipliers that make the beam surrogate tight at (F1, F2)."""
    S_u, J_u, S_e, J_e = beam_powers(q, F1, F2)
    t_u = 1.0 / (a0 * J_u + 1.0)
    t_e = np.array([1.0 / (a0 * s + a0 * j + 1.0) for s, j in zip(S_e, J_e)])
    return t_u, t_e


@dataclass
class BeamIterate:
    F1: np.ndarray
    F2: np.ndarray
    slack: float
    objective: float
    solve_time: float = 0.0
    extra: dict = None


class _BeamVars:
    """Either full PSD matrices or powers along frozen directions."""

    def __init__(self, p: ConicProgram, N, directions=None):
        self.dirs = directions
        if directions is None:
            self.X1, self.X2 = p.matrix("F1", N), p.matrix("F2", N)
            eye = np.eye(N)
            self.pow1, self.pow2 = tr(eye, self.X1), tr(eye, self.X2)
        else:
            self.X1, self.X2 = p.scalar("p1", lower=0.0), p.scalar("p2", lower=0.0)
            self.pow1, self.pow2 = self.X1 * 1.0, self.X2 * 1.0

    def quad(self, A, which):
        X = self.X1 if which == 1 else self.X2
        if self.dirs is None:
            return tr(A, X)
        u = self.dirs[which - 1]
        return X * float(np.real(np.conj(u) @ A @ u))

    def unpack(self, values):
        if self.dirs is None:
            return values["F1"], values["F2"]
        u1, u2 = self.dirs
        return values["p1"] * np.outer(u1, np.conj(u1)), values["p2"] * np.outer(u2, np.conj(u2))


def solve_beam_subproblem(q: BeamQuadratics, t_u, t_e, p1_max, p2_max, step: StepConfig,
                          directions=None, solver_tol=1e-8):
    """One convex beam problem for fixed multipliers; None when it does not solve.

    ``directions=(u1, u2)`` freezes both beam directions (unit vectors) and
    optimizes only the two powers.
    """
    N = q.A_u.shape[0]
    p = ConicProgram()
    v = _BeamVars(p, N, directions)
    slack = p.scalar("l")
    p.add_le(v.pow1, p1_max)
    p.add_le(v.pow2, p2_max)
    S_e = [v.quad(A, 1) for A in q.A_e]
    J_e = [v.quad(B, 2) for B in q.B_e]
    phi_u = add_rate_surrogate(p, v.quad(q.A_u, 1), v.quad(q.B_u, 2), S_e, J_e, t_u, t_e, slack)
    set_objective(p, phi_u, slack, v.pow1 + v.pow2, step)
    res = p.solve(tol=solver_tol)
    if res.status != OPTIMAL:
        return None
    F1, F2 = v.unpack(res.values)
    return BeamIterate(F1, F2, res["l"], res.objective, res.solve_time)


# -- reflection subproblem ---------------------------------------------------

@dataclass(frozen=True)
class PhaseQuadratics:
    """Rank-one Gram matrices in the lifted reflection variable.

    ``tr(Q_u W)`` with ``W = wbar wbar^H`` is the user's signal power for the
    fixed beams, ``tr(R_u W)`` its jamming power, and likewise per eve.
    """

    Q_u: np.ndarray
    R_u: np.ndarray
    Q_e: np.ndarray
    R_e: np.ndarray


def _wvec(h_I, H, h_B, f):
    # conj of the lifted amplitude vector, so that |wbar^T a|^2 = tr(outer(conj a) W)
    return np.conj(np.concatenate([np.conj(h_I) * (H @ f), [np.vdot(h_B, f)]]))


def phase_quadratics(ch: ChannelSet, f1, f2) -> PhaseQuadratics:
    K = ch.dims[2]
    outer = lambda h: np.outer(h, np.conj(h))  # noqa: E731
    return PhaseQuadratics(
        outer(_wvec(ch.h_IU, ch.H_BI, ch.h_BU, f1)),
        outer(_wvec(ch.g_IU, ch.G_JI, ch.g_JU, f2)),
        np.stack([outer(_wvec(ch.h_IE_bar[k], ch.H_BI, ch.h_BE[k], f1)) for k in range(K)]),
        np.stack([outer(_wvec(ch.g_IE_bar[k], ch.G_JI, ch.g_JE[k], f2)) for k in range(K)]),
    )


def phase_powers(q: PhaseQuadratics, W):
    return _tr(q.Q_u, W), _tr(q.R_u, W), [_tr(Q, W) for Q in q.Q_e], [_tr(R, W) for R in q.R_e]


def update_t_phase(W, q: PhaseQuadratics, a0=1.0):
    S_u, J_u, S_e, J_e = phase_powers(q, W)
    t_wu = 1.0 / (a0 * J_u + 1.0)
    t_we = np.array([1.0 / (1.0 + a0 * (s + j)) for s, j in zip(S_e, J_e)])
    return t_wu, t_we


@dataclass
class PhaseIterate:
    W: np.ndarray
    slack: float
    objective: float
    solve_time: float = 0.0
    extra: dict = None


def unit_diagonal(p: ConicProgram, W):
    for m in range(W.dim):
        E = np.zeros((W.dim, W.dim))
        E[m, m] = 1.0
        p.add_eq(tr(E, W), 1.0)


def solve_phase_subproblem(q: PhaseQuadratics, t_wu, t_we, step: StepConfig, solver_tol=1e-8):
    """Convex problem in ``W`` (unit diagonal, PSD); None when it does not solve.

    Transmit power does not depend on ``W`` so the objective is the rate
    surrogate alone, whatever the mode.
    """
    n = q.Q_u.shape[0]
    p = ConicProgram()
    W = p.matrix("W", n)
    unit_diagonal(p, W)
    slack = p.scalar("l")
    phi_u = add_rate_surrogate(
        p, tr(q.Q_u, W), tr(q.R_u, W),
        [tr(Q, W) for Q in q.Q_e], [tr(R, W) for R in q.R_e], t_wu, t_we, slack,
    )
    set_objective(p, phi_u, slack, None, StepConfig("rate", 0.0, step.rate_floor, step.bandwidth))
    res = p.solve(tol=solver_tol)
    if res.status != OPTIMAL:
        return None
    return PhaseIterate(res["W"], res["l"], res.objective, res.solve_time)


def extract_phases(wbar):
    """Reflection angles from a lifted vector whose last entry is the reference."""
    wbar = np.asarray(wbar, dtype=complex)
    ref = wbar[-1]
    if abs(ref) == 0:
        raise ValueError("reference entry of the lifted vector is zero")
    return np.angle(wbar[:-1] / ref)


def _with_opts(scenario, opts):
    return scenario if opts is None else replace(scenario, solver=opts)


def algorithm1(scenario, channels: ChannelSet, opts=None):
    """Energy-efficiency maximization with perfect eve CSI.

    Alternates beam and reflection steps until the efficiency changes by at
    most ``opts.outer_tol`` or ``opts.max_outer_iters`` rounds have run.
    """
    from .alternating import AlternatingSolver, Problem

    sc = _with_opts(scenario, opts)
    return AlternatingSolver(Problem(sc, channels), "ee", "efficiency-irs").run()
