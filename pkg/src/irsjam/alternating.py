"""Alternating optimization driver shared by the solvers and baselines.

One outer iteration runs a beam step (reflections fixed) and then a
reflection step (beams fixed).  Each step refines its convex surrogate
until the Dinkelbach residual (or, for the rate and power objectives, the
objective change) falls below tolerance, recovers vectors from the relaxed
solution, and is kept only if it does not lower the true objective.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import perfect, robust
from .channel import ChannelSet, compose_robust, phase_stacks
from .dinkelbach import CONVERGED, DinkelbachResult, dinkelbach
from .metrics import SolutionMetrics, batch_beams, batch_reflections, effective, evaluate, worst_case_metrics
from .randomization import RandomizationFailed, recover_rank_one
from .scenario import Scenario, SolverOptions
from .surrogate import LN2, StepConfig, rate_nats

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"
ROBUST_VALIDATION_FAILED = "robust-validation-failed"


@dataclass
class BeamformingSolution:
    f1: np.ndarray
    f2: np.ndarray
    theta: np.ndarray
    ee: float
    r_s: float
    p_tot: float
    status: str
    trace: list = field(default_factory=list)
    method: str = ""
    iterations: int = 0
    metrics: SolutionMetrics | None = None
    steps: list = field(default_factory=list)
    wall_time: float = 0.0
    report: dict = field(default_factory=dict)

    @property
    def refl(self):
        return np.exp(1j * self.theta)

    @property
    def wbar(self):
        return np.r_[self.refl, 1.0]

    @property
    def ee_trace(self):
        return [rec["ee"] for rec in self.trace]


@dataclass
class Problem:
    """Noise-normalized view of one instance."""

    scenario: Scenario
    channels: ChannelSet  # physical units
    robust: bool = False
    with_irs: bool = True
    optimize_phases: bool = True
    directions: object = None  # callable (ch_n, refl, f1, f2) -> (u1, u2), or None

    def __post_init__(self):
        cfg = self.scenario.system
        self.sigma = float(np.sqrt(cfg.noise_power))
        self.ch = self.channels.scaled(1.0 / self.sigma)
        self.cfg = replace(cfg, noise_power=1.0, a0=1.0)
        self.unc = self.scenario.uncertainty
        self.opts: SolverOptions = self.scenario.solver
        if self.ch.dims[1] == 0:
            # no elements: nothing to steer and no control power to pay
            self.optimize_phases = False
            self.with_irs = False

    @property
    def dims(self):
        return self.ch.dims

    def metrics(self, f1, f2, refl, physical=False) -> SolutionMetrics:
        ch, cfg = (self.channels, self.scenario.system) if physical else (self.ch, self.cfg)
        if self.robust:
            return worst_case_metrics(f1, f2, refl, ch, cfg, self.unc, self.with_irs)
        return evaluate(f1, f2, refl, ch, cfg, self.with_irs)

    @property
    def circuit(self):
        c = self.cfg
        return c.p_bs + c.p_g + (c.p_irs if self.with_irs else 0.0)


def score(m: SolutionMetrics, mode):
    if mode == "ee":
        return m.ee
    if mode == "rate":
        return m.r_s
    return -m.p_tot


# -- relaxed-point evaluators -------------------------------------------------

def _eve_rates(S_e, J_e, extra):
    if extra is not None:
        # robust: certified worst-case powers from the program
        return [rate_nats(s, j) for s, j in zip(extra["psi_be"], extra["psi_je"])]
    return [rate_nats(s, j) for s, j in zip(S_e, J_e)]


class _Steps:
    def __init__(self, prob: Problem):
        self.prob = prob
        self.B = prob.cfg.bandwidth

    # beam stage
    def beam_numerator(self, x, q):
        S_u, J_u, S_e, J_e = perfect.beam_powers(q, x.F1, x.F2)
        return self.B / LN2 * (rate_nats(S_u, J_u) - max(_eve_rates(S_e, J_e, x.extra)))

    def beam_denominator(self, x):
        c = self.prob.cfg
        return c.amplifier * float(np.real(np.trace(x.F1) + np.trace(x.F2))) + self.prob.circuit

    def beam_x0(self, f1, f2, refl):
        F1, F2 = np.outer(f1, np.conj(f1)), np.outer(f2, np.conj(f2))
        extra = None
        if self.prob.robust:
            # exact worst-case powers of rank-one beams stand in for the certified ones
            ch = self.prob.ch
            a = np.linalg.norm(ch.H_BI @ f1)
            b = np.linalg.norm(ch.G_JI @ f2)
            he = np.array([np.abs(effective(ch.h_BE[k], ch.h_IE_bar[k], ch.H_BI, refl) @ f1)
                           for k in range(ch.dims[2])])
            ge = np.array([np.abs(effective(ch.g_JE[k], ch.g_IE_bar[k], ch.G_JI, refl) @ f2)
                           for k in range(ch.dims[2])])
            extra = {
                "psi_be": (he + np.asarray(self.prob.unc.xi_ie) * a) ** 2,
                "psi_je": np.maximum(0.0, ge - np.asarray(self.prob.unc.xi_je) * b) ** 2,
            }
        return perfect.BeamIterate(F1, F2, 0.0, 0.0, 0.0, extra)

    def beam_t(self, x, q, rc):
        if self.prob.robust:
            u = self.prob.unc
            bounds = robust.beam_bounds(x.F1, x.F2, rc, u.xi_ie, u.xi_je)
            return robust.update_t_robust(x.F2, q.B_u, bounds)
        return perfect.update_t_perfect(x.F1, x.F2, q)

    def beam_solve(self, t, step, refl, q, dirs):
        P = self.prob
        c = P.cfg
        if P.robust:
            return robust.solve_robust_beam_subproblem(
                P.ch, refl, t[0], t[1], c.p1_max, c.p2_max, P.unc.xi_ie, P.unc.xi_je, step)
        return perfect.solve_beam_subproblem(q, t[0], t[1], c.p1_max, c.p2_max, step, directions=dirs)

    # reflection stage
    def phase_numerator(self, x, q):
        S_u, J_u, S_e, J_e = perfect.phase_powers(q, x.W)
        return self.B / LN2 * (rate_nats(S_u, J_u) - max(_eve_rates(S_e, J_e, x.extra)))

    def phase_x0(self, f1, f2, refl):
        wbar = np.r_[refl, 1.0]
        x = self.beam_x0(f1, f2, refl)
        return perfect.PhaseIterate(np.outer(wbar, np.conj(wbar)), 0.0, 0.0, 0.0, x.extra)

    def phase_t(self, x, q, f1, f2):
        if self.prob.robust:
            P = self.prob
            H_F, G_F = phase_stacks(P.ch, f1, f2)
            rc = compose_robust(P.ch, np.ones(P.dims[1]))
            bounds = robust.phase_bounds(x.W, H_F, G_F, rc.h_X, rc.g_X, P.unc.xi_ie, P.unc.xi_je)
            return robust.update_t_robust_phase(x.W, q.R_u, bounds)
        return perfect.update_t_phase(x.W, q)

    def phase_solve(self, t, step, q, f1, f2):
        P = self.prob
        if P.robust:
            return robust.solve_robust_phase_subproblem(P.ch, f1, f2, t[0], t[1], P.unc.xi_ie, P.unc.xi_je, step)
        return perfect.solve_phase_subproblem(q, t[0], t[1], step)


def _refine(solve_inner, value, tol, max_iters, x0, target=None):
    """Re-solve with refreshed multipliers until the objective stops moving.

    With ``target`` set, stop as soon as the objective reaches it.
    """
    x, v = x0, value(x0)
    vals = [v]
    status = "iteration-limit"
    for it in range(1, max_iters + 1):
        x_new = solve_inner(0.0, x)
        if x_new is None:
            status = "inner-failed" if it == 1 else CONVERGED
            break
        v_new = value(x_new)
        x = x_new
        vals.append(v_new)
        if abs(v_new - v) <= tol or (target is not None and v_new >= target):
            status = CONVERGED
            break
        v = v_new
    return DinkelbachResult(x, 0.0, status, len(vals) - 1, abs(vals[-1] - vals[-2]) if len(vals) > 1 else 0.0,
                            [0.0] * len(vals), [])


class AlternatingSolver:
    def __init__(self, prob: Problem, mode="ee", method=""):
        if mode not in ("ee", "rate", "power"):
            raise ValueError(f"unknown mode {mode!r}")
        self.prob = prob
        self.mode = mode
        self.method = method
        self.steps = _Steps(prob)
        self.log = []
        self._seed = prob.opts.rng_seed
        self._target = None  # early stop for the rate ascent that seeks the floor

    # -- helpers -------------------------------------------------------------

    def _metrics(self, f1, f2, refl):
        return self.prob.metrics(f1, f2, refl)

    def _feasible(self, m, f1, f2, floor):
        c = self.prob.cfg
        ok = np.linalg.norm(f1) ** 2 <= c.p1_max * (1 + 1e-12) and np.linalg.norm(f2) ** 2 <= c.p2_max * (1 + 1e-12)
        return ok and (floor is None or m.r_s >= floor)

    def _clip(self, f, pmax):
        n2 = np.linalg.norm(f) ** 2
        return f * np.sqrt(pmax / n2) if n2 > pmax else f

    def _repair(self, f1, f2, refl, floor):
        """Clip to the budgets, then trade jamming and transmit power to reach the floor."""
        c = self.prob.cfg
        f1, f2 = self._clip(f1, c.p1_max), self._clip(f2, c.p2_max)
        if floor is None or self._metrics(f1, f2, refl).r_s >= floor:
            return f1, f2
        n1 = np.linalg.norm(f1)
        if n1 == 0:
            return None
        top = np.sqrt(c.p1_max) / n1
        for js in (1.0, 0.7, 0.5, 0.3, 0.1, 0.0):
            g2 = js * f2
            if self._metrics(top * f1, g2, refl).r_s < floor:
                continue
            lo, hi = min(1.0, top), top
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if self._metrics(mid * f1, g2, refl).r_s >= floor:
                    hi = mid
                else:
                    lo = mid
            return hi * f1, g2
        return None

    def _batch_verdict(self, out, F1, F2, floor, mode):
        r_s, p_tot, ee = out
        c = self.prob.cfg
        ok = (np.sum(np.abs(F1) ** 2, axis=1) <= c.p1_max * (1 + 1e-12)) & \
             (np.sum(np.abs(F2) ** 2, axis=1) <= c.p2_max * (1 + 1e-12))
        if floor is not None:
            ok &= r_s >= floor
        vals = {"ee": ee, "rate": r_s, "power": -p_tot}[mode]
        return ok, vals

    def _next_seed(self):
        self._seed += 1
        return self._seed

    def _step_config(self, mode, eta, floor):
        c = self.prob.cfg
        return StepConfig(mode, eta, floor, c.bandwidth, c.amplifier)

    def _inner(self, mode, solve_inner, numer, denom, x0, eta0):
        o = self.prob.opts
        if mode == "ee":
            return dinkelbach(solve_inner, numer, denom, o.dinkelbach_tol, o.dinkelbach_max_iters, eta0, x0)
        value = numer if mode == "rate" else (lambda x: -denom(x))
        target = self._target if mode == "rate" else None
        return _refine(solve_inner, value, o.dinkelbach_tol, o.dinkelbach_max_iters, x0, target)

    # -- steps ---------------------------------------------------------------

    def beam_step(self, f1, f2, refl, mode, floor, eta0):
        P, S = self.prob, self.steps
        N = P.dims[0]
        q = perfect.beam_quadratics(P.ch, refl)
        rc = compose_robust(P.ch, refl) if P.robust else None
        dirs = P.directions(P.ch, refl, f1, f2) if P.directions is not None else None

        def solve_inner(eta, x_prev):
            t = S.beam_t(x_prev, q, rc)
            return S.beam_solve(t, self._step_config(mode, eta, floor), refl, q, dirs)

        x0 = S.beam_x0(f1, f2, refl)
        dk = self._inner(mode, solve_inner, lambda x: S.beam_numerator(x, q), S.beam_denominator, x0, eta0)
        rec = {"stage": "beam", "mode": mode, "status": dk.status, "iterations": dk.iterations,
               "residual": dk.residual, "etas": dk.etas, "monotone": dk.monotone}
        if dk.x is x0:
            return None, rec

        def split(x):
            return x[:N], x[N:]

        def feasible(x):
            a, b = split(x)
            return self._feasible(self._metrics(a, b, refl), a, b, floor)

        def repair(x):
            out = self._repair(*split(x), refl, floor)
            return None if out is None else np.concatenate(out)

        unc = P.unc if P.robust else None

        def batch(C):
            F1, F2 = C[:, :N], C[:, N:]
            out = batch_beams(P.ch, P.cfg, refl, F1, F2, unc, P.with_irs)
            return self._batch_verdict(out, F1, F2, floor, mode)

        X = np.zeros((2 * N, 2 * N), dtype=complex)
        X[:N, :N], X[N:, N:] = dk.x.F1, dk.x.F2
        o = P.opts
        try:
            x = recover_rank_one(
                X, feasible, o.n_randomizations, self._next_seed(),
                objective=lambda x: score(self._metrics(*split(x), refl), mode),
                blocks=[N, N], rank_one_tol=o.rank_one_tol, repair=repair, batch=batch,
            )
        except RandomizationFailed:
            rec["status"] = "randomization-failed"
            return None, rec
        return split(x), rec

    def phase_step(self, f1, f2, refl, mode, floor, eta0):
        P, S = self.prob, self.steps
        if not np.any(f1):
            return None, {"stage": "phase", "status": "skipped"}
        q = perfect.phase_quadratics(P.ch, f1, f2)

        def solve_inner(eta, x_prev):
            t = S.phase_t(x_prev, q, f1, f2)
            return S.phase_solve(t, self._step_config(mode, eta, floor), q, f1, f2)

        p_tx = np.linalg.norm(f1) ** 2 + np.linalg.norm(f2) ** 2
        denom_const = P.cfg.amplifier * p_tx + P.circuit
        x0 = S.phase_x0(f1, f2, refl)
        numer = lambda x: S.phase_numerator(x, q)  # noqa: E731
        dk = self._inner("ee" if mode == "ee" else "rate", solve_inner, numer, lambda x: denom_const, x0, eta0)
        rec = {"stage": "phase", "mode": mode, "status": dk.status, "iterations": dk.iterations,
               "residual": dk.residual, "etas": dk.etas, "monotone": dk.monotone}
        if dk.x is x0:
            return None, rec

        def to_refl(x):
            ref = x[-1] if abs(x[-1]) > 0 else 1.0
            return np.exp(1j * np.angle(x[:-1] / ref))

        # phase candidates are judged on rate unless efficiency is the goal
        target = "ee" if mode == "ee" else "rate"
        unc = P.unc if P.robust else None

        def batch(C):
            ref = C[:, -1:].copy()
            ref[np.abs(ref) == 0] = 1.0
            R = np.exp(1j * np.angle(C[:, :-1] / ref))
            out = batch_reflections(P.ch, P.cfg, f1, f2, R, unc, P.with_irs)
            F1 = np.broadcast_to(f1, (len(C), len(f1)))
            F2 = np.broadcast_to(f2, (len(C), len(f2)))
            return self._batch_verdict(out, F1, F2, floor, target)

        try:
            x = recover_rank_one(
                dk.x.W, lambda x: self._feasible(self._metrics(f1, f2, to_refl(x)), f1, f2, floor),
                P.opts.n_randomizations, self._next_seed(),
                objective=lambda x: score(self._metrics(f1, f2, to_refl(x)), target),
                rank_one_tol=P.opts.rank_one_tol, batch=batch,
            )
        except RandomizationFailed:
            rec["status"] = "randomization-failed"
            return None, rec
        return to_refl(x), rec

    # -- driver --------------------------------------------------------------

    def _iterate(self, state, mode, floor, max_iters, tol, trace):
        """Alternate steps until the score settles; returns (state, converged)."""
        f1, f2, refl = state
        m = self._metrics(f1, f2, refl)
        cur = score(m, mode)
        for it in range(1, max_iters + 1):
            prev = cur
            recs = {}
            for stage in ("beam", "phase"):
                if stage == "phase" and not self.prob.optimize_phases:
                    continue
                eta0 = m.ee if mode == "ee" else 0.0
                if stage == "beam":
                    out, rec = self.beam_step(f1, f2, refl, mode, floor, eta0)
                    cand = None if out is None else (out[0], out[1], refl)
                else:
                    out, rec = self.phase_step(f1, f2, refl, mode, floor, eta0)
                    cand = None if out is None else (*self._repoint(f1, f2, out), out)
                if cand is not None:
                    mc = self._metrics(*cand)
                    if self._feasible(mc, cand[0], cand[1], floor) and score(mc, mode) >= score(m, mode):
                        f1, f2, refl = cand
                        m = mc
                        rec["accepted"] = True
                    else:
                        rec["accepted"] = False
                self.log.append(rec)
                recs[stage] = rec
            cur = score(m, mode)
            if trace is not None:
                trace.append({
                    "iteration": len(trace), "ee": m.ee, "r_s": m.r_s, "p_tot": m.p_tot,
                    "beam_status": recs.get("beam", {}).get("status"),
                    "phase_status": recs.get("phase", {}).get("status"),
                })
            if abs(cur - prev) <= tol:
                return (f1, f2, refl), True
        return (f1, f2, refl), False

    def run(self) -> BeamformingSolution:
        t0 = time.perf_counter()
        P = self.prob
        N, M, _ = P.dims
        o = P.opts
        floor = P.cfg.r_th if P.cfg.r_th > 0 else None
        state = (np.zeros(N, complex), np.zeros(N, complex), np.ones(M, complex))

        if self.mode == "rate":
            trace = [self._trace_rec(state, 0)]
            state, conv = self._iterate(state, "rate", None, o.max_outer_iters, o.outer_tol, trace)
            status = OPTIMAL if conv else ITERATION_LIMIT
            if floor is not None and self._metrics(*state).r_s < floor:
                status = INFEASIBLE
            return self._finish(state, status, trace, t0)

        if floor is not None:
            # reach the rate floor first by pure rate ascent
            self._target = floor
            for _ in range(o.max_outer_iters):
                state, conv = self._iterate(state, "rate", None, 1, o.outer_tol, None)
                if self._metrics(*state).r_s >= floor or conv:
                    break
            self._target = None
            if self._metrics(*state).r_s < floor:
                state = self._repair_state(state, floor)
            if state is None or self._metrics(*state).r_s < floor:
                return self._finish(None, INFEASIBLE, [], t0)

        trace = [self._trace_rec(state, 0)]
        state, conv = self._iterate(state, self.mode, floor, o.max_outer_iters, o.outer_tol, trace)
        if self.mode == "power" and P.optimize_phases:
            # a closing beam step spends only the power the floor needs
            out, rec = self.beam_step(*state, "power", floor, 0.0)
            self.log.append(rec)
            if out is not None:
                mc = self._metrics(out[0], out[1], state[2])
                if self._feasible(mc, out[0], out[1], floor) and mc.p_tot <= self._metrics(*state).p_tot:
                    state = (out[0], out[1], state[2])
        return self._finish(state, OPTIMAL if conv else ITERATION_LIMIT, trace, t0)

    def _repoint(self, f1, f2, refl):
        """Frozen-direction schemes keep their beam structure for new reflections; powers stay."""
        P = self.prob
        if P.directions is None:
            return f1, f2
        u1, u2 = P.directions(P.ch, refl, f1, f2)
        return np.linalg.norm(f1) * u1, np.linalg.norm(f2) * u2

    def _repair_state(self, state, floor):
        out = self._repair(state[0], state[1], state[2], floor)
        return None if out is None else (out[0], out[1], state[2])

    def _trace_rec(self, state, i):
        m = self._metrics(*state)
        return {"iteration": i, "ee": m.ee, "r_s": m.r_s, "p_tot": m.p_tot, "beam_status": None, "phase_status": None}

    def _finish(self, state, status, trace, t0):
        P = self.prob
        N, M, _ = P.dims
        if state is None:
            z = np.zeros(N, complex)
            return BeamformingSolution(z, z.copy(), np.zeros(M), 0.0, 0.0, float("nan"), status, trace,
                                       self.method, 0, None, self.log, time.perf_counter() - t0)
        f1, f2, refl = state
        m = P.metrics(f1, f2, refl, physical=True)
        return BeamformingSolution(
            f1, f2, np.angle(refl), m.ee, m.r_s, m.p_tot, status, trace, self.method,
            max(len(trace) - 1, 0), m, self.log, time.perf_counter() - t0,
        )
