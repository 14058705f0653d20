"""Robust subproblems for ball-bounded eve-side IRS channel errors.

Each eve's IRS vector is ``bar + d`` with ``|d| <= xi``.  Writing
``d = xi z`` with ``|z| <= 1`` and ``K = [xi E, vbar_aug]`` (``E`` selects the
first M entries of the augmented vector), any quadratic
``(vbar_aug + [d; 0])^H Q (vbar_aug + [d; 0])`` equals ``[z; 1]^H K^H Q K [z; 1]``.
The S-lemma then turns "bounded above by psi for every z in the unit ball"
into

    diag(lam I, psi - lam) - K^H Q K  >= 0,   lam >= 0

and "bounded below by psi" into

    diag(lam I, -psi - lam) + K^H Q K  >= 0,  lam >= 0.

At ``xi = 0`` both collapse to ``psi >= q`` / ``psi <= q`` with ``lam = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelSet, RobustChannels, compose_robust, phase_stacks
from .perfect import BeamIterate, PhaseIterate, _BeamVars, _tr, beam_quadratics, phase_quadratics, unit_diagonal
from .sdp import OPTIMAL, ConicProgram, HermAffine, MatrixVar, tr
from .surrogate import StepConfig, add_rate_surrogate, set_objective


def ball_factor(vbar_aug, xi):
    """``K = [xi E, vbar_aug]``: maps ``[z; 1]`` to the perturbed augmented vector."""
    n = vbar_aug.shape[0]
    Kmat = np.zeros((n, n), dtype=complex)
    Kmat[: n - 1, : n - 1] = xi * np.eye(n - 1)
    Kmat[:, n - 1] = vbar_aug
    return Kmat


def s_block(Kmat, S, X, psi, lam, upper=True):
    """S-lemma block for ``[z;1]^H K^H (S X S^H) K [z;1]`` against ``psi``.

    ``X`` is a matrix variable or a fixed matrix; ``psi``/``lam`` are scalar
    variables or numbers.
    """
    n = Kmat.shape[0]
    C = Kmat.conj().T @ S
    # a positive rescaling leaves the PSD condition unchanged but helps the solver
    scale = 1.0 / max(1.0, float(np.max(np.abs(C))) ** 2) if isinstance(X, MatrixVar) else 1.0
    C = C * np.sqrt(scale)
    lam_pat = scale * np.diag(np.r_[np.ones(n - 1), -1.0]).astype(complex)
    psi_pat = np.zeros((n, n), dtype=complex)
    psi_pat[-1, -1] = scale if upper else -scale
    blk = HermAffine(n)
    sign = -1.0 if upper else 1.0
    for coef, pat in ((lam, lam_pat), (psi, psi_pat)):
        if isinstance(coef, (int, float, np.floating)):
            blk.add_const(float(coef) * pat)
        else:
            blk.add_scalar(coef, pat)
    if isinstance(X, MatrixVar):
        blk.add_congruence(X, C, sign)
    else:
        blk.add_const(sign * (C @ X @ C.conj().T))
    return blk


def build_beam_lmis(F1, F2, rc: RobustChannels, psi_be, psi_je, lam_be, lam_je, xi_ie, xi_je):
    """Per-eve blocks: information leakage bounded above, jamming bounded below."""
    blocks = []
    for k in range(rc.H_X.shape[0]):
        blocks.append(s_block(ball_factor(rc.h_X[k], xi_ie[k]), rc.H_X[k], F1, psi_be[k], lam_be[k], True))
        blocks.append(s_block(ball_factor(rc.g_X[k], xi_je[k]), rc.G_X[k], F2, psi_je[k], lam_je[k], False))
    return blocks


def compact_beam_data(rc: RobustChannels, which="h"):
    """Smaller but equivalent S-lemma data for the beam blocks.

    The error part of ``K^H H`` is ``xi * H[:M]``, whose range has dimension
    at most N.  Rotating the first M coordinates onto an orthonormal basis of
    that range (plus its complement) splits each block into ``lam I`` on the
    complement, which only asks ``lam >= 0``, and an (r+1)-dimensional block.
    Returns per eve the factor ``Sc`` such that ``diag(xi I, 1) Sc`` equals
    the kept rows of the rotated ``K^H S``.
    """
    H = rc.H_X if which == "h" else rc.G_X
    v = rc.h_X if which == "h" else rc.g_X
    out = []
    for k in range(H.shape[0]):
        top = H[k][:-1]
        U, sv, _ = np.linalg.svd(top, full_matrices=False)
        r = int(np.sum(sv > sv[0] * 1e-12)) if sv.size and sv[0] > 0 else 0
        U = U[:, :r]
        Sc = np.vstack([U.conj().T @ top, (np.conj(v[k]) @ H[k])[None, :]])
        out.append(Sc)
    return out


def build_beam_lmis_compact(F1, F2, rc: RobustChannels, psi_be, psi_je, lam_be, lam_je, xi_ie, xi_je):
    """Same constraints as ``build_beam_lmis`` with blocks of size at most N+1."""
    blocks = []
    for which, X, psi, lam, xi, upper in (
        ("h", F1, psi_be, lam_be, xi_ie, True),
        ("g", F2, psi_je, lam_je, xi_je, False),
    ):
        for k, Sc in enumerate(compact_beam_data(rc, which)):
            n = Sc.shape[0]
            Kc = np.eye(n, dtype=complex)
            Kc[: n - 1, : n - 1] *= xi[k]
            blocks.append((k, upper, s_block(Kc, Sc, X, psi[k], lam[k], upper)))
    blocks.sort(key=lambda item: (item[0], not item[1]))
    return [b for _, _, b in blocks]


def build_phase_lmis(W, H_F, G_F, h_X, g_X, psi_be, psi_je, lam_be, lam_je, xi_ie, xi_je):
    """Same blocks for the lifted reflection variable; ``H_F[k]`` are diagonals."""
    blocks = []
    for k in range(H_F.shape[0]):
        blocks.append(s_block(ball_factor(h_X[k], xi_ie[k]), np.diag(H_F[k]), W, psi_be[k], lam_be[k], True))
        blocks.append(s_block(ball_factor(g_X[k], xi_je[k]), np.diag(G_F[k]), W, psi_je[k], lam_je[k], False))
    return blocks


def min_eig(block: HermAffine, values=None):
    M = block.value(values or {})
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


# -- closed-form worst-case bounds ------------------------------------------

def gamma_closed_form(A, vbar, xi, direction="max", literal=False):
    """``q + xi^2 tr A +/- 2 xi sqrt(q tr A)`` with ``q = vbar^H A vbar``.

    "max" gives an upper estimate of the quadratic over the ball, "min" a
    lower one.  The "min" value is ``(sqrt q - xi sqrt(tr A))^2`` with the
    difference clamped at 0 before squaring: once the ball is wide enough to
    cancel the nominal amplitude the true minimum can reach 0.
    ``literal=True`` keeps the unclamped square (only for reporting).
    Zero-trace A gives 0.
    """
    A = np.asarray(A)
    tA = float(np.real(np.trace(A)))
    if tA <= 0.0:
        return 0.0
    q = max(float(np.real(np.conj(vbar) @ A @ vbar)), 0.0)
    cross = 2.0 * xi * math.sqrt(q * tA)
    if direction == "max":
        return q + xi * xi * tA + cross
    if direction == "min":
        if not literal and math.sqrt(q) < xi * math.sqrt(tA):
            return 0.0
        return max(q + xi * xi * tA - cross, 0.0)
    raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")


def gamma_beam(A, vbar, xi, direction="max", literal=False):
    """Bound for the beam stage; ``A = H_X F H_X^H``."""
    return gamma_closed_form(A, vbar, xi, direction, literal)


def gamma_phase(A, vbar, xi, direction="max", literal=False):
    """Bound for the reflection stage; ``A = diag(H_F) W diag(H_F)^H``."""
    return gamma_closed_form(A, vbar, xi, direction, literal)


@dataclass
class WorstCaseBounds:
    gamma1: np.ndarray
    gamma2: np.ndarray


def beam_bounds(F1, F2, rc: RobustChannels, xi_ie, xi_je) -> WorstCaseBounds:
    K = rc.H_X.shape[0]
    g1 = [gamma_beam(rc.H_X[k] @ F1 @ rc.H_X[k].conj().T, rc.h_X[k], xi_ie[k], "max") for k in range(K)]
    g2 = [gamma_beam(rc.G_X[k] @ F2 @ rc.G_X[k].conj().T, rc.g_X[k], xi_je[k], "min") for k in range(K)]
    return WorstCaseBounds(np.array(g1), np.array(g2))


def phase_bounds(W, H_F, G_F, h_X, g_X, xi_ie, xi_je) -> WorstCaseBounds:
    K = H_F.shape[0]
    g1 = [gamma_phase(np.diag(H_F[k]) @ W @ np.diag(H_F[k]).conj().T, h_X[k], xi_ie[k], "max") for k in range(K)]
    g2 = [gamma_phase(np.diag(G_F[k]) @ W @ np.diag(G_F[k]).conj().T, g_X[k], xi_je[k], "min") for k in range(K)]
    return WorstCaseBounds(np.array(g1), np.array(g2))


def update_t_robust(F2, B_u, bounds: WorstCaseBounds, sigma2=1.0):
    """User multiplier from the known jamming channel, eve multipliers from the bounds."""
    t_u = 1.0 / (_tr(B_u, F2) + sigma2)
    t_e = 1.0 / (bounds.gamma1 + bounds.gamma2 + sigma2)
    return t_u, t_e


def update_t_robust_phase(W, R_u, bounds: WorstCaseBounds, sigma2=1.0):
    t_wu = 1.0 / (_tr(R_u, W) + sigma2)
    t_we = 1.0 / (bounds.gamma1 + bounds.gamma2 + sigma2)
    return t_wu, t_we


# -- programs ----------------------------------------------------------------

def _eve_vars(p: ConicProgram, K, tag=""):
    psi_be = [p.scalar(f"psi_be{tag}{k}", lower=0.0) for k in range(K)]
    psi_je = [p.scalar(f"psi_je{tag}{k}", lower=0.0) for k in range(K)]
    lam_be = [p.scalar(f"lam_be{tag}{k}", lower=0.0) for k in range(K)]
    lam_je = [p.scalar(f"lam_je{tag}{k}", lower=0.0) for k in range(K)]
    return psi_be, psi_je, lam_be, lam_je


def _eve_values(res, K, tag=""):
    return {
        name: np.array([res[f"{name}{tag}{k}"] for k in range(K)])
        for name in ("psi_be", "psi_je", "lam_be", "lam_je")
    }


def solve_robust_beam_subproblem(ch: ChannelSet, refl, t_u, t_e, p1_max, p2_max, xi_ie, xi_je,
                                 step: StepConfig, solver_tol=1e-8):
    """Beam problem with every eve constrained through its worst case over the balls."""
    N, _, K = ch.dims
    q = beam_quadratics(ch, refl)
    rc = compose_robust(ch, refl)
    p = ConicProgram()
    v = _BeamVars(p, N)
    slack = p.scalar("l")
    p.add_le(v.pow1, p1_max)
    p.add_le(v.pow2, p2_max)
    psi_be, psi_je, lam_be, lam_je = _eve_vars(p, K)
    phi_u = add_rate_surrogate(p, v.quad(q.A_u, 1), v.quad(q.B_u, 2), psi_be, psi_je, t_u, t_e, slack)
    for blk in build_beam_lmis_compact(v.X1, v.X2, rc, psi_be, psi_je, lam_be, lam_je, xi_ie, xi_je):
        p.add_lmi(blk)
    set_objective(p, phi_u, slack, v.pow1 + v.pow2, step)
    res = p.solve(tol=solver_tol)
    if res.status != OPTIMAL:
        return None
    F1, F2 = v.unpack(res.values)
    return BeamIterate(F1, F2, res["l"], res.objective, res.solve_time, _eve_values(res, K))


def solve_robust_phase_subproblem(ch: ChannelSet, f1, f2, t_wu, t_we, xi_ie, xi_je,
                                  step: StepConfig, solver_tol=1e-8):
    _, M, K = ch.dims
    q = phase_quadratics(ch, f1, f2)
    H_F, G_F = phase_stacks(ch, f1, f2)
    rc = compose_robust(ch, np.ones(M))
    p = ConicProgram()
    W = p.matrix("W", M + 1)
    unit_diagonal(p, W)
    slack = p.scalar("l")
    psi_be, psi_je, lam_be, lam_je = _eve_vars(p, K)
    phi_u = add_rate_surrogate(p, tr(q.Q_u, W), tr(q.R_u, W), psi_be, psi_je, t_wu, t_we, slack)
    for blk in build_phase_lmis(W, H_F, G_F, rc.h_X, rc.g_X, psi_be, psi_je, lam_be, lam_je, xi_ie, xi_je):
        p.add_lmi(blk)
    set_objective(p, phi_u, slack, None, StepConfig("rate", 0.0, step.rate_floor, step.bandwidth))
    res = p.solve(tol=solver_tol)
    if res.status != OPTIMAL:
        return None
    return PhaseIterate(res["W"], res["l"], res.objective, res.solve_time, _eve_values(res, K))


def certify(blocks_fn, n_eves, upper_first=True, solver_tol=1e-9):
    """Tightest LMI-certified psi per block for fixed data, with eigenvalue repair.

    ``blocks_fn(psi_be, psi_je, lam_be, lam_je)`` must return the blocks in
    build order.  Returns a dict of arrays plus the final minimum eigenvalues.
    """
    p = ConicProgram()
    psi_be = [p.scalar(f"psi_be{k}") for k in range(n_eves)]
    psi_je = [p.scalar(f"psi_je{k}") for k in range(n_eves)]
    lam_be = [p.scalar(f"lam_be{k}", lower=0.0) for k in range(n_eves)]
    lam_je = [p.scalar(f"lam_je{k}", lower=0.0) for k in range(n_eves)]
    for blk in blocks_fn(psi_be, psi_je, lam_be, lam_je):
        p.add_lmi(blk)
    obj = sum((b - a for a, b in zip(psi_be, psi_je)), start=0.0 * psi_be[0])
    p.maximize(obj)
    res = p.solve(tol=solver_tol)
    if res.status != OPTIMAL:
        return None
    vals = _eve_values(res, n_eves)
    # nudge so that every block is PSD in exact arithmetic, not just to solver tolerance
    for k in range(n_eves):
        for _ in range(5):
            blocks = blocks_fn(vals["psi_be"], vals["psi_je"], vals["lam_be"], vals["lam_je"])
            e_up, e_lo = min_eig(blocks[2 * k]), min_eig(blocks[2 * k + 1])
            if e_up >= 0 and e_lo >= 0:
                break
            if e_up < 0:
                eps = -e_up * 1.01 + 1e-15
                vals["lam_be"][k] += eps
                vals["psi_be"][k] += 2 * eps
            if e_lo < 0:
                eps = -e_lo * 1.01 + 1e-15
                vals["lam_je"][k] += eps
                vals["psi_je"][k] -= 2 * eps
    blocks = blocks_fn(vals["psi_be"], vals["psi_je"], vals["lam_be"], vals["lam_je"])
    vals["min_eig"] = np.array([min_eig(b) for b in blocks])
    return vals


def certify_beams(ch: ChannelSet, refl, f1, f2, xi_ie, xi_je):
    """Certified worst-case leakage/jamming powers for fixed vectors via the beam blocks."""
    rc = compose_robust(ch, refl)
    F1, F2 = np.outer(f1, np.conj(f1)), np.outer(f2, np.conj(f2))
    return certify(lambda a, b, c, d: build_beam_lmis(F1, F2, rc, a, b, c, d, xi_ie, xi_je), ch.dims[2])


def certify_phases(ch: ChannelSet, refl, f1, f2, xi_ie, xi_je):
    """Same through the reflection-stage blocks."""
    H_F, G_F = phase_stacks(ch, f1, f2)
    rc = compose_robust(ch, refl)
    wbar = np.r_[refl, 1.0]
    W = np.outer(wbar, np.conj(wbar))
    return certify(
        lambda a, b, c, d: build_phase_lmis(W, H_F, G_F, rc.h_X, rc.g_X, a, b, c, d, xi_ie, xi_je),
        ch.dims[2],
    )


# -- post-solve validation ------------------------------------------------------

def sampled_quadratics(ch: ChannelSet, refl, f1, f2, xi_ie, xi_je, n_samples=10_000, seed=0):
    """Eve leakage and jamming powers over sampled ball perturbations.

    Returns two ``(n_samples, K)`` arrays; row 0 is the nominal channel.
    """
    from .channel import sample_ball

    rng = np.random.default_rng(seed)
    _, M, K = ch.dims
    a = refl * (ch.H_BI @ f1)
    b = refl * (ch.G_JI @ f2)
    leak = np.empty((n_samples, K))
    jam = np.empty((n_samples, K))
    for k in range(K):
        dh = np.zeros((n_samples, M), complex)
        dg = np.zeros((n_samples, M), complex)
        if n_samples > 1 and M:
            dh[1:] = sample_ball(rng, n_samples - 1, M, xi_ie[k])
            dg[1:] = sample_ball(rng, n_samples - 1, M, xi_je[k])
        leak[:, k] = np.abs(np.vdot(ch.h_BE[k], f1) + np.conj(ch.h_IE_bar[k] + dh) @ a) ** 2
        jam[:, k] = np.abs(np.vdot(ch.g_JE[k], f2) + np.conj(ch.g_IE_bar[k] + dg) @ b) ** 2
    return leak, jam


def certificate_violation(cert, leak, jam):
    """Largest relative amount by which samples break the certified bounds (<= 0 is sound)."""
    up = (leak - cert["psi_be"][None]) / np.maximum(1.0, np.abs(cert["psi_be"]))[None]
    lo = (cert["psi_je"][None] - jam) / np.maximum(1.0, np.abs(cert["psi_je"]))[None]
    return float(max(up.max(), lo.max()))


def validate_robust(prob, sol, seed=0, tol_rate=1e-4, tol_cert=1e-7):
    """Monte-Carlo and certificate checks of a robust solution; returns (ok, report).

    ``prob`` is the noise-normalized problem the solution came from.
    """
    from .metrics import worst_case_rate_mc

    ch, unc, opts = prob.ch, prob.unc, prob.opts
    refl = sol.refl
    f1, f2 = sol.f1, sol.f2  # beams are unchanged by the noise normalization
    mc = worst_case_rate_mc(sol.f1, sol.f2, refl, prob.channels, unc, prob.scenario.system,
                            opts.mc_samples, seed)
    r_th = prob.scenario.system.r_th
    report = {
        "mc_min_rate": mc.min_rate,
        "mc_worst_index": mc.worst_index,
        "mc_worst_h_IE": mc.worst_h_IE,
        "mc_worst_g_IE": mc.worst_g_IE,
        "mc_eve_rate_max": mc.eve_rate_max,
        "rate_ok": mc.min_rate >= r_th - tol_rate,
    }
    leak, jam = sampled_quadratics(ch, refl, f1, f2, unc.xi_ie, unc.xi_je, opts.mc_samples, seed + 1)
    certs = {"beam": certify_beams(ch, refl, f1, f2, unc.xi_ie, unc.xi_je),
             "phase": certify_phases(ch, refl, f1, f2, unc.xi_ie, unc.xi_je)}
    cert_ok = True
    for name, cert in certs.items():
        if cert is None:
            report[f"{name}_certificate"] = None
            cert_ok = False
            continue
        viol = certificate_violation(cert, leak, jam)
        report[f"{name}_certificate"] = {"psi_be": cert["psi_be"], "psi_je": cert["psi_je"],
                                         "min_eig": cert["min_eig"], "max_violation": viol}
        cert_ok &= viol <= tol_cert
    rc = compose_robust(ch, refl)
    F1, F2 = np.outer(f1, np.conj(f1)), np.outer(f2, np.conj(f2))
    bounds = beam_bounds(F1, F2, rc, unc.xi_ie, unc.xi_je)
    report["gamma"] = {
        "gamma1": bounds.gamma1, "sampled_max": leak.max(axis=0),
        "gamma2": bounds.gamma2, "sampled_min": jam.min(axis=0),
    }
    report["certificates_ok"] = cert_ok
    return bool(report["rate_ok"] and cert_ok), report


def algorithm2(scenario, channels: ChannelSet, opts=None):
    """Energy-efficiency maximization robust to eve-side IRS channel errors.

    The returned solution is re-checked by Monte-Carlo sampling and by
    certifying its worst-case eve powers; a failed check sets the status to
    ``robust-validation-failed`` and keeps the report.
    """
    from .alternating import INFEASIBLE, ROBUST_VALIDATION_FAILED, AlternatingSolver, Problem

    sc = scenario if opts is None else replace(scenario, solver=opts)
    prob = Problem(sc, channels, robust=True)
    sol = AlternatingSolver(prob, "ee", "robust-irs").run()
    if sol.status == INFEASIBLE:
        return sol
    ok, report = validate_robust(prob, sol, seed=sc.solver.rng_seed)
    sol.report = report
    if not ok:
        sol.status = ROBUST_VALIDATION_FAILED
    return sol
