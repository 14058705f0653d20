"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION n PASS|FAIL ...`` line straight to the
terminal (bypassing capture) before asserting.  The expensive run sets
(power sweep, zero-radius pairs, rate-floor sweep, element-count sweep) are
built once per session and shared, so criteria that only inspect solutions
(monotone traces, Dinkelbach residuals, constraints, certificates) reuse them.

Set ``IRSJAM_ACCEPT_FULL=1`` to run the 32-element point of the element sweep
on all 20 seeds instead of the first two.
"""
import functools
import math
import os

import numpy as np
import pytest

from irsjam import harness
from irsjam.channel import compose_robust, generate_channels, phase_stacks
from irsjam.metrics import evaluate
from irsjam.perfect import (beam_powers, beam_quadratics, phase_powers, phase_quadratics, update_t_perfect,
                            update_t_phase)
from irsjam.robust import beam_bounds, phase_bounds, update_t_robust, update_t_robust_phase
from irsjam.scenario import default_scenario
from irsjam.sdp import INFEASIBLE, OPTIMAL, ConicProgram, HermAffine, tr
from irsjam.surrogate import lower_neg_log, upper_log
from irsjam.validation import gamma_oracle_report

from conftest import random_beams, random_refl
from oracles import eve_tangent_argmin, user_tangent_argmax

SEEDS = range(20)
P_GRID = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
HIGH_P = (35.0, 40.0)
P_METHODS = ("efficiency-irs", "efficiency-noangle", "efficiency-noirs", "rate-irs", "power-irs", "mrt-irs")
R_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
M_GRID = (4, 8, 16, 32)
FULL = os.environ.get("IRSJAM_ACCEPT_FULL", "") not in ("", "0")
M32_SEEDS = SEEDS if FULL else range(2)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n:>2} {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
        return ok
    return emit


# -- shared run sets ---------------------------------------------------------------

def _cell(sc, method, seed):
    row, sol = harness.solve_cell(sc, method, seed)
    assert sol is not None, row.status
    return sol


@functools.cache
def power_sweep():
    """{(method, p_dbm, seed): solution} for the comparison schemes, robust only at high power."""
    out = {}
    for p in P_GRID:
        sc = default_scenario(p_max_dbm=p)
        methods = P_METHODS + (("robust-irs",) if p in HIGH_P else ())
        for m in methods:
            for s in SEEDS:
                out[m, p, s] = _cell(sc, m, s)
    return out


@functools.cache
def zero_radius_pairs():
    """{seed: (algorithm1 solution, algorithm2 solution at zero radius)} on the default layout."""
    sw = power_sweep()
    sc = default_scenario(xi=0.0)
    return {s: (sw["efficiency-irs", 30.0, s], _cell(sc, "robust-irs", s)) for s in SEEDS}


@functools.cache
def rate_floor_sweep():
    out = {}
    for r in R_GRID:
        sc = default_scenario(r_th=r)
        for m in ("efficiency-irs", "efficiency-noirs"):
            for s in SEEDS:
                out[m, r, s] = _cell(sc, m, s)
    return out


@functools.cache
def element_sweep():
    out = {}
    for M in M_GRID:
        sc = default_scenario(n_irs_elements=M)
        for s in (M32_SEEDS if M == 32 else SEEDS):
            out[M, s] = _cell(sc, "efficiency-irs", s)
    return out


def all_solutions():
    """(scenario, seed, method, solution) for every cached run."""
    for (m, p, s), sol in power_sweep().items():
        yield default_scenario(p_max_dbm=p), s, m, sol
    for s, (_, rob) in zero_radius_pairs().items():
        yield default_scenario(xi=0.0), s, "robust-irs", rob
    for (m, r, s), sol in rate_floor_sweep().items():
        yield default_scenario(r_th=r), s, m, sol
    for (M, s), sol in element_sweep().items():
        yield default_scenario(n_irs_elements=M), s, "efficiency-irs", sol


def _mean_ee(sols):
    return float(np.mean([0.0 if sol.status == INFEASIBLE else sol.ee for sol in sols]))


def _series(method, grid=P_GRID):
    sw = power_sweep()
    return np.array([_mean_ee([sw[method, p, s] for s in SEEDS]) for p in grid])


# -- criterion 1: surrogate tightness -------------------------------------------------

def test_criterion_01_surrogate_tight_at_closed_form(report):
    rng = np.random.default_rng(101)
    sc = default_scenario()
    cfg = sc.system
    worst = 0.0
    for i in range(100):
        ch = generate_channels(sc, 1000 + i)
        f1, f2 = random_beams(rng, cfg.n_antennas, cfg.p1_max * rng.uniform(0.01, 1), cfg.p2_max * rng.uniform(0, 1))
        refl = random_refl(rng, cfg.n_irs_elements)
        F1, F2 = np.outer(f1, np.conj(f1)), np.outer(f2, np.conj(f2))
        q = beam_quadratics(ch.scaled(1 / math.sqrt(cfg.noise_power)), refl)
        t_u, t_e = update_t_perfect(F1, F2, q)
        S_u, J_u, S_e, J_e = beam_powers(q, F1, F2)
        phi_u = math.log(S_u + J_u + 1) + lower_neg_log(J_u + 1, t_u)
        phi_e = [upper_log(s + j + 1, t) - math.log(j + 1) for s, j, t in zip(S_e, J_e, t_e)]
        m = evaluate(f1, f2, refl, ch, cfg)
        worst = max(worst, abs(phi_u - m.r_u * math.log(2) / cfg.bandwidth))
        worst = max(worst, max(abs(a - b * math.log(2) / cfg.bandwidth) for a, b in zip(phi_e, m.r_e)))
    ok = worst <= 1e-8
    report(1, ok, f"max |surrogate - rate*ln2/B| over 100 triples = {worst:.2e} (tol 1e-8)")
    assert ok


# -- criterion 2: closed-form multipliers against golden-section search -----------

def test_criterion_02_closed_forms_match_search(report):
    rng = np.random.default_rng(202)
    sc = default_scenario(xi=1e-3)
    s2 = sc.system.noise_power
    worst = {}

    def note(name, got, want):
        worst[name] = max(worst.get(name, 0.0), abs(got - want))

    for seed in range(10):
        raw = generate_channels(sc, seed)
        ch = raw.scaled(1 / math.sqrt(s2))
        f1, f2 = random_beams(rng, 4, rng.uniform(0.1, 1), rng.uniform(0.1, 1))
        refl = random_refl(rng, 8)
        F1, F2 = np.outer(f1, np.conj(f1)), np.outer(f2, np.conj(f2))
        # perfect CSI, beam step
        q = beam_quadratics(ch, refl)
        t_u, t_e = update_t_perfect(F1, F2, q)
        S_u, J_u, S_e, J_e = beam_powers(q, F1, F2)
        note("perfect beam user", t_u, user_tangent_argmax(S_u, J_u))
        for k in range(2):
            note("perfect beam eve", t_e[k], eve_tangent_argmin(S_e[k], J_e[k]))
        # perfect CSI, phase step
        qp = phase_quadratics(ch, f1, f2)
        w = np.r_[random_refl(rng, 8), 1.0]
        W = np.outer(w, np.conj(w))
        t_wu, t_we = update_t_phase(W, qp)
        S_u, J_u, S_e, J_e = phase_powers(qp, W)
        note("perfect phase user", t_wu, user_tangent_argmax(S_u, J_u))
        for k in range(2):
            note("perfect phase eve", t_we[k], eve_tangent_argmin(S_e[k], J_e[k]))
        # robust, beam step (sigma^2 domain; compared after scaling by sigma^2)
        qr = beam_quadratics(raw, refl)
        b = beam_bounds(F1, F2, compose_robust(raw, refl), [1e-3] * 2, [1e-3] * 2)
        t_u, t_e = update_t_robust(F2, qr.B_u, b, sigma2=s2)
        J_u = float(np.real(np.trace(qr.B_u @ F2)))
        note("robust beam user", t_u * s2, user_tangent_argmax(0.0, J_u, s2) * s2)
        for k in range(2):
            note("robust beam eve", t_e[k] * s2, eve_tangent_argmin(b.gamma1[k], b.gamma2[k], s2) * s2)
        # robust, phase step
        qpr = phase_quadratics(raw, f1, f2)
        H_F, G_F = phase_stacks(raw, f1, f2)
        rc = compose_robust(raw, np.ones(8))
        bp = phase_bounds(W, H_F, G_F, rc.h_X, rc.g_X, [1e-3] * 2, [1e-3] * 2)
        t_wu, t_we = update_t_robust_phase(W, qpr.R_u, bp, sigma2=s2)
        J_u = float(np.real(np.trace(qpr.R_u @ W)))
        note("robust phase user", t_wu * s2, user_tangent_argmax(0.0, J_u, s2) * s2)
        for k in range(2):
            note("robust phase eve", t_we[k] * s2, eve_tangent_argmin(bp.gamma1[k], bp.gamma2[k], s2) * s2)
    ok = max(worst.values()) <= 1e-8
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(2, ok, f"max |closed form - search| (tol 1e-8): {detail}")
    assert ok


# -- criterion 3: monotone traces --------------------------------------------------------

def _monotone(sol, slack=1e-6):
    ee = sol.ee_trace
    return all(b >= a - slack for a, b in zip(ee, ee[1:]))


def test_criterion_03_monotone_traces(report):
    sw = power_sweep()
    a1 = [sw["efficiency-irs", 30.0, s] for s in SEEDS]
    a2 = [sw["robust-irs", p, s] for p in HIGH_P for s in SEEDS]
    bad_mono = [(sol.method, i) for i, sol in enumerate(a1 + a2) if not _monotone(sol)]
    # optimal means the stopping rule fired within the T = 30 cap; iteration-limit means it did not
    labels = [("algorithm1", 30.0, s) for s in SEEDS] + [("algorithm2", p, s) for p in HIGH_P for s in SEEDS]
    unconverged = [lab for lab, sol in zip(labels, a1 + a2) if sol.status != OPTIMAL]
    iters = [sol.iterations for sol in a1 + a2]
    ok = not bad_mono and not unconverged
    report(3, ok, f"algorithm1 x{len(a1)} at 30 dBm, algorithm2 x{len(a2)} at {list(HIGH_P)} dBm: "
                  f"non-monotone {bad_mono}, hit the T = 30 cap (algorithm, dBm, seed) {unconverged}, "
                  f"outer iterations median {int(np.median(iters))} max {max(iters)}")
    assert ok


# -- criterion 4: Dinkelbach residuals ------------------------------------------------------

def test_criterion_04_dinkelbach_residuals(report):
    n, worst = 0, 0.0
    for _, _, _, sol in all_solutions():
        for rec in sol.steps:
            if rec.get("mode") == "ee" and rec.get("status") == "converged":
                n += 1
                worst = max(worst, rec["residual"])
    ok = n > 0 and worst <= 1e-6
    report(4, ok, f"{n} converged efficiency steps, max |N - eta D| = {worst:.2e} (tol 1e-6)")
    assert ok


# -- criterion 5: constraints re-verified by metrics -------------------------------------------

def test_criterion_05_constraints_hold(report):
    n, bad = 0, []
    for sc, seed, method, sol in all_solutions():
        if sol.status == INFEASIBLE:
            continue
        n += 1
        cfg = sc.system
        ch = generate_channels(sc, seed)
        if method == "efficiency-noirs":
            m = evaluate(sol.f1, sol.f2, sol.refl, ch.without_irs(), cfg, with_irs=False)
        else:
            m = evaluate(sol.f1, sol.f2, sol.refl, ch, cfg)
        p1, p2 = np.linalg.norm(sol.f1) ** 2, np.linalg.norm(sol.f2) ** 2
        if m.r_s < cfg.r_th - 1e-6 or p1 > cfg.p1_max + 1e-8 or p2 > cfg.p2_max + 1e-8:
            bad.append((method, seed, m.r_s, cfg.r_th, p1, p2))
    ok = n > 0 and not bad
    report(5, ok, f"{n} returned solutions re-checked, violations: {bad[:5]}")
    assert ok


# -- criterion 6: certificates against sampled perturbations --------------------------------------

def test_criterion_06_certificates_hold_on_samples(report):
    robust = [sol for _, _, m, sol in all_solutions() if m == "robust-irs" and sol.status != INFEASIBLE]
    worst, missing = 0.0, 0
    for sol in robust:
        for name in ("beam_certificate", "phase_certificate"):
            cert = sol.report.get(name)
            if cert is None:
                missing += 1
            else:
                worst = max(worst, cert["max_violation"])
    ok = bool(robust) and missing == 0 and worst <= 1e-7
    report(6, ok, f"{len(robust)} robust solutions, 1e4 samples per eve per ball: max violation {worst:.2e} "
                  f"(tol 1e-7), missing certificates {missing}")
    assert ok


# -- criterion 7: zero radius reproduces perfect CSI ------------------------------------------

def test_criterion_07_zero_radius_matches_perfect(report):
    rel = []
    for s, (a1, a2) in zero_radius_pairs().items():
        rel.append(abs(a2.ee - a1.ee) / max(abs(a1.ee), 1e-300))
    worst = max(rel)
    ok = worst <= 1e-2
    over = [(s, round(r, 4)) for s, r in zip(SEEDS, rel) if r > 1e-2]
    report(7, ok, f"20 paired instances, max relative EE gap {worst:.2e} (tol 1e-2), "
                  f"median {np.median(rel):.1e}, seeds over tolerance {over}")
    assert ok


# -- criterion 8: efficiency versus power budget ----------------------------------------------------

def test_criterion_08_power_sweep_trends(report):
    eff, noang, noirs = _series("efficiency-irs"), _series("efficiency-noangle"), _series("efficiency-noirs")
    rate, power, mrt = _series("rate-irs"), _series("power-irs"), _series("mrt-irs")
    rob = _series("robust-irs", HIGH_P)
    hi = [P_GRID.index(p) for p in HIGH_P]

    a = bool(np.all(eff >= noang) and np.all(noang >= noirs))
    imax = int(np.argmax(eff))
    b = bool(eff[1] > eff[0] and (imax < len(P_GRID) - 1 or abs(eff[-1] - eff[-2]) <= 0.02 * eff[-2]))
    rmax = int(np.argmax(rate))
    c = bool(0 < rmax < len(P_GRID) - 1 and rate[-1] < rate[rmax])
    d = bool(all(power[i] <= min(eff[i], noang[i], mrt[i], rob[j]) for j, i in enumerate(hi)))
    e = bool(all(noirs[i] <= rob[j] <= eff[i] for j, i in enumerate(hi)))
    ok = a and b and c and d and e

    def fmt(x):
        return "[" + " ".join(f"{v:.3f}" for v in x) + "]"

    report(8, ok, f"(a) {a} (b) {b} (c) {c} (d) {d} (e) {e}; seed-averaged EE over {list(P_GRID)} dBm: "
                  f"eff {fmt(eff)} noangle {fmt(noang)} noirs {fmt(noirs)} rate {fmt(rate)} "
                  f"power {fmt(power)} mrt {fmt(mrt)} robust@{list(HIGH_P)} {fmt(rob)}")
    assert ok


# -- criterion 9: feasibility boundary in the rate floor ---------------------------------------------

def _thresholds(method):
    sw = rate_floor_sweep()
    out, clean = [], True
    for s in SEEDS:
        feas = [sw[method, r, s].status != INFEASIBLE for r in R_GRID]
        if True not in feas or all(feas):
            return None, False
        first_bad = feas.index(False)
        clean &= not any(feas[first_bad:])
        out.append(R_GRID[first_bad])
    return out, clean


def test_criterion_09_rate_floor_feasibility(report):
    t_eff, clean_eff = _thresholds("efficiency-irs")
    t_no, clean_no = _thresholds("efficiency-noirs")
    ok = t_eff is not None and t_no is not None and clean_eff and clean_no and np.mean(t_no) <= np.mean(t_eff)
    detail = (f"first infeasible floor, seed mean: efficiency-irs {np.mean(t_eff) if t_eff else None}, "
              f"efficiency-noirs {np.mean(t_no) if t_no else None}; single transition per seed: "
              f"{clean_eff}/{clean_no}")
    report(9, ok, detail)
    assert ok


# -- criterion 10: efficiency versus element count ---------------------------------------------------

def test_criterion_10_more_elements_help(report):
    sw = element_sweep()
    means = [_mean_ee([sw[M, s] for s in SEEDS]) for M in M_GRID[:-1]]
    steps = [means[i + 1] >= means[i] for i in range(len(means) - 1)]
    # the largest array is paired with the previous one on the seeds it ran
    sub = list(M32_SEEDS)
    prev = _mean_ee([sw[M_GRID[-2], s] for s in sub])
    last = _mean_ee([sw[M_GRID[-1], s] for s in sub])
    steps.append(last >= prev)
    ok = all(steps)
    report(10, ok, f"seed-averaged EE for M={list(M_GRID[:-1])}: {[round(v, 4) for v in means]}; "
                   f"M=16 vs M=32 on {len(sub)} paired seeds: {prev:.4f} -> {last:.4f}")
    assert ok


# -- criterion 11: bound oracle report ----------------------------------------------------------------

def test_criterion_11_gamma_report(report, tmp_path):
    rep = gamma_oracle_report(n_instances=50)
    rep.dump(tmp_path / "gamma.json")
    summ = rep.summary()
    # 50 instances x 2 radii x 2 eves x {beam, phase} x {max, min}
    ok = (tmp_path / "gamma.json").stat().st_size > 0 and len(rep.records) == 50 * 2 * 2 * 4 and rep.all_bounds_hold
    dev = {k: f"{v['max_rel_dev']:.1e}" for k, v in summ.items()}
    report(11, ok, f"{len(rep.records)} records, all bounds hold: {rep.all_bounds_hold}, max rel deviation {dev}")
    assert ok


# -- criterion 12: analytic conic fixtures ----------------------------------------------------------------

def test_criterion_12_sdp_fixtures(report):
    results = {}
    p = ConicProgram()
    X = p.matrix("X", 2)
    p.add_le(tr(np.eye(2), X), 1.0)
    p.maximize(tr(np.eye(2), X))
    r = p.solve()
    results["max tr X, tr X <= 1 -> 1"] = r.status == OPTIMAL and abs(r.objective - 1.0) <= 1e-6

    p = ConicProgram()
    X = p.matrix("X", 2)
    p.add_le(tr(np.eye(2), X), -1.0)
    p.maximize(tr(np.eye(2), X))
    results["tr X <= -1 -> infeasible"] = p.solve().status == INFEASIBLE

    p = ConicProgram()
    s = p.scalar("s")
    p.add_le(s, 3.0)
    p.maximize(s)
    r = p.solve()
    results["max s, s <= 3 -> 3"] = r.status == OPTIMAL and abs(r.objective - 3.0) <= 1e-6

    p = ConicProgram()
    s = p.scalar("s")
    p.add_lmi(HermAffine(3).add_scalar(s, np.eye(3)).add_const(-np.eye(3)))
    p.maximize(-s)
    r = p.solve()
    results["min s, sI - I psd -> 1"] = r.status == OPTIMAL and abs(r["s"] - 1.0) <= 1e-6

    ok = all(results.values())
    report(12, ok, "; ".join(f"{k}: {'ok' if v else 'wrong'}" for k, v in results.items()))
    assert ok
