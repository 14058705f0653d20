from dataclasses import replace

import numpy as np
import pytest

from irsjam.alternating import OPTIMAL
from irsjam.baselines import (SOLVERS, BaselineKind, mrt_directions, solve_baseline, solve_mrt, solve_no_angle,
                              solve_no_irs, solve_power_min, solve_rate_max)
from irsjam.channel import generate_channels
from irsjam.metrics import _eff_rows, evaluate
from irsjam.perfect import algorithm1
from irsjam.scenario import default_scenario

from conftest import random_refl

SEED = 1


@pytest.fixture(scope="module")
def high_power():
    sc = default_scenario(p_max_dbm=40.0)
    ch = generate_channels(sc, SEED)
    return sc, ch, {
        "eff": algorithm1(sc, ch),
        "rate": solve_rate_max(sc, ch),
        "power": solve_power_min(sc, ch),
        "noirs": solve_no_irs(sc, ch),
        "noangle": solve_no_angle(sc, ch),
        "mrt": solve_mrt(sc, ch),
    }


def test_every_kind_has_a_solver():
    assert set(SOLVERS) == set(BaselineKind)
    assert {k.value for k in BaselineKind} == {"rate-irs", "power-irs", "efficiency-noirs", "efficiency-noangle",
                                               "mrt-irs"}


def test_solutions_meet_their_constraints(high_power):
    sc, ch, sols = high_power
    cfg = sc.system
    for name, sol in sols.items():
        assert np.linalg.norm(sol.f1) ** 2 <= cfg.p1_max + 1e-8, name
        assert np.linalg.norm(sol.f2) ** 2 <= cfg.p2_max + 1e-8, name
        if name != "rate":
            assert sol.r_s >= cfg.r_th - 1e-6, name
        chan = ch.without_irs() if name == "noirs" else ch
        m = evaluate(sol.f1, sol.f2, sol.refl, chan, cfg, with_irs=name != "noirs")
        assert m.ee == pytest.approx(sol.ee, rel=1e-12), name


def test_rate_scheme_dominates_in_rate(high_power):
    _, _, s = high_power
    assert s["rate"].r_s >= s["eff"].r_s - 1e-4
    assert s["rate"].ee <= s["eff"].ee + 1e-4


def test_rate_vanishes_with_budget():
    rates = []
    for dbm in (-10.0, -30.0, -50.0):
        sc = default_scenario(p_max_dbm=dbm, r_th=0.0)
        rates.append(solve_rate_max(sc, generate_channels(sc, SEED)).r_s)
    assert rates[0] >= rates[1] >= rates[2]
    assert rates[2] < 1e-3


def test_power_scheme(high_power):
    sc, _, s = high_power
    p = s["power"]
    tx = np.linalg.norm(p.f1) ** 2 + np.linalg.norm(p.f2) ** 2
    tx_eff = np.linalg.norm(s["eff"].f1) ** 2 + np.linalg.norm(s["eff"].f2) ** 2
    assert tx <= tx_eff * (1 + 1e-9)
    assert sc.system.r_th - 1e-6 <= p.r_s <= sc.system.r_th + 0.05


def test_power_scheme_without_floor():
    sc = default_scenario(r_th=0.0)
    sol = solve_power_min(sc, generate_channels(sc, SEED))
    assert np.linalg.norm(sol.f1) ** 2 + np.linalg.norm(sol.f2) ** 2 <= 1e-6


def test_no_irs_scheme(high_power):
    sc, ch, s = high_power
    assert s["noirs"].ee <= s["eff"].ee + 1e-9
    other = default_scenario(p_max_dbm=40.0, n_irs_elements=16)
    assert solve_no_irs(other, generate_channels(other, SEED)).ee == pytest.approx(s["noirs"].ee, rel=1e-9)


def test_no_irs_scheme_equals_full_design_on_dead_surface():
    sc = default_scenario(p_max_dbm=40.0)
    sc = sc.with_system(p_irs=1e-30)
    ch = generate_channels(sc, SEED).without_irs()
    a = algorithm1(sc, ch)
    b = solve_no_irs(sc, ch)
    assert a.ee == pytest.approx(b.ee, rel=1e-4)


def test_no_angle_scheme(high_power):
    _, _, s = high_power
    assert np.all(s["noangle"].theta == 0.0)
    assert all(rec.get("stage") != "phase" for rec in s["noangle"].steps)


def test_no_angle_scheme_without_elements():
    sc = default_scenario(n_irs_elements=0)
    ch = generate_channels(sc, SEED)
    assert solve_no_angle(sc, ch).ee == pytest.approx(algorithm1(sc, ch).ee, rel=1e-9)


def test_mrt_directions(desk_channels, rng):
    for _ in range(20):
        refl = random_refl(rng, 8)
        u1, u2 = mrt_directions(desk_channels, refl)
        hu, gu, he, ge = _eff_rows(desk_channels, refl)
        # f1 is collinear with the conjugate user channel
        assert abs(abs(np.vdot(u1, np.conj(hu))) - np.linalg.norm(hu)) <= 1e-8 * np.linalg.norm(hu)
        assert abs(gu @ u2) <= 1e-8 * np.linalg.norm(gu)
        assert np.linalg.norm(u2) == pytest.approx(1.0)


def test_mrt_solution_keeps_its_structure(high_power):
    _, ch, s = high_power
    sol = s["mrt"]
    hu, gu, _, _ = _eff_rows(ch, sol.refl)
    n1 = np.linalg.norm(sol.f1)
    assert abs(abs(np.vdot(sol.f1, np.conj(hu))) - n1 * np.linalg.norm(hu)) <= 1e-8 * n1 * np.linalg.norm(hu)
    assert abs(gu @ sol.f2) <= 1e-8 * np.linalg.norm(gu) * max(np.linalg.norm(sol.f2), 1e-300)


def test_mrt_below_full_design_over_budgets():
    best_mrt, best_eff = 0.0, 0.0
    for dbm in (20.0, 30.0, 40.0):
        sc = default_scenario(p_max_dbm=dbm)
        ch = generate_channels(sc, SEED)
        best_mrt = max(best_mrt, solve_mrt(sc, ch).ee)
        best_eff = max(best_eff, algorithm1(sc, ch).ee)
    assert best_mrt <= best_eff + 1e-9


def test_dispatch(desk, desk_channels):
    sol = solve_baseline("efficiency-noirs", desk, desk_channels)
    assert sol.method == "efficiency-noirs" and sol.status == OPTIMAL
