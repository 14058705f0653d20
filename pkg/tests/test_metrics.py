from dataclasses import replace

import numpy as np
import pytest

from irsjam.channel import ChannelSet, generate_channels
from irsjam.metrics import (batch_beams, batch_reflections, energy_efficiency, evaluate, secrecy_from_sinr,
                            secrecy_rate, sinr, total_power, worst_case_metrics, worst_case_rate_mc)
from irsjam.scenario import SystemConfig, UncertaintyConfig, default_scenario

from conftest import random_beams, random_refl


def _unit_channels(K=1):
    one = np.ones(1, complex)
    return ChannelSet(np.ones((1, 1), complex), one, np.ones((K, 1), complex), np.ones((1, 1), complex), one,
                      np.ones((K, 1), complex), one, one, np.ones((K, 1), complex), np.ones((K, 1), complex))


def test_scalar_sinr():
    ch = _unit_channels()
    p, s2 = 0.3, 0.01
    g = sinr(np.array([np.sqrt(p)]), np.zeros(1), np.ones(1), ch, s2)
    assert g == pytest.approx(4 * p / s2, rel=1e-14)


def test_sinr_limits(desk_channels, rng):
    ch = desk_channels
    N, M, _ = ch.dims
    f1, _ = random_beams(rng, N)
    refl = random_refl(rng, M)
    hu = np.conj(ch.h_BU) + (np.conj(ch.h_IU) * refl) @ ch.H_BI
    assert sinr(f1, np.zeros(N), refl, ch, 1e-13) == pytest.approx(abs(hu @ f1) ** 2 / 1e-13, rel=1e-12)
    assert sinr(np.zeros(N), f1, refl, ch, 1e-13) == 0.0


def test_secrecy_from_sinr():
    assert secrecy_from_sinr(3.0, [1.0]) == pytest.approx(1.0, abs=1e-15)
    assert secrecy_from_sinr(2.0, [2.0, 2.0]) == 0.0
    assert secrecy_from_sinr(1.0, [5.0]) == 0.0
    assert secrecy_from_sinr(3.0, [1.0], bandwidth=2.0) == pytest.approx(2.0)


def test_zero_beams():
    cfg = default_scenario().system
    z = np.zeros(4)
    # independent evaluation of 2 * 10^(-0.7) + 10^(-1)
    assert total_power(z, z, cfg) == pytest.approx(2 * 10 ** -0.7 + 10 ** -1, rel=1e-12)
    assert total_power(z, z, cfg) == pytest.approx(0.4990524629937759, rel=1e-12)
    ch = generate_channels(default_scenario(), 0)
    assert secrecy_rate(z, z, np.ones(8), ch, cfg) == 0.0
    assert energy_efficiency(z, z, np.ones(8), ch, cfg) == 0.0


def test_transmit_power_only():
    cfg = SystemConfig(n_irs_elements=0, p_bs=1e-30, p_g=1e-30, p_irs=1e-30)
    assert total_power(np.array([1.0, 0.0]), np.zeros(2), cfg) == pytest.approx(1.0, rel=1e-12)


def _one_bit_instance():
    # user gain 4 per unit power, eve gain 4/3: with p = 0.75, gamma_u = 3 and gamma_e = 1
    ch = replace(_unit_channels(), h_BE=np.array([[np.sqrt(4 / 3) + 0j]]), h_IE_bar=np.array([[0j]]))
    return ch, np.array([np.sqrt(0.75)])


def test_one_bit_instance():
    ch, f1 = _one_bit_instance()
    cfg = SystemConfig(n_antennas=1, n_irs_elements=1, n_eves=1, noise_power=1.0)
    m = evaluate(f1, np.zeros(1), np.ones(1), ch, cfg)
    assert m.gamma_u == pytest.approx(3.0, rel=1e-12)
    assert m.gamma_e[0] == pytest.approx(1.0, rel=1e-12)
    assert m.r_s == pytest.approx(1.0, rel=1e-12)


def test_efficiency_of_one_bit_at_half_watt():
    ch, f1 = _one_bit_instance()
    # circuit powers chosen so that the total is 0.5 W
    tiny = 1e-30
    cfg = SystemConfig(n_antennas=1, n_irs_elements=1, n_eves=1, noise_power=1.0,
                       amplifier=(0.5 - 3 * tiny) / 0.75, p_bs=tiny, p_g=tiny, p_irs=tiny)
    m = evaluate(f1, np.zeros(1), np.ones(1), ch, cfg)
    assert m.p_tot == pytest.approx(0.5, rel=1e-12)
    assert m.ee == pytest.approx(2.0, rel=1e-12)


def test_efficiency_identities(desk, desk_channels, rng):
    cfg = desk.system
    N, M, _ = desk_channels.dims
    for _ in range(20):
        f1, f2 = random_beams(rng, N, 0.5, 0.3)
        refl = random_refl(rng, M)
        m = evaluate(f1, f2, refl, desk_channels, cfg)
        assert m.ee * m.p_tot == pytest.approx(m.r_s, rel=1e-12)
        # a global phase on either beam changes nothing
        m2 = evaluate(f1 * np.exp(0.7j), f2 * np.exp(-2j), refl, desk_channels, cfg)
        assert m2.r_s == pytest.approx(m.r_s, rel=1e-12, abs=1e-15)
        costly = replace(cfg, p_bs=2 * cfg.p_bs, p_g=2 * cfg.p_g, p_irs=2 * cfg.p_irs)
        if m.ee > 0:
            assert evaluate(f1, f2, refl, desk_channels, costly).ee < m.ee


def test_rejects_non_unit_reflections(desk, desk_channels):
    with pytest.raises(ValueError):
        evaluate(np.ones(4), np.ones(4), 0.5 * np.ones(8), desk_channels, desk.system)


def test_monte_carlo_degenerate_cases(desk, desk_channels, rng):
    cfg = desk.system
    N, M, K = desk_channels.dims
    f1, f2 = random_beams(rng, N)
    refl = random_refl(rng, M)
    nominal = secrecy_rate(f1, f2, refl, desk_channels, cfg)
    zero = worst_case_rate_mc(f1, f2, refl, desk_channels, UncertaintyConfig.uniform(0.0, K), cfg, 200, seed=1)
    assert np.allclose(zero.rates, nominal, rtol=1e-12, atol=0)
    one = worst_case_rate_mc(f1, f2, refl, desk_channels, desk.uncertainty, cfg, 1, seed=1)
    assert one.min_rate == pytest.approx(nominal, rel=1e-12, abs=0)
    with pytest.raises(ValueError):
        worst_case_rate_mc(f1, f2, refl, desk_channels, desk.uncertainty, cfg, 0)


def test_exact_worst_case_bounds_samples(rng):
    sc = default_scenario(xi=3e-4)
    ch = generate_channels(sc, 4)
    N, M, _ = ch.dims
    for _ in range(5):
        f1, f2 = random_beams(rng, N)
        refl = random_refl(rng, M)
        worst = worst_case_metrics(f1, f2, refl, ch, sc.system, sc.uncertainty)
        mc = worst_case_rate_mc(f1, f2, refl, ch, sc.uncertainty, sc.system, 5000, seed=2)
        assert worst.r_s <= mc.min_rate + 1e-12
        assert np.all(mc.eve_rate_max <= worst.r_e * (1 + 1e-12) + 1e-15)


def test_batch_matches_single(desk, desk_channels, rng):
    ch = desk_channels.scaled(1 / np.sqrt(desk.system.noise_power))
    cfg = replace(desk.system, noise_power=1.0, a0=1.0)
    N, M, _ = ch.dims
    F1 = np.array([random_beams(rng, N, 0.4, 0.2)[0] for _ in range(30)])
    F2 = np.array([random_beams(rng, N, 0.4, 0.2)[1] for _ in range(30)])
    refl = random_refl(rng, M)
    r_s, p_tot, ee = batch_beams(ch, cfg, refl, F1, F2)
    rw, _, eew = batch_beams(ch, cfg, refl, F1, F2, unc=desk.uncertainty)
    for i in range(30):
        m = evaluate(F1[i], F2[i], refl, ch, cfg)
        assert r_s[i] == pytest.approx(m.r_s, rel=1e-12, abs=1e-15)
        assert ee[i] == pytest.approx(m.ee, rel=1e-12, abs=1e-15)
        w = worst_case_metrics(F1[i], F2[i], refl, ch, cfg, desk.uncertainty)
        assert rw[i] == pytest.approx(w.r_s, rel=1e-12, abs=1e-15)
    R = np.array([random_refl(rng, M) for _ in range(30)])
    r_s, _, _ = batch_reflections(ch, cfg, F1[0], F2[0], R)
    for i in range(30):
        assert r_s[i] == pytest.approx(evaluate(F1[0], F2[0], R[i], ch, cfg).r_s, rel=1e-12, abs=1e-15)
