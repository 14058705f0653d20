"""Physical-layer figures of merit for a candidate (f1, f2, reflection vector)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, check_phases, sample_ball
from .scenario import SystemConfig, UncertaintyConfig


def effective(h_B, h_I, H, refl):
    """Row vector ``h_B^H + h_I^H diag(refl) H``."""
    return np.conj(h_B) + (np.conj(h_I) * refl) @ H


def _eff_rows(ch: ChannelSet, refl):
    refl = check_phases(refl)
    if refl.shape != (ch.dims[1],):
        raise ValueError(f"expected {ch.dims[1]} reflection coefficients, got {refl.shape}")
    K = ch.dims[2]
    hu = effective(ch.h_BU, ch.h_IU, ch.H_BI, refl)
    gu = effective(ch.g_JU, ch.g_IU, ch.G_JI, refl)
    he = np.stack([effective(ch.h_BE[k], ch.h_IE_bar[k], ch.H_BI, refl) for k in range(K)])
    ge = np.stack([effective(ch.g_JE[k], ch.g_IE_bar[k], ch.G_JI, refl) for k in range(K)])
    return hu, gu, he, ge


def sinr(f1, f2, refl, channels: ChannelSet, noise_power, receiver="U"):
    """Linear SINR at the user (``receiver="U"``) or at eve ``k`` (``receiver=k``)."""
    f1, f2 = np.asarray(f1), np.asarray(f2)
    N = channels.dims[0]
    if f1.shape != (N,) or f2.shape != (N,):
        raise ValueError("beam vectors must have one entry per antenna")
    hu, gu, he, ge = _eff_rows(channels, refl)
    h, g = (hu, gu) if receiver == "U" else (he[receiver], ge[receiver])
    return abs(h @ f1) ** 2 / (abs(g @ f2) ** 2 + noise_power)


@dataclass(frozen=True)
class SolutionMetrics:
    gamma_u: float
    gamma_e: np.ndarray
    r_u: float
    r_e: np.ndarray
    r_e_max: float
    worst_eve: int
    r_s: float
    p_tot: float
    ee: float


def rates(gamma_u, gamma_e, bandwidth=1.0):
    r_u = bandwidth * np.log2(1.0 + gamma_u)
    r_e = bandwidth * np.log2(1.0 + np.asarray(gamma_e))
    return r_u, r_e


def secrecy_from_sinr(gamma_u, gamma_e, bandwidth=1.0):
    r_u, r_e = rates(gamma_u, gamma_e, bandwidth)
    return max(0.0, float(r_u - np.max(r_e)))


def secrecy_rate(f1, f2, refl, channels: ChannelSet, cfg: SystemConfig):
    return evaluate(f1, f2, refl, channels, cfg).r_s


def total_power(f1, f2, cfg: SystemConfig, with_irs=None):
    """Transmit power through the amplifier plus circuit power.

    ``with_irs=False`` drops the IRS control power; the default follows the
    element count.
    """
    irs = cfg.p_irs if (cfg.n_irs_elements > 0 if with_irs is None else with_irs) else 0.0
    tx = np.linalg.norm(f1) ** 2 + np.linalg.norm(f2) ** 2
    return cfg.amplifier * tx + cfg.p_bs + cfg.p_g + irs


def energy_efficiency(f1, f2, refl, channels: ChannelSet, cfg: SystemConfig, with_irs=None):
    return evaluate(f1, f2, refl, channels, cfg, with_irs).ee


def evaluate(f1, f2, refl, channels: ChannelSet, cfg: SystemConfig, with_irs=None) -> SolutionMetrics:
    f1, f2 = np.asarray(f1, dtype=complex), np.asarray(f2, dtype=complex)
    hu, gu, he, ge = _eff_rows(channels, refl)
    s2 = cfg.noise_power
    gamma_u = abs(hu @ f1) ** 2 / (abs(gu @ f2) ** 2 + s2)
    gamma_e = np.abs(he @ f1) ** 2 / (np.abs(ge @ f2) ** 2 + s2)
    return _pack(gamma_u, gamma_e, total_power(f1, f2, cfg, with_irs), cfg.bandwidth)


def _pack(gamma_u, gamma_e, p_tot, bandwidth):
    r_u, r_e = rates(gamma_u, gamma_e, bandwidth)
    k = int(np.argmax(r_e))
    r_s = max(0.0, float(r_u - r_e[k]))
    return SolutionMetrics(float(gamma_u), gamma_e, float(r_u), r_e, float(r_e[k]), k, r_s, p_tot, r_s / p_tot)


def worst_case_metrics(f1, f2, refl, channels: ChannelSet, cfg: SystemConfig, unc: UncertaintyConfig,
                       with_irs=None) -> SolutionMetrics:
    """Exact worst case over both uncertainty balls, per eve.

    For a fixed beam pair eve k's information amplitude is ``s + d^H a`` with
    ``|d| <= xi``, so its largest modulus is ``|s| + xi |a|``.  The jamming
    amplitude likewise bottoms out at ``max(0, |s_j| - xi_j |b|)``.  The two
    balls are independent, so both extremes are attained together.
    """
    f1, f2 = np.asarray(f1, dtype=complex), np.asarray(f2, dtype=complex)
    refl = check_phases(refl)
    hu, gu, he, ge = _eff_rows(channels, refl)
    s2 = cfg.noise_power
    a = np.linalg.norm(channels.H_BI @ f1)
    b = np.linalg.norm(channels.G_JI @ f2)
    xi_h = np.asarray(unc.xi_ie)
    xi_g = np.asarray(unc.xi_je)
    sig = (np.abs(he @ f1) + xi_h * a) ** 2
    jam = np.maximum(0.0, np.abs(ge @ f2) - xi_g * b) ** 2
    gamma_u = abs(hu @ f1) ** 2 / (abs(gu @ f2) ** 2 + s2)
    return _pack(gamma_u, sig / (jam + s2), total_power(f1, f2, cfg, with_irs), cfg.bandwidth)


@dataclass
class MonteCarloResult:
    min_rate: float
    worst_index: int
    worst_h_IE: np.ndarray
    worst_g_IE: np.ndarray
    rates: np.ndarray
    eve_rate_max: np.ndarray = None  # per eve, largest sampled rate


def worst_case_rate_mc(f1, f2, refl, channels: ChannelSet, unc: UncertaintyConfig, cfg: SystemConfig,
                       n_samples=10_000, seed=0) -> MonteCarloResult:
    """Smallest secrecy rate over sampled eve-side IRS channels.

    Sample 0 is always the nominal channel; the remaining samples perturb
    every eve's two IRS vectors inside their balls (half of them on the
    sphere).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    f1, f2 = np.asarray(f1, dtype=complex), np.asarray(f2, dtype=complex)
    refl = check_phases(refl)
    rng = np.random.default_rng(seed)
    N, M, K = channels.dims
    s2 = cfg.noise_power
    hu, gu, _, _ = _eff_rows(channels, refl)
    gamma_u = abs(hu @ f1) ** 2 / (abs(gu @ f2) ** 2 + s2)
    r_u = cfg.bandwidth * np.log2(1 + gamma_u)

    a = refl * (channels.H_BI @ f1)  # IRS-side amplitudes seen through the reflection
    b = refl * (channels.G_JI @ f2)
    direct_h = np.conj(channels.h_BE) @ f1
    direct_g = np.conj(channels.g_JE) @ f2
    dh = np.zeros((n_samples, K, M), complex)
    dg = np.zeros((n_samples, K, M), complex)
    for k in range(K):
        if n_samples > 1:
            dh[1:, k] = sample_ball(rng, n_samples - 1, M, unc.xi_ie[k])
            dg[1:, k] = sample_ball(rng, n_samples - 1, M, unc.xi_je[k])
    h = channels.h_IE_bar[None] + dh
    g = channels.g_IE_bar[None] + dg
    sig = np.abs(direct_h[None] + np.conj(h) @ a) ** 2
    jam = np.abs(direct_g[None] + np.conj(g) @ b) ** 2
    r_e = cfg.bandwidth * np.log2(1 + sig / (jam + s2))
    r_s = np.maximum(0.0, r_u - r_e.max(axis=1))
    i = int(np.argmin(r_s))
    return MonteCarloResult(float(r_s[i]), i, h[i], g[i], r_s, r_e.max(axis=0))


def _batch_pack(S_u, J_u, S_e, J_e, p_tot, bandwidth):
    r_u = bandwidth * np.log2(1.0 + S_u / (J_u + 1.0))
    r_e = bandwidth * np.log2(1.0 + S_e / (J_e + 1.0))
    r_s = np.maximum(0.0, r_u - r_e.max(axis=1))
    return r_s, p_tot, r_s / p_tot


def batch_beams(ch: ChannelSet, cfg: SystemConfig, refl, F1, F2, unc=None, with_irs=None):
    """(r_s, p_tot, ee) for many beam pairs (rows of F1, F2) at once.

    Expects noise-normalized channels (noise power 1).  With ``unc`` the eve
    terms are the exact worst case over the balls.
    """
    hu, gu, he, ge = _eff_rows(ch, refl)
    a1 = F1 @ hu
    a2 = F2 @ gu
    s_e = np.abs(F1 @ he.T)
    j_e = np.abs(F2 @ ge.T)
    if unc is not None:
        s_e = s_e + np.asarray(unc.xi_ie)[None] * np.linalg.norm(F1 @ ch.H_BI.T, axis=1)[:, None]
        j_e = np.maximum(0.0, j_e - np.asarray(unc.xi_je)[None] * np.linalg.norm(F2 @ ch.G_JI.T, axis=1)[:, None])
    p1 = np.sum(np.abs(F1) ** 2, axis=1)
    p2 = np.sum(np.abs(F2) ** 2, axis=1)
    irs = cfg.p_irs if (cfg.n_irs_elements > 0 if with_irs is None else with_irs) else 0.0
    p_tot = cfg.amplifier * (p1 + p2) + cfg.p_bs + cfg.p_g + irs
    return _batch_pack(np.abs(a1) ** 2, np.abs(a2) ** 2, s_e ** 2, j_e ** 2, p_tot, cfg.bandwidth)


def batch_reflections(ch: ChannelSet, cfg: SystemConfig, f1, f2, R, unc=None, with_irs=None):
    """(r_s, p_tot, ee) for many reflection vectors (rows of R) at fixed beams."""
    a = ch.H_BI @ f1
    b = ch.G_JI @ f2

    def amp(h_B, h_I, x, f):
        return np.vdot(h_B, f) + R @ (np.conj(h_I) * x)

    S_u = np.abs(amp(ch.h_BU, ch.h_IU, a, f1)) ** 2
    J_u = np.abs(amp(ch.g_JU, ch.g_IU, b, f2)) ** 2
    K = ch.dims[2]
    s_e = np.stack([np.abs(amp(ch.h_BE[k], ch.h_IE_bar[k], a, f1)) for k in range(K)], axis=1)
    j_e = np.stack([np.abs(amp(ch.g_JE[k], ch.g_IE_bar[k], b, f2)) for k in range(K)], axis=1)
    if unc is not None:
        s_e = s_e + np.asarray(unc.xi_ie)[None] * np.linalg.norm(a)
        j_e = np.maximum(0.0, j_e - np.asarray(unc.xi_je)[None] * np.linalg.norm(b))
    irs = cfg.p_irs if (cfg.n_irs_elements > 0 if with_irs is None else with_irs) else 0.0
    p = cfg.amplifier * (np.linalg.norm(f1) ** 2 + np.linalg.norm(f2) ** 2) + cfg.p_bs + cfg.p_g + irs
    p_tot = np.full(R.shape[0], p)
    return _batch_pack(S_u, J_u, s_e ** 2, j_e ** 2, p_tot, cfg.bandwidth)
