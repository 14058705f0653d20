"""Random channel generation and the stacked channel forms used by the SDPs.

Conventions: a receiver sees ``(h_B^H + h_I^H diag(v) H_BI) f`` where ``v`` holds
the unit-modulus reflection coefficients.  Extending ``v`` with a trailing 1
gives the lifted identity ``vbar^T H_j f`` with ``H_j = [diag(conj h_I) H_BI; h_B^H]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .scenario import Scenario


def crandn(rng, *shape):
    """Circularly symmetric CN(0, 1) draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelSet:
    H_BI: np.ndarray  # M x N, BS -> IRS
    h_BU: np.ndarray  # N
    h_BE: np.ndarray  # K x N
    G_JI: np.ndarray  # M x N, jammer -> IRS
    g_JU: np.ndarray  # N
    g_JE: np.ndarray  # K x N
    h_IU: np.ndarray  # M, IRS -> user (information path)
    g_IU: np.ndarray  # M, IRS -> user (jamming path)
    h_IE_bar: np.ndarray  # K x M, nominal estimates
    g_IE_bar: np.ndarray  # K x M
    true_h_IE: np.ndarray | None = None
    true_g_IE: np.ndarray | None = None

    @property
    def dims(self):
        K, N = self.h_BE.shape
        return N, self.H_BI.shape[0], K

    def check(self, n_antennas, n_irs, n_eves):
        want = {
            "H_BI": (n_irs, n_antennas), "h_BU": (n_antennas,), "h_BE": (n_eves, n_antennas),
            "G_JI": (n_irs, n_antennas), "g_JU": (n_antennas,), "g_JE": (n_eves, n_antennas),
            "h_IU": (n_irs,), "g_IU": (n_irs,), "h_IE_bar": (n_eves, n_irs), "g_IE_bar": (n_eves, n_irs),
        }
        for name, shape in want.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    def scaled(self, s):
        """Scale every transmitter-side channel by ``s``.

        With ``s = 1/sigma`` the noise power becomes 1, which keeps the SDP
        data well conditioned.
        """
        return replace(
            self,
            H_BI=self.H_BI * s, h_BU=self.h_BU * s, h_BE=self.h_BE * s,
            G_JI=self.G_JI * s, g_JU=self.g_JU * s, g_JE=self.g_JE * s,
        )

    def with_eves(self, h_IE, g_IE):
        """Same set with the eve-side IRS channels swapped in as the nominal values."""
        return replace(self, h_IE_bar=np.asarray(h_IE), g_IE_bar=np.asarray(g_IE))

    def truth(self):
        if self.true_h_IE is None:
            return self
        return self.with_eves(self.true_h_IE, self.true_g_IE)

    def without_irs(self):
        """Zero every channel that passes through the IRS."""
        z = np.zeros_like
        return replace(
            self, H_BI=z(self.H_BI), G_JI=z(self.G_JI), h_IU=z(self.h_IU), g_IU=z(self.g_IU),
            h_IE_bar=z(self.h_IE_bar), g_IE_bar=z(self.g_IE_bar),
            true_h_IE=None if self.true_h_IE is None else z(self.true_h_IE),
            true_g_IE=None if self.true_g_IE is None else z(self.true_g_IE),
        )


def sample_ball(rng, n, dim, xi, boundary_fraction=0.5):
    """``n`` complex vectors of length ``dim`` with norm at most ``xi``.

    The first ``round(boundary_fraction * n)`` rows lie on the sphere; the
    rest are uniform in the ball.
    """
    z = crandn(rng, n, dim)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    u = z / norms
    radius = rng.uniform(size=(n, 1)) ** (1.0 / (2 * dim))
    n_edge = int(round(boundary_fraction * n))
    radius[:n_edge] = 1.0
    return xi * radius * u


def sample_perturbation(bar_vec, xi, seed=None):
    """``bar_vec + delta`` with ``|delta| <= xi``; on the sphere half of the time."""
    bar_vec = np.asarray(bar_vec, dtype=complex)
    if xi == 0:
        return bar_vec.copy()
    rng = np.random.default_rng(seed)
    edge = rng.uniform() < 0.5
    d = sample_ball(rng, 1, bar_vec.size, xi, boundary_fraction=1.0 if edge else 0.0)[0]
    return bar_vec + d.reshape(bar_vec.shape)


def generate_channels(scenario: Scenario, seed) -> ChannelSet:
    cfg, geo, pl, unc = scenario.system, scenario.geometry, scenario.pathloss, scenario.uncertainty
    N, M, K = cfg.n_antennas, cfg.n_irs_elements, cfg.n_eves
    rng = np.random.default_rng(seed)

    def link(name, a, b, *shape):
        return np.sqrt(pl.gain(name, geo.distance(a, b))) * crandn(rng, *shape)

    # direct links first, so they do not depend on the IRS size
    h_BU = link("BU", geo.bs, geo.user, N)
    g_JU = link("JU", geo.jammer, geo.user, N)
    h_BE = np.stack([link("BE", geo.bs, e, N) for e in geo.eves])
    g_JE = np.stack([link("JE", geo.jammer, e, N) for e in geo.eves])
    H_BI = link("BI", geo.bs, geo.irs, M, N)
    G_JI = link("JI", geo.jammer, geo.irs, M, N)
    h_IU = link("IU", geo.irs, geo.user, M)
    g_IU = link("IU", geo.irs, geo.user, M)
    true_h = np.stack([link("IE", geo.irs, e, M) for e in geo.eves])
    true_g = np.stack([link("IE", geo.irs, e, M) for e in geo.eves])

    # the estimate sits inside the ball around the truth
    h_bar = np.empty_like(true_h)
    g_bar = np.empty_like(true_g)
    for k in range(K):
        h_bar[k] = true_h[k] - (sample_perturbation(np.zeros(M), unc.xi_ie[k], rng) if M else 0)
        g_bar[k] = true_g[k] - (sample_perturbation(np.zeros(M), unc.xi_je[k], rng) if M else 0)
    return ChannelSet(H_BI, h_BU, h_BE, G_JI, g_JU, g_JE, h_IU, g_IU, h_bar, g_bar, true_h, true_g)


@dataclass(frozen=True)
class AugmentedChannels:
    """Lifted channels, (M+1) x N each; ``X[k]`` indexes eve k."""

    H_U: np.ndarray
    G_U: np.ndarray
    H_E: np.ndarray  # K x (M+1) x N
    G_E: np.ndarray


def lift(h_I, H_BI, h_B):
    """``[diag(conj h_I) H_BI; h_B^H]`` so that ``[v; 1]^T lift f`` is the received amplitude."""
    return np.vstack([np.conj(h_I)[:, None] * H_BI, np.conj(h_B)[None, :]])


def compose_perfect(channels: ChannelSet, truth=False) -> AugmentedChannels:
    ch = channels.truth() if truth else channels
    H_U = lift(ch.h_IU, ch.H_BI, ch.h_BU)
    G_U = lift(ch.g_IU, ch.G_JI, ch.g_JU)
    H_E = np.stack([lift(ch.h_IE_bar[k], ch.H_BI, ch.h_BE[k]) for k in range(ch.dims[2])])
    G_E = np.stack([lift(ch.g_IE_bar[k], ch.G_JI, ch.g_JE[k]) for k in range(ch.dims[2])])
    return AugmentedChannels(H_U, G_U, H_E, G_E)


def check_phases(phases, tol=1e-9):
    v = np.asarray(phases, dtype=complex)
    if np.any(np.abs(np.abs(v) - 1.0) > tol):
        raise ValueError("reflection coefficients must have unit modulus")
    return v


@dataclass(frozen=True)
class RobustChannels:
    """Eve-side stacks for a fixed reflection vector.

    ``h_X[k]^H @ H_X[k] @ f1`` is eve k's information amplitude, where the
    augmented vector ``h_X[k] = [h_IE[k]; 1]`` carries all the uncertainty in
    its first M entries.
    """

    H_X: np.ndarray  # K x (M+1) x N
    G_X: np.ndarray
    h_X: np.ndarray  # K x (M+1), nominal
    g_X: np.ndarray


def augment(vec):
    return np.concatenate([vec, [1.0 + 0j]])


def compose_robust(channels: ChannelSet, phases) -> RobustChannels:
    """``phases`` are the M unit-modulus reflection coefficients."""
    v = check_phases(phases)
    ch = channels
    K = ch.dims[2]
    H_X = np.stack([np.vstack([v[:, None] * ch.H_BI, np.conj(ch.h_BE[k])[None, :]]) for k in range(K)])
    G_X = np.stack([np.vstack([v[:, None] * ch.G_JI, np.conj(ch.g_JE[k])[None, :]]) for k in range(K)])
    h_X = np.stack([augment(ch.h_IE_bar[k]) for k in range(K)])
    g_X = np.stack([augment(ch.g_IE_bar[k]) for k in range(K)])
    return RobustChannels(H_X, G_X, h_X, g_X)


def phase_stacks(channels: ChannelSet, f1, f2):
    """Diagonal eve stacks for fixed beams: ``h_X^H diag(H_F) vbar`` is the amplitude.

    Returns (H_F, G_F), each K x (M+1) holding the diagonals.
    """
    ch = channels
    K = ch.dims[2]
    H_F = np.stack([np.concatenate([ch.H_BI @ f1, [np.vdot(ch.h_BE[k], f1)]]) for k in range(K)])
    G_F = np.stack([np.concatenate([ch.G_JI @ f2, [np.vdot(ch.g_JE[k], f2)]]) for k in range(K)])
    return H_F, G_F


# -- dump / load ------------------------------------------------------------

def _pairs(a):
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _unpairs(x):
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def channels_to_dict(channels: ChannelSet):
    out = {}
    for f in fields(channels):
        val = getattr(channels, f.name)
        out[f.name] = None if val is None else {"shape": list(np.shape(val)), "data": _pairs(val)}
    return out


def channels_from_dict(doc) -> ChannelSet:
    kw = {}
    for f in fields(ChannelSet):
        item = doc.get(f.name)
        if item is None:
            kw[f.name] = None
        else:
            kw[f.name] = _unpairs(item["data"]).reshape(item["shape"]) if item["data"] else np.zeros(item["shape"], complex)
    return ChannelSet(**kw)


def dump_channels(channels: ChannelSet, path):
    Path(path).write_text(json.dumps(channels_to_dict(channels)) + "\n")


def load_channels(path) -> ChannelSet:
    return channels_from_dict(json.loads(Path(path).read_text()))
