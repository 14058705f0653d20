"""Scenario configuration: system parameters, layout, path loss, CSI radii.

Everything inside the package is linear (watts, linear gains).  Decibel
quantities only appear in scenario files and are converted on load.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

LINKS = ("BU", "BE", "JU", "JE", "BI", "JI", "IU", "IE")


def dbm_to_watt(x):
    """dBm to watts; works elementwise on arrays."""
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0) if np.ndim(x) else 10.0 ** ((x - 30.0) / 10.0)


def watt_to_dbm(p):
    return 10.0 * math.log10(p) + 30.0


def db_to_linear(x):
    return 10.0 ** (float(x) / 10.0)


class InvalidConfig(ValueError):
    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class ConfigErrors(ValueError):
    """All invariant violations found in one scenario."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class SystemConfig:
    n_antennas: int = 4
    n_irs_elements: int = 8
    n_eves: int = 2
    bandwidth: float = 1.0
    noise_power: float = dbm_to_watt(-105.0)
    amplifier: float = 1.0
    p1_max: float = 1.0
    p2_max: float = 1.0
    p_bs: float = dbm_to_watt(23.0)
    p_g: float = dbm_to_watt(23.0)
    p_irs: float = dbm_to_watt(20.0)
    r_th: float = 0.5
    a0: float = field(default=None)

    def __post_init__(self):
        if self.a0 is None:
            object.__setattr__(self, "a0", 1.0 / self.noise_power if self.noise_power > 0 else math.inf)

    @property
    def circuit_power(self):
        # no IRS, no IRS control power
        irs = self.p_irs if self.n_irs_elements > 0 else 0.0
        return self.p_bs + self.p_g + irs


@dataclass(frozen=True)
class Geometry:
    bs: tuple = (5.0, 0.0, 20.0)
    jammer: tuple = (5.0, 0.0, 15.0)
    irs: tuple = (0.0, 100.0, 2.0)
    user: tuple = (3.0, 100.0, 0.0)
    eves: tuple = ((2.0, 105.0, 0.0), (2.0, 102.5, 0.0))

    def distance(self, a, b):
        return float(np.linalg.norm(np.subtract(a, b)))

    def node(self, name):
        return getattr(self, {"B": "bs", "J": "jammer", "I": "irs", "U": "user"}[name])


# the five eavesdropper sites of the reference layout
REFERENCE_EVES = ((2.0, 105.0, 0.0), (2.0, 102.5, 0.0), (2.0, 100.0, 0.0), (2.0, 97.5, 0.0), (2.0, 95.0, 0.0))


@dataclass(frozen=True)
class PathLossModel:
    g0: float = db_to_linear(-30.0)
    exponents: dict = field(
        default_factory=lambda: {
            "BU": 5.0, "BE": 5.0, "JU": 5.0, "JE": 5.0,
            "BI": 3.5, "JI": 3.5, "IU": 2.0, "IE": 3.0,
        }
    )

    @classmethod
    def literal(cls, g0=db_to_linear(-30.0)):
        """Alternative reading where the jammer gets the short-range exponents."""
        return cls(g0, {"BU": 5.0, "BE": 5.0, "JU": 2.0, "JE": 3.0,
                        "BI": 3.5, "JI": 3.5, "IU": 2.0, "IE": 3.0})

    def gain(self, link, d):
        return self.g0 * d ** (-self.exponents[link])


@dataclass(frozen=True)
class UncertaintyConfig:
    xi_ie: tuple = (1e-4, 1e-4)
    xi_je: tuple = (1e-4, 1e-4)

    @classmethod
    def uniform(cls, xi, n_eves):
        return cls(tuple([float(xi)] * n_eves), tuple([float(xi)] * n_eves))


@dataclass(frozen=True)
class SolverOptions:
    outer_tol: float = 1e-5
    max_outer_iters: int = 30
    dinkelbach_tol: float = 1e-7
    dinkelbach_max_iters: int = 50
    rank_one_tol: float = 1e-6
    n_randomizations: int = 200
    mc_samples: int = 10_000
    rng_seed: int = 0


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig
    geometry: Geometry
    pathloss: PathLossModel
    uncertainty: UncertaintyConfig
    solver: SolverOptions = SolverOptions()

    def with_system(self, **changes):
        return replace(self, system=replace(self.system, **changes))

    def with_solver(self, **changes):
        return replace(self, solver=replace(self.solver, **changes))

    def with_radius(self, xi):
        return replace(self, uncertainty=UncertaintyConfig.uniform(xi, self.system.n_eves))


def config_violations(cfg, geo, pl, unc, opts=None):
    """Every invariant violation as a list of InvalidConfig."""
    errs = []

    def bad(name, reason):
        errs.append(InvalidConfig(name, reason))

    if cfg.n_antennas < 1:
        bad("n_antennas", "must be >= 1")
    if cfg.n_irs_elements < 0:
        bad("n_irs_elements", "must be >= 0")
    if cfg.n_eves < 1:
        bad("n_eves", "must be >= 1")
    for name in ("bandwidth", "noise_power", "amplifier", "p1_max", "p2_max", "p_bs", "p_g", "p_irs"):
        v = getattr(cfg, name)
        if not (np.isfinite(v) and v > 0):
            bad(name, f"must be strictly positive, got {v!r}")
    if not (np.isfinite(cfg.r_th) and cfg.r_th >= 0):
        bad("r_th", f"must be >= 0, got {cfg.r_th!r}")
    if cfg.noise_power > 0 and abs(cfg.a0 * cfg.noise_power - 1.0) > 1e-12:
        bad("a0", "must equal 1/noise_power")

    if len(geo.eves) != cfg.n_eves:
        bad("geometry.eves", f"expected {cfg.n_eves} eavesdropper positions, got {len(geo.eves)}")
    points = [("bs", geo.bs), ("jammer", geo.jammer), ("irs", geo.irs), ("user", geo.user)]
    points += [(f"eve{k}", p) for k, p in enumerate(geo.eves)]
    for name, p in points:
        if len(p) != 3 or not np.all(np.isfinite(p)):
            bad(f"geometry.{name}", "position must be three finite coordinates")
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            (na, pa), (nb, pb) = points[i], points[j]
            if len(pa) == 3 and len(pb) == 3 and np.linalg.norm(np.subtract(pa, pb)) <= 0.0:
                bad("distance", f"{na} and {nb} coincide")

    if not pl.g0 > 0:
        bad("pathloss.g0", "must be > 0")
    for link in LINKS:
        c = pl.exponents.get(link)
        if c is None:
            bad(f"pathloss.{link}", "missing exponent")
        elif not c >= 0:
            bad(f"pathloss.{link}", "exponent must be >= 0")
    if pl.exponents.get("IU", 0) > pl.exponents.get("IE", math.inf):
        bad("pathloss.IU", "IRS-user exponent must not exceed IRS-eve exponent")

    for name in ("xi_ie", "xi_je"):
        radii = getattr(unc, name)
        if len(radii) != cfg.n_eves:
            bad(f"uncertainty.{name}", f"expected {cfg.n_eves} radii, got {len(radii)}")
        if any(not (r >= 0) for r in radii):
            bad(f"uncertainty.{name}", "radii must be >= 0")

    if opts is not None:
        for name in ("outer_tol", "dinkelbach_tol", "rank_one_tol"):
            if not getattr(opts, name) > 0:
                bad(f"solver.{name}", "must be > 0")
        for name in ("max_outer_iters", "dinkelbach_max_iters", "n_randomizations", "mc_samples"):
            if getattr(opts, name) < 1:
                bad(f"solver.{name}", "must be >= 1")
    return errs


def validate_config(cfg, geo, pl, unc, opts=None) -> Scenario:
    """Bundle the parts into a Scenario, or raise ConfigErrors listing every problem."""
    errs = config_violations(cfg, geo, pl, unc, opts)
    if errs:
        raise ConfigErrors(errs)
    return Scenario(cfg, geo, pl, unc, opts or SolverOptions())


def default_scenario(n_antennas=4, n_irs_elements=8, n_eves=2, p_max_dbm=30.0, r_th=0.5, xi=1e-4) -> Scenario:
    """Reference layout and power figures at desk scale."""
    cfg = SystemConfig(
        n_antennas=n_antennas,
        n_irs_elements=n_irs_elements,
        n_eves=n_eves,
        p1_max=dbm_to_watt(p_max_dbm),
        p2_max=dbm_to_watt(p_max_dbm),
        r_th=r_th,
    )
    geo = Geometry(eves=REFERENCE_EVES[:n_eves])
    return validate_config(cfg, geo, PathLossModel(), UncertaintyConfig.uniform(xi, n_eves), SolverOptions())


# -- scenario files ---------------------------------------------------------

_DBM_FIELDS = ("noise_power", "p1_max", "p2_max", "p_bs", "p_g", "p_irs")


def scenario_from_dict(doc) -> Scenario:
    """Build a validated Scenario from a parsed scenario document.

    Powers are given in dBm (keys suffixed ``_dbm``), distances in metres.
    A ``p_max_dbm`` key sets both transmit budgets.
    """
    sysd = dict(doc.get("system", {}))
    kw = {}
    for key in ("n_antennas", "n_irs_elements", "n_eves"):
        if key in sysd:
            kw[key] = int(sysd.pop(key))
    for key in ("bandwidth", "amplifier", "r_th"):
        if key in sysd:
            kw[key] = float(sysd.pop(key))
    if "p_max_dbm" in sysd:
        p = dbm_to_watt(float(sysd.pop("p_max_dbm")))
        kw["p1_max"] = kw["p2_max"] = p
    for key in _DBM_FIELDS:
        if f"{key}_dbm" in sysd:
            kw[key] = dbm_to_watt(float(sysd.pop(f"{key}_dbm")))
    if sysd:
        raise ConfigErrors([InvalidConfig(f"system.{k}", "unknown key") for k in sysd])

    geod = doc.get("geometry", {})
    n_eves = kw.get("n_eves", SystemConfig.n_eves)
    geo_kw = {k: tuple(float(c) for c in geod[k]) for k in ("bs", "jammer", "irs", "user") if k in geod}
    eves = geod.get("eves")
    geo_kw["eves"] = tuple(tuple(float(c) for c in e) for e in eves) if eves is not None else REFERENCE_EVES[:n_eves]
    geo = Geometry(**geo_kw)

    pld = doc.get("pathloss", {})
    exps = dict(PathLossModel().exponents)
    exps.update({k: float(v) for k, v in pld.get("exponents", {}).items()})
    g0 = db_to_linear(float(pld["g0_db"])) if "g0_db" in pld else PathLossModel().g0
    pl = PathLossModel(g0=g0, exponents=exps)

    uncd = doc.get("uncertainty", {})

    def radii(key):
        v = uncd.get(key, 1e-4)
        return tuple(float(x) for x in v) if isinstance(v, (list, tuple)) else tuple([float(v)] * n_eves)

    unc = UncertaintyConfig(radii("xi_ie"), radii("xi_je"))
    opts = SolverOptions(**doc.get("solver", {}))
    return validate_config(SystemConfig(**kw), geo, pl, unc, opts)


def scenario_to_dict(sc: Scenario) -> dict:
    s = sc.system
    system = {
        "n_antennas": s.n_antennas,
        "n_irs_elements": s.n_irs_elements,
        "n_eves": s.n_eves,
        "bandwidth": s.bandwidth,
        "amplifier": s.amplifier,
        "r_th": s.r_th,
    }
    for key in _DBM_FIELDS:
        system[f"{key}_dbm"] = watt_to_dbm(getattr(s, key))
    g = sc.geometry
    return {
        "system": system,
        "geometry": {
            "bs": list(g.bs), "jammer": list(g.jammer), "irs": list(g.irs),
            "user": list(g.user), "eves": [list(e) for e in g.eves],
        },
        "pathloss": {"g0_db": 10.0 * math.log10(sc.pathloss.g0), "exponents": dict(sc.pathloss.exponents)},
        "uncertainty": {"xi_ie": list(sc.uncertainty.xi_ie), "xi_je": list(sc.uncertainty.xi_je)},
        "solver": asdict(sc.solver),
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")
