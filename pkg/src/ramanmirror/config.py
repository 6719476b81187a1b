"""Physical parameters: parsing, validation, unit conversion and derived couplings.

Every rate handled downstream is an angular frequency in rad/s.  Config files tag
each number with a unit; plain frequency tags (``Hz``, ``kHz``, ``MHz``) are taken
as rates as written, while ``2pi*MHz`` style tags multiply by 2*pi.  Conversion
happens exactly once, at ingest.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from .constants import C_LIGHT, HBAR, K_B, TWO_PI


class ConfigError(ValueError):
    """Raised for malformed or physically invalid configuration input."""


# ---------------------------------------------------------------------------
# units

_RATE = {"rad/s": 1.0, "1/s": 1.0, "s^-1": 1.0, "Hz": 1.0, "kHz": 1e3,
         "MHz": 1e6, "GHz": 1e9}
_UNITS: dict[str, dict[str, float]] = {
    "rate": _RATE,
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "μm": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "mass": {"kg": 1.0, "g": 1e-3, "mg": 1e-6, "ug": 1e-9, "μg": 1e-9, "µg": 1e-9,
             "ng": 1e-12, "pg": 1e-15},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "μW": 1e-6, "µW": 1e-6,
              "nW": 1e-9, "pW": 1e-12},
    "temperature": {"K": 1.0, "mK": 1e-3},
    "dimensionless": {"": 1.0, "1": 1.0, "dimensionless": 1.0},
}
# canonical SI tag written back out by serialization
_SI_TAG = {"rate": "rad/s", "length": "m", "mass": "kg", "power": "W",
           "temperature": "K", "dimensionless": ""}


def convert(value: float, unit: str, kind: str) -> float:
    """Convert ``value`` tagged with ``unit`` to SI (rad/s for rates)."""
    table = _UNITS[kind]
    tag = unit.strip()
    if kind == "rate":
        compact = tag.replace(" ", "").replace("π", "pi")
        if compact.startswith("2pi"):
            rest = compact[3:].lstrip("*×x·")
            if rest not in _RATE:
                raise ConfigError(f"unknown rate unit {unit!r}")
            return float(value) * TWO_PI * _RATE[rest]
        tag = compact
    if tag not in table:
        raise ConfigError(f"unknown {kind} unit {unit!r}")
    return float(value) * table[tag]


# ---------------------------------------------------------------------------
# config types

_ATOMIC_RATES = ("gamma_a", "gamma_b", "gamma_c", "gamma_d", "gamma_ab", "gamma_ac",
                 "gamma_ad", "gamma_bc", "gamma_bd", "gamma_cd")


@dataclass(frozen=True)
class AtomicConfig:
    """Four-level N-configuration gain atom."""

    g1: float
    g2: float
    Omega: float
    Omega_p: float
    gamma_a: float
    gamma_b: float
    gamma_c: float
    gamma_d: float
    gamma_ab: float
    gamma_ac: float
    gamma_ad: float
    gamma_bc: float
    gamma_bd: float
    gamma_cd: float
    Delta_1: float = 0.0
    Delta_2: float = 0.0
    Delta_c: float = 0.0
    r_a: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        for name in ("r_a",) + _ATOMIC_RATES:
            if not getattr(self, name) >= 0.0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not -1.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [-1, 1], got {self.eta}")

    @classmethod
    def symmetric(cls, gamma: float, **kwargs) -> "AtomicConfig":
        """All decay and dephasing rates set to one value ``gamma``."""
        rates = {name: gamma for name in _ATOMIC_RATES}
        rates.update({k: v for k, v in kwargs.items() if k in _ATOMIC_RATES})
        rest = {k: v for k, v in kwargs.items() if k not in _ATOMIC_RATES}
        return cls(**rates, **rest)


@dataclass(frozen=True)
class CavityModeConfig:
    """One driven cavity mode.

    ``detuning`` is the bare cavity-laser detuning nu - omega_L; positive values
    are red detuned in this package's sign convention.
    """

    nu: float
    length: float
    kappa: float
    power: float
    detuning: float = 0.0
    N_thermal: float = 0.0

    def __post_init__(self):
        if not self.length > 0.0:
            raise ConfigError(f"cavity length must be > 0, got {self.length}")
        if not self.kappa > 0.0:
            raise ConfigError(f"kappa must be > 0, got {self.kappa}")
        if not self.nu > 0.0:
            raise ConfigError(f"cavity frequency must be > 0, got {self.nu}")
        if not self.power >= 0.0:
            raise ConfigError(f"pump power must be >= 0, got {self.power}")
        if not self.N_thermal >= 0.0:
            raise ConfigError(f"thermal photon number must be >= 0, got {self.N_thermal}")

    @classmethod
    def from_wavelength(cls, wavelength: float, **kwargs) -> "CavityModeConfig":
        if not wavelength > 0.0:
            raise ConfigError(f"wavelength must be > 0, got {wavelength}")
        return cls(nu=TWO_PI * C_LIGHT / wavelength, **kwargs)

    @property
    def omega_L(self) -> float:
        return self.nu - self.detuning


@dataclass(frozen=True)
class MirrorConfig:
    """Movable mirror; bath given either as ``temperature`` or ``n_thermal``."""

    mass: float
    omega_m: float
    gamma_m: float
    temperature: float | None = None
    n_thermal: float | None = None

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ConfigError(f"mirror mass must be > 0, got {self.mass}")
        if not self.omega_m > 0.0:
            raise ConfigError(f"omega_m must be > 0, got {self.omega_m}")
        if not self.gamma_m >= 0.0:
            raise ConfigError(f"gamma_m must be >= 0, got {self.gamma_m}")
        if (self.temperature is None) == (self.n_thermal is None):
            raise ConfigError("give exactly one of temperature or n_thermal")
        if self.temperature is not None and not self.temperature >= 0.0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.n_thermal is not None and not self.n_thermal >= 0.0:
            raise ConfigError(f"n_thermal must be >= 0, got {self.n_thermal}")

    @property
    def occupation(self) -> float:
        if self.n_thermal is not None:
            return self.n_thermal
        return thermal_occupation(self.omega_m, self.temperature)


@dataclass(frozen=True)
class SystemConfig:
    atomic: AtomicConfig
    cavity1: CavityModeConfig
    cavity2: CavityModeConfig
    mirror1: MirrorConfig
    mirror2: MirrorConfig

    @property
    def cavities(self) -> tuple[CavityModeConfig, CavityModeConfig]:
        return (self.cavity1, self.cavity2)

    @property
    def mirrors(self) -> tuple[MirrorConfig, MirrorConfig]:
        return (self.mirror1, self.mirror2)

    def with_cavities(self, **changes) -> "SystemConfig":
        """Apply the same field changes to both cavity modes."""
        return replace(self, cavity1=replace(self.cavity1, **changes),
                       cavity2=replace(self.cavity2, **changes))

    def with_mirrors(self, **changes) -> "SystemConfig":
        return replace(self, mirror1=replace(self.mirror1, **changes),
                       mirror2=replace(self.mirror2, **changes))

    def with_atomic(self, **changes) -> "SystemConfig":
        return replace(self, atomic=replace(self.atomic, **changes))


# ---------------------------------------------------------------------------
# derived quantities


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation of a mode at angular frequency ``omega``."""
    if temperature < 0.0:
        raise ConfigError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0.0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (K_B * temperature))


def optomechanical_coupling(nu: float, length: float, mass: float, omega_m: float) -> float:
    if length <= 0.0:
        raise ConfigError(f"cavity length must be > 0, got {length}")
    return (nu / length) * math.sqrt(HBAR / (mass * omega_m))


def drive_amplitude(kappa: float, power: float, omega_L: float) -> float:
    """|epsilon| = sqrt(kappa P / (hbar omega_L))."""
    return math.sqrt(kappa * power / (HBAR * omega_L))


def radiation_pressure_response(G: float, omega_m: float, gamma_m: float) -> float:
    """Static frequency pull per intracavity photon, 2 w_m G^2 / (g_m^2/4 + w_m^2)."""
    return 2.0 * omega_m * G**2 / (gamma_m**2 / 4.0 + omega_m**2)


@dataclass(frozen=True)
class DerivedParams:
    """Per-mode derived quantities, each a pair (mode 1, mode 2)."""

    G: tuple[float, float]
    epsilon: tuple[float, float]
    beta: tuple[float, float]
    n_thermal: tuple[float, float]
    delta0: tuple[float, float]


def derive_params(cfg: SystemConfig) -> DerivedParams:
    G, eps, beta, n, d0 = [], [], [], [], []
    for cav, mir in zip(cfg.cavities, cfg.mirrors):
        g = optomechanical_coupling(cav.nu, cav.length, mir.mass, mir.omega_m)
        G.append(g)
        eps.append(drive_amplitude(cav.kappa, cav.power, cav.omega_L))
        beta.append(radiation_pressure_response(g, mir.omega_m, mir.gamma_m))
        n.append(mir.occupation)
        d0.append(cav.detuning)
    return DerivedParams(tuple(G), tuple(eps), tuple(beta), tuple(n), tuple(d0))


# ---------------------------------------------------------------------------
# JSON config files

_ATOMIC_KINDS = {"g1": "rate", "g2": "rate", "Omega": "rate", "Omega_p": "rate",
                 "Delta_1": "rate", "Delta_2": "rate", "Delta_c": "rate",
                 "r_a": "rate", "eta": "dimensionless",
                 **{name: "rate" for name in _ATOMIC_RATES}}
_CAVITY_KINDS = {"wavelength": "length", "frequency": "rate", "length": "length",
                 "kappa": "rate", "power": "power", "pump_frequency": "rate",
                 "detuning": "rate", "N_thermal": "dimensionless"}
_MIRROR_KINDS = {"mass": "mass", "omega_m": "rate", "gamma_m": "rate",
                 "temperature": "temperature", "n_thermal": "dimensionless"}
_SECTIONS = ("atomic", "cavity1", "cavity2", "mirror1", "mirror2")


def _read_section(doc: dict, name: str, kinds: dict[str, str],
                  extra: tuple[str, ...] = ()) -> dict[str, float]:
    sec = doc.get(name)
    if not isinstance(sec, dict):
        raise ConfigError(f"missing section {name!r}")
    out = {}
    for key, entry in sec.items():
        kind = kinds.get(key, "rate" if key in extra else None)
        if kind is None:
            raise ConfigError(f"unknown key {name}.{key}")
        if not isinstance(entry, dict) or set(entry) != {"value", "unit"}:
            raise ConfigError(f"{name}.{key} must be {{'value': number, 'unit': string}}")
        value, unit = entry["value"], entry["unit"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}.{key}.value must be a number")
        if not isinstance(unit, str):
            raise ConfigError(f"{name}.{key}.unit must be a string")
        out[key] = convert(value, unit, kind)
    return out


def _exactly_one(sec: dict, a: str, b: str, where: str) -> str:
    if (a in sec) == (b in sec):
        raise ConfigError(f"{where}: give exactly one of {a!r} or {b!r}")
    return a if a in sec else b


def config_from_dict(doc: dict[str, Any]) -> SystemConfig:
    """Build a :class:`SystemConfig` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    at = _read_section(doc, "atomic", _ATOMIC_KINDS, extra=("gamma",))
    try:
        if "gamma" in at:
            atomic = AtomicConfig.symmetric(**at)
        else:
            atomic = AtomicConfig(**at)
    except TypeError as exc:
        raise ConfigError(f"atomic: {exc}") from None

    cavities = []
    for name in ("cavity1", "cavity2"):
        sec = _read_section(doc, name, _CAVITY_KINDS)
        where = _exactly_one(sec, "wavelength", "frequency", name)
        if where == "wavelength":
            if not sec["wavelength"] > 0:
                raise ConfigError(f"{name}: wavelength must be > 0")
            nu = TWO_PI * C_LIGHT / sec.pop("wavelength")
        else:
            nu = sec.pop("frequency")
        drive = _exactly_one(sec, "pump_frequency", "detuning", name)
        detuning = sec.pop("detuning") if drive == "detuning" else nu - sec.pop("pump_frequency")
        try:
            cavities.append(CavityModeConfig(nu=nu, detuning=detuning, **sec))
        except TypeError as exc:
            raise ConfigError(f"{name}: {exc}") from None

    mirrors = []
    for name in ("mirror1", "mirror2"):
        sec = _read_section(doc, name, _MIRROR_KINDS)
        _exactly_one(sec, "temperature", "n_thermal", name)
        try:
            mirrors.append(MirrorConfig(**sec))
        except TypeError as exc:
            raise ConfigError(f"{name}: {exc}") from None

    return SystemConfig(atomic, cavities[0], cavities[1], mirrors[0], mirrors[1])


def config_to_dict(cfg: SystemConfig) -> dict[str, Any]:
    """Serialize to the tagged JSON layout in SI units (lossless for floats)."""

    def tagged(obj, kinds, rename=None):
        rename = rename or {}
        out = {}
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is None:
                continue
            key = rename.get(f.name, f.name)
            out[key] = {"value": value, "unit": _SI_TAG[kinds[key]]}
        return out

    return {
        "atomic": tagged(cfg.atomic, _ATOMIC_KINDS),
        "cavity1": tagged(cfg.cavity1, _CAVITY_KINDS, {"nu": "frequency"}),
        "cavity2": tagged(cfg.cavity2, _CAVITY_KINDS, {"nu": "frequency"}),
        "mirror1": tagged(cfg.mirror1, _MIRROR_KINDS),
        "mirror2": tagged(cfg.mirror2, _MIRROR_KINDS),
    }


def load_config(path: str | Path) -> SystemConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc)


def dump_config(cfg: SystemConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, ensure_ascii=False)


def config_snapshot(cfg: SystemConfig) -> dict[str, Any]:
    """Plain SI-valued dictionary, for manifests and sidecars."""
    return asdict(cfg)
