"""Aircraft configuration files: flat ``key = value  # unit`` text."""

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .aircraft import AeroDerivatives, Geometry, InertiaSet, TrimCondition
from .allocation import ConversionContext, LimiterConfig
from .propulsion import EngineModel

DERIVATIVE_KEYS = tuple(f.name for f in AeroDerivatives.__dataclass_fields__.values())
INERTIA_KEYS = ("W", "m", "Ixx", "Iyy", "Izz", "Ixz")
REQUIRED_KEYS = (
    ("S", "b", "c_bar", "y_e")
    + INERTIA_KEYS
    + tuple(f"{k}_d" for k in INERTIA_KEYS)
    + DERIVATIVE_KEYS
    + ("mach", "V_bar", "altitude", "rho", "g")
    + ("T_trim", "T_max", "tau", "zeta", "t_d", "rate_limit")
    + ("aileron_limit", "dT_saturation")
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AircraftConfig:
    nominal_derivs: AeroDerivatives
    inertia: InertiaSet
    damaged_inertia: InertiaSet
    geometry: Geometry
    trim: TrimCondition
    engine: EngineModel
    limiter: LimiterConfig
    source: str = "<string>"

    @property
    def conversion(self):
        return ConversionContext.from_aircraft(self.nominal_derivs, self.geometry, self.trim)

    @property
    def factor(self):
        return self.conversion.factor


def parse_config(text, source="<string>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            num = float(val)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: value for {key!r} is not a number: {val!r}") from None
        if not math.isfinite(num):
            raise ConfigError(f"{source}:{lineno}: value for {key!r} is not finite")
        values[key] = num
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")
    return values


def build_config(values, source="<string>"):
    v = values
    try:
        derivs = AeroDerivatives(**{k: v[k] for k in DERIVATIVE_KEYS})
        inertia = InertiaSet(**{k: v[k] for k in INERTIA_KEYS})
        damaged = InertiaSet(**{k: v[f"{k}_d"] for k in INERTIA_KEYS})
        geom = Geometry(S=v["S"], b=v["b"], c_bar=v["c_bar"], y_e=v["y_e"])
        trim = TrimCondition.level(v["mach"], v["V_bar"], v["altitude"], v["rho"],
                                   inertia.W, geom.S, v["T_trim"], g=v["g"])
        engine = EngineModel(tau=v["tau"], zeta=v["zeta"], t_d=v["t_d"], T_max=v["T_max"],
                             T_trim=v["T_trim"], rate_limit=v["rate_limit"])
        limiter = LimiterConfig(aileron_limit=math.radians(v["aileron_limit"]),
                                dT_saturation=v["dT_saturation"],
                                dT_rate_limit=v["rate_limit"])
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return AircraftConfig(derivs, inertia, damaged, geom, trim, engine, limiter, source)


def default_config_path():
    return resources.files("diffthrust") / "data" / "b747_100.cfg"


def load_config(path=None):
    path = default_config_path() if path is None else Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return build_config(parse_config(text, str(path)), str(path))
