"""Experiment configuration: INI files validated against a fixed schema."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .potentials import FAMILIES, PotentialSpec
from .spectral import GridSpec

SCHEMA_VERSION = 1


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


def _pairs(text: str) -> tuple:
    """'0 0; 1 0' -> ((0, 0), (1, 0))"""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            a, b = chunk.replace(",", " ").split()
            out.append((int(a), int(b)))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip().strip('"').strip("'")


# section -> key -> (parser, default); None default means required
SCHEMA = {
    "potential": {
        "family": (_str, None),
        "alpha": (float, 1.0),
        "a": (float, 1.0),
        "omega": (float, 1.0),
        "c": (float, 0.0),
        "d": (float, 0.0),
        "box": (_floats, ()),
    },
    "grid": {
        "L1": (float, 2.2),
        "L2": (float, 1.6),
        "n1": (int, 385),
        "n2": (int, 257),
    },
    "sweep": {
        "hbar": (_floats, (0.05,)),
        "m": (_ints, (0,)),
        "k": (_pairs, ((0, 0), (1, 0), (2, 0))),
        "e_min": (float, 0.005),
        "e_max": (float, 0.7),
        "n_e": (int, 50),
        "floquet_fractions": (_floats, (0.02, 0.1)),   # of the barrier
        "action_energies": (_floats, (0.08, 0.04, 0.02)),
    },
    "tolerances": {
        "dynamics": (float, 1e-10),
        "lanczos": (float, 1e-11),
        "count": (int, 4),
    },
    "output": {
        "directory": (_str, "out"),
        "formats": (_str, "csv,json"),
    },
    "flags": {
        "maslov_shift": (_bool, True),
        "parity_mode": (_str, "half"),
        "splitting_factor": (float, 2.0),
        "herring_wall": (float, 0.5),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict   # section -> key -> parsed value

    def __getitem__(self, item):
        return self.values[item]

    def potential(self) -> PotentialSpec:
        p = dict(self.values["potential"])
        family = p.pop("family")
        box = p.pop("box") or None
        keys = FAMILIES[family]
        return PotentialSpec(family=family, box=box, **{k: v for k, v in p.items() if k in keys})

    def grid(self) -> GridSpec:
        g = self.values["grid"]
        return GridSpec(g["L1"], g["L2"], g["n1"], g["n2"])

    def canonical(self, sections=None) -> str:
        """Sorted-key JSON with floats in 17 significant digits."""
        def canon(x):
            if isinstance(x, bool):
                return x
            if isinstance(x, float):
                return format(x, ".17g")
            if isinstance(x, (tuple, list)):
                return [canon(v) for v in x]
            if isinstance(x, dict):
                return {k: canon(v) for k, v in x.items()}
            return x
        picked = self.values if sections is None else {s: self.values[s] for s in sections}
        return json.dumps(canon(picked), sort_keys=True, separators=(",", ":"))

    def digest(self, sections=None) -> str:
        return hashlib.sha256(self.canonical(sections).encode()).hexdigest()


def _check(values: dict):
    fam = values["potential"]["family"]
    if fam not in FAMILIES:
        raise ConfigError(f"unknown family {fam!r}; known: {', '.join(FAMILIES)}")
    extra = {"alpha", "a", "omega", "c", "d"} - set(FAMILIES[fam])
    for k in extra:
        if values["potential"][k] != 0.0:
            raise ConfigError(f"family {fam} takes no {k!r}")
    for k in ("alpha", "a", "omega"):
        if values["potential"][k] <= 0:
            raise ConfigError(f"potential.{k} must be positive")
    g = values["grid"]
    if g["L1"] <= 0 or g["L2"] <= 0 or g["n1"] < 3 or g["n2"] < 3:
        raise ConfigError("grid sizes must be positive")
    if g["n1"] % 2 == 0:
        raise ConfigError("grid.n1 must be odd so that x1 = 0 is a grid line")
    sw = values["sweep"]
    if not sw["hbar"] or min(sw["hbar"]) <= 0:
        raise ConfigError("sweep.hbar must be a non-empty list of positive values")
    if sw["m"] and min(sw["m"]) < 0:
        raise ConfigError("sweep.m must be non-negative")
    if not 0 < sw["e_min"] < sw["e_max"] < 1:
        raise ConfigError("need 0 < e_min < e_max < 1 (fractions of the barrier)")
    if any(not 0 < f < 1 for f in sw["floquet_fractions"]):
        raise ConfigError("sweep.floquet_fractions must lie in (0, 1)")
    if any(E <= 0 for E in sw["action_energies"]):
        raise ConfigError("sweep.action_energies must be positive")
    if sw["n_e"] < 4:
        raise ConfigError("sweep.n_e must be at least 4")
    if values["tolerances"]["dynamics"] <= 0 or values["tolerances"]["lanczos"] <= 0:
        raise ConfigError("tolerances must be positive")
    if values["flags"]["parity_mode"] not in ("half", "full"):
        raise ConfigError("flags.parity_mode is 'half' or 'full'")


def parse_config(text: str = "", overrides=()) -> ExperimentConfig:
    """Parse INI text plus ``section.key=value`` overrides; unknown keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (parse, default) in keys.items():
            if cp.has_option(section, key):
                try:
                    values[section][key] = parse(cp.get(section, key))
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: {exc}") from None
            elif default is None:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                values[section][key] = default
    _check(values)
    return ExperimentConfig(values)


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)
