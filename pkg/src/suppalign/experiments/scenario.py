"""Scenario files: TOML documents describing which experiments to run and at what size.

Schema version 1::

    schema = 1
    name = "..."            # output sub-directory and table label
    seed = 1234             # master seed, overridable from the CLI
    chunk_symbols = 1000    # Monte Carlo work unit (independent of --jobs)

    [system]                # SystemConfig fields (N, L, notch_start, ...)

    [psd]  [tradeoff]  [power]  [ccdf]  [leakage]  [ber]  [properties]

Every experiment section is optional; see ``SECTION_KEYS`` for the keys
each one accepts and ``DEFAULTS`` for their default values.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from ..ofdm import ConfigurationError, SystemConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

DEFAULTS = {
    "psd": {"num_symbols": 10_000, "symbols_per_channel": 100, "points": []},
    "tradeoff": {"alpha": 0.25, "lams": [0.0, 0.25, 0.5, 0.75, 1.0], "num_symbols": 10_000,
                 "symbols_per_channel": 100},
    "power": {"alphas": [0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0], "lams": [0.0, 0.5, 1.0], "num_symbols": 2_000,
              "symbols_per_channel": 100},
    "ccdf": {"num_symbols": 100_000, "symbols_per_channel": 100, "probability": 1e-3, "points": []},
    "leakage": {"alpha": 0.25, "sigma_e2": [1e-3, 1e-2, 1e-1], "num_trials": 100_000,
                "symbols_per_channel": 100, "lam0_rule": "power", "joint_lam": 0.5,
                "joint_trials": 10_000},
    "ber": {"mod_orders": [16, 64], "sigma_e2": [0.0, 0.01], "alpha": 0.25, "lam": 0.5,
            "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0],
            "num_symbols": 10_000, "symbols_per_channel": 100},
    "properties": {"channels": 1_000, "lsqi_instances": 1_000, "oracle_instances": 100,
                   "psi_max_N": 64, "psi_max_L": 16},
}
SECTION_KEYS = {name: set(d) for name, d in DEFAULTS.items()}
POINT_KEYS = {"alpha", "lam", "R"}
EXPERIMENTS = tuple(DEFAULTS)


class ScenarioError(ValueError):
    """A scenario file is malformed or violates a precondition."""


@dataclass
class Scenario:
    name: str
    seed: int
    system: SystemConfig
    sections: dict = field(default_factory=dict)
    chunk_symbols: int = 1000
    description: str = ""
    source: str | None = None

    @property
    def experiments(self) -> list[str]:
        return [e for e in EXPERIMENTS if e in self.sections]

    def with_seed(self, seed: int) -> "Scenario":
        out = copy.copy(self)
        out.seed = int(seed)
        return out


def _check_points(section: str, points):
    if not isinstance(points, list) or not points:
        raise ScenarioError(f"[{section}] needs a non-empty 'points' list")
    for p in points:
        extra = set(p) - POINT_KEYS
        if extra:
            raise ScenarioError(f"[{section}] point has unknown keys {sorted(extra)}")
        if "alpha" not in p or "lam" not in p:
            raise ScenarioError(f"[{section}] every point needs 'alpha' and 'lam'")


def _non_empty(section, cfg, *keys):
    for k in keys:
        if not cfg[k]:
            raise ScenarioError(f"[{section}] '{k}' must be non-empty")


def parse_scenario(doc: dict, source: str | None = None) -> Scenario:
    doc = dict(doc)
    schema = doc.pop("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema version {schema}")
    try:
        name = str(doc.pop("name"))
    except KeyError:
        raise ScenarioError("scenario needs a 'name'") from None
    seed = int(doc.pop("seed", 0))
    chunk = int(doc.pop("chunk_symbols", 1000))
    description = str(doc.pop("description", ""))
    system = doc.pop("system", {})
    known = {f.name for f in fields(SystemConfig)}
    if set(system) - known:
        raise ScenarioError(f"[system] unknown keys {sorted(set(system) - known)}")
    try:
        cfg = SystemConfig(**system)
    except (ConfigurationError, TypeError) as exc:
        raise ScenarioError(f"[system] {exc}") from exc

    sections = {}
    for sec in list(doc):
        if sec not in DEFAULTS:
            raise ScenarioError(f"unknown section or key {sec!r}")
        body = doc.pop(sec)
        extra = set(body) - SECTION_KEYS[sec]
        if extra:
            raise ScenarioError(f"[{sec}] unknown keys {sorted(extra)}")
        merged = copy.deepcopy(DEFAULTS[sec])
        merged.update(body)
        sections[sec] = merged

    if chunk < 1:
        raise ScenarioError("chunk_symbols must be positive")
    for sec, c in sections.items():
        if "points" in c:
            _check_points(sec, c["points"])
        for key in ("num_symbols", "num_trials", "joint_trials"):
            if key in c and int(c[key]) < 1:
                raise ScenarioError(f"[{sec}] '{key}' must be positive")
        if "symbols_per_channel" in c:
            spc = int(c["symbols_per_channel"])
            if spc < 1 or chunk % spc:
                raise ScenarioError(f"[{sec}] symbols_per_channel must divide chunk_symbols")
    if "ccdf" in sections:
        c = sections["ccdf"]
        if c["num_symbols"] < 10 / c["probability"]:
            raise ScenarioError(
                f"[ccdf] {c['num_symbols']} symbols cannot resolve probability {c['probability']}"
            )
    if "tradeoff" in sections:
        _non_empty("tradeoff", sections["tradeoff"], "lams")
    if "power" in sections:
        _non_empty("power", sections["power"], "alphas", "lams")
    if "leakage" in sections:
        _non_empty("leakage", sections["leakage"], "sigma_e2")
        if sections["leakage"]["lam0_rule"] not in ("power", "median"):
            raise ScenarioError("[leakage] lam0_rule must be 'power' or 'median'")
        if sections["leakage"]["num_trials"] < 1000:
            raise ScenarioError("[leakage] needs at least 1000 trials")
    if "ber" in sections:
        _non_empty("ber", sections["ber"], "mod_orders", "sigma_e2", "snr_db")
    return Scenario(name=name, seed=seed, system=cfg, sections=sections, chunk_symbols=chunk,
                    description=description, source=source)


def load_scenario(path) -> Scenario:
    """Load a scenario from a file path or the name of a bundled scenario."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_scenarios()
        key = p.stem if p.suffix == ".toml" else str(path)
        if key not in bundled:
            raise ScenarioError(f"no scenario file or bundled scenario named {path!r}")
        p = bundled[key]
    try:
        with open(p, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{p}: {exc}") from exc
    return parse_scenario(doc, source=str(p))


def bundled_scenarios() -> dict:
    root = resources.files("suppalign.experiments") / "scenarios"
    return {Path(e.name).stem: Path(str(e)) for e in root.iterdir() if e.name.endswith(".toml")}
