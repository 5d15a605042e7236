"""INI experiment configuration.

Layout (lists are comma separated, matrix rows separated by ``;``, numbers
may be written as fractions such as ``10/3`` or as ``inf``)::

    [experiment]
    example = 1                  # 1 (two users) or 2 (three users)
    paths = 6000
    horizon = 200
    steps = 5000
    seed = 7                     # optional, default 0
    baselines = constant, arbitrary   # optional

    [users]
    arrival_rate = 10/3, 5       # batch arrival rates
    batch_mean = 3, 1
    service_rate = 1/10, 1/20    # inverse mean packet lengths
    interarrival_scv = 10, 20
    batch_scv = 1, 2
    service_scv = 10, 20
    drift = -1, -1.2             # heavy-traffic drift constants
    nominal_rate = 1000, 1000

    [prices]
    initial = 9, 3
    lower = 0.64, 0.8
    upper = inf, inf
    constant = 1, 1              # optional, constant-price baseline

    [capacity]
    normals = 1, 0; 0, 1; 1, 1
    offsets = 1500, 1500, 2000
    sum_index = 3                # 1-based row of the all-ones facet

    [environment]                # optional; omitted means a single state
    holding_rates = 1, 1
    transitions = 0, 1; 1, 0
    initial_state = 1

    [state.2]                    # optional per-state overrides (state 1 uses [users])
    arrival_rate = 4, 5
"""
from __future__ import annotations

import configparser
import math
import re
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .capacity import CapacityRegion, RegionError
from .env import EnvValidationError, MarkovEnvSpec
from .experiments import ExperimentConfig, ExperimentError
from .game import GameDomainError, PriceMap

SCHEMA = {
    "experiment": {"example": True, "paths": True, "horizon": True, "steps": True, "seed": False,
                   "baselines": False},
    "users": {k: True for k in ("arrival_rate", "batch_mean", "service_rate", "interarrival_scv",
                                "batch_scv", "service_scv", "drift", "nominal_rate")},
    "prices": {"initial": True, "lower": True, "upper": True, "constant": False},
    "capacity": {"normals": True, "offsets": True, "sum_index": True},
    "environment": {"holding_rates": True, "transitions": True, "initial_state": False},
}
STATE_KEYS = ("arrival_rate", "batch_mean", "drift", "nominal_rate")
PRESETS = ("example1_fig5", "example2_fig6", "example2_fig7")


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


def preset_path(name: str) -> Path:
    ref = resources.files("rdrs_lab") / "presets" / f"{name}.ini"
    return Path(str(ref))


def resolve_config_path(spec: str) -> Path:
    """A filesystem path, or the name of a bundled preset."""
    p = Path(spec)
    if p.exists():
        return p
    if spec in PRESETS:
        return preset_path(spec)
    raise ConfigError(f"config {spec!r} is neither a file nor a bundled preset {PRESETS}")


def _line_index(text: str):
    """Map (section, key) to the 1-based line where the key is set."""
    index = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = n
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = n
    return index


def parse_number(token: str) -> float:
    token = token.strip()
    if token.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if "/" in token:
        return float(Fraction(token))
    return float(token)


def _numbers(raw: str):
    return [parse_number(t) for t in raw.split(",") if t.strip() != ""]


def _matrix(raw: str):
    return [_numbers(row) for row in raw.split(";") if row.strip() != ""]


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None, strict=True)
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"{source}:{e.lineno}: duplicate key {e.option!r} in [{e.section}]") from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"{source}:{e.lineno}: duplicate section [{e.section}]") from None
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError(f"{source}:{e.lineno}: key outside any [section]") from None
    except configparser.ParsingError as e:
        raise ConfigError([f"{source}:{ln}: cannot parse {line!r}" for ln, line in e.errors]) from None

    lines = _line_index(text)
    problems = []

    def where(section, key=None):
        n = lines.get((section, key), lines.get((section, None)))
        return f"{source}:{n}" if n else source

    states = []
    for section in parser.sections():
        m = re.fullmatch(r"state\.(\d+)", section)
        if m:
            states.append(int(m.group(1)))
            allowed = STATE_KEYS
        elif section in SCHEMA:
            allowed = SCHEMA[section]
        else:
            problems.append(f"{where(section)}: unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in allowed:
                problems.append(f"{where(section, key)}: unknown key {key!r} in [{section}]")

    for section, keys in SCHEMA.items():
        if section == "environment" and not parser.has_section(section):
            continue
        for key, required in keys.items():
            if required and not (parser.has_section(section) and parser.has_option(section, key)):
                problems.append(f"{source}: missing required key {key!r} in [{section}]")
    if problems:
        raise ConfigError(problems)

    values = {}

    def get(section, key, conv, default=None):
        if not parser.has_option(section, key):
            return default
        try:
            return conv(parser.get(section, key))
        except (ValueError, ZeroDivisionError) as e:
            problems.append(f"{where(section, key)}: bad value for {key!r}: {e}")
            return default

    def integer(raw):
        v = parse_number(raw)
        if v != int(v):
            raise ValueError(f"{raw!r} is not an integer")
        return int(v)

    ex = get("experiment", "example", integer)
    paths = get("experiment", "paths", integer)
    horizon = get("experiment", "horizon", parse_number)
    steps = get("experiment", "steps", integer)
    seed = get("experiment", "seed", integer, 0)
    baselines = get("experiment", "baselines", lambda s: tuple(b.strip() for b in s.split(",") if b.strip()), ())
    for key in SCHEMA["users"]:
        values[key] = get("users", key, _numbers)
    initial = get("prices", "initial", _numbers)
    lower = get("prices", "lower", _numbers)
    upper = get("prices", "upper", _numbers)
    constant = get("prices", "constant", _numbers, [])
    normals = get("capacity", "normals", _matrix)
    offsets = get("capacity", "offsets", _numbers)
    sum_index = get("capacity", "sum_index", integer)
    env = None
    if parser.has_section("environment"):
        rates = get("environment", "holding_rates", _numbers)
        trans = get("environment", "transitions", _matrix)
        init = get("environment", "initial_state", integer, 1)
        if rates is not None and trans is not None:
            try:
                env = MarkovEnvSpec(tuple(rates), tuple(tuple(r) for r in trans), init)
            except EnvValidationError as e:
                problems.append(f"{where('environment')}: {e}")
    if problems:
        raise ConfigError(problems)

    j = 2 if ex == 1 else 3
    if ex not in (1, 2):
        problems.append(f"{where('experiment', 'example')}: example must be 1 or 2")
    for key, v in values.items():
        if len(v) != j:
            problems.append(f"{where('users', key)}: {key} needs {j} values, got {len(v)}")
    for key, v in (("initial", initial), ("lower", lower), ("upper", upper)):
        if len(v) != j:
            problems.append(f"{where('prices', key)}: {key} needs {j} values, got {len(v)}")
    if constant and len(constant) != j:
        problems.append(f"{where('prices', 'constant')}: constant needs {j} values")
    num_states = env.num_states if env is not None else 1
    for s in states:
        if not 2 <= s <= num_states:
            problems.append(f"{where(f'state.{s}')}: state {s} outside 2..{num_states}")
    if problems:
        raise ConfigError(problems)

    def table(key):
        rows = [values[key]]
        for s in range(2, num_states + 1):
            sec = f"state.{s}"
            if parser.has_option(sec, key):
                row = get(sec, key, _numbers)
                if row is not None and len(row) != j:
                    problems.append(f"{where(sec, key)}: {key} needs {j} values")
                    row = values[key]
                rows.append(row)
            else:
                rows.append(values[key])
        return np.array(rows, dtype=float)

    lam, m, theta, rho = (table(k) for k in STATE_KEYS)
    try:
        prices = PriceMap(lower=lower, upper=upper, initial=initial)
    except GameDomainError as e:
        problems.append(f"{where('prices')}: {e}")
        prices = None
    try:
        region = CapacityRegion(np.array(normals, dtype=float), offsets, sum_index - 1)
    except (RegionError, ValueError, IndexError) as e:
        problems.append(f"{where('capacity')}: {e}")
        region = None
    if np.any(lam <= 0):
        problems.append(f"{where('users', 'arrival_rate')}: arrival rates must be positive")
    if np.any(np.asarray(values["service_rate"]) <= 0):
        problems.append(f"{where('users', 'service_rate')}: service rates must be positive")
    if np.any(rho <= 0):
        problems.append(f"{where('users', 'nominal_rate')}: nominal rates must be positive")
    for key in ("batch_mean", "interarrival_scv", "batch_scv", "service_scv"):
        if np.any(np.asarray(values[key]) < 0):
            problems.append(f"{where('users', key)}: {key} must be nonnegative")
    if problems:
        raise ConfigError(problems)
    try:
        return ExperimentConfig(
            example=ex, paths=paths, horizon=horizon, steps=steps, seed=seed,
            lam=lam, m=m, mu=np.array(values["service_rate"]), alpha2=np.array(values["interarrival_scv"]),
            zeta2=np.array(values["batch_scv"]), beta2=np.array(values["service_scv"]), theta=theta, rho=rho,
            prices=prices, region=region, constant_prices=tuple(constant), baselines=baselines, env=env,
            name=Path(source).stem,
        )
    except ExperimentError as e:
        raise ConfigError([f"{source}: {p}" for p in str(e).split("; ")]) from None


def parse_config(path) -> ExperimentConfig:
    path = resolve_config_path(str(path))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return parse_config_text(text, source=str(path))
