"""Scenario files: the unit of reproducibility for simulator and bridge runs.

A scenario is UTF-8 ``key = value`` text in four sections ([world],
[planner], [keyframe], [sensor]).  The map path in [world] is resolved
relative to the scenario file.  Command-line overrides are bare
``key=value`` pairs matched against the known keys (or ``section.key``
to disambiguate explicitly).

[world]   map, start_x, start_y, start_theta, goal_x, goal_y, goal_radius,
          obstacle_labels, unreliable_labels, label_costs, max_steps
[planner] alpha, beta, gamma, epsilon, decay, dt, horizon, n_v, n_omega,
          v_min, v_max, omega_min, omega_max, a_lin, a_ang, d_max, decay_clock
[keyframe] weights (path to a KFM1 file; empty/absent disables gating)
[sensor]  footprint, offset
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .costmap import LabelCostTable
from .errors import LoadError
from .gridio import load_semantic_map
from .nn import KeyframeModel, load_keyframe_model
from .planner import KinodynamicLimits, ObjectiveWeights, PlannerConfig
from .simulator import SensorSpec, World

PLANNER_KEYS = (
    "alpha", "beta", "gamma", "epsilon", "decay", "dt", "horizon",
    "n_v", "n_omega", "v_min", "v_max", "omega_min", "omega_max",
    "a_lin", "a_ang", "d_max", "decay_clock",
)
WORLD_KEYS = (
    "map", "start_x", "start_y", "start_theta", "goal_x", "goal_y",
    "goal_radius", "obstacle_labels", "unreliable_labels", "label_costs",
    "max_steps",
)
SENSOR_KEYS = ("footprint", "offset")
KEYFRAME_KEYS = ("weights",)

PLANNER_DEFAULTS = {
    "alpha": 0.8, "beta": 0.1, "gamma": 0.1, "epsilon": 1.0,
    "decay": 0.2, "dt": 0.25, "horizon": 2.5, "n_v": 5, "n_omega": 7,
    "v_min": 0.0, "v_max": 2.0, "omega_min": -1.5, "omega_max": 1.5,
    "a_lin": 1.0, "a_ang": 2.0, "d_max": 5.0, "decay_clock": "mission",
}


@dataclass(frozen=True)
class Scenario:
    world: World
    planner: PlannerConfig
    sensor: SensorSpec
    table: LabelCostTable
    keyframe_model: KeyframeModel | None
    max_steps: int
    path: str = ""


def parse_overrides(pairs) -> dict[tuple[str, str], str]:
    """Turn 'key=value' / 'section.key=value' strings into a section-keyed dict."""
    known = {
        "planner": PLANNER_KEYS, "world": WORLD_KEYS,
        "sensor": SENSOR_KEYS, "keyframe": KEYFRAME_KEYS,
    }
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise LoadError(f"override {pair!r} is not key=value")
        key = key.strip()
        if "." in key:
            section, _, bare = key.partition(".")
            if section not in known or bare not in known[section]:
                raise LoadError(f"override names unknown key {key!r}")
            out[(section, bare)] = value.strip()
            continue
        for section, keys in known.items():
            if key in keys:
                out[(section, key)] = value.strip()
                break
        else:
            raise LoadError(f"override names unknown key {key!r}")
    return out


def _parse_label_set(text: str, path, key: str) -> frozenset:
    labels = set()
    for token in text.replace(",", " ").split():
        try:
            labels.add(int(token))
        except ValueError as exc:
            raise LoadError(f"{path}: {key} has non-integer entry {token!r}") from exc
    return frozenset(labels)


def _parse_label_costs(text: str, path) -> dict[int, float]:
    table = {}
    for token in text.replace(",", " ").split():
        label, sep, cost = token.partition(":")
        if not sep:
            raise LoadError(f"{path}: label_costs entry {token!r} is not id:cost")
        try:
            table[int(label)] = float(cost)
        except ValueError as exc:
            raise LoadError(f"{path}: label_costs entry {token!r} malformed") from exc
    return table


class _Section:
    """Typed accessors over one config section with file/key-naming errors."""

    def __init__(self, path, name: str, values: dict):
        self.path = path
        self.name = name
        self.values = values

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.values:
            raise LoadError(f"{self.path}: missing [{self.name}] key {key!r}")
        return self.values[key]

    def number(self, key: str, default=None) -> float:
        raw = self.require(key) if default is None else self.get(key)
        if raw is None:
            return float(default)
        try:
            return float(raw)
        except ValueError as exc:
            raise LoadError(f"{self.path}: [{self.name}] {key} is not a number: {raw!r}") from exc

    def integer(self, key: str, default=None) -> int:
        value = self.number(key, default)
        if value != int(value):
            raise LoadError(f"{self.path}: [{self.name}] {key} must be an integer")
        return int(value)


def _read_sections(path, overrides) -> dict[str, _Section]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise LoadError(f"{path}: {exc}") from exc
    except configparser.Error as exc:
        raise LoadError(f"{path}: malformed scenario file: {exc}") from exc

    sections = {}
    for name in ("world", "planner", "keyframe", "sensor"):
        values = dict(parser[name]) if parser.has_section(name) else {}
        for (section, key), value in overrides.items():
            if section == name:
                values[key] = value
        sections[name] = _Section(path, name, values)
    return sections


def load_scenario(path, overrides=()) -> Scenario:
    """Parse a scenario file, applying overrides before validation."""
    path = Path(path)
    override_map = overrides if isinstance(overrides, dict) else parse_overrides(overrides)
    sections = _read_sections(path, override_map)

    world_sec = sections["world"]
    map_path = Path(world_sec.require("map"))
    if not map_path.is_absolute():
        map_path = path.parent / map_path
    semantic = load_semantic_map(map_path)

    world = World(
        semantic=semantic,
        obstacle_labels=_parse_label_set(world_sec.get("obstacle_labels", ""), path,
                                         "obstacle_labels"),
        unreliable_labels=_parse_label_set(world_sec.get("unreliable_labels", ""), path,
                                           "unreliable_labels"),
        start=(world_sec.number("start_x"), world_sec.number("start_y"),
               world_sec.number("start_theta", 0.0)),
        goal=(world_sec.number("goal_x"), world_sec.number("goal_y")),
        goal_radius=world_sec.number("goal_radius", 0.5),
        name=path.stem,
    )

    p = sections["planner"]
    d = PLANNER_DEFAULTS
    weights = ObjectiveWeights(
        alpha=p.number("alpha", d["alpha"]), beta=p.number("beta", d["beta"]),
        gamma=p.number("gamma", d["gamma"]), epsilon=p.number("epsilon", d["epsilon"]),
        decay=p.number("decay", d["decay"]), dt=p.number("dt", d["dt"]),
        horizon=p.number("horizon", d["horizon"]),
        n_v=p.integer("n_v", d["n_v"]), n_omega=p.integer("n_omega", d["n_omega"]),
    )
    limits = KinodynamicLimits(
        v_min=p.number("v_min", d["v_min"]), v_max=p.number("v_max", d["v_max"]),
        omega_min=p.number("omega_min", d["omega_min"]),
        omega_max=p.number("omega_max", d["omega_max"]),
        a_lin=p.number("a_lin", d["a_lin"]), a_ang=p.number("a_ang", d["a_ang"]),
    )
    planner_cfg = PlannerConfig(
        weights=weights, limits=limits,
        d_max=p.number("d_max", d["d_max"]),
        decay_clock=p.get("decay_clock", d["decay_clock"]).strip(),
    )

    table = LabelCostTable.linear()
    raw_costs = world_sec.get("label_costs")
    if raw_costs:
        table = table.with_overrides(_parse_label_costs(raw_costs, path))

    keyframe_model = None
    weights_path = sections["keyframe"].get("weights", "").strip()
    if weights_path:
        resolved = Path(weights_path)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        keyframe_model = load_keyframe_model(resolved)

    sensor_sec = sections["sensor"]
    sensor = SensorSpec(
        footprint=sensor_sec.integer("footprint", 5),
        offset=sensor_sec.number("offset", 1.0),
    )

    return Scenario(
        world=world,
        planner=planner_cfg,
        sensor=sensor,
        table=table,
        keyframe_model=keyframe_model,
        max_steps=world_sec.integer("max_steps", 2000),
        path=str(path),
    )


def load_world(map_path, scenario_path) -> World:
    """Build a World from a scenario file with the map taken from map_path."""
    scenario = load_scenario(scenario_path, {("world", "map"): str(map_path)})
    return scenario.world
