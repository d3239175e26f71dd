"""Synthetic benchmark worlds: a village road scene and a waterfront bay.

Both follow the same evaluation idea: the direct start-to-goal corridor
runs over localization-hostile ground (asphalt, water, the GPS-shadow
ring around tall buildings), while reliable grass lanes exist a small
lateral offset away.  A planner that ignores the semantic cost flies
the hostile corridor; one that charges for it shifts into the lanes.

Class ids used here (out of the 23-label scheme):
    0 void, 1 grass, 7 asphalt road, 12 car, 14 water,
    17 building, 20 building GPS-shadow buffer.
The shadow buffer is widened 2 cells around every building footprint
and carries its own label so the cost table can see it; that is a
modeling stand-in for GPS degradation near high-rise walls.

Generation is deterministic per (template, seed): the seed only jitters
prop placement, never the corridor geometry the benchmark relies on.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .costmap import SemanticMap
from .errors import ConfigError
from .gridio import save_semantic_map

LABEL_VOID = 0
LABEL_GRASS = 1
LABEL_ROAD = 7
LABEL_CAR = 12
LABEL_WATER = 14
LABEL_BUILDING = 17
LABEL_SHADOW = 20

TEMPLATES = ("village", "bay")

RESOLUTION = 0.5  # meters per cell


def _fill_rect(labels: np.ndarray, x0: float, x1: float, y0: float, y1: float,
               label: int) -> None:
    """Fill world-frame rectangle [x0, x1) x [y0, y1) (meters, origin 0)."""
    c0, c1 = int(round(x0 / RESOLUTION)), int(round(x1 / RESOLUTION))
    r0, r1 = int(round(y0 / RESOLUTION)), int(round(y1 / RESOLUTION))
    h, w = labels.shape
    labels[max(r0, 0):min(r1, h), max(c0, 0):min(c1, w)] = label


def _add_shadow(labels: np.ndarray, width_cells: int = 2) -> None:
    """Mark a buffer ring around every building cell with the shadow label."""
    building = labels == LABEL_BUILDING
    reach = building.copy()
    for _ in range(width_cells):
        grown = reach.copy()
        grown[1:, :] |= reach[:-1, :]
        grown[:-1, :] |= reach[1:, :]
        grown[:, 1:] |= reach[:, :-1]
        grown[:, :-1] |= reach[:, 1:]
        reach = grown
    labels[reach & ~building] = LABEL_SHADOW


def _village(seed: int) -> tuple[SemanticMap, dict]:
    rng = np.random.default_rng(seed)
    labels = np.full((64, 64), LABEL_GRASS, dtype=np.uint8)

    # North-south asphalt band that ends short of the goal.  The start
    # sits on it and the goal lies straight ahead on grass, so the
    # baseline rides the asphalt the whole way while grass lanes are one
    # lateral hop to either side.
    _fill_rect(labels, 15.0, 17.0, 0.0, 26.0, LABEL_ROAD)

    # Parked cars on the road shoulder, jittered along the band.
    lanes = rng.permutation(np.arange(7.0, 23.0, 4.0))[:4]
    for y in sorted(lanes):
        side = rng.integers(0, 2)
        x0 = 15.0 if side == 0 else 16.5
        _fill_rect(labels, x0, x0 + 0.5, y, y + 1.0, LABEL_CAR)

    sem = SemanticMap(labels=labels, resolution=RESOLUTION, origin=(0.0, 0.0))
    sections = {
        "world": {
            "start_x": "16.25", "start_y": "2.25", "start_theta": "1.5707963267948966",
            "goal_x": "16.25", "goal_y": "30.0", "goal_radius": "0.75",
            "obstacle_labels": str(LABEL_CAR),
            "unreliable_labels": f"{LABEL_ROAD}, {LABEL_CAR}",
            "max_steps": "400",
        },
        "planner": {},
        "keyframe": {},
        "sensor": {"footprint": "5", "offset": "1.0"},
    }
    return sem, sections


def _bay(seed: int) -> tuple[SemanticMap, dict]:
    rng = np.random.default_rng(seed)
    labels = np.full((80, 80), LABEL_GRASS, dtype=np.uint8)

    # Waterfront basin west of the road, separated from it by a narrow
    # grass berm the semantic planner can thread.
    _fill_rect(labels, 6.0, 17.0, 8.0, 34.0, LABEL_WATER)

    # North-south asphalt road ending short of the goal.  The baseline
    # route runs straight up it.
    _fill_rect(labels, 19.0, 22.0, 0.0, 30.0, LABEL_ROAD)

    # High-rise blocks east of the road; each gets a GPS-shadow ring, so
    # a clear grass lane remains between the road edge and the shadows.
    for base_y in (9.0, 17.0, 25.0):
        y = base_y + float(rng.integers(-2, 3)) * RESOLUTION
        _fill_rect(labels, 27.0, 29.0, y, y + 2.0, LABEL_BUILDING)
    _add_shadow(labels, width_cells=2)

    sem = SemanticMap(labels=labels, resolution=RESOLUTION, origin=(0.0, 0.0))
    sections = {
        "world": {
            "start_x": "20.5", "start_y": "2.5", "start_theta": "1.5707963267948966",
            "goal_x": "20.5", "goal_y": "36.0", "goal_radius": "0.75",
            "obstacle_labels": str(LABEL_BUILDING),
            "unreliable_labels": f"{LABEL_ROAD}, {LABEL_WATER}, {LABEL_BUILDING}, {LABEL_SHADOW}",
            "max_steps": "500",
        },
        "planner": {},
        "keyframe": {},
        "sensor": {"footprint": "5", "offset": "1.0"},
    }
    return sem, sections


_BUILDERS = {"village": _village, "bay": _bay}


def generate(template: str, seed: int) -> tuple[SemanticMap, dict]:
    """Build a template world; same (template, seed) gives identical output."""
    if template not in _BUILDERS:
        raise ConfigError(
            f"unknown template {template!r}; available: {', '.join(TEMPLATES)}"
        )
    return _BUILDERS[template](int(seed))


def scenario_text(sections: dict, map_filename: str) -> str:
    """Render scenario sections as canonical key = value text."""
    lines = []
    for name in ("world", "planner", "keyframe", "sensor"):
        lines.append(f"[{name}]")
        if name == "world":
            lines.append(f"map = {map_filename}")
        for key, value in sections.get(name, {}).items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def write_world(template: str, seed: int, out_prefix) -> list[Path]:
    """Write <prefix>.pgm, <prefix>.meta and <prefix>.toy for a template world."""
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    sem, sections = generate(template, seed)

    pgm = prefix.with_suffix(".pgm")
    save_semantic_map(sem, pgm)
    toy = prefix.with_suffix(".toy")
    toy.write_bytes(scenario_text(sections, pgm.name).encode("utf-8"))
    return [pgm, pgm.with_suffix(".meta"), toy]
