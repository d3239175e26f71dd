"""Deterministic closed-loop grid-world episodes and their navigation metrics.

The control loop per step: sense a label patch ahead of the UAV, gate
the cost-map refresh through the keyframe model (no model = refresh
every step), plan one command, advance the state by one exact-arc step.
The episode's cost map starts from the world's full semantic ground
truth (a prior survey); sensing keeps it refreshed, which is where a
segmentation front-end would plug in.

Identical inputs produce bit-identical run records and exported CSVs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costmap import (
    CostMap,
    LabelCostTable,
    MAX_LABEL,
    Occupancy,
    SemanticMap,
    build_costmap,
    patch_update,
)
from .errors import ConfigError, DomainError, LoadError
from .nn import KeyframeModel, keyframe_decide
from .planner import (
    PlannerConfig,
    ScoredCandidate,
    UavState,
    distance_to,
    select_velocity,
    step_state,
)

OUTCOMES = ("reached", "timeout", "recovery_stuck")
RECOVERY_STUCK_LIMIT = 50  # consecutive recovery commands before giving up
RUN_CSV_COLUMNS = (
    "t", "x", "y", "theta", "v_cmd", "omega_cmd",
    "keyframe_used", "c_term", "in_unreliable",
)


@dataclass(frozen=True)
class SensorSpec:
    """Square label patch sensed a fixed offset ahead of the UAV."""

    footprint: int = 5
    offset: float = 1.0

    def __post_init__(self):
        if self.footprint < 1 or self.footprint % 2 == 0:
            raise DomainError(f"sensor footprint must be odd and >= 1, got {self.footprint}")


@dataclass(frozen=True, eq=False)
class World:
    """Ground-truth semantic grid plus the episode's endpoints and label policy."""

    semantic: SemanticMap
    obstacle_labels: frozenset
    unreliable_labels: frozenset
    start: tuple[float, float, float]  # (x, y, theta)
    goal: tuple[float, float]
    goal_radius: float
    name: str = ""
    noise_seed: int | None = None  # reserved for localization noise, unused

    def __post_init__(self):
        object.__setattr__(self, "obstacle_labels",
                           frozenset(int(l) for l in self.obstacle_labels))
        object.__setattr__(self, "unreliable_labels",
                           frozenset(int(l) for l in self.unreliable_labels))
        for name, labels in (("obstacle_labels", self.obstacle_labels),
                             ("unreliable_labels", self.unreliable_labels)):
            bad = [l for l in labels if not 0 <= l <= MAX_LABEL]
            if bad:
                raise LoadError(f"{name} out of range [0, {MAX_LABEL}]: {sorted(bad)}")
        if not self.semantic.contains_point(self.start[0], self.start[1]):
            raise LoadError("start out of bounds")
        if not self.semantic.contains_point(self.goal[0], self.goal[1]):
            raise LoadError("goal out of bounds")
        if not self.goal_radius > 0:
            raise LoadError(f"goal_radius must be positive, got {self.goal_radius}")

    def label_at(self, x: float, y: float) -> int | None:
        """Ground-truth label at a world point, None outside the map."""
        ix, iy = self.semantic.cell_of(x, y)
        if self.semantic.in_bounds(ix, iy):
            return int(self.semantic.labels[iy, ix])
        return None

    def occupancy(self) -> Occupancy:
        return Occupancy.from_semantic(self.semantic, self.obstacle_labels)


@dataclass(frozen=True)
class StepRecord:
    """One control cycle: the command issued and the state it produced at time t."""

    t: float
    state: UavState
    command: tuple[float, float]
    keyframe_used: bool
    c_term: float
    in_unreliable: bool


@dataclass(frozen=True)
class RunRecord:
    steps: tuple[StepRecord, ...]
    outcome: str
    world_name: str = ""

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise DomainError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        object.__setattr__(self, "steps", tuple(self.steps))


def sense(world: World, state: UavState, spec: SensorSpec) -> SemanticMap:
    """Label patch centered ``offset`` meters ahead along the heading.

    Cells beyond the world boundary read as label 0.
    """
    cx = state.x + spec.offset * math.cos(state.theta)
    cy = state.y + spec.offset * math.sin(state.theta)
    ic, jc = world.semantic.cell_of(cx, cy)
    half = (spec.footprint - 1) // 2
    c0, r0 = ic - half, jc - half

    labels = np.zeros((spec.footprint, spec.footprint), dtype=np.uint8)
    src = world.semantic.labels
    src_c_lo, src_c_hi = max(c0, 0), min(c0 + spec.footprint, world.semantic.width)
    src_r_lo, src_r_hi = max(r0, 0), min(r0 + spec.footprint, world.semantic.height)
    if src_c_lo < src_c_hi and src_r_lo < src_r_hi:
        labels[src_r_lo - r0:src_r_hi - r0, src_c_lo - c0:src_c_hi - c0] = \
            src[src_r_lo:src_r_hi, src_c_lo:src_c_hi]
    origin = (
        world.semantic.origin[0] + c0 * world.semantic.resolution,
        world.semantic.origin[1] + r0 * world.semantic.resolution,
    )
    return SemanticMap(labels=labels, resolution=world.semantic.resolution, origin=origin)


def _check_keyframe_compat(model: KeyframeModel, sensor: SensorSpec) -> None:
    if sensor.footprint % model.patch_size:
        raise ConfigError(
            f"keyframe patch size {model.patch_size} does not divide "
            f"sensor footprint {sensor.footprint}"
        )
    tiles = (sensor.footprint // model.patch_size) ** 2
    if tiles != model.input_len:
        raise ConfigError(
            f"keyframe head expects {model.input_len} features, sensor patch yields {tiles}"
        )


def run_episode(world: World, planner_cfg: PlannerConfig,
                keyframe_model: KeyframeModel | None = None,
                max_steps: int = 2000, *,
                sensor: SensorSpec | None = None,
                table: LabelCostTable | None = None) -> RunRecord:
    """Run the sense / gate / update / plan / step loop to the goal.

    Terminates with outcome "reached" inside goal_radius, "timeout"
    after max_steps, or "recovery_stuck" after 50 consecutive recovery
    commands.  Fully deterministic.
    """
    sensor = sensor or SensorSpec()
    table = table or LabelCostTable.linear()
    if keyframe_model is not None:
        _check_keyframe_compat(keyframe_model, sensor)
    weights = planner_cfg.weights
    dt = weights.dt

    cm: CostMap = build_costmap(world.semantic, table)
    obstacles = world.occupancy()
    state = UavState(x=world.start[0], y=world.start[1], theta=world.start[2])

    steps: list[StepRecord] = []
    if distance_to(state, world.goal) <= world.goal_radius:
        return RunRecord(steps=(), outcome="reached", world_name=world.name)

    consecutive_recovery = 0
    outcome = "timeout"
    for k in range(int(max_steps)):
        patch = sense(world, state, sensor)
        used = True
        if keyframe_model is not None:
            _, used = keyframe_decide(patch.labels / float(MAX_LABEL), keyframe_model)
        if used:
            cm = patch_update(cm, patch, table).costmap

        cand: ScoredCandidate = select_velocity(
            state, world.goal, cm, obstacles, planner_cfg.limits, weights,
            d_max=planner_cfg.d_max, t_mission=k * dt,
            decay_clock=planner_cfg.decay_clock,
        )
        consecutive_recovery = consecutive_recovery + 1 if cand.recovery else 0

        prev = state
        state = step_state(state, cand.v, cand.omega, dt)
        midpoint_label = world.label_at((prev.x + state.x) / 2.0, (prev.y + state.y) / 2.0)
        steps.append(StepRecord(
            t=(k + 1) * dt,
            state=state,
            command=(cand.v, cand.omega),
            keyframe_used=used,
            c_term=cand.raw_terms[3],
            in_unreliable=midpoint_label in world.unreliable_labels,
        ))

        if distance_to(state, world.goal) <= world.goal_radius:
            outcome = "reached"
            break
        if consecutive_recovery >= RECOVERY_STUCK_LIMIT:
            outcome = "recovery_stuck"
            break

    return RunRecord(steps=tuple(steps), outcome=outcome, world_name=world.name)


def compute_metrics(record: RunRecord, world: World) -> tuple[float, float]:
    """(flight_distance, unreliable_distance) in meters.

    Flight distance sums the Euclidean step segments from the world's
    start; a segment counts as unreliable when its midpoint lies in a
    cell whose label is in world.unreliable_labels.
    """
    px, py = world.start[0], world.start[1]
    flight = 0.0
    unreliable = 0.0
    for step in record.steps:
        sx, sy = step.state.x, step.state.y
        seg = math.hypot(sx - px, sy - py)
        flight += seg
        label = world.label_at((px + sx) / 2.0, (py + sy) / 2.0)
        if label in world.unreliable_labels:
            unreliable += seg
        px, py = sx, sy
    return flight, unreliable


def format_float(value: float) -> str:
    """Canonical float formatting for exported files: 9 significant digits."""
    return format(float(value), ".9g")


def export_run(record: RunRecord, path, comments=()) -> None:
    """Write the run CSV: optional '#' comment lines, a header, one row per step."""
    lines = [f"# {comment}" for comment in comments]
    lines.append(",".join(RUN_CSV_COLUMNS))
    for step in record.steps:
        lines.append(",".join((
            format_float(step.t),
            format_float(step.state.x),
            format_float(step.state.y),
            format_float(step.state.theta),
            format_float(step.command[0]),
            format_float(step.command[1]),
            "1" if step.keyframe_used else "0",
            format_float(step.c_term),
            "1" if step.in_unreliable else "0",
        )))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def parse_run(path) -> tuple[StepRecord, ...]:
    """Read back an exported run CSV ('#' comment lines are skipped)."""
    lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines()
             if line and not line.startswith("#")]
    if not lines:
        raise LoadError(f"{path}: empty run file")
    if lines[0] != ",".join(RUN_CSV_COLUMNS):
        raise LoadError(f"{path}: unexpected header {lines[0]!r}")
    steps = []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split(",")
        if len(parts) != len(RUN_CSV_COLUMNS):
            raise LoadError(f"{path}:{lineno}: expected {len(RUN_CSV_COLUMNS)} fields")
        t, x, y, theta, v_cmd, omega_cmd = (float(p) for p in parts[:6])
        steps.append(StepRecord(
            t=t,
            state=UavState(x=x, y=y, theta=theta, v=v_cmd, omega=omega_cmd),
            command=(v_cmd, omega_cmd),
            keyframe_used=parts[6] == "1",
            c_term=float(parts[7]),
            in_unreliable=parts[8] == "1",
        ))
    return tuple(steps)
