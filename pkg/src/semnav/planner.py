"""Semantic-aware Dynamic Window Approach over a cost map.

One planning call samples an inclusive grid of (v, omega) commands from
the dynamic window, rolls each out as a constant-twist arc, drops
colliding and unstoppable candidates, scores the survivors on four
terms, and returns the argmax:

    heading   H = 1 - |angle(final heading -> goal)| / pi
    clearance D = min(d_min, d_max) / d_max       (d_min to obstacle cell centers)
    velocity  V = clamp(v / v_max, 0, 1)
    semantic  C = sum_k exp(-decay * t_k) * cost(x_k, y_k)

Each term is min-max normalized across the admissible batch (an
all-equal batch maps to 1.0), and the objective is

    G = alpha * H + beta * D + gamma * V - epsilon * C

maximized with deterministic tie-breaking: higher v, then smaller
|omega|, then smaller omega.  C enters with a minus sign: it measures
localization-hostile terrain, so it is a penalty under maximization.
The decay clock is the mission clock by default (pass the elapsed
mission time as ``t_mission``); with ``decay_clock="rollout"`` the sum
restarts at zero each call.

Every formula here is part of the module's contract: an independent
evaluator that repeats the same arithmetic reproduces the selected
command bit-for-bit, on either accel backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .accel import wrap_angle
from .costmap import CostMap, Occupancy
from .errors import DomainError

DECAY_CLOCKS = ("mission", "rollout")
OMEGA_STRAIGHT_EPS = 1e-9  # below this |omega| the rollout integrates a straight line


@dataclass(frozen=True)
class UavState:
    """Planar pose plus current command velocities; heading is kept in (-pi, pi]."""

    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap_angle(float(self.theta))))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class KinodynamicLimits:
    v_min: float
    v_max: float
    omega_min: float
    omega_max: float
    a_lin: float
    a_ang: float

    def __post_init__(self):
        if self.v_min > self.v_max:
            raise DomainError(f"v_min {self.v_min} exceeds v_max {self.v_max}")
        if self.omega_min > self.omega_max:
            raise DomainError(f"omega_min {self.omega_min} exceeds omega_max {self.omega_max}")
        if not self.a_lin > 0 or not self.a_ang > 0:
            raise DomainError("acceleration limits must be positive")


@dataclass(frozen=True)
class ObjectiveWeights:
    """Objective coefficients plus the sampling/rollout discretization."""

    alpha: float
    beta: float
    gamma: float
    epsilon: float
    decay: float = 0.2
    dt: float = 0.25
    horizon: float = 2.5
    n_v: int = 5
    n_omega: int = 7

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "epsilon"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.decay < 0:
            raise DomainError("decay must be nonnegative")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.horizon < self.dt:
            raise DomainError("horizon must be at least dt")
        if self.n_v < 2 or self.n_omega < 2:
            raise DomainError("need at least 2 samples per velocity axis")

    @property
    def steps(self) -> int:
        return round(self.horizon / self.dt)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Constant-twist rollout samples; ts starts at dt and the arrays align."""

    ts: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    thetas: np.ndarray
    v: float
    omega: float

    def __len__(self) -> int:
        return self.ts.shape[0]

    @property
    def final_pose(self) -> tuple[float, float, float]:
        return (float(self.xs[-1]), float(self.ys[-1]), float(self.thetas[-1]))


@dataclass(frozen=True)
class ScoredCandidate:
    """A command with its normalized terms (H, D, Vel, C), raw terms, and objective."""

    v: float
    omega: float
    terms: tuple[float, float, float, float]
    raw_terms: tuple[float, float, float, float]
    g: float
    recovery: bool = False


@dataclass(frozen=True)
class PlannerConfig:
    """Everything one planning call needs beyond the live state and maps."""

    weights: ObjectiveWeights
    limits: KinodynamicLimits
    d_max: float = 5.0
    decay_clock: str = "mission"

    def __post_init__(self):
        if not self.d_max > 0:
            raise DomainError(f"d_max must be positive, got {self.d_max}")
        if self.decay_clock not in DECAY_CLOCKS:
            raise DomainError(
                f"decay_clock must be one of {DECAY_CLOCKS}, got {self.decay_clock!r}"
            )


def dynamic_window(state: UavState, limits: KinodynamicLimits,
                   dt: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Velocity ranges reachable within one step, clamped to absolute limits."""
    v_lo = max(limits.v_min, state.v - limits.a_lin * dt)
    v_hi = min(limits.v_max, state.v + limits.a_lin * dt)
    om_lo = max(limits.omega_min, state.omega - limits.a_ang * dt)
    om_hi = min(limits.omega_max, state.omega + limits.a_ang * dt)
    return (v_lo, v_hi), (om_lo, om_hi)


def window_samples(lo: float, hi: float, n: int) -> list[float]:
    """n samples spanning [lo, hi] inclusive: lo + (hi - lo) * (i / (n - 1)), clamped."""
    out = []
    for i in range(n):
        if i == 0:
            out.append(lo)
        elif i == n - 1:
            out.append(hi)
        else:
            out.append(min(max(lo + (hi - lo) * (i / (n - 1.0)), lo), hi))
    return out


def rollout(state: UavState, v: float, omega: float,
            weights: ObjectiveWeights) -> Trajectory:
    """Forward-integrate a constant (v, omega) command over the horizon."""
    ts, xs, ys, ths = accel.rollout_path(
        state.x, state.y, state.theta, float(v), float(omega),
        weights.dt, weights.steps,
    )
    return Trajectory(ts=ts, xs=xs, ys=ys, thetas=ths, v=float(v), omega=float(omega))


def step_state(state: UavState, v: float, omega: float, dt: float) -> UavState:
    """Advance a state by one exact-arc step under a new command."""
    _, xs, ys, ths = accel.rollout_path(state.x, state.y, state.theta,
                                        float(v), float(omega), dt, 1)
    return UavState(x=float(xs[0]), y=float(ys[0]), theta=float(ths[0]),
                    v=float(v), omega=float(omega))


def heading_term(traj: Trajectory, goal: tuple[float, float]) -> float:
    """Alignment of the final heading with the goal direction, 1 aligned .. 0 opposed."""
    xf, yf, thf = traj.final_pose
    dx = goal[0] - xf
    dy = goal[1] - yf
    if dx == 0.0 and dy == 0.0:
        return 1.0
    err = abs(wrap_angle(math.atan2(dy, dx) - thf))
    return 1.0 - err / math.pi


def min_clearance(traj: Trajectory, obstacles: Occupancy) -> float:
    """Minimum distance from any sample to any obstacle cell center; inf if none."""
    d2 = accel.min_dist_sq(traj.xs, traj.ys, obstacles.centers_x, obstacles.centers_y)
    return math.sqrt(d2) if math.isfinite(d2) else math.inf


def trajectory_hits_obstacle(traj: Trajectory, obstacles: Occupancy) -> bool:
    """True when any sample lands inside an obstacle cell."""
    return bool(accel.hits_occupied(
        traj.xs, traj.ys, obstacles.mask,
        obstacles.origin[0], obstacles.origin[1], obstacles.resolution,
    ))


def clearance_term(traj: Trajectory, obstacles: Occupancy, d_max: float) -> float:
    """Obstacle clearance saturated at d_max and scaled to [0, 1]."""
    if not d_max > 0:
        raise DomainError(f"d_max must be positive, got {d_max}")
    return min(min_clearance(traj, obstacles), d_max) / d_max


def velocity_term(v: float, limits: KinodynamicLimits) -> float:
    """Forward speed as a fraction of the maximum, clamped to [0, 1]."""
    if not limits.v_max > 0:
        raise DomainError(f"velocity term needs v_max > 0, got {limits.v_max}")
    return min(max(v / limits.v_max, 0.0), 1.0)


def semantic_cost_term(traj: Trajectory, cm: CostMap, decay: float,
                       t_offset: float = 0.0) -> float:
    """Decay-weighted sum of cost-map values along the rollout.

    Sample k (at rollout-local time t_k) contributes
    exp(-decay * (t_offset + t_k)) * cost(x_k, y_k); pass the mission
    time at rollout start as t_offset to put the decay on the mission
    clock.  Out-of-map samples cost 1.0.
    """
    factors = np.empty(len(traj))
    for k in range(len(traj)):
        factors[k] = math.exp(-decay * (t_offset + traj.ts[k]))
    return float(accel.decayed_cost_sum(
        traj.xs, traj.ys, factors, cm.costs,
        cm.origin[0], cm.origin[1], cm.resolution,
    ))


def _normalize(values: list[float]) -> list[float]:
    """Min-max normalize a batch; an all-equal batch maps to all ones."""
    mn = min(values)
    mx = max(values)
    if mx == mn:
        return [1.0] * len(values)
    return [(value - mn) / (mx - mn) for value in values]


def _tie_break_better(v: float, om: float, best_v: float, best_om: float) -> bool:
    if v != best_v:
        return v > best_v
    if abs(om) != abs(best_om):
        return abs(om) < abs(best_om)
    return om < best_om


def select_velocity(state: UavState, goal: tuple[float, float], cm: CostMap,
                    obstacles: Occupancy, limits: KinodynamicLimits,
                    weights: ObjectiveWeights, *, d_max: float = 5.0,
                    t_mission: float = 0.0,
                    decay_clock: str = "mission") -> ScoredCandidate:
    """Pick the best admissible command from the sampled dynamic window.

    Candidates whose rollout enters an obstacle cell, or whose speed
    exceeds the braking bound sqrt(2 * a_lin * d_min), are discarded
    before scoring.  When nothing is admissible the result is a flagged
    recovery command: v = 0 with the window's largest-|omega| rotation.
    """
    if decay_clock not in DECAY_CLOCKS:
        raise DomainError(f"decay_clock must be one of {DECAY_CLOCKS}, got {decay_clock!r}")
    (v_lo, v_hi), (om_lo, om_hi) = dynamic_window(state, limits, weights.dt)
    t_offset = t_mission if decay_clock == "mission" else 0.0

    commands = []
    raw_h, raw_d, raw_v, raw_c = [], [], [], []
    for v in window_samples(v_lo, v_hi, weights.n_v):
        for om in window_samples(om_lo, om_hi, weights.n_omega):
            traj = rollout(state, v, om, weights)
            if trajectory_hits_obstacle(traj, obstacles):
                continue
            d_min = min_clearance(traj, obstacles)
            if v > math.sqrt(2.0 * limits.a_lin * d_min):
                continue
            commands.append((v, om))
            raw_h.append(heading_term(traj, goal))
            raw_d.append(min(d_min, d_max) / d_max)
            raw_v.append(velocity_term(v, limits))
            raw_c.append(semantic_cost_term(traj, cm, weights.decay, t_offset))

    if not commands:
        om = om_lo if abs(om_lo) >= abs(om_hi) else om_hi
        return ScoredCandidate(v=0.0, omega=om, terms=(0.0, 0.0, 0.0, 0.0),
                               raw_terms=(0.0, 0.0, 0.0, 0.0), g=-math.inf,
                               recovery=True)

    norm_h = _normalize(raw_h)
    norm_d = _normalize(raw_d)
    norm_vel = _normalize(raw_v)
    norm_c = _normalize(raw_c)

    best = None
    for j, (v, om) in enumerate(commands):
        g = (weights.alpha * norm_h[j] + weights.beta * norm_d[j]
             + weights.gamma * norm_vel[j] - weights.epsilon * norm_c[j])
        if best is None or g > best[0] or (
                g == best[0] and _tie_break_better(v, om, best[1], best[2])):
            best = (g, v, om, j)

    g, v, om, j = best
    return ScoredCandidate(
        v=v, omega=om,
        terms=(norm_h[j], norm_d[j], norm_vel[j], norm_c[j]),
        raw_terms=(raw_h[j], raw_d[j], raw_v[j], raw_c[j]),
        g=g,
    )


def distance_to(state: UavState, goal: tuple[float, float]) -> float:
    return math.hypot(goal[0] - state.x, goal[1] - state.y)
