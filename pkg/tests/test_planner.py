import math

import numpy as np
import pytest

import oracles
from conftest import empty_occupancy, uniform_costmap
from semnav.costmap import CostMap, Occupancy
from semnav.errors import DomainError
from semnav.planner import (
    KinodynamicLimits,
    ObjectiveWeights,
    PlannerConfig,
    Trajectory,
    UavState,
    clearance_term,
    dynamic_window,
    heading_term,
    min_clearance,
    rollout,
    select_velocity,
    semantic_cost_term,
    step_state,
    trajectory_hits_obstacle,
    velocity_term,
    window_samples,
)

GEOMETRIC_SUM = 8.973129836037346  # sum_{i=1..10} e^(-0.02 i), closed form


def make_traj(points, v=1.0, omega=0.0):
    ts, xs, ys, ths = (np.array(col, dtype=float) for col in zip(*points))
    return Trajectory(ts=ts, xs=xs, ys=ys, thetas=ths, v=v, omega=omega)


class TestDynamicWindow:
    def test_from_rest(self):
        limits = KinodynamicLimits(0.0, 2.0, -1.0, 1.0, a_lin=1.0, a_ang=2.0)
        (v_lo, v_hi), _ = dynamic_window(UavState(0, 0, 0), limits, dt=0.5)
        assert (v_lo, v_hi) == (0.0, 0.5)

    def test_clamp_saturates(self):
        limits = KinodynamicLimits(0.0, 2.0, -1.0, 1.0, a_lin=1000.0, a_ang=1000.0)
        (v_lo, v_hi), (om_lo, om_hi) = dynamic_window(
            UavState(0, 0, 0, v=2.0, omega=0.0), limits, dt=0.5)
        assert (v_lo, v_hi) == (0.0, 2.0)
        assert (om_lo, om_hi) == (-1.0, 1.0)

    def test_zero_dt_degenerates_to_current(self):
        limits = KinodynamicLimits(0.0, 2.0, -1.0, 1.0, a_lin=1.0, a_ang=2.0)
        (v_lo, v_hi), (om_lo, om_hi) = dynamic_window(
            UavState(0, 0, 0, v=1.2, omega=0.3), limits, dt=0.0)
        assert v_lo == v_hi == 1.2
        assert om_lo == om_hi == 0.3

    def test_window_samples_include_endpoints(self):
        pts = window_samples(-1.0, 2.0, 7)
        assert pts[0] == -1.0
        assert pts[-1] == 2.0
        assert all(-1.0 <= p <= 2.0 for p in pts)
        assert pts == sorted(pts)


class TestRollout:
    def test_straight_line(self):
        w = ObjectiveWeights(1, 0, 0, 0, dt=0.1, horizon=1.0)
        traj = rollout(UavState(0, 0, 0), 1.0, 0.0, w)
        xf, yf, _ = traj.final_pose
        assert abs(xf - 1.0) < 1e-12
        assert abs(yf) < 1e-12

    def test_spin_in_place(self):
        w = ObjectiveWeights(1, 0, 0, 0, dt=0.1, horizon=1.0)
        traj = rollout(UavState(2.0, 3.0, 0.5), 0.0, 1.0, w)
        assert np.all(traj.xs == 2.0)
        assert np.all(traj.ys == 3.0)
        assert traj.thetas[-1] == pytest.approx(1.5, abs=1e-12)

    def test_quarter_circle(self):
        w = ObjectiveWeights(1, 0, 0, 0, dt=0.1, horizon=1.0)
        traj = rollout(UavState(0, 0, 0), math.pi / 2, math.pi / 2, w)
        xf, yf, thf = traj.final_pose
        assert abs(xf - 1.0) < 1e-9
        assert abs(yf - 1.0) < 1e-9
        assert abs(thf - math.pi / 2) < 1e-9

    def test_sample_times_start_at_dt(self):
        w = ObjectiveWeights(1, 0, 0, 0, dt=0.25, horizon=2.5)
        traj = rollout(UavState(0, 0, 0), 1.0, 0.1, w)
        assert len(traj) == 10
        assert traj.ts[0] == 0.25
        assert np.all(np.diff(traj.ts) > 0)

    def test_matches_closed_form_on_random_draws(self):
        rng = np.random.default_rng(17)
        w_base = dict(alpha=1, beta=0, gamma=0, epsilon=0)
        for _ in range(100):
            v = float(rng.uniform(-2, 3))
            om = float(rng.uniform(-3, 3)) if rng.random() > 0.2 else 0.0
            th = float(rng.uniform(-math.pi, math.pi))
            dt = float(rng.uniform(0.05, 0.5))
            steps = int(rng.integers(1, 30))
            w = ObjectiveWeights(**w_base, dt=dt, horizon=dt * steps)
            traj = rollout(UavState(1.0, -2.0, th), v, om, w)
            xf, yf, thf = traj.final_pose
            ex, ey, eth = oracles.closed_form_pose(1.0, -2.0, th, v, om, dt * steps)
            assert abs(xf - ex) < 1e-9
            assert abs(yf - ey) < 1e-9

    def test_step_state_equals_one_rollout_sample(self):
        w = ObjectiveWeights(1, 0, 0, 0, dt=0.25, horizon=0.25)
        state = UavState(0.5, -0.5, 0.3)
        traj = rollout(state, 1.2, 0.4, w)
        stepped = step_state(state, 1.2, 0.4, 0.25)
        assert (stepped.x, stepped.y, stepped.theta) == traj.final_pose
        assert (stepped.v, stepped.omega) == (1.2, 0.4)


class TestHeading:
    def test_aligned(self):
        traj = make_traj([(0.5, 1.0, 0.0, 0.0)])
        assert heading_term(traj, (5.0, 0.0)) == 1.0

    def test_opposed(self):
        traj = make_traj([(0.5, 1.0, 0.0, math.pi)])
        assert heading_term(traj, (5.0, 0.0)) == pytest.approx(0.0, abs=1e-15)

    def test_quarter_off(self):
        traj = make_traj([(0.5, 0.0, 0.0, math.pi / 2)])
        assert heading_term(traj, (5.0, 0.0)) == pytest.approx(0.5, abs=1e-15)

    def test_goal_coincident_with_final_pose(self):
        traj = make_traj([(0.5, 2.0, 3.0, 1.0)])
        assert heading_term(traj, (2.0, 3.0)) == 1.0


class TestClearance:
    def test_empty_world_saturates(self):
        traj = make_traj([(0.5, 1.0, 1.0, 0.0)])
        assert clearance_term(traj, empty_occupancy(), d_max=2.0) == 1.0

    def test_collision_detected(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[2, 2] = True
        occ = Occupancy(mask=mask, resolution=1.0)
        inside = make_traj([(0.5, 2.5, 2.5, 0.0)])
        outside = make_traj([(0.5, 0.5, 0.5, 0.0)])
        assert trajectory_hits_obstacle(inside, occ)
        assert not trajectory_hits_obstacle(outside, occ)

    def test_distance_to_cell_center(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = True  # center (0.5, 0.5)
        occ = Occupancy(mask=mask, resolution=1.0)
        traj = make_traj([(0.5, 1.5, 0.5, 0.0)])  # 1.0 m from the center
        assert min_clearance(traj, occ) == pytest.approx(1.0, abs=1e-12)
        assert clearance_term(traj, occ, d_max=2.0) == pytest.approx(0.5, abs=1e-12)

    def test_d_max_must_be_positive(self):
        traj = make_traj([(0.5, 0.0, 0.0, 0.0)])
        with pytest.raises(DomainError):
            clearance_term(traj, empty_occupancy(), d_max=0.0)


class TestVelocityTerm:
    def test_extremes(self, default_limits):
        assert velocity_term(2.0, default_limits) == 1.0
        assert velocity_term(0.0, default_limits) == 0.0
        assert velocity_term(1.5, default_limits) == 0.75

    def test_clamped(self, default_limits):
        assert velocity_term(5.0, default_limits) == 1.0
        assert velocity_term(-1.0, default_limits) == 0.0


class TestSemanticCost:
    def test_zero_map(self):
        traj = make_traj([(0.1 * (k + 1), 0.2, 0.2, 0.0) for k in range(10)])
        cm = uniform_costmap(0.0, shape=(4, 4), resolution=1.0)
        assert semantic_cost_term(traj, cm, decay=0.2) == 0.0

    def test_geometric_closed_form(self):
        traj = make_traj([(0.1 * (k + 1), 0.5, 0.5, 0.0) for k in range(10)])
        cm = uniform_costmap(1.0, shape=(4, 4), resolution=1.0)
        value = semantic_cost_term(traj, cm, decay=0.2)
        assert value == pytest.approx(GEOMETRIC_SUM, abs=1e-12)

    def test_no_decay_counts_samples(self):
        traj = make_traj([(0.1 * (k + 1), 0.5, 0.5, 0.0) for k in range(7)])
        cm = uniform_costmap(0.4, shape=(4, 4), resolution=1.0)
        assert semantic_cost_term(traj, cm, decay=0.0) == pytest.approx(7 * 0.4, abs=1e-12)

    def test_out_of_map_costs_one(self):
        traj = make_traj([(0.1, 100.0, 100.0, 0.0)])
        cm = uniform_costmap(0.0, shape=(4, 4), resolution=1.0)
        assert semantic_cost_term(traj, cm, decay=0.0) == 1.0

    def test_mission_offset_scales_sum(self):
        traj = make_traj([(0.25 * (k + 1), 0.5, 0.5, 0.0) for k in range(4)])
        cm = uniform_costmap(1.0, shape=(4, 4), resolution=1.0)
        base = semantic_cost_term(traj, cm, decay=0.5, t_offset=0.0)
        late = semantic_cost_term(traj, cm, decay=0.5, t_offset=3.0)
        assert late == pytest.approx(base * math.exp(-1.5), rel=1e-12)


def random_scenario(rng, n_v=7, n_omega=7):
    """Random planner inputs plus the plain-python oracle's mirror of them."""
    h, w = int(rng.integers(4, 10)), int(rng.integers(4, 10))
    resolution = float(rng.uniform(0.3, 1.5))
    origin = (float(rng.uniform(-4, 0)), float(rng.uniform(-4, 0)))
    costs = rng.uniform(size=(h, w)).round(3)
    n_obstacles = int(rng.integers(0, 4))
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(n_obstacles):
        mask[int(rng.integers(0, h)), int(rng.integers(0, w))] = True

    cm = CostMap(costs=costs, resolution=resolution, origin=origin)
    occ = Occupancy(mask=mask, resolution=resolution, origin=origin)

    state = UavState(
        x=float(rng.uniform(origin[0], origin[0] + w * resolution)),
        y=float(rng.uniform(origin[1], origin[1] + h * resolution)),
        theta=float(rng.uniform(-math.pi, math.pi)),
        v=float(rng.uniform(0.0, 1.5)),
        omega=float(rng.uniform(-1.0, 1.0)),
    )
    goal = (float(rng.uniform(-5, 10)), float(rng.uniform(-5, 10)))
    limits = KinodynamicLimits(
        v_min=0.0, v_max=float(rng.uniform(1.0, 3.0)),
        omega_min=float(rng.uniform(-2.0, -0.5)), omega_max=float(rng.uniform(0.5, 2.0)),
        a_lin=float(rng.uniform(0.5, 2.0)), a_ang=float(rng.uniform(0.5, 3.0)),
    )
    weights = ObjectiveWeights(
        alpha=float(rng.uniform(0, 2)), beta=float(rng.uniform(0, 2)),
        gamma=float(rng.uniform(0, 2)), epsilon=float(rng.uniform(0, 2)),
        decay=float(rng.uniform(0, 0.5)), dt=0.25,
        horizon=0.25 * int(rng.integers(3, 12)), n_v=n_v, n_omega=n_omega,
    )
    d_max = float(rng.uniform(0.5, 4.0))
    t_mission = float(rng.uniform(0, 20))

    grid = oracles.GridWorld(
        costs=costs.tolist(), resolution=resolution, origin=origin,
        obstacle_cells={(int(ix), int(iy)) for iy, ix in zip(*np.nonzero(mask))},
    )
    oracle_args = (
        (state.x, state.y, state.theta, state.v, state.omega), goal, grid,
        {"v_min": limits.v_min, "v_max": limits.v_max,
         "omega_min": limits.omega_min, "omega_max": limits.omega_max,
         "a_lin": limits.a_lin, "a_ang": limits.a_ang},
        {"alpha": weights.alpha, "beta": weights.beta, "gamma": weights.gamma,
         "epsilon": weights.epsilon, "decay": weights.decay, "dt": weights.dt,
         "horizon": weights.horizon, "n_v": weights.n_v, "n_omega": weights.n_omega},
        d_max, t_mission,
    )
    return (state, goal, cm, occ, limits, weights, d_max, t_mission), oracle_args


class TestSelectVelocity:
    def test_empty_world_straight_goal_maximizes_speed(self, default_limits):
        weights = ObjectiveWeights(alpha=0.8, beta=0.1, gamma=0.1, epsilon=0.0)
        state = UavState(5.0, 5.0, 0.0, v=1.0)
        cand = select_velocity(state, (50.0, 5.0), uniform_costmap(0.2),
                               empty_occupancy(), default_limits, weights)
        (v_lo, v_hi), _ = dynamic_window(state, default_limits, weights.dt)
        assert cand.omega == 0.0
        assert cand.v == v_hi
        assert not cand.recovery

    def test_degenerate_window_returns_single_candidate(self, default_limits):
        weights = ObjectiveWeights(alpha=0.8, beta=0.1, gamma=0.1, epsilon=1.0,
                                   dt=0.25, horizon=2.5)
        # a_lin*dt window around (v, omega) collapses when both accels are tiny
        limits = KinodynamicLimits(0.0, 2.0, -1.5, 1.5, a_lin=1e-12, a_ang=1e-12)
        state = UavState(5.0, 5.0, 0.3, v=1.0, omega=0.25)
        cand = select_velocity(state, (0.0, 0.0), uniform_costmap(0.9),
                               empty_occupancy(), limits, weights)
        assert cand.v == pytest.approx(1.0, abs=1e-9)
        assert cand.omega == pytest.approx(0.25, abs=1e-9)

    def test_recovery_when_surrounded(self, default_limits, default_weights):
        mask = np.ones((20, 20), dtype=bool)
        mask[9:12, 9:12] = False  # small free pocket; every rollout exits it
        occ = Occupancy(mask=mask, resolution=0.5)
        state = UavState(5.25, 5.25, 0.0, v=2.0)
        cand = select_velocity(state, (9.0, 9.0), uniform_costmap(0.5), occ,
                               default_limits, default_weights)
        assert cand.recovery
        assert cand.v == 0.0
        assert cand.g == -math.inf

    def test_selected_command_inside_window(self, default_limits, default_weights):
        rng = np.random.default_rng(77)
        for _ in range(30):
            (state, goal, cm, occ, limits, weights, d_max, t_mission), _ = \
                random_scenario(rng, n_v=5, n_omega=5)
            cand = select_velocity(state, goal, cm, occ, limits, weights,
                                   d_max=d_max, t_mission=t_mission)
            if cand.recovery:
                continue
            (v_lo, v_hi), (om_lo, om_hi) = dynamic_window(state, limits, weights.dt)
            assert v_lo <= cand.v <= v_hi
            assert om_lo <= cand.omega <= om_hi

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2024)
        recoveries = 0
        for _ in range(40):
            args, oracle_args = random_scenario(rng, n_v=7, n_omega=7)
            state, goal, cm, occ, limits, weights, d_max, t_mission = args
            cand = select_velocity(state, goal, cm, occ, limits, weights,
                                   d_max=d_max, t_mission=t_mission)
            ov, oom, orec = oracles.dwa_select(*oracle_args)
            recoveries += orec
            assert (cand.v, cand.omega, cand.recovery) == (ov, oom, orec)
        assert recoveries < 40  # the comparison must exercise scored paths

    def test_normalized_terms_in_unit_interval(self):
        rng = np.random.default_rng(99)
        for _ in range(25):
            args, _ = random_scenario(rng, n_v=5, n_omega=5)
            state, goal, cm, occ, limits, weights, d_max, t_mission = args
            cand = select_velocity(state, goal, cm, occ, limits, weights,
                                   d_max=d_max, t_mission=t_mission)
            if cand.recovery:
                continue
            for term in cand.terms:
                assert 0.0 <= term <= 1.0

    def test_epsilon_zero_ignores_cost_map(self, default_limits):
        weights = ObjectiveWeights(alpha=0.7, beta=0.2, gamma=0.1, epsilon=0.0)
        rng = np.random.default_rng(123)
        for _ in range(20):
            state = UavState(x=float(rng.uniform(2, 8)), y=float(rng.uniform(2, 8)),
                             theta=float(rng.uniform(-3, 3)),
                             v=float(rng.uniform(0, 1.5)))
            goal = (float(rng.uniform(0, 10)), float(rng.uniform(0, 10)))
            occ = empty_occupancy()
            a = select_velocity(state, goal, uniform_costmap(0.0), occ,
                                default_limits, weights)
            b = select_velocity(
                state, goal,
                CostMap(costs=rng.uniform(size=(20, 20)), resolution=0.5), occ,
                default_limits, weights)
            assert (a.v, a.omega) == (b.v, b.omega)

    def test_weight_scaling_leaves_argmax_unchanged(self):
        rng = np.random.default_rng(321)
        for _ in range(20):
            args, _ = random_scenario(rng, n_v=5, n_omega=5)
            state, goal, cm, occ, limits, weights, d_max, t_mission = args
            scaled = ObjectiveWeights(
                alpha=weights.alpha * 3.7, beta=weights.beta * 3.7,
                gamma=weights.gamma * 3.7, epsilon=weights.epsilon * 3.7,
                decay=weights.decay, dt=weights.dt, horizon=weights.horizon,
                n_v=weights.n_v, n_omega=weights.n_omega)
            a = select_velocity(state, goal, cm, occ, limits, weights,
                                d_max=d_max, t_mission=t_mission)
            b = select_velocity(state, goal, cm, occ, limits, scaled,
                                d_max=d_max, t_mission=t_mission)
            assert (a.v, a.omega, a.recovery) == (b.v, b.omega, b.recovery)

    def test_semantic_cost_monotone_in_map(self, default_limits, default_weights):
        rng = np.random.default_rng(555)
        for _ in range(20):
            costs = rng.uniform(0.0, 0.8, size=(10, 10))
            cm = CostMap(costs=costs, resolution=1.0)
            traj = rollout(UavState(5.0, 5.0, float(rng.uniform(-3, 3))),
                           1.0, float(rng.uniform(-0.5, 0.5)), default_weights)
            before = semantic_cost_term(traj, cm, decay=0.2)
            raised = costs.copy()
            raised[int(rng.integers(0, 10)), int(rng.integers(0, 10))] += 0.2
            after = semantic_cost_term(traj, CostMap(costs=raised, resolution=1.0),
                                       decay=0.2)
            assert after >= before

    def test_invalid_decay_clock(self, default_limits, default_weights):
        with pytest.raises(DomainError):
            select_velocity(UavState(0, 0, 0), (1, 1), uniform_costmap(0.5),
                            empty_occupancy(), default_limits, default_weights,
                            decay_clock="warped")


class TestScoredCandidateInvariant:
    def test_g_equals_weighted_terms(self):
        rng = np.random.default_rng(888)
        for _ in range(20):
            args, _ = random_scenario(rng, n_v=5, n_omega=5)
            state, goal, cm, occ, limits, weights, d_max, t_mission = args
            cand = select_velocity(state, goal, cm, occ, limits, weights,
                                   d_max=d_max, t_mission=t_mission)
            if cand.recovery:
                continue
            h, d, vel, c = cand.terms
            expected = (weights.alpha * h + weights.beta * d
                        + weights.gamma * vel - weights.epsilon * c)
            assert cand.g == expected


class TestStateTypes:
    def test_theta_wrapped_into_interval(self):
        assert UavState(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
        assert UavState(0, 0, -math.pi).theta == pytest.approx(math.pi)
        state = UavState(0, 0, 100.0)
        assert -math.pi < state.theta <= math.pi

    def test_limits_validation(self):
        with pytest.raises(DomainError):
            KinodynamicLimits(2.0, 1.0, -1.0, 1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            KinodynamicLimits(0.0, 1.0, -1.0, 1.0, 0.0, 1.0)

    def test_weights_validation(self):
        with pytest.raises(DomainError):
            ObjectiveWeights(-0.1, 0, 0, 0)
        with pytest.raises(DomainError):
            ObjectiveWeights(1, 0, 0, 0, dt=0.5, horizon=0.25)
        with pytest.raises(DomainError):
            ObjectiveWeights(1, 0, 0, 0, n_v=1)

    def test_planner_config_validation(self, default_weights, default_limits):
        with pytest.raises(DomainError):
            PlannerConfig(weights=default_weights, limits=default_limits, d_max=0.0)
        with pytest.raises(DomainError):
            PlannerConfig(weights=default_weights, limits=default_limits,
                          decay_clock="sidereal")
