import numpy as np
import pytest

from semnav import accel
from semnav.costmap import CostMap, LabelCostTable, Occupancy, SemanticMap
from semnav.planner import KinodynamicLimits, ObjectiveWeights, PlannerConfig


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger any JIT compilation once so timed tests measure the kernels."""
    backend = accel.get_backend("auto")
    xs = np.array([0.1, 0.2])
    ys = np.array([0.3, 0.4])
    backend.rollout_path(0.0, 0.0, 0.0, 1.0, 0.5, 0.1, 3)
    backend.rollout_path(0.0, 0.0, 0.0, 1.0, 0.0, 0.1, 3)
    backend.min_dist_sq(xs, ys, xs, ys)
    backend.hits_occupied(xs, ys, np.zeros((2, 2), dtype=bool), 0.0, 0.0, 1.0)
    backend.decayed_cost_sum(xs, ys, np.ones(2), np.zeros((2, 2)), 0.0, 0.0, 1.0)
    backend.conv2d_1x1(np.zeros((2, 2, 1)), np.zeros((1, 1)), np.zeros(1))
    backend.conv2d_3x3(np.zeros((2, 2, 1)), np.zeros((1, 1, 3, 3)), np.zeros(1))


@pytest.fixture
def default_limits():
    return KinodynamicLimits(v_min=0.0, v_max=2.0, omega_min=-1.5, omega_max=1.5,
                             a_lin=1.0, a_ang=2.0)


@pytest.fixture
def default_weights():
    return ObjectiveWeights(alpha=0.8, beta=0.1, gamma=0.1, epsilon=1.0,
                            decay=0.2, dt=0.25, horizon=2.5, n_v=5, n_omega=7)


@pytest.fixture
def default_config(default_weights, default_limits):
    return PlannerConfig(weights=default_weights, limits=default_limits, d_max=5.0)


def uniform_costmap(value, shape=(20, 20), resolution=0.5, origin=(0.0, 0.0)):
    return CostMap(costs=np.full(shape, float(value)), resolution=resolution,
                   origin=origin)


def empty_occupancy(shape=(20, 20), resolution=0.5, origin=(0.0, 0.0)):
    return Occupancy(mask=np.zeros(shape, dtype=bool), resolution=resolution,
                     origin=origin)


def grass_map(shape=(20, 20), resolution=0.5, label=1):
    return SemanticMap(labels=np.full(shape, label, dtype=np.uint8),
                       resolution=resolution, origin=(0.0, 0.0))


def linear_table():
    return LabelCostTable.linear()


def make_keyframe_dataset(n_yes=137, n_no=63, shape=(16, 16), seed=0):
    """Linearly separable synthetic frames: bright/busy Yes vs dark/flat No."""
    rng = np.random.default_rng(seed)
    dataset = []
    for _ in range(n_yes):
        img = rng.uniform(0.55, 0.95, size=shape)
        dataset.append((img, True))
    for _ in range(n_no):
        img = rng.uniform(0.05, 0.45, size=shape)
        dataset.append((img, False))
    return dataset
