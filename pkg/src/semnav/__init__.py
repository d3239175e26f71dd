"""Semantic-aware UAV navigation: cost maps, keyframe gating, DWA planning.

Subpackages: :mod:`semnav.costmap` (label grids and cost maps),
:mod:`semnav.nn` (keyframe/attention kernels and mIoU),
:mod:`semnav.planner` (the semantic-aware dynamic window planner),
:mod:`semnav.simulator` (deterministic grid-world episodes),
:mod:`semnav.bridge` (the NDJSON/TCP control link),
:mod:`semnav.accel` (numba/numpy kernel backends).
"""

from .costmap import (
    CostMap,
    LabelCostTable,
    Occupancy,
    SemanticMap,
    build_costmap,
    cost_from_label,
    patch_update,
    sample_cost,
)
from .planner import (
    KinodynamicLimits,
    ObjectiveWeights,
    PlannerConfig,
    ScoredCandidate,
    Trajectory,
    UavState,
    dynamic_window,
    rollout,
    select_velocity,
)
from .simulator import (
    RunRecord,
    SensorSpec,
    StepRecord,
    World,
    compute_metrics,
    export_run,
    run_episode,
    sense,
)

__version__ = "0.1.0"

__all__ = [
    "CostMap",
    "KinodynamicLimits",
    "LabelCostTable",
    "ObjectiveWeights",
    "Occupancy",
    "PlannerConfig",
    "RunRecord",
    "ScoredCandidate",
    "SemanticMap",
    "SensorSpec",
    "StepRecord",
    "Trajectory",
    "UavState",
    "World",
    "build_costmap",
    "compute_metrics",
    "cost_from_label",
    "dynamic_window",
    "export_run",
    "patch_update",
    "rollout",
    "run_episode",
    "sample_cost",
    "select_velocity",
    "sense",
]
