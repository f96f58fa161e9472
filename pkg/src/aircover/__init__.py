"""aircover: UAV aerial base stations restoring coverage after ground outages.

Deterministic simulator: zigzag user discovery, CF-tree workspace
partitioning, minimal enclosing circles, per-UAV tabular Q-learning, and a
two-ray / air-to-ground radio model.
"""

from .agents import (
    Action,
    AgentHyperparams,
    FleetQLearner,
    QTable,
    apply_action,
    reward,
    resolve_collisions,
)
from .clustering import (
    Assignment,
    CfTree,
    CfTreeClusterer,
    Circle,
    Workspace,
    assign_uavs,
    minimal_enclosing_circle,
    shared_assignments,
    zigzag_sweep,
)
from .harness import (
    RunConfig,
    compare_baselines,
    config_from_dict,
    load_config,
    run_experiment,
    save_config,
)
from .propagation import ChannelParams, LinkBudget, link_budget
from .scenario import (
    Scene,
    Tbs,
    UserEquipment,
    apply_disaster,
    build_grid_scene,
    distance,
    generate_ues,
    select_tbs,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentHyperparams",
    "Assignment",
    "CfTree",
    "CfTreeClusterer",
    "ChannelParams",
    "Circle",
    "FleetQLearner",
    "LinkBudget",
    "QTable",
    "RunConfig",
    "Scene",
    "Tbs",
    "UserEquipment",
    "Workspace",
    "__version__",
    "apply_action",
    "apply_disaster",
    "assign_uavs",
    "build_grid_scene",
    "compare_baselines",
    "config_from_dict",
    "distance",
    "generate_ues",
    "link_budget",
    "load_config",
    "minimal_enclosing_circle",
    "resolve_collisions",
    "reward",
    "run_experiment",
    "save_config",
    "select_tbs",
    "shared_assignments",
    "zigzag_sweep",
]
