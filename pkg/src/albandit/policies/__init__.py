from .baselines import DIM_ORACLE, NORM_ORACLE, oracle_run, ucb1_run, ucb1_select
from .dim import (
    ContinuumOFUL,
    alb_dim_run,
    oful_beta,
    oful_continuum_select,
    oful_restricted_run,
    support_trajectory,
)
from .finite import (
    LinUCBLearner,
    active_ladder_level,
    alb_dim_finite_run,
    feature_scale,
    ladder_trajectory,
    linucb_run,
)
from .norm import (
    OfulPlusState,
    alb_norm_run,
    new_oful_plus,
    norm_refine,
    oful_plus_index,
    oful_plus_observe,
    oful_plus_run,
    oful_plus_select,
)
from .schedule import DELTA_FLOOR, EpochSchedule, ceil_sqrt, dim_schedule, norm_schedule

__all__ = [
    "ContinuumOFUL", "DELTA_FLOOR", "DIM_ORACLE", "EpochSchedule", "LinUCBLearner", "NORM_ORACLE",
    "OfulPlusState", "active_ladder_level", "alb_dim_finite_run", "alb_dim_run", "alb_norm_run",
    "ceil_sqrt", "dim_schedule", "feature_scale", "ladder_trajectory", "linucb_run", "new_oful_plus",
    "norm_refine", "norm_schedule", "oful_beta", "oful_continuum_select", "oful_plus_index",
    "oful_plus_observe", "oful_plus_run", "oful_plus_select", "oful_restricted_run", "oracle_run",
    "support_trajectory", "ucb1_run", "ucb1_select",
]
