"""Uplink power control for cell-free massive MIMO.

Network generation, closed-form SINR/SE, classical power-control solvers and
an unsupervised neural power controller fed by aggregated large-scale fading.
"""

from .params import PathLoss, SystemParams, load_params
from .scenario import (
    ChannelStats,
    Scenario,
    assign_pilots,
    channel_stats,
    generate_scenario,
    path_loss_db,
    wrap_distance,
)
from .metrics import (
    PowerAllocation,
    SinrCoefficients,
    aggregate_lsf,
    se,
    sinr,
    sinr_coefficients,
    sinr_jacobian,
)
from .solvers import (
    SolveReport,
    brute_force,
    feasibility_fixed_point,
    solve_maxmin,
    solve_weighted,
)
from .neural import LossSpec, MlpModel, init_mlp, loss_grad_wrt_eta, loss_value
from .pipeline import Dataset, LearningCurve, TrainConfig, build_dataset, infer, train

__version__ = "0.1.0"
