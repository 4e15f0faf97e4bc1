"""cempid: desk-scale 6-DoF underwater-vehicle simulation with
cross-entropy tuning of Lyapunov-parametrized PID gains."""

__version__ = "0.1.0"

from .controller import GainSet, LoopState, make_loop_state, pid_control
from .dynamics import (CurrentSpec, SimState, VehicleModel, default_model,
                       kinematic_transform, m_eta, restoring_forces,
                       step_dynamics)
from .episode import (ControllerSpec, ScenarioSpec, StepRecord, episode_cost,
                      naive_gains, run_episode, stability_percentages)
from .lyapunov import (LambdaAction, SimilarityBasis, StabilityFlags,
                       check_param_constraints, gains_from_lambda,
                       lyapunov_matrix, lyapunov_value, make_basis,
                       state_stability_step)
from .policy import (NUM_WEIGHTS, ActionDistribution, deterministic_action,
                     forward, sample_action)
from .cem import CemConfig, CemState, cem_update, minimize, sample_population

__all__ = [
    "GainSet", "LoopState", "make_loop_state", "pid_control",
    "CurrentSpec", "SimState", "VehicleModel", "default_model",
    "kinematic_transform", "m_eta", "restoring_forces", "step_dynamics",
    "ControllerSpec", "ScenarioSpec", "StepRecord", "episode_cost",
    "naive_gains", "run_episode", "stability_percentages",
    "LambdaAction", "SimilarityBasis", "StabilityFlags",
    "check_param_constraints", "gains_from_lambda", "lyapunov_matrix",
    "lyapunov_value", "make_basis", "state_stability_step",
    "NUM_WEIGHTS", "ActionDistribution", "deterministic_action", "forward",
    "sample_action",
    "CemConfig", "CemState", "cem_update", "minimize", "sample_population",
]
