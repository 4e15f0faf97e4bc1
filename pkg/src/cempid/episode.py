"""Closed-loop episodes and their metrics.

One control step at 20 Hz: measure the state (optionally through sensor
noise), pick gains (sampled from the policy, or the fixed naive
parametrization), compute the thruster command, then advance the true
plant with optional actuator noise and current.  Sensor noise never
touches the true state; the recorded command is pre-noise with the noise
draw stored separately.

Records carry everything the stability metrics and plots need, so traces
can be recomputed and audited offline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import GainSet, clamp_command, make_loop_state, pid_control
from .dynamics import (NO_CURRENT, CurrentSpec, SimState, VehicleModel,
                       m_eta, step_dynamics)
from .errors import DivergenceError, IllConditionedError, SingularityError
from .lyapunov import (SimilarityBasis, check_param_constraints,
                       gains_from_lambda, gains_from_matrices, lyapunov_value,
                       state_stability_step)
from .policy import deterministic_action, forward, normalize_state, sample_action

SCENARIO_KINDS = ("none", "sensor_noise", "actuator_noise_with_current")

NAIVE_M_DIAG = 0.5 - 1e-5
NAIVE_M_OFFDIAG = 1e-5


@dataclass(frozen=True)
class ScenarioSpec:
    """Disturbance scenario plus episode geometry."""

    kind: str = "none"
    sensor_noise_std: np.ndarray = field(default_factory=lambda: np.zeros(6))
    actuator_noise_std: np.ndarray = field(default_factory=lambda: np.zeros(6))
    current: CurrentSpec = NO_CURRENT
    episode_steps: int = 200
    init_pose_bounds: np.ndarray = field(
        default_factory=lambda: np.zeros((6, 2)))

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        object.__setattr__(self, "sensor_noise_std",
                           np.asarray(self.sensor_noise_std, dtype=float))
        object.__setattr__(self, "actuator_noise_std",
                           np.asarray(self.actuator_noise_std, dtype=float))
        object.__setattr__(self, "init_pose_bounds",
                           np.asarray(self.init_pose_bounds, dtype=float))
        if self.episode_steps < 1:
            raise ValueError("episode_steps must be >= 1")
        if np.any(self.sensor_noise_std < 0) or np.any(self.actuator_noise_std < 0):
            raise ValueError("noise stds must be >= 0")


@dataclass(frozen=True)
class ControllerSpec:
    """Which controller runs the episode.

    kind "lb_pid" needs weights and state_scale; "naive_pid" only the
    epsilon used in its alpha formula.
    """

    kind: str
    weights: np.ndarray | None = None
    state_scale: np.ndarray | None = None
    deterministic: bool = False
    naive_epsilon: float = 1e-3
    u_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("lb_pid", "naive_pid"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "lb_pid" and (self.weights is None or self.state_scale is None):
            raise ValueError("lb_pid requires weights and state_scale")


@dataclass
class StepRecord:
    """One control step of a trace."""

    step: int
    t: float
    eta: np.ndarray
    cost: float                    # (1/6) sum of squared pose errors
    V: float
    V_dot: float                   # nan on the first step (no previous V)
    state_stable: bool
    param_flags: tuple[bool, bool, bool, bool, bool]
    kp_eig_min: float
    kp_eig_max: float
    ki_eig_min: float
    ki_eig_max: float
    kd_eig_min: float
    kd_eig_max: float
    alpha: float
    u: np.ndarray                  # commanded, pre-noise
    u_noise: np.ndarray
    saturated: bool


def naive_m_matrix() -> np.ndarray:
    """The fixed M used by the baseline: diagonal 0.5, off-diagonal 1e-5."""
    return np.full((6, 6), NAIVE_M_OFFDIAG) + np.diag(np.full(6, NAIVE_M_DIAG))


def naive_gains(eta: np.ndarray, eta_d: np.ndarray, model: VehicleModel,
                config_epsilon: float = 1e-3) -> GainSet:
    """Baseline gains: one fixed symmetric positive matrix for all three M
    slots, pushed through the same equality transform as the policy."""
    m_fixed = naive_m_matrix()
    return gains_from_matrices(m_fixed, m_fixed, m_fixed, eta, eta_d, model,
                               config_epsilon)


def _eig_range(matrix: np.ndarray) -> tuple[float, float]:
    real = np.linalg.eigvals(matrix).real
    return float(real.min()), float(real.max())


def run_episode(controller: ControllerSpec, scenario: ScenarioSpec,
                model: VehicleModel, basis: SimilarityBasis, seed: int,
                dt: float = 0.05, record_steps: bool = True,
                ) -> tuple[list[StepRecord], float]:
    """Run one episode; returns (records, total cost).

    A numeric blow-up (divergence, singular pose, singular synthesis)
    truncates the episode and reports an infinite cost; the optimizer maps
    that onto worst-finite-plus-one.
    """
    rng = np.random.default_rng(seed)
    eta_d = np.zeros(6)
    lo, hi = scenario.init_pose_bounds[:, 0], scenario.init_pose_bounds[:, 1]
    state = SimState(eta=rng.uniform(lo, hi), nu=np.zeros(6),
                     err_integral=np.zeros(6), t=0.0)

    records: list[StepRecord] = []
    total_cost = 0.0
    v_prev = math.nan
    sensor_on = scenario.kind == "sensor_noise"
    actuator_on = scenario.kind == "actuator_noise_with_current"
    current = scenario.current if actuator_on else NO_CURRENT

    for step in range(1, scenario.episode_steps + 1):
        try:
            measured = state
            if sensor_on:
                measured = SimState(
                    eta=state.eta + rng.normal(0.0, scenario.sensor_noise_std),
                    nu=state.nu + rng.normal(0.0, scenario.sensor_noise_std),
                    err_integral=state.err_integral, t=state.t)

            if controller.kind == "lb_pid":
                loop = make_loop_state(measured, model)
                dist = forward(controller.weights,
                               normalize_state(loop.x, controller.state_scale))
                if controller.deterministic:
                    action = deterministic_action(dist)
                else:
                    action = sample_action(dist, rng)
                gains = gains_from_lambda(action, basis, measured.eta, eta_d, model)
            else:
                gains = naive_gains(measured.eta, eta_d, model,
                                    controller.naive_epsilon)

            u, saturated = clamp_command(
                pid_control(measured, gains, eta_d, model), controller.u_max)

            cost = float(np.mean((eta_d - state.eta) ** 2))
            total_cost += cost

            u_noise = rng.normal(0.0, scenario.actuator_noise_std) \
                if actuator_on else np.zeros(6)

            if record_steps:
                # stability accounting on the true state; uses no RNG, so
                # skipping it during training leaves the trace unchanged
                x_true = make_loop_state(state, model)
                v_now = lyapunov_value(x_true, gains, m_eta(state.eta, model))
                if step == 1:
                    stable, v_dot = False, math.nan
                else:
                    stable, v_dot = state_stability_step(
                        v_now, v_prev, dt, float(np.linalg.norm(x_true.x)))
                flags = check_param_constraints(gains, state.eta, eta_d, model)
                kp_lo, kp_hi = _eig_range(gains.kp)
                ki_lo, ki_hi = _eig_range(gains.ki)
                kd_lo, kd_hi = _eig_range(gains.kd)
                records.append(StepRecord(
                    step=step, t=state.t, eta=state.eta.copy(), cost=cost,
                    V=v_now, V_dot=v_dot, state_stable=stable,
                    param_flags=flags,
                    kp_eig_min=kp_lo, kp_eig_max=kp_hi,
                    ki_eig_min=ki_lo, ki_eig_max=ki_hi,
                    kd_eig_min=kd_lo, kd_eig_max=kd_hi,
                    alpha=gains.alpha, u=u, u_noise=u_noise,
                    saturated=saturated))
                v_prev = v_now

            state = step_dynamics(state, u, current, u_noise, dt, model, eta_d)
        except (DivergenceError, SingularityError, IllConditionedError):
            return records, math.inf

    return records, total_cost


def episode_cost(records: list[StepRecord],
                 eta_d: np.ndarray | None = None) -> float:
    """Sum over steps of the mean squared pose error across the 6 DoFs."""
    if not records:
        raise ValueError("episode_cost needs at least one record")
    if eta_d is None:
        eta_d = np.zeros(6)
    return float(sum(np.mean((eta_d - r.eta) ** 2) for r in records))


def stability_percentages(records: list[StepRecord],
                          constraint_subset: tuple[int, ...] = (0, 1, 2, 3, 4),
                          ) -> tuple[float, float]:
    """(state %, parameter %) over a trace.

    The first step has no Vdot estimate and is excluded from the state
    count; the parameter percentage covers every step.  constraint_subset
    selects which of the five flags must hold (zero-based indices).
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    state_hits = sum(1 for r in records[1:] if r.state_stable)
    state_pct = 100.0 * state_hits / (len(records) - 1)
    param_hits = sum(1 for r in records
                     if all(r.param_flags[i] for i in constraint_subset))
    param_pct = 100.0 * param_hits / len(records)
    return state_pct, param_pct


def cumulative_stability(records: list[StepRecord],
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Running stability percentages over records[0..k] for every k.

    The state curve is nan at k=0 (no counted step yet); both curves equal
    stability_percentages(records[:k+1]) elsewhere.
    """
    n = len(records)
    state_curve = np.full(n, math.nan)
    param_curve = np.zeros(n)
    state_hits = 0
    param_hits = 0
    for k, rec in enumerate(records):
        if k >= 1 and rec.state_stable:
            state_hits += 1
        if all(rec.param_flags):
            param_hits += 1
        if k >= 1:
            state_curve[k] = 100.0 * state_hits / k
        param_curve[k] = 100.0 * param_hits / (k + 1)
    return state_curve, param_curve
