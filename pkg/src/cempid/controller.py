"""Model-based PID law in world coordinates.

The control loop state is the 18-vector x = [p, eta, integral-of-error]
with generalized momentum p = M_eta(eta) eta_dot.  The thruster command is

    u = B^-1 [ J^T(eta) (k_p e + k_i int(e) - k_d eta_dot) + g(eta) ]

with e = eta_d - eta.  No saturation is applied here; clamp_command is a
separate helper so the harness can record saturated steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SimState, VehicleModel, kinematic_transform, m_eta, restoring_forces


@dataclass
class GainSet:
    """PID gain matrices plus the Lyapunov coupling constant alpha."""

    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray
    alpha: float

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=float)
        self.ki = np.asarray(self.ki, dtype=float)
        self.kd = np.asarray(self.kd, dtype=float)
        self.alpha = float(self.alpha)
        for name in ("kp", "ki", "kd"):
            mat = getattr(self, name)
            if mat.shape != (6, 6) or not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} must be a finite 6x6 matrix")
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError("alpha must be finite and > 0")


@dataclass
class LoopState:
    """Control-loop state x = [p, eta, err_integral] in R^18."""

    p: np.ndarray
    eta: np.ndarray
    err_integral: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.err_integral = np.asarray(self.err_integral, dtype=float)
        if not all(v.shape == (6,) and np.all(np.isfinite(v))
                   for v in (self.p, self.eta, self.err_integral)):
            raise ValueError("loop state blocks must be finite 6-vectors")

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.p, self.eta, self.err_integral])


def make_loop_state(state: SimState, model: VehicleModel) -> LoopState:
    """Assemble x = [M_eta eta_dot, eta, err_integral] from a plant state."""
    eta_dot = kinematic_transform(state.eta) @ state.nu
    p = m_eta(state.eta, model) @ eta_dot
    return LoopState(p=p, eta=state.eta.copy(), err_integral=state.err_integral.copy())


def pid_control(state: SimState, gains: GainSet, eta_d: np.ndarray,
                model: VehicleModel) -> np.ndarray:
    """Thruster command for the current state and gains (unsaturated)."""
    J = kinematic_transform(state.eta)
    eta_dot = J @ state.nu
    e = np.asarray(eta_d, dtype=float) - state.eta
    tau = gains.kp @ e + gains.ki @ state.err_integral - gains.kd @ eta_dot
    force = J.T @ tau + restoring_forces(state.eta, model)
    return np.linalg.solve(model.thruster_allocation_B, force)


def clamp_command(u: np.ndarray, u_max: float | None) -> tuple[np.ndarray, bool]:
    """Optional symmetric thruster clamp; returns (command, saturated)."""
    if u_max is None:
        return u, False
    clipped = np.clip(u, -u_max, u_max)
    return clipped, bool(np.any(clipped != u))
