"""6-DoF rigid-body dynamics of a small underwater vehicle.

Conventions follow the standard marine-craft formulation (Fossen):

    eta = [x, y, z, roll, pitch, yaw]   world frame, NED, z down (m, rad)
    nu  = [u, v, w, p, q, r]            body frame (m/s, rad/s)

    eta_dot = J(eta) nu
    M nu_dot + C(nu) nu + D(nu_r) nu_r + g(eta) = delta

with M = M_RB + M_A constant, C(nu) built from M by the skew-symmetric
construction, damping acting on the velocity relative to an ambient
current, and delta = B (u_thruster + actuator_noise).

The plant is integrated with a semi-implicit Euler step: body velocity
first, then pose with the updated velocity.  All functions are pure; the
caller owns the state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, SingularityError

logger = logging.getLogger(__name__)

# Guard band around the Euler-angle singularity at pitch = +-pi/2.
PITCH_GUARD = 1e-3

# Any state entry beyond this magnitude is treated as a numeric blow-up.
DIVERGENCE_LIMIT = 1e6

# Elementwise clamp on the error integral, keeps the Lyapunov value finite
# under sustained offsets.
INTEGRAL_CLAMP = 1e3


@dataclass
class VehicleModel:
    """Plant parameters: inertia, damping, restoring and actuation."""

    rigid_body_mass_matrix: np.ndarray     # 6x6, kg / kg m^2
    added_mass_matrix: np.ndarray          # 6x6, same units
    linear_damping: np.ndarray             # 6x6, N s/m and N m s/rad
    quadratic_damping: np.ndarray          # 6, per-axis diagonal, >= 0
    weight_N: float
    buoyancy_N: float
    cog_to_cob_offset: np.ndarray          # 3, body frame, m
    thruster_allocation_B: np.ndarray      # 6x6, invertible

    def __post_init__(self):
        self.rigid_body_mass_matrix = np.asarray(self.rigid_body_mass_matrix, dtype=float)
        self.added_mass_matrix = np.asarray(self.added_mass_matrix, dtype=float)
        self.linear_damping = np.asarray(self.linear_damping, dtype=float)
        self.quadratic_damping = np.asarray(self.quadratic_damping, dtype=float)
        self.cog_to_cob_offset = np.asarray(self.cog_to_cob_offset, dtype=float)
        self.thruster_allocation_B = np.asarray(self.thruster_allocation_B, dtype=float)
        self.weight_N = float(self.weight_N)
        self.buoyancy_N = float(self.buoyancy_N)
        self._validate()

    def _validate(self):
        M = self.combined_mass_matrix
        if not np.allclose(M, M.T):
            raise ValueError("combined mass matrix must be symmetric")
        if np.linalg.eigvalsh((M + M.T) / 2).min() <= 0.0:
            raise ValueError("combined mass matrix must be positive definite")
        if np.linalg.cond(self.thruster_allocation_B) >= 1e6:
            raise ValueError("thruster allocation matrix is near-singular")
        if np.any(self.quadratic_damping < 0.0):
            raise ValueError("quadratic damping entries must be >= 0")
        dl = (self.linear_damping + self.linear_damping.T) / 2
        if np.linalg.eigvalsh(dl).min() < -1e-9:
            raise ValueError("linear damping must be positive semi-definite")

    @property
    def combined_mass_matrix(self) -> np.ndarray:
        return self.rigid_body_mass_matrix + self.added_mass_matrix


@dataclass
class SimState:
    """Plant state: pose, body velocity, error integral and time."""

    eta: np.ndarray
    nu: np.ndarray
    err_integral: np.ndarray = field(default_factory=lambda: np.zeros(6))
    t: float = 0.0

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.err_integral = np.asarray(self.err_integral, dtype=float)
        if not (np.all(np.isfinite(self.eta)) and np.all(np.isfinite(self.nu))
                and np.all(np.isfinite(self.err_integral))):
            raise ValueError("state entries must be finite")
        if abs(math.cos(self.eta[4])) < math.sin(PITCH_GUARD):
            raise SingularityError(
                f"pitch {self.eta[4]:.6f} rad within guard band of +-pi/2")


@dataclass(frozen=True)
class CurrentSpec:
    """Uniform, irrotational ambient current: speed plus horizontal and
    vertical direction angles."""

    v_c: float = 0.0   # m/s
    h_c: float = 0.0   # rad, horizontal angle in the NED xy-plane
    j_c: float = 0.0   # rad, vertical angle, positive toward z (down)

    def __post_init__(self):
        if self.v_c < 0.0:
            raise ValueError("current speed must be >= 0")

    def world_velocity(self) -> np.ndarray:
        return self.v_c * np.array([
            math.cos(self.j_c) * math.cos(self.h_c),
            math.cos(self.j_c) * math.sin(self.h_c),
            math.sin(self.j_c),
        ])


NO_CURRENT = CurrentSpec(0.0, 0.0, 0.0)


def default_model() -> VehicleModel:
    """Desk-scale ROV-like plant with diagonal inertia and damping.

    Order-of-magnitude values only; every consumer accepts an arbitrary
    VehicleModel, so nothing downstream depends on these numbers.
    """
    rigid = np.diag([1862.0, 1862.0, 1862.0, 525.0, 794.0, 691.0])
    weight = 1862.0 * 9.81
    return VehicleModel(
        rigid_body_mass_matrix=rigid,
        added_mass_matrix=0.5 * rigid,
        linear_damping=np.diag([750.0, 750.0, 1200.0, 280.0, 320.0, 300.0]),
        quadratic_damping=np.array([750.0, 990.0, 1800.0, 670.0, 770.0, 520.0]),
        weight_N=weight,
        buoyancy_N=weight + 20.0,
        cog_to_cob_offset=np.array([0.0, 0.0, -0.28]),
        thruster_allocation_B=np.eye(6),
    )


_MODEL_KEYS = (
    "rigid_body_mass_matrix", "added_mass_matrix", "linear_damping",
    "quadratic_damping", "weight_N", "buoyancy_N", "cog_to_cob_offset",
    "thruster_allocation_B",
)


def model_from_dict(cfg: dict) -> VehicleModel:
    """Build a VehicleModel from a config mapping.

    Matrix-valued keys accept either a 6x6 nested list or a length-6 list
    (interpreted as a diagonal).  Missing keys fall back to the default
    model and are logged.
    """
    base = default_model()
    values = {}
    missing = []
    for key in _MODEL_KEYS:
        if key not in cfg:
            missing.append(key)
            values[key] = getattr(base, key)
            continue
        raw = cfg[key]
        if key in ("weight_N", "buoyancy_N"):
            values[key] = float(raw)
        elif key in ("quadratic_damping", "cog_to_cob_offset"):
            values[key] = np.asarray(raw, dtype=float)
        else:
            arr = np.asarray(raw, dtype=float)
            values[key] = np.diag(arr) if arr.ndim == 1 else arr
    if missing:
        logger.warning("vehicle config missing %s; using default model values",
                       ", ".join(missing))
    unknown = set(cfg) - set(_MODEL_KEYS)
    if unknown:
        logger.warning("vehicle config has unknown keys %s (ignored)",
                       ", ".join(sorted(unknown)))
    return VehicleModel(**values)


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-world rotation, zyx Euler convention."""
    cphi, sphi = math.cos(roll), math.sin(roll)
    cth, sth = math.cos(pitch), math.sin(pitch)
    cpsi, spsi = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cpsi * cth, -spsi * cphi + cpsi * sth * sphi, spsi * sphi + cpsi * cphi * sth],
        [spsi * cth, cpsi * cphi + sphi * sth * spsi, -cpsi * sphi + sth * spsi * cphi],
        [-sth, cth * sphi, cth * cphi],
    ])


def euler_rate_matrix(roll: float, pitch: float) -> np.ndarray:
    """Body angular rates to Euler angle rates; singular at cos(pitch)=0."""
    cphi, sphi = math.cos(roll), math.sin(roll)
    cth = math.cos(pitch)
    tth = math.tan(pitch)
    return np.array([
        [1.0, sphi * tth, cphi * tth],
        [0.0, cphi, -sphi],
        [0.0, sphi / cth, cphi / cth],
    ])


def kinematic_transform(eta: np.ndarray) -> np.ndarray:
    """6x6 transform J(eta) mapping body velocity to world pose rates.

    Raises SingularityError when pitch lies within PITCH_GUARD of +-pi/2.
    """
    roll, pitch, yaw = eta[3], eta[4], eta[5]
    if abs(math.cos(pitch)) < math.sin(PITCH_GUARD):
        raise SingularityError(
            f"pitch {pitch:.6f} rad within guard band of +-pi/2")
    J = np.zeros((6, 6))
    J[:3, :3] = rotation_matrix(roll, pitch, yaw)
    J[3:, 3:] = euler_rate_matrix(roll, pitch)
    return J


def m_eta(eta: np.ndarray, model: VehicleModel) -> np.ndarray:
    """World-coordinate inertia J^-T (M_RB + M_A) J^-1, symmetrized."""
    Jinv = np.linalg.inv(kinematic_transform(eta))
    Me = Jinv.T @ model.combined_mass_matrix @ Jinv
    return (Me + Me.T) / 2


def m_eta_directional_term(eta: np.ndarray, eta_d: np.ndarray,
                           model: VehicleModel, h: float = 1e-6) -> np.ndarray:
    """sum_i (eta_i - eta_d_i) dM_eta/deta_i by central finite differences."""
    eta = np.asarray(eta, dtype=float)
    eta_d = np.asarray(eta_d, dtype=float)
    total = np.zeros((6, 6))
    for i in range(6):
        coeff = eta[i] - eta_d[i]
        step = np.zeros(6)
        step[i] = h
        deriv = (m_eta(eta + step, model) - m_eta(eta - step, model)) / (2.0 * h)
        total += coeff * deriv
    return total


def coriolis_matrix(mass_matrix: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Skew-symmetric C(nu) built from the (combined) mass matrix."""
    nu1, nu2 = nu[:3], nu[3:]
    p1 = mass_matrix[:3, :3] @ nu1 + mass_matrix[:3, 3:] @ nu2
    p2 = mass_matrix[3:, :3] @ nu1 + mass_matrix[3:, 3:] @ nu2
    C = np.zeros((6, 6))
    C[:3, 3:] = -_skew(p1)
    C[3:, :3] = -_skew(p1)
    C[3:, 3:] = -_skew(p2)
    return C


def _skew(a: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -a[2], a[1]],
        [a[2], 0.0, -a[0]],
        [-a[1], a[0], 0.0],
    ])


def restoring_forces(eta: np.ndarray, model: VehicleModel) -> np.ndarray:
    """Gravity/buoyancy generalized force g(eta) on the left-hand side of
    the motion equation.

    At zero angles a heavy vehicle (W > B) has g_heave = -(W - B), so the
    uncompensated heave acceleration is +(W - B)/m, downward in NED.
    """
    R = rotation_matrix(eta[3], eta[4], eta[5])
    z_body = R.T @ np.array([0.0, 0.0, 1.0])  # world down axis in body frame
    f_gravity = model.weight_N * z_body
    f_buoyancy = -model.buoyancy_N * z_body
    moment = np.cross(model.cog_to_cob_offset, f_buoyancy)  # CoG at body origin
    return -np.concatenate([f_gravity + f_buoyancy, moment])


def step_dynamics(state: SimState, u_thruster: np.ndarray, current: CurrentSpec,
                  actuator_noise: np.ndarray, dt: float, model: VehicleModel,
                  eta_d: np.ndarray | None = None) -> SimState:
    """Advance the plant one semi-implicit Euler step of length dt.

    The error integral accumulates e = eta_d - eta at the updated pose;
    eta_d defaults to the origin setpoint.  Raises DivergenceError when any
    state entry exceeds DIVERGENCE_LIMIT.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if eta_d is None:
        eta_d = np.zeros(6)

    J = kinematic_transform(state.eta)
    delta = model.thruster_allocation_B @ (np.asarray(u_thruster, dtype=float)
                                           + np.asarray(actuator_noise, dtype=float))

    # Damping acts on velocity relative to the ambient current.
    nu_current = np.zeros(6)
    nu_current[:3] = J[:3, :3].T @ current.world_velocity()
    nu_r = state.nu - nu_current

    M = model.combined_mass_matrix
    damping = model.linear_damping @ nu_r + model.quadratic_damping * nu_r * np.abs(nu_r)
    coriolis = coriolis_matrix(M, state.nu) @ state.nu
    g = restoring_forces(state.eta, model)

    nu_new = state.nu + dt * np.linalg.solve(M, delta - coriolis - damping - g)
    eta_new = state.eta + dt * (J @ nu_new)

    err_new = state.err_integral + (eta_d - eta_new) * dt
    clipped = np.clip(err_new, -INTEGRAL_CLAMP, INTEGRAL_CLAMP)
    if not np.array_equal(clipped, err_new):
        logger.debug("error integral clamped at t=%.2f", state.t + dt)
    err_new = clipped

    for name, vec in (("eta", eta_new), ("nu", nu_new), ("err_integral", err_new)):
        if not np.all(np.isfinite(vec)) or np.any(np.abs(vec) > DIVERGENCE_LIMIT):
            raise DivergenceError(f"{name} diverged at t={state.t + dt:.2f}")

    return SimState(eta=eta_new, nu=nu_new, err_integral=err_new, t=state.t + dt)
