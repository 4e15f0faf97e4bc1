"""Lyapunov machinery: the quadratic certificate, the reduced gain
parametrization and the empirical stability tests.

Gains are synthesized from a positive 19-vector [L1, L2, L3, eps] through
similarity transforms M_i = P diag(L_i) P^-1 with a fixed random positive
basis P:

    k_d   = M_eta + M_1
    k_i   = M_2
    alpha = max|entry| of (-k_d) D^-1 + eps,
            D = -k_d - 2 M_eta + sum_i (eta_i - eta_d_i) dM_eta/deta_i
    k_p   = k_d + (2/alpha) k_i + M_3

The certificate is V(x) = 0.5 x^T Q x with the 18x18 block matrix Q
assembled from (M_eta^-1, alpha I, k_p, k_i); Q is symmetrized before use
so V stays well-defined for asymmetric gains.

A step counts as state-stable when V > 0 and the backward difference of V
is negative, or when the loop state has already converged (norm < 1e-6);
a strict decrease test can never hold at the equilibrium itself.

The five parameter constraints compare matrices through the spectrum of
the (unsymmetrized) difference: all eigenvalue real parts must be
positive.  The first three differences reduce to M_1, M_2, M_3, whose
spectra equal L_1, L_2, L_3 by similarity, so they hold by construction
for any positive action; the symmetric part of a similarity transform is
in general indefinite and would not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import GainSet, LoopState
from .dynamics import VehicleModel, m_eta, m_eta_directional_term
from .errors import BasisGenerationError, IllConditionedError

CONVERGED_NORM = 1e-6
BASIS_COND_LIMIT = 1e4
BASIS_MAX_DRAWS = 100


@dataclass(frozen=True)
class LambdaAction:
    """Strictly positive reduced controller parameters [L1, L2, L3, eps]."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda3: np.ndarray
    epsilon: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            vec = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, vec)
            if vec.shape != (6,) or not np.all(vec > 0.0):
                raise ValueError(f"{name} must be 6 strictly positive entries")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be > 0")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.lambda1, self.lambda2, self.lambda3,
                               [self.epsilon]])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "LambdaAction":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (19,):
            raise ValueError("action vector must have length 19")
        return cls(lambda1=vec[0:6], lambda2=vec[6:12], lambda3=vec[12:18],
                   epsilon=float(vec[18]))


@dataclass(frozen=True)
class SimilarityBasis:
    """Fixed random positive invertible matrix P with cached inverse."""

    P: np.ndarray
    P_inv: np.ndarray
    seed: int = 0

    def transform(self, diag_entries: np.ndarray) -> np.ndarray:
        """M = P diag(entries) P^-1."""
        return (self.P * diag_entries) @ self.P_inv


def make_basis(seed: int) -> SimilarityBasis:
    """Draw P with entries uniform(0.1, 1.0) until cond(P) < 1e4."""
    rng = np.random.default_rng(seed)
    for _ in range(BASIS_MAX_DRAWS):
        P = rng.uniform(0.1, 1.0, (6, 6))
        if np.linalg.cond(P) >= BASIS_COND_LIMIT:
            continue
        P_inv = np.linalg.inv(P)
        if np.max(np.abs(P @ P_inv - np.eye(6))) < 1e-8:
            return SimilarityBasis(P=P, P_inv=P_inv, seed=int(seed))
    raise BasisGenerationError(
        f"no acceptable basis in {BASIS_MAX_DRAWS} draws for seed {seed}")


def _alpha_ratio_matrix(kd: np.ndarray, me: np.ndarray,
                        directional: np.ndarray) -> np.ndarray:
    """(-k_d) D^-1 with D = -k_d - 2 M_eta + directional term."""
    D = -kd - 2.0 * me + directional
    svals = np.linalg.svd(D, compute_uv=False)
    if svals[-1] <= 1e-10 * max(1.0, svals[0]):
        raise IllConditionedError("alpha denominator matrix is singular")
    return np.linalg.solve(D.T, -kd.T).T


def gains_from_matrices(m1: np.ndarray, m2: np.ndarray, m3: np.ndarray,
                        eta: np.ndarray, eta_d: np.ndarray,
                        model: VehicleModel, epsilon: float) -> GainSet:
    """Equality transform from three positive matrices to a GainSet."""
    me = m_eta(eta, model)
    kd = me + m1
    ki = m2
    directional = m_eta_directional_term(eta, eta_d, model)
    alpha = float(np.max(np.abs(_alpha_ratio_matrix(kd, me, directional)))) \
        + float(epsilon)
    kp = kd + (2.0 / alpha) * ki + m3
    return GainSet(kp=kp, ki=ki, kd=kd, alpha=alpha)


def gains_from_lambda(action: LambdaAction, basis: SimilarityBasis,
                      eta: np.ndarray, eta_d: np.ndarray,
                      model: VehicleModel) -> GainSet:
    """Map a positive 19-vector to a GainSet at the current pose."""
    return gains_from_matrices(
        basis.transform(action.lambda1), basis.transform(action.lambda2),
        basis.transform(action.lambda3), eta, eta_d, model, action.epsilon)


def lyapunov_matrix(gains: GainSet, m_eta_now: np.ndarray) -> np.ndarray:
    """18x18 certificate matrix, symmetrized."""
    svals = np.linalg.svd(m_eta_now, compute_uv=False)
    if svals[-1] <= 1e-12 * max(1.0, svals[0]):
        raise IllConditionedError("M_eta is numerically singular")
    me_inv = np.linalg.inv(m_eta_now)
    aI = gains.alpha * np.eye(6)
    zero = np.zeros((6, 6))
    Q = np.block([
        [me_inv, aI, zero],
        [aI, gains.kp, gains.ki],
        [zero, gains.ki, gains.alpha * gains.ki],
    ])
    return (Q + Q.T) / 2


def lyapunov_value(x: LoopState, gains: GainSet, m_eta_now: np.ndarray) -> float:
    """V(x) = 0.5 x^T Q x."""
    vec = x.x
    return 0.5 * float(vec @ lyapunov_matrix(gains, m_eta_now) @ vec)


def state_stability_step(V_now: float, V_prev: float, dt: float,
                         x_norm: float) -> tuple[bool, float]:
    """Empirical per-step stability: V > 0 and backward-difference Vdot < 0,
    or converged.  Returns (stable, Vdot estimate)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    v_dot = (V_now - V_prev) / dt
    stable = (V_now > 0.0 and v_dot < 0.0) or x_norm < CONVERGED_NORM
    return stable, v_dot


def _spectrum_positive(matrix: np.ndarray) -> bool:
    """All eigenvalue real parts strictly positive."""
    return bool(np.min(np.linalg.eigvals(matrix).real) > 0.0)


def check_param_constraints(gains: GainSet, eta: np.ndarray, eta_d: np.ndarray,
                            model: VehicleModel) -> tuple[bool, bool, bool, bool, bool]:
    """The five gain constraints, each as positivity of a difference
    spectrum, in order:

      1. k_d - M_eta
      2. k_i
      3. k_p - k_d - (2/alpha) k_i
      4. (1-alpha)/2 k_d - alpha M_eta + alpha/2 * directional term
      5. alpha > 0
    """
    me = m_eta(eta, model)
    a = gains.alpha
    c5 = a > 0.0
    c1 = _spectrum_positive(gains.kd - me)
    c2 = _spectrum_positive(gains.ki)
    if c5:
        c3 = _spectrum_positive(gains.kp - gains.kd - (2.0 / a) * gains.ki)
    else:
        c3 = False  # the (2/alpha) k_i bound is undefined at the boundary
    directional = m_eta_directional_term(eta, eta_d, model)
    c4 = _spectrum_positive(0.5 * (1.0 - a) * gains.kd - a * me
                            + 0.5 * a * directional)
    return c1, c2, c3, c4, c5


@dataclass(frozen=True)
class StabilityFlags:
    """Per-step stability bookkeeping for trace records."""

    state_stable: bool
    param_constraints: tuple[bool, bool, bool, bool, bool]
    V: float
    V_dot: float
