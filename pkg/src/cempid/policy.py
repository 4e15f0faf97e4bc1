"""Stochastic gain-selection policy: a small feedforward network mapping
the 18-dimensional loop state to 19 independent Gaussians over the
positive action space.

Architecture: 18 -> 32 (sigmoid) -> 32 (sigmoid) -> 38 affine.  The first
19 outputs become the means and the last 19 the standard deviations, both
through softplus so the codomain is positive; sigma gets an additive
floor.  Weights live in a single flat vector of length 2918 ordered as
layer-1 weights then biases, layer-2 weights then biases, output weights
then biases.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import VehicleModel
from .errors import ShapeError
from .lyapunov import LambdaAction

STATE_DIM = 18
HIDDEN = 32
ACTION_DIM = 19
OUTPUT_DIM = 2 * ACTION_DIM

LAYER_SHAPES = (
    (STATE_DIM, HIDDEN), (HIDDEN,),
    (HIDDEN, HIDDEN), (HIDDEN,),
    (HIDDEN, OUTPUT_DIM), (OUTPUT_DIM,),
)
NUM_WEIGHTS = sum(int(np.prod(s)) for s in LAYER_SHAPES)  # 2918

SIGMA_FLOOR = 1e-4
ACTION_FLOOR = 1e-6


@dataclass(frozen=True)
class ActionDistribution:
    """Independent per-coordinate Gaussians over the 19 action entries."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.mu.shape != (ACTION_DIM,) or self.sigma.shape != (ACTION_DIM,):
            raise ValueError("mu and sigma must have length 19")
        if np.any(self.sigma < SIGMA_FLOOR):
            raise ValueError("sigma entries must be >= the floor")


def _check_length(flat_weights: np.ndarray) -> np.ndarray:
    flat = np.asarray(flat_weights, dtype=float)
    if flat.shape != (NUM_WEIGHTS,):
        raise ShapeError(f"expected {NUM_WEIGHTS} weights, got {flat.shape}")
    if not np.all(np.isfinite(flat)):
        raise ShapeError("weights must be finite")
    return flat


def unpack_weights(flat_weights: np.ndarray) -> list[np.ndarray]:
    """Split the flat vector into [W1, b1, W2, b2, W3, b3]."""
    flat = _check_length(flat_weights)
    parts = []
    offset = 0
    for shape in LAYER_SHAPES:
        size = int(np.prod(shape))
        parts.append(flat[offset:offset + size].reshape(shape))
        offset += size
    return parts


def pack_weights(parts: list[np.ndarray]) -> np.ndarray:
    """Inverse of unpack_weights."""
    if len(parts) != len(LAYER_SHAPES):
        raise ShapeError(f"expected {len(LAYER_SHAPES)} arrays")
    for arr, shape in zip(parts, LAYER_SHAPES):
        if arr.shape != shape:
            raise ShapeError(f"array shape {arr.shape} != {shape}")
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + e^z) without overflow for large z
    return np.logaddexp(0.0, z)


def forward(weights: np.ndarray, x: np.ndarray) -> ActionDistribution:
    """Evaluate the network on an (already normalized) loop state."""
    W1, b1, W2, b2, W3, b3 = unpack_weights(weights)
    x = np.asarray(x, dtype=float)
    if x.shape != (STATE_DIM,):
        raise ShapeError(f"expected state of length {STATE_DIM}, got {x.shape}")
    h1 = sigmoid(x @ W1 + b1)
    h2 = sigmoid(h1 @ W2 + b2)
    raw = h2 @ W3 + b3
    mu = softplus(raw[:ACTION_DIM])
    sigma = softplus(raw[ACTION_DIM:]) + SIGMA_FLOOR
    return ActionDistribution(mu=mu, sigma=sigma)


def _vector_to_action(vec: np.ndarray) -> LambdaAction:
    clamped = np.maximum(vec, ACTION_FLOOR)
    return LambdaAction.from_vector(clamped)


def sample_action(dist: ActionDistribution, rng: np.random.Generator) -> LambdaAction:
    """Draw one action; entries are floored at 1e-6 to stay positive."""
    draw = rng.normal(dist.mu, dist.sigma)
    return _vector_to_action(draw)


def deterministic_action(dist: ActionDistribution) -> LambdaAction:
    """Mean action for reproducible evaluation runs."""
    return _vector_to_action(dist.mu.copy())


def default_state_scale(model: VehicleModel) -> np.ndarray:
    """Per-component normalization: momentum by the mass diagonal, pose by
    10, error integral by 100."""
    return np.concatenate([
        np.diag(model.combined_mass_matrix),
        np.full(6, 10.0),
        np.full(6, 100.0),
    ])


def normalize_state(x: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float) / np.asarray(scale, dtype=float)


def save_weights(path: str | Path, flat_weights: np.ndarray, *,
                 state_scale: np.ndarray, seed: int | None = None,
                 config_digest: str = "") -> None:
    """Persist a weight vector with its architecture and normalization."""
    flat = _check_length(flat_weights)
    payload = {
        "architecture": {
            "state_dim": STATE_DIM,
            "hidden": [HIDDEN, HIDDEN],
            "output_dim": OUTPUT_DIM,
            "num_weights": NUM_WEIGHTS,
            "hidden_activation": "sigmoid",
            "output_heads": "softplus",
        },
        "state_scale": list(np.asarray(state_scale, dtype=float)),
        "seed": seed,
        "config_digest": config_digest,
        "weights": list(flat),
    }
    Path(path).write_text(json.dumps(payload))


def load_weights(path: str | Path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Load (weights, state_scale, metadata); validates the length."""
    payload = json.loads(Path(path).read_text())
    flat = _check_length(np.asarray(payload["weights"], dtype=float))
    declared = payload.get("architecture", {}).get("num_weights", NUM_WEIGHTS)
    if declared != NUM_WEIGHTS:
        raise ShapeError(f"weight file declares {declared} weights")
    scale = np.asarray(payload["state_scale"], dtype=float)
    if scale.shape != (STATE_DIM,):
        raise ShapeError("state_scale must have length 18")
    meta = {k: payload.get(k) for k in ("seed", "config_digest", "architecture")}
    return flat, scale, meta


def weights_digest(flat_weights: np.ndarray) -> str:
    """Short content hash used in run metadata."""
    return hashlib.sha256(np.asarray(flat_weights, dtype=float).tobytes()).hexdigest()[:16]
