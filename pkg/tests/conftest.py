import numpy as np
import pytest

from cempid.dynamics import VehicleModel, default_model
from cempid.lyapunov import make_basis


@pytest.fixture
def model():
    return default_model()


@pytest.fixture
def light_model():
    """Small test plant where the gain parametrization dominates inertia."""
    rigid = np.diag([12.0, 12.0, 12.0, 2.0, 2.5, 2.2])
    return VehicleModel(
        rigid_body_mass_matrix=rigid,
        added_mass_matrix=0.5 * rigid,
        linear_damping=np.diag([6.0, 6.0, 9.0, 1.5, 1.8, 1.6]),
        quadratic_damping=np.array([8.0, 10.0, 16.0, 4.0, 5.0, 3.5]),
        weight_N=117.72,
        buoyancy_N=117.92,
        cog_to_cob_offset=np.array([0.0, 0.0, -0.08]),
        thruster_allocation_B=np.eye(6),
    )


@pytest.fixture
def basis():
    return make_basis(42)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose(rng, pos=2.0, tilt=0.35):
    """Valid pose away from the pitch singularity."""
    return np.concatenate([
        rng.uniform(-pos, pos, 3),
        rng.uniform(-tilt, tilt, 2),
        rng.uniform(-np.pi, np.pi, 1),
    ])
