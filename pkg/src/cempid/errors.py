"""Exception types shared across the simulator and optimizer."""


class CempidError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CempidError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class SingularityError(CempidError):
    """Pitch angle within the guard band of +-pi/2 where the Euler-rate
    matrix is singular."""


class DivergenceError(CempidError):
    """A simulated state entry exceeded the blow-up threshold (1e6)."""


class IllConditionedError(CempidError):
    """A matrix required by the controller synthesis is numerically
    singular."""


class BasisGenerationError(CempidError):
    """Could not draw an acceptably conditioned similarity basis."""


class ShapeError(CempidError):
    """A weight or state vector has the wrong length."""


class EmptyEliteError(CempidError):
    """floor(N * rho) = 0: no candidates would survive selection."""
