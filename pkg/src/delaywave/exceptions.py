"""Exception types raised across the package."""


class NonDissipativeError(ValueError):
    """Damping operator has Re<Bv, v> > 0 for some mode vector."""


class SingularOperatorError(ValueError):
    """A truncated operator is not invertible (or a point lies in its spectrum)."""


class PreconditionError(ValueError):
    """Inputs violate a documented precondition of an operation."""


class WrongTheoremError(ValueError):
    """A stationarity condition was requested for a model outside its hypotheses."""


class SimulationDiverged(RuntimeError):
    """NaN or overflow appeared in a simulated state."""

    def __init__(self, step, message="state is not finite"):
        self.step = step
        super().__init__(f"simulation diverged at step {step}: {message}")


class ConfigError(ValueError):
    """Configuration validation failure; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
