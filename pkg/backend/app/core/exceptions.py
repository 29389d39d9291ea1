class SimulationError(Exception):
    """Base class for failures inside the simulator."""


class IntegrationError(SimulationError):
    """A time step produced an invalid state."""

    def __init__(self, message: str, gamma_t: float | None = None):
        super().__init__(message)
        self.gamma_t = gamma_t


class ScenarioError(SimulationError):
    """A stage of a scenario failed; wraps the underlying error."""

    def __init__(self, message: str, stage_index: int, gamma_t: float | None = None):
        super().__init__(message)
        self.stage_index = stage_index
        self.gamma_t = gamma_t


class OracleBudgetError(SimulationError):
    """The dense oracle would exceed its configured memory budget."""


class ConfigError(ValueError):
    """Invalid scenario document; the message starts with the offending key."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
