class HetexError(Exception):
    pass


class DomainError(HetexError, ValueError):
    """Point or pose outside the valid domain of an operation."""


class BoundsError(HetexError, ValueError):
    """Scenario geometry outside the declared world bounds."""


class ScenarioError(HetexError, ValueError):
    """Scenario or config document failed validation."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class CollisionFault(HetexError, RuntimeError):
    """A UAV was about to enter an occupied ground-truth cell."""


class InfeasibleNetwork(HetexError, RuntimeError):
    pass
