"""Exception hierarchy shared across the package."""


class StressfieldError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(StressfieldError):
    """A configuration cannot produce valid outputs (bad ranges, degenerate setup)."""


class GeometryError(StressfieldError):
    """A polygon or mesh violates a geometric requirement."""


class ConsistencyError(StressfieldError):
    """Two representations that must agree (mesh boundary vs polygon) do not."""


class AssemblyError(StressfieldError):
    """Finite-element assembly failed (degenerate element, bad material)."""


class SolverError(StressfieldError):
    """Time integration could not proceed (singular system, missing constraints)."""


class ContractError(StressfieldError):
    """An operation was called with arguments violating its shape/type contract."""


class TrainingError(StressfieldError):
    """Training aborted (non-finite loss or invalid optimizer state)."""
