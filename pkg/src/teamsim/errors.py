"""Exception taxonomy shared across the simulator.

The split matters for exit codes and for tests: configuration and data
problems are the caller's fault and should be reported gently, while
structural and engine errors indicate a broken invariant or a numerically
exploded run and must abort loudly.
"""


class TeamsimError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(TeamsimError):
    """Invalid scenario, parameter, or distribution configuration."""


class DataError(TeamsimError):
    """Malformed or unusable input data (ticket files, fitting inputs)."""


class StructuralError(TeamsimError):
    """Internal consistency violation; signals a bug, aborts the replication."""


class EngineError(TeamsimError):
    """Runtime failure inside an engine, e.g. non-finite model state."""
