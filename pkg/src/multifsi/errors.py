"""Exception hierarchy shared by every layer of the solver."""


class MultiFSIError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(MultiFSIError, ValueError):
    """Invalid geometry, material or run configuration."""


class MeshResolutionError(ConfigurationError):
    """The requested mesh size cannot resolve the fluid gap."""


class TopologyError(MultiFSIError):
    """The interface is not a single closed cycle."""


class GeometryError(MultiFSIError):
    """A geometric identity (e.g. closed-polygon normal sum) is broken."""


class ConstraintViolationError(MultiFSIError, ValueError):
    """A state does not satisfy the finite-energy space constraints."""


class CompatibilityError(MultiFSIError):
    """Interface data carries a nonzero normal flux where none is allowed."""


class DimensionError(MultiFSIError, ValueError):
    """Arrays built on different discretizations were mixed."""


class SolverError(MultiFSIError):
    """A linear system could not be factorized or solved."""
