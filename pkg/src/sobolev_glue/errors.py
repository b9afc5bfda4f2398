"""Error taxonomy shared by the library and the command line tool.

The command line maps these onto process exit codes; the library raises
them directly.  Everything derives from :class:`GlueError` so callers can
catch the whole family at once.
"""


class GlueError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(GlueError):
    """An argument is outside its admissible range (exit code 2)."""


class DomainError(ParameterError):
    """A point, face or grid does not belong to the domain at hand.

    Treated as a parameter error at the command line.
    """


class SingularityError(ParameterError):
    """Projection onto the target is undefined at this value."""


class PreconditionError(GlueError):
    """Input data violates a documented precondition (exit code 3)."""


class ResolutionError(GlueError):
    """The grids are too coarse to certify the requested result (exit code 4)."""


class OptimizationError(GlueError):
    """Iterative descent failed to make progress (exit code 4)."""


class LiftingError(PreconditionError):
    """Circle-valued data jumps too much between adjacent nodes to lift."""


class FormatError(GlueError):
    """A file does not conform to its declared format (exit code 5)."""
