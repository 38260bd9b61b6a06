"""Exception types shared across the package.

Kept in one module so that layout, oracles and the runtime can raise the same
classes without importing each other.
"""


class GraphloomError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GraphloomError):
    """A simulation config violates one of its invariants."""


class BoundsError(GraphloomError):
    """An input does not fit the numeric envelope of the construction
    (positional-encoding capacity, or the SCC order-range bound)."""


class SizeError(GraphloomError):
    """A SUBLEQ instance does not fit the row budget."""


class AddressError(GraphloomError):
    """An instruction operand is outside the addressable range."""


class ShapeError(GraphloomError):
    """Input matrix / adjacency dimensions disagree with the schema."""


class NotTerminatedError(GraphloomError):
    """decode() was asked for outputs but the termination flag is not set."""


class IterationLimitExceeded(GraphloomError):
    """The looped run hit max_iterations before the termination flag rose."""

    def __init__(self, iterations: int):
        super().__init__(f"termination flag still clear after {iterations} iterations")
        self.iterations = iterations


class StepLimitExceeded(GraphloomError):
    """A SUBLEQ interpreter ran for max_steps without halting."""


class WriteToReadOnlyError(GraphloomError):
    """A SUBLEQ(-) program tried to write into the protected memory prefix."""
