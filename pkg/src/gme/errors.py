"""Exception types raised by the library."""


class InvalidArgument(ValueError):
    """Inputs are malformed or inconsistent (bad shapes, out-of-range indices)."""


class DegenerateParameter(ValueError):
    """The parameter value makes the requested closed form singular (e.g. mu=0)."""


class PreconditionError(ValueError):
    """A documented precondition of the operation is violated."""


class ValidityRegionError(ArithmeticError):
    """mu lies outside the region where the determinant expansion is trusted."""


class AssemblyMismatch(AssertionError):
    """Term-by-term coefficient assembly disagrees with the closed form."""
