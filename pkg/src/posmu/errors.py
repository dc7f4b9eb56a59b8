"""Exception taxonomy shared across the package.

InputError maps to CLI exit code 2, NumericalFailure to exit code 3.
"""


class PosmuError(Exception):
    """Base class for all package errors."""


class InputError(PosmuError, ValueError):
    """Invalid problem data: shapes, signs, structure mismatches, bad files."""


class NumericalFailure(PosmuError, RuntimeError):
    """An algorithm exhausted its budget or could not certify its result."""


class InfeasibleProblem(PosmuError):
    """Constraint set of an optimization instance is empty."""


class UnboundedProblem(PosmuError):
    """Objective of an optimization instance is unbounded above."""
