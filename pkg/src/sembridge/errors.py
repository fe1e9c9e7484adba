"""Error taxonomy shared across the package.

Configuration and input-validation failures map to CLI exit code 2,
runtime numeric failures (solver non-convergence) to exit code 3.
"""


class SembridgeError(Exception):
    """Base class for all package errors."""


class FormatError(SembridgeError):
    """Malformed file content (bad magic, version, truncation). Names a byte offset."""


class ValidationError(SembridgeError):
    """Input violates a documented invariant (non-finite entry, duplicate id, ...)."""


class DegenerateInputError(SembridgeError):
    """Mathematically undefined input, e.g. a zero-norm vector where a direction is needed."""


class AlignmentError(SembridgeError):
    """Paired inputs disagree, e.g. matrix row count vs. vocabulary size."""


class SolverError(SembridgeError):
    """Iterative solver failed to converge within its budget."""


class ConfigError(SembridgeError):
    """Inconsistent or incomplete configuration for the requested operation."""


class InapplicableError(SembridgeError):
    """The requested metric is undefined for the given input."""
