"""Exception hierarchy for the degenpde package.

Every error raised deliberately by this package derives from DegenPDEError,
so callers can catch one type at the CLI boundary and map it to an exit code.
"""


class DegenPDEError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DegenPDEError):
    """A problem description or option set is malformed or inconsistent."""


class ParseError(ConfigurationError):
    """An expression string could not be parsed."""

    def __init__(self, message, line=1, col=1):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class EvaluationError(DegenPDEError):
    """An expression produced a non-finite value (division by zero, sqrt of
    a negative number, overflow)."""


class StructureError(DegenPDEError):
    """The operator pair does not admit the structure the algorithm needs:
    incomplete chain sets, unbounded chain growth, mismatched primal/dual
    chain lengths, or a configuration outside the supported class."""


class CompatibilityError(DegenPDEError):
    """The right-hand side violates a solvability condition, or the requested
    problem is genuinely unsolvable (resonant mode, failed compatibility
    residual)."""


class UsageError(DegenPDEError):
    """Bad command-line usage: unknown subcommand, missing file, bad flag."""
