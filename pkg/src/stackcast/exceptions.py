"""Exception hierarchy shared by every stackcast module.

Each error class maps to one process exit code in the CLI (see
``stackcast.cli``): configuration problems exit 2, data problems exit 3
and training divergence exits 4.
"""


class StackcastError(Exception):
    """Base class for all stackcast errors."""


class ConfigurationError(StackcastError):
    """Invalid parameter value, option combination or run configuration."""


class ParseError(StackcastError):
    """Malformed cell or date while reading an input file."""


class SchemaError(StackcastError):
    """Structurally invalid input: wrong columns, duplicate dates, ..."""


class SizeError(StackcastError):
    """Input too short or a partition came out empty."""


class ImputationError(StackcastError):
    """A column does not carry enough observed values to impute."""


class ShapeError(StackcastError):
    """Inconsistent array dimensions passed to a numeric operation."""


class StructureError(StackcastError):
    """A composite value (e.g. a wavelet decomposition) is inconsistent."""


class DomainError(StackcastError):
    """Mathematically undefined request (zero denominator, single-class AUC)."""


class DivergenceError(StackcastError):
    """Training produced a non-finite or exploding loss."""


class EnsembleError(StackcastError):
    """A member of a model ensemble failed; the message names the member."""


class DependencyError(StackcastError):
    """A CLI stage is missing the artifact an earlier stage produces."""
