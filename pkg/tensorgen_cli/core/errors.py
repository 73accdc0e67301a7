import typing as t

__all__ = [
    "TensorGenError",
    "ParameterError",
    "ShapeError",
    "StructureError",
    "ConfigError",
    "DatasetFormatError",
    "VersionMismatchError",
    "OutputExistsError",
    "NumericalError",
    "DegenerateModelError",
]

EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class TensorGenError(Exception):
    """Base class for every error raised while generating, exporting or importing datasets."""

    exit_code: t.ClassVar[int] = EXIT_VALIDATION


class ParameterError(TensorGenError, ValueError):
    """Raised when a generator or effect receives an invalid parameter"""


class ShapeError(ParameterError):
    """Raised when a tensor or matrix shape is invalid for the requested operation"""


class StructureError(ParameterError):
    """Raised when the factor matrices and weights/core of a model do not fit together"""


class ConfigError(ParameterError):
    """
    Raised when a generation config fails schema or semantic validation.

    Attributes:
        field (str): The offending field, as a JSON-like path (``modes[1].generator.method``).
    """

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)


class DatasetFormatError(TensorGenError):
    """Raised when a dataset file is malformed, truncated or inconsistent"""

    exit_code = EXIT_IO


class VersionMismatchError(DatasetFormatError):
    """Raised when a dataset file was written with an unknown format version"""


class OutputExistsError(TensorGenError, FileExistsError):
    """Raised when an output file already exists and overwriting is not allowed"""

    exit_code = EXIT_IO


class NumericalError(TensorGenError, ArithmeticError):
    """Raised when a numerical quantity cannot be computed (zero norm, non-finite values)"""

    exit_code = EXIT_NUMERICAL


class DegenerateModelError(NumericalError):
    """Raised when a model has an all-zero factor column"""
