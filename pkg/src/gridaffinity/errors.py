"""Exception hierarchy shared by every module.

Each error carries a short machine-readable ``code`` that the CLI prints as
the prefix of its single-line error message.
"""

from __future__ import annotations


class GridAffinityError(Exception):
    code = "ERROR"


class Mol2FormatError(GridAffinityError):
    code = "MOL2_FORMAT"


class Mol2FieldError(GridAffinityError):
    code = "MOL2_FIELD"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Mol2ReferenceError(GridAffinityError):
    code = "MOL2_REFERENCE"


class DegenerateScalerError(GridAffinityError):
    code = "DEGENERATE_SCALER"


class EmptyLigandError(GridAffinityError):
    code = "EMPTY_LIGAND"


class ShapeError(GridAffinityError):
    code = "SHAPE"


class ContainerFormatError(GridAffinityError):
    """Wrong magic bytes or unsupported version in a binary container."""

    code = "BAD_FORMAT"


class TruncatedFileError(GridAffinityError):
    code = "TRUNCATED"


class ConfigMismatchError(GridAffinityError):
    code = "CONFIG_MISMATCH"


class MissingLabelError(GridAffinityError):
    code = "MISSING_LABEL"


class DegenerateRegressionError(GridAffinityError):
    """Raised when predictions are constant; ``partial`` still holds RMSE/MAE."""

    code = "DEGENERATE_REGRESSION"

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ManifestError(GridAffinityError):
    code = "MANIFEST"
