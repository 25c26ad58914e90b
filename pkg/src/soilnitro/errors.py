"""Exception types raised across the toolkit.

Every error that callers are expected to catch derives from SoilNitroError,
so CLI commands can map any pipeline failure to a nonzero exit status.
"""


class SoilNitroError(Exception):
    """Base class for all toolkit errors."""


# --- dataset ingestion and target transform ---

class MissingColumnError(SoilNitroError):
    def __init__(self, name: str):
        super().__init__(f"required column not found in header: {name!r}")
        self.name = name


class CsvParseError(SoilNitroError):
    def __init__(self, row: int, col: str, token: str):
        super().__init__(f"cannot parse token {token!r} at data row {row}, column {col!r}")
        self.row = row
        self.col = col
        self.token = token


class NonPositiveTargetError(SoilNitroError):
    def __init__(self, row: int):
        super().__init__(f"target value at row {row} is not strictly positive")
        self.row = row


class DimensionMismatchError(SoilNitroError):
    pass


class AlreadyTransformedError(SoilNitroError):
    pass


class AlreadyOriginalError(SoilNitroError):
    pass


# --- splitting ---

class ClassTooSmallError(SoilNitroError):
    def __init__(self, label: str, size: int):
        super().__init__(f"landcover class {label!r} has only {size} rows; need at least 2")
        self.label = label
        self.size = size


class InvalidFractionError(SoilNitroError):
    pass


class InvalidKError(SoilNitroError):
    pass


# --- training and prediction ---

class EmptyDatasetError(SoilNitroError):
    pass


class InvalidParamsError(SoilNitroError):
    pass


class MissingFeatureError(SoilNitroError):
    def __init__(self, names):
        names = list(names)
        super().__init__(f"input table lacks feature column(s) required by the model: {names}")
        self.names = names


# --- attribution ---

class MissingCoverCountsError(SoilNitroError):
    pass


class EmptyMatrixError(SoilNitroError):
    pass


# --- tuning ---

class EmptySpaceError(SoilNitroError):
    pass


class FoldMismatchError(SoilNitroError):
    pass


# --- metrics ---

class LengthMismatchError(SoilNitroError):
    pass


class EmptyInputError(SoilNitroError):
    pass


class ZeroTargetError(SoilNitroError):
    def __init__(self, row: int):
        super().__init__(f"target value at row {row} is zero; MAPE is undefined")
        self.row = row


class ZeroVarianceError(SoilNitroError):
    pass


# --- synthetic data ---

class InvalidSpecError(SoilNitroError):
    pass


# --- persistence ---

class UnsupportedVersionError(SoilNitroError):
    def __init__(self, version):
        super().__init__(f"unsupported model file format_version: {version!r}")
        self.version = version


class CorruptModelError(SoilNitroError):
    def __init__(self, reason: str):
        super().__init__(f"corrupt model file: {reason}")
        self.reason = reason


# --- CLI / schema ---

class SchemaMismatchError(SoilNitroError):
    pass
