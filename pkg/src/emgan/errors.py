"""Exception hierarchy shared by the engine, data and training layers."""


class EmganError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(EmganError, ValueError):
    pass


class NonScalarLoss(EmganError, ValueError):
    pass


class GraphCycle(EmganError, RuntimeError):
    pass


class MissingGradient(EmganError, RuntimeError):
    pass


class InputTooSmall(ShapeMismatch):
    pass


class DataError(EmganError):
    """Problems with volume contents or files (mapped to CLI exit code 2)."""


class DegenerateVolume(DataError, ValueError):
    pass


class VolumeTooSmall(DataError, ValueError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class CropTooLarge(DataError, ValueError):
    pass


class FormatError(DataError, ValueError):
    """Malformed VXV1 / VXCK file."""


class NonFiniteLoss(EmganError, FloatingPointError):
    """A training loss or probability became NaN or infinite."""
