"""Exception types shared across the package."""


class FomoError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrixError(FomoError):
    """2x2 matrix is not invertible (|det| <= 1e-12)."""


class KeypointMismatchError(FomoError):
    """Frame descriptors disagree on the number of keypoints."""


class DimensionMismatchError(FomoError):
    """Grid shapes (flow, masks, occlusion, images) do not line up."""


class ValueRangeError(FomoError):
    """A value violates its documented range (e.g. occlusion outside [0,1])."""


class FileFormatError(FomoError):
    """A file (PFM, CSV grid, track JSON, scene JSON) failed to parse."""


class PyramidSpecError(FomoError):
    """Pyramid level sizes do not halve or do not match the image."""
