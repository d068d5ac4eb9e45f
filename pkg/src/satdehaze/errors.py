"""Exception types shared across the package."""


class DehazeError(Exception):
    """Base class for all satdehaze errors."""


class RangeViolationError(DehazeError):
    """Pixel values fall outside the declared value range."""


class ChannelMismatchError(DehazeError):
    """Operation requires a different channel count."""


class ShapeMismatchError(DehazeError):
    """Array shapes are inconsistent with the operation's contract."""


class UnsupportedFormatError(DehazeError):
    """Image file is not an 8/16-bit lossless raster we can read."""


class CorruptImageError(DehazeError):
    """Image file exists but cannot be decoded."""


class ImageTooSmallError(DehazeError):
    """Image is below the minimum size for the requested metric."""


class InvalidSpecError(DehazeError):
    """Network spec violates its structural constraints."""


class UnknownLayerError(DehazeError):
    """Requested layer name does not exist in the network."""


class NonSpatialLayerError(DehazeError):
    """Requested layer does not produce a spatial feature map."""


class NonFiniteLossError(DehazeError):
    """A training loss became NaN or infinite; the step is aborted."""


class NonPositiveBetaError(DehazeError):
    """Scattering coefficient must be strictly positive."""


class NegativeDepthError(DehazeError):
    """Depth field must be nonnegative."""


class MissingSplitError(DehazeError):
    """Expected dataset split directory is absent."""


class UnpairedImageError(DehazeError):
    """An input image has no matching target image (or vice versa)."""


class SizeMismatchError(DehazeError):
    """Dataset split size differs from the expected count (strict mode)."""


class EmptyDatasetError(DehazeError):
    """Dataset contains no usable pairs."""


class ArchiveFormatError(DehazeError):
    """Checkpoint archive is malformed or has an unknown version."""
