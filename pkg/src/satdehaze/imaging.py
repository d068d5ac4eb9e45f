"""Image tensors, value-range bookkeeping, resizing, and lossless PNG I/O.

All pipeline stages exchange `ImageTensor` objects: H x W x C float32 arrays
with a declared value range (unit [0, 1] or signed [-1, 1]). 8-bit integers
exist only at file boundaries.

Conventions (fixed for reproducibility):
  * quantization on save is clamp-then-round, half away from zero;
  * resampling uses cell-center coordinates, src = (dst + 0.5) * scale - 0.5;
  * nearest-neighbor ties resolve toward the lower index;
  * bicubic is the Keys kernel with a = -0.5, edges replicated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    ChannelMismatchError,
    CorruptImageError,
    RangeViolationError,
    ShapeMismatchError,
    UnsupportedFormatError,
)

__all__ = [
    "ValueRange",
    "ImageTensor",
    "load_image",
    "save_image",
    "to_signed",
    "to_unit",
    "resize",
    "luminance",
]


class ValueRange(enum.Enum):
    UNIT = "unit"      # values in [0, 1]
    SIGNED = "signed"  # values in [-1, 1]

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 1.0) if self is ValueRange.UNIT else (-1.0, 1.0)


@dataclass(frozen=True)
class ImageTensor:
    """Immutable H x W x C float32 raster with a declared value range."""

    data: np.ndarray
    range_tag: ValueRange

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise ShapeMismatchError(f"expected H x W x C array, got shape {data.shape}")
        if data.shape[2] not in (1, 3):
            raise ChannelMismatchError(f"channels must be 1 or 3, got {data.shape[2]}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeMismatchError(f"empty image of shape {data.shape}")
        data = np.ascontiguousarray(data, dtype=np.float32)
        lo, hi = self.range_tag.bounds
        if not np.isfinite(data).all():
            raise RangeViolationError("image contains non-finite values")
        if data.size and (float(data.min()) < lo or float(data.max()) > hi):
            raise RangeViolationError(
                f"values [{data.min():.6g}, {data.max():.6g}] outside {self.range_tag.value} "
                f"range [{lo}, {hi}]"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @staticmethod
    def unit(data: np.ndarray) -> "ImageTensor":
        return ImageTensor(data, ValueRange.UNIT)

    @staticmethod
    def signed(data: np.ndarray) -> "ImageTensor":
        return ImageTensor(data, ValueRange.SIGNED)


def _clipped(data: np.ndarray, tag: ValueRange) -> ImageTensor:
    """Build an ImageTensor, clamping float noise back to the range bounds."""
    lo, hi = tag.bounds
    return ImageTensor(np.clip(data, lo, hi), tag)


def load_image(path: str | Path) -> ImageTensor:
    """Load an 8-bit or 16-bit lossless raster file as a unit-range tensor.

    8-bit values map to v / 255, 16-bit to v / 65535. Palette images are
    expanded to RGB; alpha channels are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "P":
                img = img.convert("RGB")
                mode = "RGB"
            if mode in ("L", "RGB"):
                arr = np.asarray(img, dtype=np.float64) / 255.0
            elif mode in ("I;16", "I;16B", "I;16L"):
                arr = np.asarray(img, dtype=np.float64) / 65535.0
            else:
                raise UnsupportedFormatError(f"unsupported image mode {mode!r} in {path}")
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"not a readable raster file: {path}") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImageError(f"failed to decode {path}: {exc}") from exc
    return _clipped(arr, ValueRange.UNIT)


def save_image(t: ImageTensor, path: str | Path) -> None:
    """Write a unit-range tensor as an 8-bit PNG (grayscale or RGB).

    Quantization is round(v * 255) half away from zero, after clamping, so
    byte output is deterministic across platforms.
    """
    if t.range_tag is not ValueRange.UNIT:
        raise RangeViolationError("save_image requires a unit-range tensor; call to_unit first")
    scaled = np.clip(t.data.astype(np.float64) * 255.0, 0.0, 255.0)
    quantized = np.floor(scaled + 0.5).clip(0, 255).astype(np.uint8)
    if t.channels == 1:
        img = Image.fromarray(quantized[:, :, 0], mode="L")
    else:
        img = Image.fromarray(quantized, mode="RGB")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc


def to_signed(t: ImageTensor) -> ImageTensor:
    """Map a unit-range tensor to signed range via v -> 2v - 1."""
    if t.range_tag is not ValueRange.UNIT:
        raise RangeViolationError("to_signed expects a unit-range tensor")
    return _clipped(t.data.astype(np.float64) * 2.0 - 1.0, ValueRange.SIGNED)


def to_unit(t: ImageTensor) -> ImageTensor:
    """Map a signed-range tensor to unit range via v -> (v + 1) / 2."""
    if t.range_tag is not ValueRange.SIGNED:
        raise RangeViolationError("to_unit expects a signed-range tensor")
    return _clipped((t.data.astype(np.float64) + 1.0) / 2.0, ValueRange.UNIT)


def _keys_weights(t: np.ndarray) -> np.ndarray:
    # Keys cubic kernel, a = -0.5 (Catmull-Rom).
    a = -0.5
    t = np.abs(t)
    near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _axis_taps(n_in: int, n_out: int, method: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-output-pixel source indices and weights for one axis."""
    dst = np.arange(n_out, dtype=np.float64)
    src = (dst + 0.5) * (n_in / n_out) - 0.5
    if method == "nearest":
        # ceil(src - 0.5) rounds half down, i.e. ties go to the lower index
        idx = np.ceil(src - 0.5).astype(np.int64)
        return idx.clip(0, n_in - 1)[:, None], np.ones((n_out, 1))
    if method == "bilinear":
        i0 = np.floor(src).astype(np.int64)
        frac = src - i0
        idx = np.stack([i0, i0 + 1], axis=1)
        w = np.stack([1.0 - frac, frac], axis=1)
        return idx.clip(0, n_in - 1), w
    if method == "bicubic":
        i0 = np.floor(src).astype(np.int64)
        offsets = np.arange(-1, 3)
        idx = i0[:, None] + offsets[None, :]
        w = _keys_weights(src[:, None] - idx)
        return idx.clip(0, n_in - 1), w
    raise ValueError(f"unknown resize method {method!r}")


def _resample_axis(data: np.ndarray, idx: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    if axis == 0:
        out = np.zeros((idx.shape[0], data.shape[1], data.shape[2]), dtype=np.float64)
        for k in range(idx.shape[1]):
            out += data[idx[:, k]] * w[:, k][:, None, None]
    else:
        out = np.zeros((data.shape[0], idx.shape[0], data.shape[2]), dtype=np.float64)
        for k in range(idx.shape[1]):
            out += data[:, idx[:, k]] * w[:, k][None, :, None]
    return out


def resize(t: ImageTensor, h: int, w: int, method: str = "bilinear") -> ImageTensor:
    """Resample to h x w using nearest, bilinear, or bicubic interpolation.

    Output is clamped back to the tensor's range bounds (bicubic can
    overshoot). Constant images stay constant at any size.
    """
    if h < 1 or w < 1:
        raise ShapeMismatchError(f"target size must be positive, got {h}x{w}")
    data = t.data.astype(np.float64)
    idx_h, w_h = _axis_taps(t.height, h, method)
    idx_w, w_w = _axis_taps(t.width, w, method)
    data = _resample_axis(data, idx_h, w_h, axis=0)
    data = _resample_axis(data, idx_w, w_w, axis=1)
    return _clipped(data, t.range_tag)


def luminance(t: ImageTensor) -> ImageTensor:
    """Rec. 601 luma: Y = 0.299 R + 0.587 G + 0.114 B, single channel out."""
    if t.channels != 3:
        raise ChannelMismatchError(f"luminance requires 3 channels, got {t.channels}")
    coeffs = np.array([0.299, 0.587, 0.114], dtype=np.float64)
    y = t.data.astype(np.float64) @ coeffs
    return _clipped(y[:, :, None], t.range_tag)
