"""Atmospheric scattering model for synthetic haze generation.

A hazy observation I relates to the clear scene J through

    I(x) = J(x) * t(x) + A * (1 - t(x)),      t(x) = exp(-beta * d(x)),

with global airlight A, scattering coefficient beta, and scene depth d.
Because the forward model is known exactly, its algebraic inversion doubles
as a ground-truth oracle for the learned dehazer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import NegativeDepthError, NonPositiveBetaError, ShapeMismatchError
from .imaging import ImageTensor, ValueRange, _clipped

__all__ = [
    "Severity",
    "SEVERITY_BANDS",
    "HazeParams",
    "transmission",
    "compose_haze",
    "invert_haze",
    "sample_haze_params",
]

Airlight = Union[float, tuple[float, float, float]]


class Severity(enum.Enum):
    THIN = "thin"
    MODERATE = "moderate"
    THICK = "thick"


# Mean-transmission bands per severity tier. These are artifact conventions:
# they stratify synthetic data the way thin/moderate/thick test sets are
# stratified, not published scattering coefficients.
SEVERITY_BANDS: dict[Severity, tuple[float, float]] = {
    Severity.THIN: (0.7, 0.9),
    Severity.MODERATE: (0.45, 0.7),
    Severity.THICK: (0.2, 0.45),
}


def _as_severity(severity: Severity | str) -> Severity:
    return severity if isinstance(severity, Severity) else Severity(severity)


def _check_beta_depth(beta: float, depth: np.ndarray) -> np.ndarray:
    if not np.isfinite(beta) or beta <= 0:
        raise NonPositiveBetaError(f"beta must be > 0, got {beta}")
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ShapeMismatchError(f"depth must be H x W, got shape {depth.shape}")
    if depth.size and float(depth.min()) < 0:
        raise NegativeDepthError(f"depth has negative entries (min {depth.min():.6g})")
    return depth


@dataclass(frozen=True)
class HazeParams:
    """Parameters of one synthetic haze field."""

    airlight: Airlight          # A, scalar or per-channel triple in [0, 1]
    beta: float                 # scattering coefficient, > 0
    depth: np.ndarray           # H x W, nonnegative, arbitrary units
    severity: Severity = Severity.MODERATE

    def __post_init__(self) -> None:
        depth = _check_beta_depth(self.beta, self.depth)
        depth.setflags(write=False)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "severity", _as_severity(self.severity))
        a = np.atleast_1d(np.asarray(self.airlight, dtype=np.float64))
        if a.shape not in ((1,), (3,)):
            raise ShapeMismatchError(f"airlight must be scalar or 3-tuple, got shape {a.shape}")
        if float(a.min()) < 0 or float(a.max()) > 1:
            raise ValueError(f"airlight must lie in [0, 1], got {self.airlight}")

    @property
    def airlight_vector(self) -> np.ndarray:
        a = np.atleast_1d(np.asarray(self.airlight, dtype=np.float64))
        return a if a.shape == (3,) else np.repeat(a, 3)

    def transmission(self) -> np.ndarray:
        return transmission(self.beta, self.depth)

    def mean_transmission(self) -> float:
        return float(self.transmission().mean())


def transmission(beta: float, depth: np.ndarray) -> np.ndarray:
    """Beer-Lambert transmission t = exp(-beta * depth), elementwise in (0, 1]."""
    depth = _check_beta_depth(beta, depth)
    return np.exp(-beta * depth)


def _broadcast_airlight(params: HazeParams, channels: int) -> np.ndarray:
    a = params.airlight_vector
    if channels == 1:
        return np.array([float(a.mean())]) if a.shape == (3,) else a[:1]
    return a


def compose_haze(clear: ImageTensor, params: HazeParams) -> ImageTensor:
    """Composite haze onto a clear image: I = A + t * (J - A).

    Written in this form the result is an exact convex combination, so it
    stays inside [min(J, A), max(J, A)] even in floating point.
    """
    if clear.range_tag is not ValueRange.UNIT:
        raise ValueError("compose_haze expects a unit-range clear image")
    if params.depth.shape != (clear.height, clear.width):
        raise ShapeMismatchError(
            f"depth shape {params.depth.shape} does not match image "
            f"{(clear.height, clear.width)}"
        )
    t = params.transmission()[:, :, None]
    a = _broadcast_airlight(params, clear.channels)[None, None, :]
    hazy = a + t * (clear.data.astype(np.float64) - a)
    return _clipped(hazy, ValueRange.UNIT)


def invert_haze(hazy: ImageTensor, params: HazeParams, t_min: float = 0.05) -> ImageTensor:
    """Analytic inversion J = (I - A * (1 - t)) / t with t floored at t_min.

    The floor keeps the division stable where transmission vanishes; the
    output is clamped to [0, 1].
    """
    if hazy.range_tag is not ValueRange.UNIT:
        raise ValueError("invert_haze expects a unit-range hazy image")
    if not 0.0 < t_min < 1.0:
        raise ValueError(f"t_min must lie in (0, 1), got {t_min}")
    if params.depth.shape != (hazy.height, hazy.width):
        raise ShapeMismatchError(
            f"depth shape {params.depth.shape} does not match image "
            f"{(hazy.height, hazy.width)}"
        )
    t = np.maximum(params.transmission(), t_min)[:, :, None]
    a = _broadcast_airlight(params, hazy.channels)[None, None, :]
    clear = (hazy.data.astype(np.float64) - a * (1.0 - t)) / t
    return _clipped(clear, ValueRange.UNIT)


def _smooth_depth_field(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Min-max-normalized Gaussian-blurred white noise, values in [0, 1]."""
    noise = rng.standard_normal((h, w))
    field = gaussian_filter(noise, sigma=min(h, w) / 8.0)
    lo, hi = float(field.min()), float(field.max())
    if hi - lo < 1e-12:
        # blurred white noise is never exactly flat for h*w >= 2, but guard anyway
        return np.zeros((h, w))
    return (field - lo) / (hi - lo)


def _solve_beta_for_mean_t(depth: np.ndarray, target: float) -> float:
    """Bisect beta so that mean(exp(-beta * depth)) hits target.

    mean transmission is continuous and strictly decreasing in beta, so
    bisection on a bracketing interval converges unconditionally.
    """
    lo, hi = 1e-9, 1.0
    while float(np.exp(-hi * depth).mean()) > target:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("failed to bracket beta for target transmission")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.exp(-mid * depth).mean()) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def sample_haze_params(
    severity: Severity | str, h: int, w: int, rng_seed: int
) -> HazeParams:
    """Draw deterministic haze parameters whose mean transmission lies in the
    severity band.

    Airlight is uniform in [0.7, 1.0]; depth is a smooth random field in
    [0, 1]; beta is solved so the mean transmission hits a target drawn
    strictly inside the band (0.01 inset against solver tolerance).
    """
    severity = _as_severity(severity)
    band_lo, band_hi = SEVERITY_BANDS[severity]
    rng = np.random.default_rng(rng_seed)
    airlight = float(rng.uniform(0.7, 1.0))
    depth = _smooth_depth_field(h, w, rng)
    target = float(rng.uniform(band_lo + 0.01, band_hi - 0.01))
    beta = _solve_beta_for_mean_t(depth, target)
    return HazeParams(airlight=airlight, beta=beta, depth=depth, severity=severity)
