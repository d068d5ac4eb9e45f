"""Full-reference quality metrics: PSNR, SSIM, FSIM, and set aggregation.

PSNR is 10*log10(1/MSE) for unit-range images, capped at 100 dB when the
MSE underflows (identical images). SSIM is the standard Gaussian-window
form (11x11, sigma 1.5, C1=0.01^2, C2=0.03^2 for L=1), computed per channel
over valid windows and averaged. FSIM lives in `fsim.py`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .errors import DehazeError, ImageTooSmallError, ShapeMismatchError
from .fsim import fsim
from .imaging import ImageTensor, load_image

__all__ = [
    "psnr",
    "ssim",
    "fsim",
    "ImageMetrics",
    "MetricReport",
    "evaluate_set",
    "PSNR_CAP_DB",
]

PSNR_CAP_DB = 100.0
_PSNR_MSE_FLOOR = 1e-10

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _check_same_shape(x: ImageTensor, y: ImageTensor) -> None:
    if x.data.shape != y.data.shape:
        raise ShapeMismatchError(f"shape mismatch {x.data.shape} vs {y.data.shape}")


def psnr(x: ImageTensor, y: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB; 100.0 when MSE < 1e-10."""
    _check_same_shape(x, y)
    diff = x.data.astype(np.float64) - y.data.astype(np.float64)
    mse = float(np.mean(diff**2))
    if mse < _PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x: ImageTensor, y: ImageTensor) -> float:
    """Structural similarity, per-channel sliding Gaussian window, averaged."""
    _check_same_shape(x, y)
    if x.height < SSIM_WINDOW or x.width < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {x.height}x{x.width}"
        )
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    channel_means = []
    for c in range(x.channels):
        a = x.data[:, :, c].astype(np.float64)
        b = y.data[:, :, c].astype(np.float64)
        mu_a = convolve2d(a, w, mode="valid")
        mu_b = convolve2d(b, w, mode="valid")
        var_a = convolve2d(a * a, w, mode="valid") - mu_a**2
        var_b = convolve2d(b * b, w, mode="valid") - mu_b**2
        cov = convolve2d(a * b, w, mode="valid") - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
        den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
        channel_means.append(float(np.mean(num / den)))
    return float(np.mean(channel_means))


@dataclass(frozen=True)
class ImageMetrics:
    image_id: str
    psnr: float
    ssim: float
    fsim: float


@dataclass(frozen=True)
class MetricReport:
    """Per-image metrics plus arithmetic means, at the stated resolution.

    `extras` is an open slot for additional full-reference metrics (e.g. a
    learned perceptual distance) computed elsewhere; the built-in pipeline
    leaves it empty.
    """

    set_name: str
    resolution: str
    per_image: tuple[ImageMetrics, ...]
    mean_psnr: float
    mean_ssim: float
    mean_fsim: float
    extras: tuple[tuple[str, float], ...] = ()

    @staticmethod
    def from_per_image(
        set_name: str, resolution: str, per_image: list[ImageMetrics]
    ) -> "MetricReport":
        return MetricReport(
            set_name=set_name,
            resolution=resolution,
            per_image=tuple(per_image),
            mean_psnr=float(np.mean([m.psnr for m in per_image])),
            mean_ssim=float(np.mean([m.ssim for m in per_image])),
            mean_fsim=float(np.mean([m.fsim for m in per_image])),
        )

    def to_json(self) -> str:
        payload = asdict(self)
        payload["per_image"] = [asdict(m) for m in self.per_image]
        return json.dumps(payload, indent=2)

    def to_table(self) -> str:
        """Aligned text table: metric rows, mean column."""
        lines = [
            f"set: {self.set_name}   images: {len(self.per_image)}   "
            f"resolution: {self.resolution}",
            f"{'metric':<8}{'mean':>10}",
            f"{'PSNR':<8}{self.mean_psnr:>10.3f}",
            f"{'SSIM':<8}{self.mean_ssim:>10.4f}",
            f"{'FSIM':<8}{self.mean_fsim:>10.4f}",
        ]
        return "\n".join(lines)


def evaluate_set(
    pairs: list[tuple[str | Path, str | Path]], set_name: str = "eval"
) -> MetricReport:
    """Compute all metrics for (output, ground-truth) image path pairs.

    Pairs are processed in image-id (output filename stem) order; per-image
    failures are re-raised with the image id attached.
    """
    if not pairs:
        raise ValueError("evaluate_set needs at least one pair")
    keyed = sorted(((Path(p).stem, Path(p), Path(g)) for p, g in pairs), key=lambda k: k[0])
    per_image: list[ImageMetrics] = []
    resolution = ""
    for image_id, pred_path, gt_path in keyed:
        try:
            pred = load_image(pred_path)
            gt = load_image(gt_path)
            per_image.append(
                ImageMetrics(
                    image_id=image_id,
                    psnr=psnr(pred, gt),
                    ssim=ssim(pred, gt),
                    fsim=fsim(pred, gt),
                )
            )
        except (DehazeError, OSError) as exc:
            raise type(exc)(f"[{image_id}] {exc}") from exc
        if not resolution:
            resolution = f"{pred.height}x{pred.width}"
    return MetricReport.from_per_image(set_name, resolution, per_image)
