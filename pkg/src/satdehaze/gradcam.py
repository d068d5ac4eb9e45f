"""Gradient-weighted activation heatmaps over generator layers.

For a scalar target s (by default the mean absolute residual |G(I) - I|,
which measures how strongly the model edits each region at inference time,
where no ground truth exists), the heatmap over a chosen layer with
activations A^k is

    M = relu(sum_k alpha_k A^k),   alpha_k = spatial_mean(ds / dA^k),

min-max normalized to [0, 1] (all zeros when the raw map is flat), resized
to the input resolution, and blended 50/50 with a colormapped overlay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import NonSpatialLayerError, RangeViolationError, UnknownLayerError
from .generator import DehazeGenerator
from .imaging import ImageTensor, ValueRange, resize, to_signed, to_unit
from .nn_common import image_to_batch

__all__ = [
    "TARGET_KINDS",
    "DEFAULT_TARGET_LAYER",
    "COLORMAP_KNOTS",
    "CamResult",
    "colormap",
    "normalize_heatmap",
    "grad_cam",
]

TARGET_KINDS = ("residual_magnitude", "mean_output")

# The bottleneck fusion projection: the deepest, most semantic feature map.
# Fine decoder grids (dec2) weight local texture rather than haze extent and
# are available by name for comparison.
DEFAULT_TARGET_LAYER = "fuse"

# Piecewise-linear blue -> red map. Red is strictly increasing in v, blue
# peaks early, green peaks mid-scale.
#   v       R      G      B
COLORMAP_KNOTS: tuple[tuple[float, tuple[float, float, float]], ...] = (
    (0.00, (0.000, 0.000, 0.500)),
    (0.25, (0.125, 0.375, 1.000)),
    (0.50, (0.250, 0.750, 0.500)),
    (0.75, (0.375, 0.375, 0.125)),
    (1.00, (0.500, 0.000, 0.000)),
)


@dataclass(frozen=True)
class CamResult:
    heatmap: np.ndarray        # H x W in [0, 1]
    overlay: ImageTensor       # unit-range RGB blend
    target_layer: str
    target_kind: str
    alphas: np.ndarray         # per-channel gradient weights


def colormap(v: np.ndarray) -> ImageTensor:
    """Map values in [0, 1] to the blue->red piecewise-linear RGB ramp."""
    v = np.asarray(v, dtype=np.float64)
    if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
        raise RangeViolationError(
            f"colormap input must lie in [0, 1], got [{v.min():.6g}, {v.max():.6g}]"
        )
    knots = np.array([k for k, _ in COLORMAP_KNOTS])
    rgb_knots = np.array([c for _, c in COLORMAP_KNOTS])
    channels = [np.interp(v, knots, rgb_knots[:, i]) for i in range(3)]
    return ImageTensor(np.stack(channels, axis=-1), ValueRange.UNIT)


def normalize_heatmap(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a flat map normalizes to all zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = float(raw.min()), float(raw.max())
    if hi - lo <= 0.0:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def weighted_activation_map(
    act: torch.Tensor, grads: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Raw CAM map relu(sum_k alpha_k A^k) and the pooled channel weights alpha."""
    alphas = grads.mean(dim=(2, 3))
    return torch.relu((alphas[:, :, None, None] * act).sum(dim=1)), alphas


def grad_cam(
    net: DehazeGenerator,
    image: ImageTensor,
    layer: str = DEFAULT_TARGET_LAYER,
    target_kind: str = "residual_magnitude",
) -> CamResult:
    """Compute a gradient-weighted heatmap for one image.

    Accepts a unit- or signed-range image; the overlay is always built on
    the unit-range view.
    """
    if target_kind not in TARGET_KINDS:
        raise ValueError(f"target_kind must be one of {TARGET_KINDS}, got {target_kind!r}")
    if layer not in net.feature_layers():
        raise UnknownLayerError(
            f"layer {layer!r} not in generator; available: {', '.join(net.feature_layers())}"
        )
    if image.range_tag is ValueRange.UNIT:
        unit_img, signed_img = image, to_signed(image)
    else:
        unit_img, signed_img = to_unit(image), image

    x = image_to_batch(signed_img)
    was_training = net.training
    net.eval()
    try:
        with torch.enable_grad():
            out, acts = net.forward_features(x)
            act = acts[layer]
            if act.dim() != 4:
                raise NonSpatialLayerError(f"layer {layer!r} does not produce a spatial map")
            if target_kind == "residual_magnitude":
                target = (out - x).abs().mean()
            else:
                target = out.mean()
            grads = torch.autograd.grad(target, act)[0]
    finally:
        net.train(was_training)

    raw, alphas = weighted_activation_map(act, grads)
    heat_small = normalize_heatmap(raw.detach().squeeze(0).cpu().numpy())
    heat_img = resize(
        ImageTensor(heat_small[:, :, None], ValueRange.UNIT),
        image.height, image.width, method="bilinear",
    )
    heatmap = heat_img.data[:, :, 0].astype(np.float64)

    base = unit_img.data.astype(np.float64)
    if unit_img.channels == 1:
        base = np.repeat(base, 3, axis=2)
    overlay = ImageTensor(0.5 * base + 0.5 * colormap(heatmap).data, ValueRange.UNIT)
    return CamResult(
        heatmap=heatmap,
        overlay=overlay,
        target_layer=layer,
        target_kind=target_kind,
        alphas=alphas.detach().squeeze(0).cpu().numpy(),
    )
