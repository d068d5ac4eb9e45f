"""Shared init and tensor-conversion helpers for the generator/discriminator."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .imaging import ImageTensor, ValueRange

__all__ = [
    "init_network_params",
    "image_to_batch",
    "batch_to_image",
    "parameter_count",
]


def init_network_params(module: nn.Module, seed: int) -> None:
    """Deterministic init: conv weights ~ N(0, 0.02^2), biases 0, BN at identity.

    Modules are visited in definition order, so a given seed always produces
    the same parameter arrays.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.normal_(0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.BatchNorm2d):
                m.weight.fill_(1.0)
                m.bias.zero_()
                m.reset_running_stats()


def image_to_batch(img: ImageTensor) -> torch.Tensor:
    """ImageTensor (H, W, C) -> float32 torch batch (1, C, H, W)."""
    arr = np.ascontiguousarray(img.data.transpose(2, 0, 1))
    return torch.from_numpy(arr).unsqueeze(0)


def batch_to_image(batch: torch.Tensor, tag: ValueRange) -> ImageTensor:
    """Torch batch (1, C, H, W) -> ImageTensor, clamped to the range bounds."""
    if batch.dim() != 4 or batch.shape[0] != 1:
        raise ValueError(f"expected a single-image batch, got shape {tuple(batch.shape)}")
    lo, hi = tag.bounds
    arr = batch.detach().clamp(lo, hi).squeeze(0).permute(1, 2, 0).cpu().numpy()
    return ImageTensor(arr, tag)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
