"""Conditioned patch discriminator.

The hazy input and a candidate clear image are channel-concatenated and
pushed through six conv blocks (c = base_channels):

  b1: 4x4 s2 -> c    b2: 4x4 s2 -> 2c   b3: 4x4 s2 -> 4c
  b4: 4x4 s2 -> 8c   b5: 4x4 s1 -> 8c   head: 4x4 s1 -> 1

b1..b5 are conv -> batch norm -> leaky ReLU (0.2); the head is a bare conv
whose output is a spatial logit map (14x14 for 256-pixel inputs). The
sigmoid lives inside the BCE-with-logits loss, so each map cell scores the
realism of one local patch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import InvalidSpecError, ShapeMismatchError
from .imaging import ImageTensor, ValueRange
from .nn_common import image_to_batch, init_network_params

__all__ = [
    "DiscriminatorSpec",
    "PatchDiscriminator",
    "build_discriminator",
    "discriminator_forward",
    "MIN_INPUT_SIZE",
]

# Four stride-2 halvings followed by two 4x4 valid-ish stages need >= 48
# pixels to leave a logit map of at least 1x1.
MIN_INPUT_SIZE = 48

_LAYOUT = (  # (channel multiplier, stride) for b1..b5
    (1, 2),
    (2, 2),
    (4, 2),
    (8, 2),
    (8, 1),
)


@dataclass(frozen=True)
class DiscriminatorSpec:
    base_channels: int = 64
    pair_channels: int = 6  # concatenated (hazy, candidate) pair

    def __post_init__(self) -> None:
        if self.base_channels < 8:
            raise InvalidSpecError(f"base_channels must be >= 8, got {self.base_channels}")
        if self.pair_channels < 2 or self.pair_channels % 2 != 0:
            raise InvalidSpecError(f"pair_channels must be even, got {self.pair_channels}")


class PatchDiscriminator(nn.Module):
    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        c = spec.base_channels
        cin = spec.pair_channels
        blocks = []
        for mult, stride in _LAYOUT:
            cout = mult * c
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(cin, cout, kernel_size=4, stride=stride, padding=1),
                    nn.BatchNorm2d(cout),
                    nn.LeakyReLU(0.2),
                )
            )
            cin = cout
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Conv2d(cin, 1, kernel_size=4, stride=1, padding=1)

    @staticmethod
    def check_input_size(h: int, w: int) -> None:
        if h < MIN_INPUT_SIZE or w < MIN_INPUT_SIZE:
            raise ShapeMismatchError(
                f"discriminator input must be at least {MIN_INPUT_SIZE} pixels per side, "
                f"got {h}x{w}"
            )

    def forward(self, hazy: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        if hazy.shape != candidate.shape:
            raise ShapeMismatchError(
                f"hazy {tuple(hazy.shape)} and candidate {tuple(candidate.shape)} differ"
            )
        self.check_input_size(hazy.shape[2], hazy.shape[3])
        x = torch.cat([hazy, candidate], dim=1)
        for block in self.blocks:
            x = block(x)
        return self.head(x)


def build_discriminator(spec: DiscriminatorSpec, init_seed: int) -> PatchDiscriminator:
    """Construct a discriminator with deterministic N(0, 0.02^2) conv init."""
    net = PatchDiscriminator(spec)
    init_network_params(net, init_seed)
    return net


def discriminator_forward(
    net: PatchDiscriminator, hazy: ImageTensor, candidate: ImageTensor
) -> np.ndarray:
    """Score one (hazy, candidate) pair in eval mode; returns the H' x W' logit map."""
    for name, img in (("hazy", hazy), ("candidate", candidate)):
        if img.range_tag is not ValueRange.SIGNED:
            raise ValueError(f"discriminator_forward expects signed-range images ({name})")
    if hazy.data.shape != candidate.data.shape:
        raise ShapeMismatchError(
            f"hazy {hazy.data.shape} and candidate {candidate.data.shape} differ"
        )
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            logits = net(image_to_batch(hazy), image_to_batch(candidate))
    finally:
        net.train(was_training)
    return logits.squeeze(0).squeeze(0).cpu().numpy()
