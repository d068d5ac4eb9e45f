"""Encoder / inception-bottleneck / decoder generator.

Topology (c = base_channels):
  enc1: 7x7 s1 -> c, ReLU                      (full resolution)
  enc2: 3x3 s2 -> 2c, ReLU                     (1/2)
  enc3: 3x3 s2 -> 4c, ReLU                     (1/4)
  blocks: N inception-residual blocks at 4c
  fuse: concat(enc3, every block output) -> 1x1 conv -> 4c, ReLU
  up3/dec3: 3x3 transposed s2 -> 2c, ReLU; concat enc2; 1x1 -> 2c, ReLU
  up2/dec2: 3x3 transposed s2 -> c,  ReLU; concat enc1; 1x1 -> c,  ReLU
  out: 7x7 s1 -> 3, tanh

Each inception block runs four branches (1x1, then optionally 1x3 / 3x1 /
3x3), concatenates them back to the block width, and adds the input before
ReLU, so low-level features are re-fused at every block and once more at the
bottleneck projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidSpecError, ShapeMismatchError
from .imaging import ImageTensor, ValueRange
from .nn_common import batch_to_image, image_to_batch, init_network_params

__all__ = [
    "GeneratorSpec",
    "InceptionResidualBlock",
    "DehazeGenerator",
    "build_generator",
    "generator_forward",
]


@dataclass(frozen=True)
class GeneratorSpec:
    base_channels: int = 64
    num_inception_blocks: int = 3
    image_channels: int = 3

    def __post_init__(self) -> None:
        if self.base_channels < 8 or self.base_channels % 4 != 0:
            raise InvalidSpecError(
                f"base_channels must be >= 8 and divisible by 4, got {self.base_channels}"
            )
        if self.num_inception_blocks < 1:
            raise InvalidSpecError(
                f"num_inception_blocks must be >= 1, got {self.num_inception_blocks}"
            )
        if self.image_channels not in (1, 3):
            raise InvalidSpecError(f"image_channels must be 1 or 3, got {self.image_channels}")


class InceptionResidualBlock(nn.Module):
    """Four-branch multi-kernel block with a residual add.

    Every branch opens with a 1x1 bottleneck to width/4; three branches add a
    1x3, 3x1, or 3x3 conv on top. Branch outputs concatenate back to the
    block width and the input is added before the ReLU, so zeroed branches
    reduce the block to x -> relu(x).
    """

    def __init__(self, channels: int):
        super().__init__()
        if channels % 4 != 0:
            raise InvalidSpecError(f"block width must be divisible by 4, got {channels}")
        b = channels // 4
        self.branch1 = nn.Conv2d(channels, b, kernel_size=1)
        self.branch2 = nn.Sequential(
            nn.Conv2d(channels, b, kernel_size=1),
            nn.Conv2d(b, b, kernel_size=(1, 3), padding=(0, 1)),
        )
        self.branch3 = nn.Sequential(
            nn.Conv2d(channels, b, kernel_size=1),
            nn.Conv2d(b, b, kernel_size=(3, 1), padding=(1, 0)),
        )
        self.branch4 = nn.Sequential(
            nn.Conv2d(channels, b, kernel_size=1),
            nn.Conv2d(b, b, kernel_size=3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        branches = torch.cat(
            [self.branch1(x), self.branch2(x), self.branch3(x), self.branch4(x)], dim=1
        )
        return F.relu(branches + x)


class DehazeGenerator(nn.Module):
    """Hazy image in, dehazed image out, both signed-range (B, 3, H, W)."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        c = spec.base_channels
        ic = spec.image_channels
        n = spec.num_inception_blocks
        self.enc1 = nn.Conv2d(ic, c, kernel_size=7, stride=1, padding=3)
        self.enc2 = nn.Conv2d(c, 2 * c, kernel_size=3, stride=2, padding=1)
        self.enc3 = nn.Conv2d(2 * c, 4 * c, kernel_size=3, stride=2, padding=1)
        self.blocks = nn.ModuleList(InceptionResidualBlock(4 * c) for _ in range(n))
        self.fuse = nn.Conv2d((n + 1) * 4 * c, 4 * c, kernel_size=1)
        self.up3 = nn.ConvTranspose2d(4 * c, 2 * c, kernel_size=3, stride=2, padding=1,
                                      output_padding=1)
        self.merge3 = nn.Conv2d(4 * c, 2 * c, kernel_size=1)
        self.up2 = nn.ConvTranspose2d(2 * c, c, kernel_size=3, stride=2, padding=1,
                                      output_padding=1)
        self.merge2 = nn.Conv2d(2 * c, c, kernel_size=1)
        self.out_conv = nn.Conv2d(c, ic, kernel_size=7, stride=1, padding=3)

    @staticmethod
    def check_input_size(h: int, w: int) -> None:
        if h < 4 or w < 4 or h % 4 != 0 or w % 4 != 0:
            raise ShapeMismatchError(
                f"generator input H and W must be multiples of 4 (two stride-2 stages), "
                f"got {h}x{w}"
            )

    def feature_layers(self) -> tuple[str, ...]:
        """Names of the spatial feature maps exposed by forward_features."""
        block_names = tuple(f"block{i + 1}" for i in range(len(self.blocks)))
        return ("enc1", "enc2", "enc3") + block_names + ("fuse", "up3", "dec3", "up2", "dec2")

    def forward_features(
        self, x: torch.Tensor, use_fusion: bool = True
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        """Forward pass that also returns every named stage activation."""
        self.check_input_size(x.shape[2], x.shape[3])
        acts: dict[str, torch.Tensor] = {}
        e1 = F.relu(self.enc1(x))
        e2 = F.relu(self.enc2(e1))
        e3 = F.relu(self.enc3(e2))
        acts["enc1"], acts["enc2"], acts["enc3"] = e1, e2, e3

        feats = [e3]
        h = e3
        for i, block in enumerate(self.blocks):
            h = block(h)
            acts[f"block{i + 1}"] = h
            feats.append(h)
        if use_fusion:
            h = F.relu(self.fuse(torch.cat(feats, dim=1)))
        else:
            # ablation path: project only the last block's output through the
            # matching slice of the fusion kernel
            width = h.shape[1]
            h = F.relu(F.conv2d(h, self.fuse.weight[:, -width:], self.fuse.bias))
        acts["fuse"] = h

        d3 = F.relu(self.up3(h))
        acts["up3"] = d3
        d3 = F.relu(self.merge3(torch.cat([d3, e2], dim=1)))
        acts["dec3"] = d3
        d2 = F.relu(self.up2(d3))
        acts["up2"] = d2
        d2 = F.relu(self.merge2(torch.cat([d2, e1], dim=1)))
        acts["dec2"] = d2
        out = torch.tanh(self.out_conv(d2))
        return out, acts

    def forward(self, x: torch.Tensor, use_fusion: bool = True) -> torch.Tensor:
        out, _ = self.forward_features(x, use_fusion=use_fusion)
        return out


def build_generator(spec: GeneratorSpec, init_seed: int) -> DehazeGenerator:
    """Construct a generator with deterministic N(0, 0.02^2) conv init."""
    net = DehazeGenerator(spec)
    init_network_params(net, init_seed)
    return net


def generator_forward(net: DehazeGenerator, image: ImageTensor) -> ImageTensor:
    """Run one signed-range image through the generator (eval, no grad)."""
    if image.range_tag is not ValueRange.SIGNED:
        raise ValueError("generator_forward expects a signed-range image; call to_signed")
    net.check_input_size(image.height, image.width)
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            out = net(image_to_batch(image))
    finally:
        net.train(was_training)
    return batch_to_image(out, ValueRange.SIGNED)
