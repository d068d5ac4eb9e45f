"""Training objectives: adversarial BCE, L1 reconstruction, and their sums.

The discriminator's sigmoid is folded into a numerically stable
BCE-with-logits,

    bce(x, y) = mean( max(x, 0) - x*y + log(1 + exp(-|x|)) ),

which equals -mean(y*log(sigmoid(x)) + (1-y)*log(1-sigmoid(x))) without ever
evaluating log(0) at saturation. The generator objective is
l_gan + lambda * l_l1 with lambda = 100; the discriminator objective is the
plain sum of its real and fake terms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import torch

from .errors import ShapeMismatchError

__all__ = [
    "bce_with_logits",
    "gan_loss_for_generator",
    "l1_loss",
    "generator_loss",
    "discriminator_loss",
    "LossReport",
    "DEFAULT_LAMBDA_L1",
]

DEFAULT_LAMBDA_L1 = 100.0


def _as_tensor(x) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float32)


def bce_with_logits(logits, targets) -> torch.Tensor:
    """Mean binary cross-entropy over all elements, stable logit form."""
    x = _as_tensor(logits)
    y = _as_tensor(targets).to(x.dtype)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"logits {tuple(x.shape)} vs targets {tuple(y.shape)}")
    return (x.clamp(min=0) - x * y + torch.log1p(torch.exp(-x.abs()))).mean()


def gan_loss_for_generator(fake_logits) -> torch.Tensor:
    """Adversarial term for the generator: BCE of fake logits against ones."""
    x = _as_tensor(fake_logits)
    return bce_with_logits(x, torch.ones_like(x))


def l1_loss(target, generated) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    y = _as_tensor(target)
    y_hat = _as_tensor(generated)
    if y.shape != y_hat.shape:
        raise ShapeMismatchError(f"target {tuple(y.shape)} vs generated {tuple(y_hat.shape)}")
    return (y - y_hat).abs().mean()


def generator_loss(
    fake_logits, target, generated, lambda_l1: float = DEFAULT_LAMBDA_L1
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (l_gen, l_gan, l_l1) with l_gen = l_gan + lambda * l_l1."""
    l_gan = gan_loss_for_generator(fake_logits)
    l_rec = l1_loss(target, generated)
    return l_gan + lambda_l1 * l_rec, l_gan, l_rec


def discriminator_loss(real_logits, fake_logits) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (l_d, l_real, l_fake): BCE against ones / zeros, summed."""
    real = _as_tensor(real_logits)
    fake = _as_tensor(fake_logits)
    l_real = bce_with_logits(real, torch.ones_like(real))
    l_fake = bce_with_logits(fake, torch.zeros_like(fake))
    return l_real + l_fake, l_real, l_fake


@dataclass(frozen=True)
class LossReport:
    """Per-step scalar losses, serialized as one JSON line per step."""

    step: int
    l_gan: float
    l_l1: float
    l_gen: float
    l_real: float
    l_fake: float
    l_d: float

    def validate(self, lambda_l1: float = DEFAULT_LAMBDA_L1, tol: float = 1e-6) -> None:
        if not all(map(math.isfinite, (self.l_gan, self.l_l1, self.l_gen,
                                       self.l_real, self.l_fake, self.l_d))):
            raise ValueError(f"non-finite loss in report at step {self.step}")
        if abs(self.l_gen - (self.l_gan + lambda_l1 * self.l_l1)) > tol:
            raise ValueError(
                f"l_gen decomposition violated at step {self.step}: "
                f"{self.l_gen} != {self.l_gan} + {lambda_l1} * {self.l_l1}"
            )
        if abs(self.l_d - (self.l_real + self.l_fake)) > tol:
            raise ValueError(
                f"l_d decomposition violated at step {self.step}: "
                f"{self.l_d} != {self.l_real} + {self.l_fake}"
            )

    def to_json_line(self) -> str:
        return json.dumps(asdict(self))

    @staticmethod
    def from_json_line(line: str) -> "LossReport":
        return LossReport(**json.loads(line))
