"""Bias-corrected Adam, written out explicitly so its state can be archived
and the update rule tested against a scalar-loop oracle.

    m <- b1*m + (1-b1)*g        m_hat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2      v_hat = v / (1 - b2^t)
    p <- p - lr * m_hat / (sqrt(v_hat) + eps)
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ShapeMismatchError

__all__ = ["AdamState", "init_adam", "adam_update"]

DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment estimates keyed by parameter name, plus step count."""

    m: dict[str, torch.Tensor]
    v: dict[str, torch.Tensor]
    step: int = 0


def init_adam(params: dict[str, torch.Tensor]) -> AdamState:
    return AdamState(
        m={k: torch.zeros_like(p) for k, p in params.items()},
        v={k: torch.zeros_like(p) for k, p in params.items()},
    )


@torch.no_grad()
def adam_update(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    state: AdamState,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float = DEFAULT_EPS,
) -> AdamState:
    """One Adam step, updating params and moments in place.

    `grads` must cover every parameter; a zero gradient still decays the
    moments (standard Adam semantics).
    """
    if set(params) != set(state.m):
        raise ShapeMismatchError("optimizer state does not match the parameter set")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        if name not in grads or grads[name] is None:
            raise ShapeMismatchError(f"missing gradient for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(
                f"gradient shape {tuple(g.shape)} != param shape {tuple(p.shape)} for {name!r}"
            )
        m, v = state.m[name], state.v[name]
        m.mul_(beta1).add_(g, alpha=1.0 - beta1)
        v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
        p.addcdiv_(m / bc1, (v / bc2).sqrt().add_(eps), value=-lr)
    return state
