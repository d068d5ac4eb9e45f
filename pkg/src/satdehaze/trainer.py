"""Adversarial training loop with archived, bit-exact resumable state.

Per step (the pix2pix-style schedule, one D update then one G update):
  1. generator forward on the hazy batch;
  2. discriminator step: BCE(real logits, 1) + BCE(fake logits, 0) with the
     generated image detached, one Adam update on discriminator parameters;
  3. generator step: fresh discriminator logits on the attached fake,
     BCE(logits, 1) + lambda * L1(clear, fake), one Adam update on generator
     parameters.

All randomness (init, shuffle order, random crops) derives from the single
config seed, and the shuffle generator's state plus the in-flight epoch
permutation are serialized with the checkpoints, so an interrupted run
resumed from its archive reproduces the uninterrupted loss trace exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .archive import (
    load_archive,
    load_state_arrays,
    save_archive,
    save_discriminator_checkpoint,
    save_generator_checkpoint,
)
from .data import PairedDataset, load_pair
from .discriminator import DiscriminatorSpec, PatchDiscriminator, build_discriminator
from .errors import EmptyDatasetError, NonFiniteLossError, ShapeMismatchError
from .generator import DehazeGenerator, GeneratorSpec, build_generator
from .imaging import ImageTensor, to_signed, resize
from .losses import LossReport, discriminator_loss, generator_loss
from .optim import AdamState, adam_update, init_adam

__all__ = [
    "TrainConfig",
    "TrainState",
    "init_train_state",
    "train_step",
    "train",
    "save_train_state",
    "load_train_state",
]

_RESIZE_MODES = ("bicubic", "random-crop")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 100
    batch_size: int = 1
    lambda_l1: float = 100.0
    seed: int = 0
    resize: str = "bicubic-256"
    checkpoint_every: int = 10  # epochs
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0.0 <= self.beta1 < self.beta2 < 1.0:
            raise ValueError(f"need 0 <= beta1 < beta2 < 1, got {self.beta1}, {self.beta2}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        self.resize_plan()  # validate eagerly

    def resize_plan(self) -> tuple[str, int]:
        """Parse '<mode>-<size>' into (mode, size)."""
        mode, _, size_text = self.resize.rpartition("-")
        if mode not in _RESIZE_MODES or not size_text.isdigit():
            raise ValueError(
                f"resize must be '<mode>-<pixels>' with mode in {_RESIZE_MODES}, "
                f"got {self.resize!r}"
            )
        size = int(size_text)
        if size % 4 != 0 or size < 48:
            raise ValueError(f"training size must be a multiple of 4 and >= 48, got {size}")
        return mode, size


@dataclass
class TrainState:
    config: TrainConfig
    generator: DehazeGenerator
    discriminator: PatchDiscriminator
    gen_opt: AdamState
    disc_opt: AdamState
    rng: np.random.Generator
    epoch: int = 0
    step: int = 0
    epoch_order: list[int] = field(default_factory=list)
    epoch_pos: int = 0


def init_train_state(
    gen_spec: GeneratorSpec, disc_spec: DiscriminatorSpec, config: TrainConfig
) -> TrainState:
    """Fresh state; init seeds derive from the config seed (seed, seed+1, seed+2)."""
    generator = build_generator(gen_spec, config.seed)
    discriminator = build_discriminator(disc_spec, config.seed + 1)
    return TrainState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        gen_opt=init_adam(dict(generator.named_parameters())),
        disc_opt=init_adam(dict(discriminator.named_parameters())),
        rng=np.random.default_rng(config.seed + 2),
    )


def _zero_grads(net: torch.nn.Module) -> None:
    for p in net.parameters():
        if p.grad is not None:
            p.grad = None


def _grads(net: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {name: p.grad for name, p in net.named_parameters()}


def train_step(
    state: TrainState, hazy: torch.Tensor, clear: torch.Tensor
) -> LossReport:
    """One adversarial step on a signed-range (B, 3, H, W) batch.

    Mutates the networks and optimizer moments in place and returns the
    step's loss report (identities recomposed in float64 so the report's
    decomposition checks hold exactly).
    """
    if hazy.shape != clear.shape or hazy.dim() != 4:
        raise ShapeMismatchError(
            f"batch shapes differ or are not 4-D: {tuple(hazy.shape)} vs {tuple(clear.shape)}"
        )
    state.generator.check_input_size(hazy.shape[2], hazy.shape[3])
    state.discriminator.check_input_size(hazy.shape[2], hazy.shape[3])
    cfg = state.config
    gen, disc = state.generator, state.discriminator
    gen.train()
    disc.train()

    def _check_finite(**scalars: float) -> None:
        if not all(map(math.isfinite, scalars.values())):
            detail = " ".join(f"{k}={v}" for k, v in scalars.items())
            raise NonFiniteLossError(f"non-finite loss at step {state.step + 1}: {detail}")

    fake = gen(hazy)

    # discriminator update (generated image detached from the generator graph)
    _zero_grads(disc)
    real_logits = disc(hazy, clear)
    fake_logits = disc(hazy, fake.detach())
    l_d_t, l_real_t, l_fake_t = discriminator_loss(real_logits, fake_logits)
    l_real, l_fake = float(l_real_t.item()), float(l_fake_t.item())
    _check_finite(l_real=l_real, l_fake=l_fake)
    l_d_t.backward()
    adam_update(dict(disc.named_parameters()), _grads(disc), state.disc_opt,
                cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)

    # generator update against the freshly updated discriminator
    _zero_grads(gen)
    _zero_grads(disc)
    gen_logits = disc(hazy, fake)
    l_gen_t, l_gan_t, l_l1_t = generator_loss(gen_logits, clear, fake, cfg.lambda_l1)
    l_gan, l_l1 = float(l_gan_t.item()), float(l_l1_t.item())
    _check_finite(l_gan=l_gan, l_l1=l_l1)
    l_gen_t.backward()
    adam_update(dict(gen.named_parameters()), _grads(gen), state.gen_opt,
                cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)

    state.step += 1
    report = LossReport(
        step=state.step,
        l_gan=l_gan,
        l_l1=l_l1,
        l_gen=l_gan + cfg.lambda_l1 * l_l1,
        l_real=l_real,
        l_fake=l_fake,
        l_d=l_real + l_fake,
    )
    report.validate(cfg.lambda_l1)
    return report


def _prepare_image(img: ImageTensor, mode: str, size: int,
                   rng: np.random.Generator, crop_origin: tuple[int, int] | None):
    if mode == "random-crop" and (img.height > size or img.width > size):
        top, left = crop_origin  # drawn once per pair so both images align
        img = ImageTensor(img.data[top:top + size, left:left + size], img.range_tag)
    elif (img.height, img.width) != (size, size):
        img = resize(img, size, size, method="bicubic")
    return to_signed(img)


def _load_batch(
    dataset: PairedDataset, ids: list[int], config: TrainConfig, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    mode, size = config.resize_plan()
    hazy_list, clear_list = [], []
    for i in ids:
        hazy, clear = load_pair(dataset.pairs[i])
        crop_origin = None
        if mode == "random-crop" and (hazy.height > size or hazy.width > size):
            top = int(rng.integers(0, hazy.height - size + 1))
            left = int(rng.integers(0, hazy.width - size + 1))
            crop_origin = (top, left)
        hazy_list.append(_prepare_image(hazy, mode, size, rng, crop_origin).data)
        clear_list.append(_prepare_image(clear, mode, size, rng, crop_origin).data)
    hazy_np = np.stack(hazy_list).transpose(0, 3, 1, 2)
    clear_np = np.stack(clear_list).transpose(0, 3, 1, 2)
    return (
        torch.from_numpy(np.ascontiguousarray(hazy_np)),
        torch.from_numpy(np.ascontiguousarray(clear_np)),
    )


def _config_hash(config: TrainConfig) -> str:
    canonical = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def train(
    config: TrainConfig,
    dataset: PairedDataset,
    out_dir: str | Path,
    gen_spec: GeneratorSpec | None = None,
    disc_spec: DiscriminatorSpec | None = None,
    resume_from: str | Path | None = None,
    max_steps: int | None = None,
) -> TrainState:
    """Run the training loop, logging one JSON line per step.

    Checkpoints (train state + generator + discriminator archives) are
    written every `checkpoint_every` epochs and at the end. Pass
    `resume_from` to continue a run from its state archive.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("training dataset is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if resume_from is not None:
        state = load_train_state(resume_from)
    else:
        if gen_spec is None or disc_spec is None:
            raise ValueError("gen_spec and disc_spec are required when not resuming")
        state = init_train_state(gen_spec, disc_spec, config)
    cfg = state.config
    n = len(dataset)
    started = time.time()
    last_report: LossReport | None = None

    def _write_checkpoints(tag: str) -> None:
        save_train_state(out_dir / f"state_{tag}.sdnt", state)
        save_generator_checkpoint(out_dir / f"generator_{tag}.sdnt",
                                  state.generator, cfg.seed)
        save_discriminator_checkpoint(out_dir / f"discriminator_{tag}.sdnt",
                                      state.discriminator, cfg.seed + 1)

    with open(out_dir / "losses.jsonl", "a") as loss_log:
        while state.epoch < cfg.epochs:
            if state.epoch_pos == 0 and not state.epoch_order:
                state.epoch_order = state.rng.permutation(n).tolist()
            while state.epoch_pos < n:
                ids = state.epoch_order[state.epoch_pos:state.epoch_pos + cfg.batch_size]
                hazy, clear = _load_batch(dataset, ids, cfg, state.rng)
                last_report = train_step(state, hazy, clear)
                loss_log.write(last_report.to_json_line() + "\n")
                state.epoch_pos += len(ids)
                if max_steps is not None and state.step >= max_steps:
                    loss_log.flush()
                    _write_checkpoints("final")
                    return state
            state.epoch += 1
            state.epoch_pos = 0
            state.epoch_order = []
            if state.epoch % cfg.checkpoint_every == 0 and state.epoch < cfg.epochs:
                _write_checkpoints(f"epoch{state.epoch:04d}")
        loss_log.flush()

    _write_checkpoints("final")
    summary = {
        "config": asdict(cfg),
        "config_hash": _config_hash(cfg),
        "epochs_completed": state.epoch,
        "steps": state.step,
        "wall_time_s": time.time() - started,
        "last_losses": asdict(last_report) if last_report else None,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return state


def save_train_state(path: str | Path, state: TrainState) -> None:
    tensors: dict[str, np.ndarray] = {}
    for prefix, net in (("gen", state.generator), ("disc", state.discriminator)):
        for name, value in net.state_dict().items():
            tensors[f"{prefix}.{name}"] = value.detach().cpu().numpy()
    for prefix, opt in (("opt_g", state.gen_opt), ("opt_d", state.disc_opt)):
        for name, value in opt.m.items():
            tensors[f"{prefix}.m.{name}"] = value.detach().cpu().numpy()
        for name, value in opt.v.items():
            tensors[f"{prefix}.v.{name}"] = value.detach().cpu().numpy()
    meta = {
        "kind": "train_state",
        "config": asdict(state.config),
        "gen_spec": asdict(state.generator.spec),
        "disc_spec": asdict(state.discriminator.spec),
        "epoch": state.epoch,
        "step": state.step,
        "epoch_order": state.epoch_order,
        "epoch_pos": state.epoch_pos,
        "opt_g_step": state.gen_opt.step,
        "opt_d_step": state.disc_opt.step,
        "rng_state": state.rng.bit_generator.state,
    }
    save_archive(path, tensors, meta)


def load_train_state(path: str | Path) -> TrainState:
    tensors, meta = load_archive(path)
    if meta.get("kind") != "train_state":
        raise ValueError(f"{path} is not a train-state archive ({meta.get('kind')!r})")
    config = TrainConfig(**meta["config"])
    generator = build_generator(GeneratorSpec(**meta["gen_spec"]), config.seed)
    discriminator = build_discriminator(DiscriminatorSpec(**meta["disc_spec"]), config.seed + 1)

    def _sub(prefix: str) -> dict[str, np.ndarray]:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in tensors.items() if k.startswith(prefix + ".")}

    load_state_arrays(generator, _sub("gen"))
    load_state_arrays(discriminator, _sub("disc"))

    def _opt(prefix: str, step: int) -> AdamState:
        m = {k[2:]: torch.from_numpy(v) for k, v in _sub(prefix).items() if k.startswith("m.")}
        v = {k[2:]: torch.from_numpy(val) for k, val in _sub(prefix).items()
             if k.startswith("v.")}
        return AdamState(m=m, v=v, step=step)

    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]
    return TrainState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        gen_opt=_opt("opt_g", meta["opt_g_step"]),
        disc_opt=_opt("opt_d", meta["opt_d_step"]),
        rng=rng,
        epoch=meta["epoch"],
        step=meta["step"],
        epoch_order=list(meta["epoch_order"]),
        epoch_pos=meta["epoch_pos"],
    )
