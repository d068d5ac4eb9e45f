"""Paired-dataset ingestion, deterministic splits, and synthetic data writing.

On-disk convention (overridable through a key=value manifest, since
distributed copies of the benchmark datasets vary in folder naming):

    <root>/<split>/input/NNN.png     hazy input
    <root>/<split>/target/NNN.png    clear target

with matching filenames per pair. The cloud-removal layout uses cloud/ and
label/ at the root. Synthetic datasets add params/NNN.json sidecars
recording the haze parameters used for composition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import (
    EmptyDatasetError,
    MissingSplitError,
    SizeMismatchError,
    UnpairedImageError,
)
from .haze import Severity, compose_haze, sample_haze_params
from .imaging import ImageTensor, ValueRange, load_image, save_image

__all__ = [
    "PairedDataset",
    "read_manifest",
    "load_paired_dir",
    "load_haze1k",
    "load_rice",
    "generate_texture",
    "write_synthetic_dataset",
    "load_pair",
    "match_prediction_pairs",
    "HAZE1K_SPLITS",
    "HAZE1K_EXPECTED_SIZES",
]

HAZE1K_SPLITS = ("train", "test-thin", "test-moderate", "test-thick")
HAZE1K_EXPECTED_SIZES = {"train": 900, "test-thin": 45, "test-moderate": 45, "test-thick": 45}

_IMAGE_SUFFIXES = (".png",)


@dataclass(frozen=True)
class PairedDataset:
    """Ordered (hazy, clear) path pairs; iteration order is lexicographic by id."""

    name: str
    split_tag: str
    pairs: tuple[tuple[Path, Path, str], ...]  # (hazy_path, clear_path, image_id)

    def __len__(self) -> int:
        return len(self.pairs)

    def ids(self) -> tuple[str, ...]:
        return tuple(image_id for _, _, image_id in self.pairs)


def read_manifest(path: str | Path) -> dict[str, str]:
    """Parse a simple `key=value` manifest; '#' starts a comment line."""
    entries: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad manifest line (expected key=value): {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _image_ids(directory: Path) -> dict[str, Path]:
    return {
        p.stem: p
        for p in sorted(directory.iterdir())
        if p.suffix.lower() in _IMAGE_SUFFIXES and p.is_file()
    }


def _image_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as img:
        return img.size  # (width, height), header only


def _collect_pairs(input_dir: Path, target_dir: Path) -> tuple[tuple[Path, Path, str], ...]:
    inputs = _image_ids(input_dir)
    targets = _image_ids(target_dir)
    for image_id in sorted(inputs):
        if image_id not in targets:
            raise UnpairedImageError(
                f"input image {inputs[image_id].name!r} in {input_dir} has no target counterpart"
            )
    for image_id in sorted(targets):
        if image_id not in inputs:
            raise UnpairedImageError(
                f"target image {targets[image_id].name!r} in {target_dir} has no input counterpart"
            )
    pairs = []
    for image_id in sorted(inputs):
        hazy, clear = inputs[image_id], targets[image_id]
        if _image_size(hazy) != _image_size(clear):
            raise SizeMismatchError(
                f"pair {image_id!r}: input {_image_size(hazy)} vs target {_image_size(clear)}"
            )
        pairs.append((hazy, clear, image_id))
    return tuple(pairs)


def load_paired_dir(
    root: str | Path,
    name: str = "dataset",
    split_tag: str = "train",
    input_subdir: str = "input",
    target_subdir: str = "target",
) -> PairedDataset:
    """Load one input/target pair tree (the default on-disk convention)."""
    root = Path(root)
    input_dir, target_dir = root / input_subdir, root / target_subdir
    for d in (input_dir, target_dir):
        if not d.is_dir():
            raise MissingSplitError(f"missing directory {d}")
    pairs = _collect_pairs(input_dir, target_dir)
    if not pairs:
        raise EmptyDatasetError(f"no image pairs under {root}")
    return PairedDataset(name=name, split_tag=split_tag, pairs=pairs)


def load_haze1k(
    root: str | Path,
    manifest: str | Path | None = None,
    strict: bool = False,
) -> dict[str, PairedDataset]:
    """Load the four-way split tree (train / test-thin / test-moderate / test-thick).

    `strict` additionally validates the published split sizes (900/45/45/45).
    """
    root = Path(root)
    layout = {f"{split}.dir": split for split in HAZE1K_SPLITS}
    layout.update({f"{split}.input": "input" for split in HAZE1K_SPLITS})
    layout.update({f"{split}.target": "target" for split in HAZE1K_SPLITS})
    if manifest is not None:
        layout.update(read_manifest(manifest))

    datasets: dict[str, PairedDataset] = {}
    for split in HAZE1K_SPLITS:
        split_dir = root / layout[f"{split}.dir"]
        if not split_dir.is_dir():
            raise MissingSplitError(f"missing split directory {split_dir} for {split!r}")
        datasets[split] = load_paired_dir(
            split_dir,
            name=f"haze1k-{split}",
            split_tag=split,
            input_subdir=layout[f"{split}.input"],
            target_subdir=layout[f"{split}.target"],
        )
        if strict and len(datasets[split]) != HAZE1K_EXPECTED_SIZES[split]:
            raise SizeMismatchError(
                f"split {split!r} has {len(datasets[split])} pairs, "
                f"expected {HAZE1K_EXPECTED_SIZES[split]}"
            )
    return datasets


def load_rice(
    root: str | Path,
    train_fraction: float = 0.9,
    seed: int = 0,
    manifest: str | Path | None = None,
) -> tuple[PairedDataset, PairedDataset]:
    """Load the cloud/label tree and split it deterministically.

    Ids are sorted lexicographically, permuted with the seeded generator,
    and the first floor(train_fraction * n) go to train. The same seed
    always yields the same partition.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    layout = {"input": "cloud", "target": "label"}
    if manifest is not None:
        layout.update(read_manifest(manifest))
    full = load_paired_dir(
        root, name="rice", split_tag="train",
        input_subdir=layout["input"], target_subdir=layout["target"],
    )
    n = len(full)
    n_train = int(np.floor(train_fraction * n))
    order = np.random.default_rng(seed).permutation(n)
    train_idx = set(order[:n_train].tolist())
    train_pairs = tuple(p for i, p in enumerate(full.pairs) if i in train_idx)
    test_pairs = tuple(p for i, p in enumerate(full.pairs) if i not in train_idx)
    return (
        PairedDataset(name="rice-train", split_tag="train", pairs=train_pairs),
        PairedDataset(name="rice-test", split_tag="test", pairs=test_pairs),
    )


def _linear_gradient(size: int, rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    field = np.cos(theta) * xx + np.sin(theta) * yy
    return field


def _blob_field(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    field = np.zeros((size, size))
    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0, size, size=2)
        sig = rng.uniform(size / 16, size / 4)
        amp = rng.uniform(-1.0, 1.0)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig**2))
    return field


def _stripe_field(size: int, rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(0.0, np.pi)
    freq = rng.uniform(2.0, 8.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    return np.sin(2.0 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)


def generate_texture(size: int, rng: np.random.Generator) -> ImageTensor:
    """Procedural clear-scene texture: gradients + blobs + stripes, RGB."""
    grad = _linear_gradient(size, rng)
    blobs = _blob_field(size, rng)
    stripes = _stripe_field(size, rng)
    weights = rng.uniform(0.3, 1.0, size=3)
    base = weights[0] * grad + weights[1] * blobs + weights[2] * stripes
    channels = []
    for _ in range(3):
        tint = rng.uniform(0.7, 1.3)
        shift = 0.15 * _linear_gradient(size, rng)
        channels.append(tint * base + shift)
    img = np.stack(channels, axis=-1)
    lo, hi = float(img.min()), float(img.max())
    if hi - lo < 1e-9:
        return ImageTensor(np.full((size, size, 3), 0.5, dtype=np.float32), ValueRange.UNIT)
    img = 0.05 + 0.9 * (img - lo) / (hi - lo)
    return ImageTensor(img, ValueRange.UNIT)


def write_synthetic_dataset(
    out_dir: str | Path,
    n: int,
    severities: Sequence[Severity | str] = (Severity.MODERATE,),
    seed: int = 0,
    size: int = 256,
    clear_sources: Sequence[ImageTensor] | None = None,
) -> PairedDataset:
    """Write n (hazy, clear) PNG pairs plus JSON haze-parameter sidecars.

    Clear scenes default to procedural textures so the pipeline needs no
    external downloads; severities are assigned round-robin. Everything is
    a pure function of the seed: rerunning produces byte-identical trees.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not severities:
        raise ValueError("severities must be non-empty")
    out_dir = Path(out_dir)
    input_dir, target_dir, params_dir = out_dir / "input", out_dir / "target", out_dir / "params"
    for d in (input_dir, target_dir, params_dir):
        d.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        severity = severities[i % len(severities)]
        if clear_sources is not None:
            clear = clear_sources[i % len(clear_sources)]
        else:
            clear = generate_texture(size, rng)
        param_seed = int(rng.integers(0, 2**31 - 1))
        params = sample_haze_params(severity, clear.height, clear.width, param_seed)
        hazy = compose_haze(clear, params)

        image_id = f"{i:05d}"
        hazy_path = input_dir / f"{image_id}.png"
        clear_path = target_dir / f"{image_id}.png"
        save_image(hazy, hazy_path)
        save_image(clear, clear_path)
        sidecar = {
            "A": params.airlight,
            "beta": params.beta,
            "seed": param_seed,
            "severity": params.severity.value,
            "mean_transmission": params.mean_transmission(),
        }
        (params_dir / f"{image_id}.json").write_text(json.dumps(sidecar, indent=2))
        pairs.append((hazy_path, clear_path, image_id))
    return PairedDataset(name=out_dir.name, split_tag="train", pairs=tuple(pairs))


def load_pair(pair: tuple[Path, Path, str]) -> tuple[ImageTensor, ImageTensor]:
    """Load one (hazy, clear) pair as unit-range tensors."""
    hazy_path, clear_path, _ = pair
    return load_image(hazy_path), load_image(clear_path)


def match_prediction_pairs(pred_dir: str | Path, gt_dir: str | Path) -> list[tuple[Path, Path]]:
    """Match prediction and ground-truth files by filename stem."""
    preds = _image_ids(Path(pred_dir))
    gts = _image_ids(Path(gt_dir))
    if not preds:
        raise EmptyDatasetError(f"no images under {pred_dir}")
    pairs = []
    for image_id in sorted(preds):
        if image_id not in gts:
            raise UnpairedImageError(f"prediction {preds[image_id].name!r} has no ground truth")
        pairs.append((preds[image_id], gts[image_id]))
    return pairs
