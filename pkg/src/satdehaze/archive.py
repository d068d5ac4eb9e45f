"""Named-tensor checkpoint archive.

Single-file layout, fully specified so any implementation can read it:

    bytes 0..7    magic b"SDNT0001"
    bytes 8..11   uint32 little-endian, JSON header length L
    bytes 12..12+L  UTF-8 JSON: {"meta": {...}, "tensors": [entry, ...]}
    remainder     raw tensor payloads, concatenated in entry order

Each tensor entry is {"name", "dtype", "shape", "offset", "nbytes"} where
offset is relative to the start of the payload section, dtype is "float32"
or "int64", and payloads are little-endian, C-contiguous. `meta` carries
arbitrary JSON (network spec, init seed, trainer bookkeeping).

Generator/discriminator checkpoints store the module state_dict under the
hierarchical parameter names, with the spec and init seed in `meta`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from .discriminator import DiscriminatorSpec, PatchDiscriminator, build_discriminator
from .errors import ArchiveFormatError
from .generator import DehazeGenerator, GeneratorSpec, build_generator

__all__ = [
    "save_archive",
    "load_archive",
    "save_generator_checkpoint",
    "load_generator_checkpoint",
    "save_discriminator_checkpoint",
    "load_discriminator_checkpoint",
]

MAGIC = b"SDNT0001"

_DTYPES = {
    "float32": np.dtype("<f4"),
    "int64": np.dtype("<i8"),
}


def save_archive(path: str | Path, tensors: Mapping[str, np.ndarray], meta: dict) -> None:
    entries = []
    payloads = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype == np.float32:
            dtype = "float32"
        elif arr.dtype == np.int64:
            dtype = "int64"
        else:
            raise ArchiveFormatError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        raw = arr.astype(_DTYPES[dtype], copy=False).tobytes(order="C")
        entries.append({
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "tensors": entries}).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for raw in payloads:
            f.write(raw)


def load_archive(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ArchiveFormatError(f"{path} is not a tensor archive (bad magic)")
    (header_len,) = struct.unpack("<I", blob[8:12])
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveFormatError(f"corrupt archive header in {path}: {exc}") from exc
    payload = blob[12 + header_len:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise ArchiveFormatError(f"unknown dtype {entry['dtype']!r} in {path}")
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise ArchiveFormatError(f"truncated payload for tensor {entry['name']!r} in {path}")
        arr = np.frombuffer(raw, dtype=dtype).reshape(entry["shape"]).copy()
        tensors[entry["name"]] = arr
    return tensors, header["meta"]


def _state_dict_arrays(module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy() for k, v in module.state_dict().items()}


def load_state_arrays(module: torch.nn.Module, tensors: Mapping[str, np.ndarray]) -> None:
    state = {k: torch.from_numpy(np.ascontiguousarray(v)) for k, v in tensors.items()}
    module.load_state_dict(state, strict=True)


def save_generator_checkpoint(
    path: str | Path, net: DehazeGenerator, init_seed: int
) -> None:
    meta = {"kind": "generator", "spec": asdict(net.spec), "init_seed": init_seed}
    save_archive(path, _state_dict_arrays(net), meta)


def load_generator_checkpoint(path: str | Path) -> tuple[DehazeGenerator, int]:
    tensors, meta = load_archive(path)
    if meta.get("kind") != "generator":
        raise ArchiveFormatError(f"{path} is not a generator checkpoint ({meta.get('kind')!r})")
    spec = GeneratorSpec(**meta["spec"])
    net = build_generator(spec, meta["init_seed"])
    load_state_arrays(net, tensors)
    return net, meta["init_seed"]


def save_discriminator_checkpoint(
    path: str | Path, net: PatchDiscriminator, init_seed: int
) -> None:
    meta = {"kind": "discriminator", "spec": asdict(net.spec), "init_seed": init_seed}
    save_archive(path, _state_dict_arrays(net), meta)


def load_discriminator_checkpoint(path: str | Path) -> tuple[PatchDiscriminator, int]:
    tensors, meta = load_archive(path)
    if meta.get("kind") != "discriminator":
        raise ArchiveFormatError(
            f"{path} is not a discriminator checkpoint ({meta.get('kind')!r})"
        )
    spec = DiscriminatorSpec(**meta["spec"])
    net = build_discriminator(spec, meta["init_seed"])
    load_state_arrays(net, tensors)
    return net, meta["init_seed"]
