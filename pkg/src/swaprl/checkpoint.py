"""Binary checkpoint format.

Layout (little-endian): magic "TSSR", u32 format version, u64 vocabulary
hash, u64 parameter count, then two named-tensor sections (model, optimizer)
each as u32 count followed by entries of (u32 name length, UTF-8 name,
u32 rank, u64 dims..., row-major float32 data), and finally the u64 RNG seed.
Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

MAGIC = b"TSSR"
VERSION = 1


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    opt_tensors: dict[str, np.ndarray]
    rng_seed: int
    vocab_hash: int
    param_count: int


class CheckpointError(ValueError):
    pass


def _write_section(f, tensors: dict[str, np.ndarray]) -> None:
    f.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        nb = name.encode("utf-8")
        f.write(struct.pack("<I", len(nb)))
        f.write(nb)
        f.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            f.write(struct.pack("<Q", d))
        f.write(arr.tobytes())


def _read_section(f) -> dict[str, np.ndarray]:
    (count,) = struct.unpack("<I", f.read(4))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", f.read(4))
        name = f.read(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", f.read(4))
        dims = [struct.unpack("<Q", f.read(8))[0] for _ in range(rank)]
        n = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(dims)
        out[name] = data.copy()
    return out


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", ckpt.vocab_hash))
        f.write(struct.pack("<Q", ckpt.param_count))
        _write_section(f, ckpt.tensors)
        _write_section(f, ckpt.opt_tensors)
        f.write(struct.pack("<Q", ckpt.rng_seed))


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (vocab_hash,) = struct.unpack("<Q", f.read(8))
        (pcount,) = struct.unpack("<Q", f.read(8))
        tensors = _read_section(f)
        opt = _read_section(f)
        (seed,) = struct.unpack("<Q", f.read(8))
    return Checkpoint(tensors, opt, seed, vocab_hash, pcount)


def tensors_from_module(module: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}/{name}": p.detach().cpu().numpy().astype("<f4")
        for name, p in module.named_parameters()
    }


def load_into_module(
    module: torch.nn.Module, tensors: dict[str, np.ndarray], prefix: str
) -> None:
    with torch.no_grad():
        for name, p in module.named_parameters():
            key = f"{prefix}/{name}"
            if key not in tensors:
                raise CheckpointError(f"checkpoint missing tensor {key}")
            arr = tensors[key]
            if tuple(arr.shape) != tuple(p.shape):
                raise CheckpointError(
                    f"shape mismatch for {key}: {arr.shape} vs {tuple(p.shape)}"
                )
            p.copy_(torch.from_numpy(arr.copy()))
