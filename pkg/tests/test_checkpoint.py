import numpy as np
import pytest
import torch

from swaprl.checkpoint import (Checkpoint, CheckpointError, load_checkpoint,
                               load_into_module, save_checkpoint,
                               tensors_from_module)
from swaprl.policy import GruActor


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "actor/w": rng.normal(size=(3, 4)).astype("<f4"),
        "actor/b": rng.normal(size=(4,)).astype("<f4"),
    }
    opt = {"adam/step": np.array(7.0, dtype="<f4")}
    ckpt = Checkpoint(tensors, opt, rng_seed=42, vocab_hash=123456, param_count=16)
    path = tmp_path / "c.ckpt"
    save_checkpoint(path, ckpt)
    loaded = load_checkpoint(path)
    assert loaded.rng_seed == 42
    assert loaded.vocab_hash == 123456
    assert loaded.param_count == 16
    for k, arr in tensors.items():
        assert loaded.tensors[k].tobytes() == arr.tobytes()
    assert loaded.opt_tensors["adam/step"].tobytes() == opt["adam/step"].tobytes()
    # writing the loaded checkpoint reproduces the file byte for byte
    path2 = tmp_path / "c2.ckpt"
    save_checkpoint(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_magic_and_version_checked(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_module_round_trip(tmp_path):
    actor = GruActor(8, 16, 2, init_seed=0)
    tensors = tensors_from_module(actor, "actor")
    ckpt = Checkpoint(tensors, {}, 0, 0, sum(t.size for t in tensors.values()))
    path = tmp_path / "a.ckpt"
    save_checkpoint(path, ckpt)
    other = GruActor(8, 16, 2, init_seed=99)
    load_into_module(other, load_checkpoint(path).tensors, "actor")
    for p1, p2 in zip(actor.parameters(), other.parameters()):
        assert torch.equal(p1, p2)


def test_missing_tensor_rejected(tmp_path):
    actor = GruActor(8, 16, 2, init_seed=0)
    with pytest.raises(CheckpointError):
        load_into_module(actor, {}, "actor")


def test_shape_mismatch_rejected():
    actor = GruActor(8, 16, 2, init_seed=0)
    tensors = tensors_from_module(actor, "actor")
    key = next(iter(tensors))
    tensors[key] = np.zeros((1, 1), dtype="<f4")
    with pytest.raises(CheckpointError):
        load_into_module(actor, tensors, "actor")
