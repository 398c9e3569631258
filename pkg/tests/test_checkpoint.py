import numpy as np
import pytest

from errors import CheckpointError
from training.checkpoint import (
    MAGIC,
    Checkpoint,
    CheckpointMeta,
    decode_checkpoint,
    encode_checkpoint,
    expected_size,
    load_checkpoint,
    save_checkpoint,
)


@pytest.fixture
def ckpt():
    rng = np.random.default_rng(0)
    return Checkpoint(
        tensors={
            "encoder.stem.kernel": rng.normal(size=(4, 3, 3, 3)),
            "encoder.stem.gamma": np.ones(4),
            "input.mean": np.array([0.1, 0.2, 0.3]),
        },
        meta=CheckpointMeta(kind="pretrain", preset="tiny", epoch=2, seed=7, config_digest="abc"),
    )


def test_file_layout_and_values(tmp_path, ckpt):
    path = save_checkpoint(ckpt, tmp_path / "model.ckpt")
    data = path.read_bytes()
    assert data[:4] == MAGIC
    assert len(data) == expected_size(ckpt.tensors, len(ckpt.meta.model_dump_json().encode()))

    back = load_checkpoint(path)
    assert back.meta == ckpt.meta
    assert list(back.tensors) == list(ckpt.tensors)
    for name, value in ckpt.tensors.items():
        assert back.tensors[name].dtype == np.float32
        np.testing.assert_array_equal(back.tensors[name], value.astype(np.float32))


def test_subset_by_prefix(ckpt):
    assert set(ckpt.subset("encoder.")) == {"encoder.stem.kernel", "encoder.stem.gamma"}


def test_bad_magic(ckpt):
    data = bytearray(encode_checkpoint(ckpt))
    data[:4] = b"NOPE"
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(bytes(data))


def test_bad_version(ckpt):
    data = bytearray(encode_checkpoint(ckpt))
    data[4] = 9
    with pytest.raises(CheckpointError, match="version"):
        decode_checkpoint(bytes(data))


def test_truncated_payload(ckpt):
    data = encode_checkpoint(ckpt)
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(data[:60])


def test_garbled_metadata(ckpt):
    data = encode_checkpoint(ckpt) + b"\xff\xfe"
    with pytest.raises(CheckpointError):
        decode_checkpoint(data)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.ckpt")
