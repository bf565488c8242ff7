import struct
import zlib

import numpy as np
import pytest

from skatemount import checkpoint as ck
from skatemount.ppo import GaussianPolicy


def make_ckpt(seed=0, hidden=(32, 16)):
    rng = np.random.default_rng(seed)
    policy = GaussianPolicy.create(90, 93, 12, rng, actor_hidden=hidden, critic_hidden=hidden[::-1])
    policy.log_std[:] = rng.uniform(-1, 0.5, 12)
    for a in policy.arrays():
        a += 1e-3 * rng.standard_normal(a.shape)   # non-trivial biases too
    return ck.Checkpoint(policy, 3.7e-4, 123, 2 ** 40 + 7)


def test_round_trip_is_byte_identical(tmp_path):
    c = make_ckpt()
    path = tmp_path / "a.ckpt"
    ck.save(c, path)
    back = ck.load(path)
    assert ck.to_bytes(back) == path.read_bytes() == ck.to_bytes(c)
    for a, b in zip(c.policy.arrays(), back.policy.arrays()):
        assert a.shape == b.shape
        np.testing.assert_array_equal(a, b)
    assert (back.learning_rate, back.iteration, back.seed) == (3.7e-4, 123, 2 ** 40 + 7)
    assert back.dims == (90, 93, 12)


def test_restored_policy_acts_identically(rng):
    c = make_ckpt(1)
    back = ck.from_bytes(ck.to_bytes(c))
    obs, cobs = rng.standard_normal((1000, 90)), rng.standard_normal((1000, 93))
    np.testing.assert_array_equal(back.policy.mean(obs), c.policy.mean(obs))
    np.testing.assert_array_equal(back.policy.value(cobs), c.policy.value(cobs))


def test_header_layout():
    data = ck.to_bytes(make_ckpt(hidden=(8,)))
    assert data[:8] == b"SKMTCKPT"
    assert struct.unpack_from("<IIII", data, 8) == (ck.VERSION, 90, 93, 12)
    assert struct.unpack_from("<II", data, 24) == (1, 8)


def test_bad_magic():
    data = bytearray(ck.to_bytes(make_ckpt()))
    data[0:8] = b"NOTACKPT"
    with pytest.raises(ck.CheckpointError, match="magic"):
        ck.from_bytes(bytes(data))


@pytest.mark.parametrize("cut", [1, 100, 5000])
def test_truncated_file(cut):
    data = ck.to_bytes(make_ckpt())
    with pytest.raises(ck.CheckpointError):
        ck.from_bytes(data[:-cut])


def test_flipped_byte_is_detected():
    data = bytearray(ck.to_bytes(make_ckpt()))
    data[len(data) // 2] ^= 0x01
    with pytest.raises(ck.CheckpointError, match="checksum"):
        ck.from_bytes(bytes(data))


def test_unknown_version_is_reported():
    data = bytearray(ck.to_bytes(make_ckpt()))
    struct.pack_into("<I", data, 8, 99)
    body = bytes(data[:-4])
    data[-4:] = struct.pack("<I", zlib.crc32(body))
    with pytest.raises(ck.CheckpointError, match="version 99"):
        ck.from_bytes(bytes(data))


def test_empty_and_garbage_files(tmp_path):
    for content in (b"", b"hello", b"\x00" * 64):
        p = tmp_path / "x.ckpt"
        p.write_bytes(content)
        with pytest.raises(ck.CheckpointError):
            ck.load(p)


def test_save_replaces_atomically(tmp_path):
    path = tmp_path / "run" / "s.ckpt"
    ck.save(make_ckpt(0), path)
    ck.save(make_ckpt(1), path)
    assert ck.load(path).policy.log_std.tolist() == make_ckpt(1).policy.log_std.tolist()
    assert [p.name for p in path.parent.iterdir()] == ["s.ckpt"]
