"""Versioned binary checkpoint format.

Layout, all integers unsigned little-endian::

    magic        8 bytes  b"SKMTCKPT"
    version      u32
    policy_dim   u32
    critic_dim   u32
    action_dim   u32
    n_actor      u32, then n_actor hidden widths (u32 each)
    n_critic     u32, then n_critic hidden widths (u32 each)
    n_params     u64, then n_params float64: actor W1, b1, ..., critic W1, b1, ...
                 (weights row-major, shape (fan_in, fan_out))
    log_std      action_dim float64
    lr           float64
    iteration    u64
    seed         u64
    crc32        u32 over every preceding byte
"""
from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ppo import GaussianPolicy, MlpParams

MAGIC = b"SKMTCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    policy: GaussianPolicy
    learning_rate: float
    iteration: int
    seed: int

    @property
    def dims(self):
        return self.policy.dims


def _hidden(mlp: MlpParams):
    return mlp.widths[1:-1]


def to_bytes(ckpt: Checkpoint) -> bytes:
    p = ckpt.policy
    policy_dim, critic_dim, action_dim = p.dims
    ah, ch = _hidden(p.actor), _hidden(p.critic)
    flat = np.concatenate([a.ravel() for a in p.actor.arrays() + p.critic.arrays()]).astype("<f8")
    out = bytearray(MAGIC)
    out += struct.pack("<IIII", VERSION, policy_dim, critic_dim, action_dim)
    out += struct.pack(f"<I{len(ah)}I", len(ah), *ah)
    out += struct.pack(f"<I{len(ch)}I", len(ch), *ch)
    out += struct.pack("<Q", flat.size) + flat.tobytes()
    out += np.asarray(p.log_std, dtype="<f8").tobytes()
    out += struct.pack("<dQQ", float(ckpt.learning_rate), int(ckpt.iteration), int(ckpt.seed))
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def from_bytes(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file: bad magic string")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint checksum mismatch: file is truncated or corrupt")
    off = len(MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(body):
            raise CheckpointError(f"checkpoint truncated at byte {off}")
        vals = struct.unpack_from(fmt, body, off)
        off += size
        return vals

    version, policy_dim, critic_dim, action_dim = take("<IIII")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    (na,) = take("<I")
    ah = take(f"<{na}I")
    (nc,) = take("<I")
    ch = take(f"<{nc}I")
    (n,) = take("<Q")
    flat = np.frombuffer(body, dtype="<f8", count=n, offset=off).astype(float)
    off += 8 * n
    log_std = np.frombuffer(body, dtype="<f8", count=action_dim, offset=off).astype(float)
    off += 8 * action_dim
    lr, iteration, seed = take("<dQQ")
    if off != len(body):
        raise CheckpointError(f"{len(body) - off} unexpected trailing bytes in checkpoint")

    pos = 0

    def build(widths):
        nonlocal pos
        ws, bs = [], []
        for a, b in zip(widths[:-1], widths[1:]):
            ws.append(flat[pos:pos + a * b].reshape(a, b).copy())
            pos += a * b
            bs.append(flat[pos:pos + b].copy())
            pos += b
        return MlpParams(ws, bs)

    actor = build([policy_dim, *ah, action_dim])
    critic = build([critic_dim, *ch, 1])
    if pos != n:
        raise CheckpointError(f"parameter count {n} does not match layer widths ({pos})")
    return Checkpoint(GaussianPolicy(actor, critic, log_std.copy()), lr, iteration, seed)


def save(ckpt: Checkpoint, path) -> None:
    """Write atomically: an interrupted save never clobbers the previous file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(to_bytes(ckpt))
    os.replace(tmp, path)


def load(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
