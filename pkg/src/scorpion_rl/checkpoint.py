"""Binary checkpoint format for policy, baseline and optimizer state.

Layout: 4-byte magic ``SCRL``, uint32 format version, uint32 JSON header
length, the UTF-8 header, then one contiguous block of little-endian
float64 values. The header records the layer sizes and optimizer step
counts; the float block holds, in order, the flattened policy, value net,
policy Adam moments (m then v) and value Adam moments. Save followed by
load reproduces every parameter bit for bit.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .nets import AdamState, Mlp, flatten_params, iter_arrays, unflatten_params

MAGIC = b"SCRL"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable, truncated or mismatched checkpoint files."""


@dataclass
class Checkpoint:
    policy: Mlp
    value: Mlp
    policy_opt: AdamState
    value_opt: AdamState
    iteration: int
    config_digest: Optional[str]
    header: dict


def _flat_moments(state: AdamState) -> np.ndarray:
    return np.concatenate([a.ravel() for a in state.m + state.v])


def _moments_from_flat(params: Mlp, t: int, flat: np.ndarray) -> AdamState:
    shapes = [a.shape for a in iter_arrays(params)]
    arrays = []
    pos = 0
    for shape in shapes + shapes:
        n = int(np.prod(shape))
        arrays.append(flat[pos:pos + n].reshape(shape).copy())
        pos += n
    if pos != flat.size:
        raise CheckpointError("optimizer block has the wrong size")
    k = len(shapes)
    return AdamState(m=arrays[:k], v=arrays[k:], t=t)


def save_checkpoint(path, policy: Mlp, value: Mlp, policy_opt: AdamState,
                    value_opt: AdamState, iteration: int,
                    config_digest: Optional[str] = None) -> Path:
    """Write one checkpoint file; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blocks = [
        flatten_params(policy),
        flatten_params(value),
        _flat_moments(policy_opt),
        _flat_moments(value_opt),
    ]
    payload = np.concatenate(blocks).astype("<f8")
    header = {
        "format_version": FORMAT_VERSION,
        "policy_sizes": list(policy.sizes),
        "value_sizes": list(value.sizes),
        "log_std_len": 0 if policy.log_std is None else int(policy.log_std.size),
        "iteration": int(iteration),
        "policy_adam_t": int(policy_opt.t),
        "value_adam_t": int(value_opt.t),
        "config_digest": config_digest,
        "block_sizes": [int(b.size) for b in blocks],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload.tobytes())
    return path


def load_checkpoint(path, expected_digest: Optional[str] = None) -> Checkpoint:
    """Read a checkpoint; verifies structure and optionally the config digest."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {version}, expected {FORMAT_VERSION}")
    if len(raw) < 12 + header_len:
        raise CheckpointError(f"{path} is truncated inside the header")
    try:
        header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has an unreadable header: {exc}") from exc
    block_sizes = header.get("block_sizes")
    if not isinstance(block_sizes, list) or len(block_sizes) != 4:
        raise CheckpointError(f"{path} header lacks the four block sizes")
    n_floats = int(sum(block_sizes))
    body = raw[12 + header_len:]
    if len(body) != 8 * n_floats:
        raise CheckpointError(f"{path} is truncated: expected {8 * n_floats} payload bytes, "
                              f"found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(float)
    ends = np.cumsum(block_sizes)
    pol_flat, val_flat, pol_mom, val_mom = np.split(flat, ends[:-1])
    policy = unflatten_params(header["policy_sizes"], header["log_std_len"], pol_flat)
    value = unflatten_params(header["value_sizes"], 0, val_flat)
    policy_opt = _moments_from_flat(policy, header["policy_adam_t"], pol_mom)
    value_opt = _moments_from_flat(value, header["value_adam_t"], val_mom)
    digest = header.get("config_digest")
    if expected_digest is not None and digest != expected_digest:
        raise CheckpointError(
            f"{path} was trained under a different configuration "
            f"(digest {digest!r}, expected {expected_digest!r})")
    return Checkpoint(policy=policy, value=value, policy_opt=policy_opt,
                      value_opt=value_opt, iteration=int(header["iteration"]),
                      config_digest=digest, header=header)
