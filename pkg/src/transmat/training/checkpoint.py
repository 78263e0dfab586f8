"""
Checkpoint container
--------------------
Portable file layout:

  line 1   TRANSMAT-CKPT
  line 2   one-line JSON header (sorted keys)
  rest     little-endian float32 payload, tensors back to back

Header fields: format version, package version, config hash, model config,
iteration, and per tensor its name, shape and byte offset. Integer buffers
(BatchNorm's num_batches_tracked) are not stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import torch
from torch import nn

from transmat.core.config import NetworkConfig, config_hash, network_config_from_dict, section_to_dict
from transmat.core.errors import CheckpointError, ConfigError
from transmat.core.logger import log
from transmat.core.version import is_newer, read_local_version

MAGIC = b"TRANSMAT-CKPT"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    config: NetworkConfig
    iteration: int
    state: Dict[str, torch.Tensor]
    config_hash: str
    package_version: str = ""


def _float_state(model_or_state) -> Dict[str, torch.Tensor]:
    state = model_or_state.state_dict() if isinstance(model_or_state, nn.Module) else model_or_state
    return {name: t for name, t in state.items() if t.is_floating_point()}


def save_checkpoint(path: Path, model: nn.Module, cfg: NetworkConfig, iteration: int = 0) -> Path:
    path = Path(path)
    state = _float_state(model)
    tensors: List[Dict[str, Any]] = []
    chunks: List[bytes] = []
    offset = 0
    for name in sorted(state):
        array = state[name].detach().cpu().to(torch.float32).numpy().astype(_DTYPE, copy=False)
        raw = np.ascontiguousarray(array).tobytes()
        tensors.append({"name": name, "shape": list(array.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)

    header = {
        "config": section_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "format": FORMAT_VERSION,
        "iteration": int(iteration),
        "payload_bytes": offset,
        "tensors": tensors,
        "version": read_local_version(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC + b"\n")
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n")
        for chunk in chunks:
            f.write(chunk)
    log(f"Checkpoint written: {path} (iteration {iteration})", verbose_only=True)
    return path


def read_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"Checkpoint not found: {path}")

    first = data.find(b"\n")
    second = data.find(b"\n", first + 1)
    if first < 0 or second < 0 or data[:first] != MAGIC:
        raise CheckpointError(f"{path}: not a transmat checkpoint")
    try:
        header = json.loads(data[first + 1:second].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})")
    if header.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {header.get('format')}")

    payload = data[second + 1:]
    if len(payload) != header.get("payload_bytes"):
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_bytes')}")

    state: Dict[str, torch.Tensor] = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        array = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=entry["offset"])
        state[entry["name"]] = torch.from_numpy(array.astype(np.float32).reshape(entry["shape"]))

    try:
        config = network_config_from_dict(header["config"])
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable model config ({exc})")
    return Checkpoint(
        config=config,
        iteration=int(header["iteration"]),
        state=state,
        config_hash=header["config_hash"],
        package_version=header.get("version", ""),
    )


def check_compatible(checkpoint: Checkpoint, cfg: Optional[NetworkConfig], force: bool = False, source: str = "checkpoint"):
    if is_newer(checkpoint.package_version, read_local_version()):
        log(f"{source} was written by transmat {checkpoint.package_version}, newer than {read_local_version()}", style="yellow")
    if cfg is None:
        return
    expected = config_hash(cfg)
    if checkpoint.config_hash != expected:
        message = (
            f"{source} was trained with a different model config "
            f"(hash {checkpoint.config_hash[:12]} vs {expected[:12]})"
        )
        if not force:
            raise CheckpointError(message + "; pass --force to load anyway")
        log(message + "; loading anyway (--force)", style="yellow")


def load_into(model: nn.Module, checkpoint: Checkpoint):
    """Copy checkpoint tensors into the model; every float tensor must be present."""
    target = _float_state(model)
    missing = sorted(set(target) - set(checkpoint.state))
    unexpected = sorted(set(checkpoint.state) - set(target))
    if missing or unexpected:
        raise CheckpointError(
            f"Checkpoint does not match the model: missing {missing[:5]}, unexpected {unexpected[:5]}"
        )
    with torch.no_grad():
        for name, tensor in target.items():
            source = checkpoint.state[name]
            if tuple(source.shape) != tuple(tensor.shape):
                raise CheckpointError(f"Shape mismatch for {name}: {tuple(source.shape)} vs {tuple(tensor.shape)}")
            tensor.copy_(source.to(tensor.dtype))
