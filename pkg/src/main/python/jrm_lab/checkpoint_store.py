"""Versioned binary checkpoints: header, key = value meta, f32 parameters and Adam moments"""
import json
import os
import re
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

import numpy as np
import torch

from jrm_lab.dataset_store import replace_atomically
from jrm_lab.jrm_lab_exception import StorageError

MAGIC = b"JRMCKPT\x00"
VERSION = 1
_NAME = re.compile(r"^checkpoint_(\d{8})\.ckpt$")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Decoded checkpoint file"""
    meta: dict
    params: np.ndarray
    moments: np.ndarray

    @property
    def step(self) -> int:
        """completed training steps"""
        return int(self.meta["step"])


def _encode_meta(meta: dict) -> bytes:
    return "".join(key + " = " + json.dumps(value, sort_keys=True) + "\n" for key, value in meta.items()).encode()


def _decode_meta(payload: bytes) -> dict:
    meta = {}
    for line in payload.decode("utf-8").splitlines():
        key, _, value = line.partition(" = ")
        meta[key] = json.loads(value)
    return meta


def _flat(tensors) -> np.ndarray:
    if not tensors:
        return np.zeros(0, dtype="<f4")
    return np.concatenate([t.detach().cpu().reshape(-1).numpy().astype("<f4") for t in tensors])


def checkpoint_path(directory: str, step: int) -> str:
    """file name of the checkpoint after step"""
    return os.path.join(directory, "checkpoint_%08d.ckpt" % step)


def save_checkpoint(path: str, model, optimizer, step: int, meta: dict):
    """Writes the model, the Adam moments and the meta record atomically"""
    params = list(model.parameters())
    state = optimizer.state if optimizer is not None else {}
    moments = []
    optimizer_step = 0
    for param in params:
        entry = state.get(param, {})
        if "step" in entry:
            optimizer_step = int(float(entry["step"]))
        moments.append(entry.get("exp_avg", torch.zeros_like(param)))
        moments.append(entry.get("exp_avg_sq", torch.zeros_like(param)))
    record = dict(meta)
    record.update({"step": int(step),
                   "optimizer_step": optimizer_step,
                   "model_config": model.config.to_json(),
                   "param_layout": model.parameter_layout(),
                   "created_utc": datetime.now(timezone.utc).isoformat()})
    meta_bytes = _encode_meta(record)
    param_blob = _flat(params)
    moment_blob = _flat(moments) if optimizer_step else np.zeros(0, dtype="<f4")
    payload = b"".join([MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes,
                        struct.pack("<Q", len(param_blob)), param_blob.tobytes(),
                        struct.pack("<Q", len(moment_blob)), moment_blob.tobytes()])
    replace_atomically(path, payload)


def read_checkpoint(path: str) -> Checkpoint:
    """Decodes a checkpoint file"""
    try:
        with open(path, "rb") as file:
            payload = file.read()
    except OSError as ex:
        raise StorageError("Cannot read checkpoint " + path) from ex
    if payload[:8] != MAGIC:
        raise StorageError("Not a checkpoint file: " + path)
    try:
        version, meta_length = struct.unpack_from("<II", payload, 8)
        if version != VERSION:
            raise StorageError("Unsupported checkpoint version %d" % version)
        offset = 16
        meta = _decode_meta(payload[offset:offset + meta_length])
        offset += meta_length
        blobs = []
        for _ in range(2):
            (count,) = struct.unpack_from("<Q", payload, offset)
            offset += 8
            blobs.append(np.frombuffer(payload, dtype="<f4", count=count, offset=offset).copy())
            offset += 4 * count
    except (struct.error, ValueError, UnicodeDecodeError) as ex:
        raise StorageError("Corrupt checkpoint " + path) from ex
    if offset != len(payload):
        raise StorageError("Trailing bytes in checkpoint " + path)
    return Checkpoint(meta, blobs[0], blobs[1])


def load_into(checkpoint: Checkpoint, model, optimizer=None):
    """Restores parameters and, when present, the Adam state"""
    params = list(model.parameters())
    if [list(p.shape) for p in params] != [shape for _, shape in checkpoint.meta["param_layout"]]:
        raise StorageError("Checkpoint parameter layout does not match the model")
    offset = 0
    with torch.no_grad():
        for param in params:
            size = param.numel()
            values = checkpoint.params[offset:offset + size].reshape(param.shape)
            param.copy_(torch.as_tensor(values, dtype=param.dtype))
            offset += size
    if optimizer is None or not checkpoint.meta.get("optimizer_step"):
        return
    state = optimizer.state_dict()
    offset = 0
    restored = {}
    for index, param in enumerate(params):
        size = param.numel()
        exp_avg = checkpoint.moments[offset:offset + size].reshape(param.shape)
        exp_avg_sq = checkpoint.moments[offset + size:offset + 2 * size].reshape(param.shape)
        offset += 2 * size
        restored[index] = {"step": torch.tensor(float(checkpoint.meta["optimizer_step"])),
                           "exp_avg": torch.as_tensor(exp_avg, dtype=param.dtype),
                           "exp_avg_sq": torch.as_tensor(exp_avg_sq, dtype=param.dtype)}
    state["state"] = restored
    optimizer.load_state_dict(state)


def latest_checkpoint(directory: str) -> Optional[str]:
    """path of the highest-step checkpoint in a directory, or None"""
    if not os.path.isdir(directory):
        return None
    steps = sorted(int(match.group(1)) for match in map(_NAME.match, os.listdir(directory)) if match)
    return checkpoint_path(directory, steps[-1]) if steps else None
