"""Readers and writers for the on-disk dataset layout"""
import hashlib
import json
import logging
import os

import numpy as np

from jrm_lab.jrm_lab_exception import StorageError

logger = logging.getLogger(__name__)

_ROW_DTYPE = np.dtype("<f4")
_COUNT_DTYPE = np.dtype("<u4")


def replace_atomically(path: str, payload: bytes):
    """Writes to a sibling temp file then renames over the target"""
    tmp_path = path + ".tmp"
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(tmp_path, "wb") as file:
            file.write(payload)
        os.replace(tmp_path, path)
    except OSError as ex:
        raise StorageError("Cannot write " + path) from ex


def write_meta(path: str, meta: dict):
    """key = json-value lines, keys in insertion order"""
    lines = [key + " = " + json.dumps(value, sort_keys=True) for key, value in meta.items()]
    replace_atomically(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_meta(path: str) -> dict:
    """Inverse of write_meta"""
    try:
        with open(path, "r", encoding="utf-8") as file:
            lines = file.read().splitlines()
    except OSError as ex:
        raise StorageError("Cannot read " + path) from ex
    meta = {}
    for line in lines:
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise StorageError("Malformed meta line in " + path)
        try:
            meta[key] = json.loads(value)
        except json.JSONDecodeError as ex:
            raise StorageError("Malformed meta value for " + key + " in " + path) from ex
    return meta


def encode_point_rows(points: np.ndarray, normals: np.ndarray) -> bytes:
    """u32 row count followed by rows of six little-endian f32 (xyz, normal)"""
    points = np.asarray(points).reshape(-1, 3)
    normals = np.asarray(normals).reshape(-1, 3)
    rows = np.concatenate([points, normals], axis=1).astype(_ROW_DTYPE)
    return np.array([len(rows)], dtype=_COUNT_DTYPE).tobytes() + rows.tobytes()


def write_point_rows(path: str, points: np.ndarray, normals: np.ndarray):
    """Writes a length-prefixed point+normal binary"""
    replace_atomically(path, encode_point_rows(points, normals))


def read_point_rows(path: str):
    """returns (points, normals) as float64 arrays"""
    try:
        with open(path, "rb") as file:
            payload = file.read()
    except OSError as ex:
        raise StorageError("Cannot read " + path) from ex
    if len(payload) < 4:
        raise StorageError("Truncated point file " + path)
    count = int(np.frombuffer(payload[:4], dtype=_COUNT_DTYPE)[0])
    if len(payload) != 4 + count * 6 * 4:
        raise StorageError("Point file length does not match its header: " + path)
    rows = np.frombuffer(payload[4:], dtype=_ROW_DTYPE).reshape(count, 6).astype(np.float64)
    return rows[:, :3], rows[:, 3:]


def file_signature(path: str) -> str:
    """sha256 hex digest of a file"""
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as file:
            for block in iter(lambda: file.read(1 << 20), b""):
                digest.update(block)
    except OSError as ex:
        raise StorageError("Cannot read " + path) from ex
    return digest.hexdigest()


def write_manifest(root: str, name: str = "manifest.txt") -> str:
    """Lists '<sha256>  <relative path>' for every file under root, sorted by path"""
    entries = []
    for directory, _, files in os.walk(root):
        for file_name in files:
            full_path = os.path.join(directory, file_name)
            relative = os.path.relpath(full_path, root).replace(os.sep, "/")
            if relative == name or relative.endswith(".tmp"):
                continue
            entries.append((relative, file_signature(full_path)))
    entries.sort()
    manifest_path = os.path.join(root, name)
    replace_atomically(manifest_path,
                        "".join(sig + "  " + rel + "\n" for rel, sig in entries).encode("utf-8"))
    logger.info("Manifest with %d entries written to %s", len(entries), manifest_path)
    return manifest_path
