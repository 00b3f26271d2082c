"""
SITT tensor container:
little-endian header (magic "SITT", dtype code u8, rank u8, extents u64 each)
followed by the raw row-major payload.

A checkpoint is one binary file of concatenated containers
plus a JSON manifest mapping hierarchical names to byte offsets.
"""
import json
import logging
import os
import struct
from typing import BinaryIO, Dict, Mapping, Optional, Tuple

import numpy as np

from constants import (
    CHECKPOINT_FORMAT,
    CHECKPOINT_MANIFEST_SUFFIX,
    DTYPE_CODES,
    SITT_MAGIC,
)
from tensor_core.tensor import Tensor
from utils.errors import FormatError

CODE_TO_DTYPE = {code: name for name, code in DTYPE_CODES.items()}
LITTLE_ENDIAN = {"float32": "<f4", "float64": "<f8"}


def tensor_to_bytes(tensor: Tensor) -> bytes:
    header = SITT_MAGIC + struct.pack("<BB", DTYPE_CODES[tensor.dtype], tensor.ndim)
    header += struct.pack(f"<{tensor.ndim}Q", *tensor.shape)
    return header + tensor.data.astype(LITTLE_ENDIAN[tensor.dtype]).tobytes(order="C")


def read_tensor(stream: BinaryIO, source: str = "<stream>") -> Tensor:
    magic = stream.read(4)
    if magic != SITT_MAGIC:
        raise FormatError(f"read_tensor: bad magic {magic!r} in {source}")
    head = stream.read(2)
    if len(head) != 2:
        raise FormatError(f"read_tensor: truncated header in {source}")
    dtype_code, rank = struct.unpack("<BB", head)
    if dtype_code not in CODE_TO_DTYPE:
        raise FormatError(f"read_tensor: unknown {dtype_code=} in {source}")
    dtype = CODE_TO_DTYPE[dtype_code]
    extents_raw = stream.read(8 * rank)
    if len(extents_raw) != 8 * rank:
        raise FormatError(f"read_tensor: truncated extents in {source}")
    shape = struct.unpack(f"<{rank}Q", extents_raw) if rank else ()
    count = int(np.prod(shape)) if rank else 1
    item_size = np.dtype(LITTLE_ENDIAN[dtype]).itemsize
    payload = stream.read(count * item_size)
    if len(payload) != count * item_size:
        raise FormatError(f"read_tensor: truncated payload in {source}")
    data = np.frombuffer(payload, dtype=LITTLE_ENDIAN[dtype]).reshape(shape)
    return Tensor(data, dtype=dtype)


def write_tensor_file(tensor: Tensor, path: str) -> None:
    with open(path, "wb") as stream:
        stream.write(tensor_to_bytes(tensor))


def read_tensor_file(path: str) -> Tensor:
    with open(path, "rb") as stream:
        return read_tensor(stream, source=path)


def manifest_path(checkpoint_path: str) -> str:
    return checkpoint_path + CHECKPOINT_MANIFEST_SUFFIX


def save_tensors(tensors: Mapping[str, Tensor], path: str, meta: Optional[dict] = None) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    offsets: Dict[str, int] = {}
    with open(path, "wb") as stream:
        for name in sorted(tensors):
            offsets[name] = stream.tell()
            stream.write(tensor_to_bytes(tensors[name]))
    manifest = {"format": CHECKPOINT_FORMAT, "entries": offsets, "meta": meta or {}}
    with open(manifest_path(path), "w", encoding="utf-8") as stream:
        json.dump(manifest, stream, indent=2, sort_keys=True)
    logging.debug(f"save_tensors: wrote {len(offsets)} tensors to {path}")  # pylint: disable=W1203


def load_tensors(path: str) -> Tuple[Dict[str, Tensor], dict]:
    m_path = manifest_path(path)
    if not os.path.exists(path) or not os.path.exists(m_path):
        raise FormatError(f"load_tensors: missing checkpoint {path} or manifest {m_path}")
    with open(m_path, "r", encoding="utf-8") as stream:
        try:
            manifest = json.load(stream)
        except json.JSONDecodeError as exc:
            raise FormatError(f"load_tensors: manifest {m_path} is not valid JSON: {exc}") from exc
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"load_tensors: {m_path} has format {manifest.get('format')!r}")
    tensors: Dict[str, Tensor] = {}
    with open(path, "rb") as stream:
        for name, offset in manifest["entries"].items():
            stream.seek(offset)
            tensors[name] = read_tensor(stream, source=f"{path}:{name}")
    return tensors, manifest.get("meta", {})
