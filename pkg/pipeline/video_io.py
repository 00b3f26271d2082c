"""
On-disk sequence layout:

    <sequence>/frames/00000.png ...   8-bit RGB
    <sequence>/masks/00000.png ...    8-bit indexed, pixel value = object id, 0 = background

Prediction directories use the masks layout.
"""
import json
import logging
import os
from typing import Dict, List

import numpy as np
from PIL import Image, UnidentifiedImageError

from constants import FRAMES_DIR, MASKS_DIR, PNG_NAME_DIGITS
from tensor_core.tensor import Tensor
from utils.errors import FormatError


def _build_palette() -> List[int]:
    # bit-interleaved colour map, object 1 red, 2 green, 3 yellow...
    palette = []
    for label in range(256):
        r = g = b = 0
        code = label
        for shift in range(7, -1, -1):
            r |= ((code >> 0) & 1) << shift
            g |= ((code >> 1) & 1) << shift
            b |= ((code >> 2) & 1) << shift
            code >>= 3
        palette.extend([r, g, b])
    return palette


LABEL_PALETTE = _build_palette()


def frame_file_name(index: int) -> str:
    return f"{index:0{PNG_NAME_DIGITS}d}.png"


def list_png_files(directory: str) -> List[str]:
    """
    Numerically named PNG files of a directory, in numeric order.
    """
    if not os.path.isdir(directory):
        raise FormatError(f"list_png_files: {directory} is not a directory")
    names = [name for name in os.listdir(directory) if name.lower().endswith(".png")]
    for name in names:
        if not os.path.splitext(name)[0].isdigit():
            raise FormatError(f"list_png_files: {os.path.join(directory, name)} is not numerically named")
    names.sort(key=lambda name: int(os.path.splitext(name)[0]))
    return [os.path.join(directory, name) for name in names]


def _open_png(path: str) -> Image.Image:
    try:
        image = Image.open(path)
        image.load()
    except (OSError, UnidentifiedImageError) as exc:
        raise FormatError(f"_open_png: cannot read {path}: {exc}") from exc
    return image


def read_frame(path: str, dtype: str = "float32") -> Tensor:
    """
    RGB PNG to a 3×h×w Tensor with values in [0, 1].
    """
    image = _open_png(path)
    if image.mode not in ("RGB", "RGBA", "L", "P"):
        raise FormatError(f"read_frame: {path} has unsupported mode {image.mode}")
    data = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    return Tensor(np.transpose(data, (2, 0, 1)), dtype=dtype)


def read_frames(directory: str, dtype: str = "float32") -> List[Tensor]:
    files = list_png_files(directory)
    if not files:
        raise FormatError(f"read_frames: no PNG frames in {directory}")
    frames = [read_frame(path, dtype=dtype) for path in files]
    if len({frame.shape for frame in frames}) != 1:
        raise FormatError(f"read_frames: frames in {directory} differ in size")
    return frames


def read_label_map(path: str) -> np.ndarray:
    """
    Indexed (mode P) or single-channel (mode L) PNG to an h×w array of object ids.
    """
    image = _open_png(path)
    if image.mode not in ("P", "L"):
        raise FormatError(f"read_label_map: {path} must be an 8-bit single-channel indexed PNG, got mode {image.mode}")
    return np.asarray(image, dtype=np.uint8).copy()


def write_label_map(labels: np.ndarray, path: str) -> None:
    if labels.ndim != 2:
        raise FormatError(f"write_label_map: labels for {path} must be h×w, got {labels.shape}")
    if labels.min() < 0 or labels.max() > 255:
        raise FormatError(f"write_label_map: labels for {path} do not fit in 8 bits")
    image = Image.fromarray(labels.astype(np.uint8))
    # an L image becomes mode P once it carries a palette
    image.putpalette(LABEL_PALETTE)
    image.save(path)


def write_frame(frame: np.ndarray, path: str) -> None:
    """
    3×h×w float frame in [0, 1] to an RGB PNG.
    """
    pixels = np.clip(np.rint(np.transpose(frame, (1, 2, 0)) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path)


def label_map_to_masks(labels: np.ndarray) -> Dict[int, np.ndarray]:
    return {int(object_id): (labels == object_id).astype(np.float64) for object_id in np.unique(labels) if object_id != 0}


def read_sequence(directory: str, dtype: str = "float32"):
    """
    Frames of a sequence plus every ground-truth label map present under masks/.
    Returns (frames, label_maps) where label_maps maps frame index to an h×w array.
    """
    frames = read_frames(os.path.join(directory, FRAMES_DIR), dtype=dtype)
    mask_dir = os.path.join(directory, MASKS_DIR)
    label_maps = {int(os.path.splitext(os.path.basename(path))[0]): read_label_map(path) for path in list_png_files(mask_dir)}
    if 0 not in label_maps:
        raise FormatError(f"read_sequence: {mask_dir} has no annotation for frame 0")
    h, w = frames[0].shape[1:]
    for index, labels in label_maps.items():
        if labels.shape != (h, w):
            raise FormatError(
                f"read_sequence: {os.path.join(mask_dir, frame_file_name(index))} is {labels.shape}, frames are {(h, w)}"
            )
    return frames, label_maps


def is_sequence_dir(directory: str) -> bool:
    return os.path.isdir(os.path.join(directory, FRAMES_DIR)) and os.path.isdir(os.path.join(directory, MASKS_DIR))


def list_sequences(root: str) -> List[str]:
    """
    root itself when it is a sequence directory, else its sequence subdirectories in name order.
    """
    if is_sequence_dir(root):
        return [root]
    if not os.path.isdir(root):
        raise FormatError(f"list_sequences: {root} is not a directory")
    sequences = [os.path.join(root, name) for name in sorted(os.listdir(root)) if is_sequence_dir(os.path.join(root, name))]
    if not sequences:
        raise FormatError(f"list_sequences: no sequence directories under {root}")
    return sequences


def write_label_maps(label_maps: List[np.ndarray], directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for index, labels in enumerate(label_maps):
        write_label_map(labels, os.path.join(directory, frame_file_name(index)))
    logging.debug(f"write_label_maps: {len(label_maps)} maps to {directory}")  # pylint: disable=W1203


def write_json(payload: dict, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(payload, stream, indent=2, sort_keys=True)


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as stream:
            return json.load(stream)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"read_json: cannot read {path}: {exc}") from exc
