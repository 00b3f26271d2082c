import logging
import os
from dataclasses import asdict
from typing import List, Optional, Tuple

from constants import DATASET_MANIFEST_FILE, FRAMES_DIR, MASKS_DIR
from data_synth.config import SynthConfig
from data_synth.sprites import Clip
from pipeline.video_io import (
    frame_file_name,
    label_map_to_masks,
    read_json,
    read_sequence,
    write_frame,
    write_json,
    write_label_map,
)
from utils.errors import FormatError

DATASET_FORMAT = "sitvos-synth-v1"


def clip_name(index: int) -> str:
    return f"clip_{index:04d}"


def write_clip(clip: Clip, directory: str) -> None:
    frames_dir = os.path.join(directory, FRAMES_DIR)
    masks_dir = os.path.join(directory, MASKS_DIR)
    os.makedirs(frames_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)
    for index, frame in enumerate(clip.frames):
        write_frame(frame.data, os.path.join(frames_dir, frame_file_name(index)))
        write_label_map(clip.label_map(index), os.path.join(masks_dir, frame_file_name(index)))


def write_dataset(root: str, clips: List[Clip], config: Optional[SynthConfig] = None, meta: Optional[dict] = None) -> str:
    os.makedirs(root, exist_ok=True)
    entries = []
    for index, clip in enumerate(clips):
        name = clip_name(index)
        write_clip(clip, os.path.join(root, name))
        h, w = clip.frame_size
        entries.append(
            {"name": name, "seed": clip.seed, "object_ids": clip.object_ids, "length": len(clip), "height": h, "width": w}
        )
    manifest = {
        "format": DATASET_FORMAT,
        "clips": entries,
        "config": asdict(config) if config is not None else {},
        "meta": meta or {},
    }
    path = os.path.join(root, DATASET_MANIFEST_FILE)
    write_json(manifest, path)
    logging.debug(f"write_dataset: {len(clips)} clips to {root}")  # pylint: disable=W1203
    return path


def load_dataset(root: str, dtype: str = "float32") -> List[Tuple[str, Clip]]:
    manifest = read_json(os.path.join(root, DATASET_MANIFEST_FILE))
    if manifest.get("format") != DATASET_FORMAT:
        raise FormatError(f"load_dataset: {root} has format {manifest.get('format')!r}")
    clips = []
    for entry in manifest["clips"]:
        frames, label_maps = read_sequence(os.path.join(root, entry["name"]), dtype=dtype)
        masks = [label_map_to_masks(label_maps[index]) if index in label_maps else {} for index in range(len(frames))]
        masks = [{k: v.astype("uint8") for k, v in frame_masks.items()} for frame_masks in masks]
        clips.append((entry["name"], Clip(frames=frames, masks=masks, seed=entry["seed"], object_ids=entry["object_ids"])))
    return clips
