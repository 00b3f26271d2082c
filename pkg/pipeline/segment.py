"""
Inference driver.

Frame 0 carries the ground-truth masks. For every later frame the
memory policy picks past frames, each object runs one transformer and
decoder pass over the shared query features, the per-object maps are
merged, and the binarised result is written back into every object's bank.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from backbone.extractor import FeatureCache, FrameFeatures, encode_mask
from backbone.memory_bank import MemoryBank, assemble_memory
from constants import BACKBONE_STRIDE, MERGE_ARGMAX, MERGE_SOFT_AGGREGATION, SOFT_AGGREGATION_EPS
from interactive_transformer.debug_dump import dump_attention_maps
from memory_manager.policy import MemoryPolicy, policy_label, select
from pipeline.model import SitvosModel, foreground, segment_object
from tensor_core.tensor import Tensor, suspended_tape
from utils.errors import ContractError, DimensionError
from utils.misc import ensure_divisible, spatial_dims


@dataclass
class VideoTask:
    frames: List[Tensor]
    first_masks: Dict[int, Tensor]

    def __post_init__(self):
        if not self.frames:
            raise ContractError("VideoTask: no frames")
        shape = self.frames[0].shape
        if len(shape) != 3 or shape[0] != 3:
            raise DimensionError(f"VideoTask: frames must be 3×h×w, got {shape}")
        for index, frame in enumerate(self.frames):
            if frame.shape != shape:
                raise DimensionError(f"VideoTask: frame {index} is {frame.shape}, frame 0 is {shape}")
        h, w = spatial_dims(shape)
        ensure_divisible(h, w, BACKBONE_STRIDE)
        if not self.first_masks:
            raise ContractError("VideoTask: no objects annotated in frame 0")
        coverage = np.zeros((h, w))
        for object_id, mask in self.first_masks.items():
            if not 1 <= object_id <= 255:
                raise ContractError(f"VideoTask: {object_id=} must lie in [1, 255]")
            if mask.shape != (1, h, w):
                raise DimensionError(f"VideoTask: mask of object {object_id} is {mask.shape}, expected {(1, h, w)}")
            if not np.all((mask.data == 0) | (mask.data == 1)):
                raise ContractError(f"VideoTask: mask of object {object_id} is not binary")
            coverage += mask.data[0]
        if coverage.max() > 1:
            raise ContractError("VideoTask: first-frame masks overlap")

    @property
    def object_ids(self) -> List[int]:
        return sorted(self.first_masks)

    @property
    def frame_size(self):
        return spatial_dims(self.frames[0].shape)


@dataclass
class SegmentationResult:
    label_maps: List[np.ndarray]
    object_ids: List[int]
    backbone_calls: int
    memory_sizes: List[int] = field(default_factory=list)
    memory_indices: List[List[int]] = field(default_factory=list)
    per_object_probs: Optional[List[Dict[int, np.ndarray]]] = None
    wall_time_s: float = 0.0

    @property
    def fps(self) -> float:
        return len(self.label_maps) / self.wall_time_s if self.wall_time_s > 0 else 0.0

    def to_manifest(self, policy: MemoryPolicy) -> dict:
        return {
            "policy": policy_label(policy),
            "frames": len(self.label_maps),
            "object_ids": self.object_ids,
            "backbone_calls": self.backbone_calls,
            "memory_sizes": self.memory_sizes,
            "memory_indices": {str(t + 1): indices for t, indices in enumerate(self.memory_indices)},
            "wall_time_s": self.wall_time_s,
            "fps": self.fps,
        }


def merge(probs: Dict[int, Tensor], mode: str = MERGE_SOFT_AGGREGATION, eps: float = SOFT_AGGREGATION_EPS) -> np.ndarray:
    """
    Per-object foreground maps (1×h×w) to an h×w label map.

    soft_aggregation: object odds p/(1-p) against background odds.
    Object probabilities are clamped to [eps, 1-eps]. The background is the
    product of complements of the unclamped probabilities, clamped afterwards.
    argmax: most probable object where it reaches 0.5, else background.
    """
    if not probs:
        raise ContractError("merge: no probability maps")
    object_ids = sorted(probs)
    shapes = {probs[object_id].shape for object_id in object_ids}
    if len(shapes) != 1:
        raise DimensionError(f"merge: maps differ in shape, {sorted(shapes)}")
    stacked = np.stack([probs[object_id].data.reshape(probs[object_id].shape[-2:]) for object_id in object_ids])
    if stacked.min() < 0 or stacked.max() > 1:
        raise ContractError("merge: probabilities must lie in [0, 1]")
    stacked = stacked.astype(np.float64)
    if mode == MERGE_SOFT_AGGREGATION:
        clamped = np.clip(stacked, eps, 1.0 - eps)
        background = np.clip(np.prod(1.0 - stacked, axis=0), eps, 1.0 - eps)
        odds = np.concatenate([(background / (1.0 - background))[None], clamped / (1.0 - clamped)])
        winner = np.argmax(odds / np.sum(odds, axis=0, keepdims=True), axis=0)
    elif mode == MERGE_ARGMAX:
        best = np.argmax(stacked, axis=0)
        winner = np.where(np.max(stacked, axis=0) >= 0.5, best + 1, 0)
    else:
        raise ContractError(f"merge: unknown {mode=}")
    lookup = np.array([0] + object_ids, dtype=np.int64)
    return lookup[winner]


def segment_frame(
    model: SitvosModel,
    query: FrameFeatures,
    t: int,
    banks: Dict[int, MemoryBank],
    policy: MemoryPolicy,
    threads: int = 1,
    attention: Optional[Dict[int, Dict[str, np.ndarray]]] = None,
) -> Dict[int, Tensor]:
    """
    Foreground probability (1×h×w) of every object at frame t.
    query holds frame t's features, extracted once and shared by all objects.
    """
    selected = select(t, policy)
    if not selected:
        raise ContractError(f"segment_frame: empty memory selection at {t=}")
    collect = attention is not None

    def run_object(object_id: int):
        m_ori, m_e = assemble_memory(banks[object_id], selected)
        probs, state = segment_object(model, query, m_ori, m_e, collect_attention=collect)
        return object_id, foreground(probs), state.attention

    object_ids = sorted(banks)
    if threads > 1 and len(object_ids) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            outputs = list(executor.map(run_object, object_ids))
    else:
        outputs = [run_object(object_id) for object_id in object_ids]

    result = {}
    for object_id, probability, maps in outputs:
        result[object_id] = probability
        if collect:
            attention[object_id] = maps
    return result


def _binary_mask(labels: np.ndarray, object_id: int, dtype: str) -> Tensor:
    return Tensor((labels == object_id)[None].astype(np.float64), dtype=dtype)


def run_video(
    model: SitvosModel,
    task: VideoTask,
    policy: MemoryPolicy,
    threads: int = 1,
    merge_mode: str = MERGE_SOFT_AGGREGATION,
    keep_probs: bool = False,
    attention_dir: Optional[str] = None,
) -> SegmentationResult:
    started = time.perf_counter()
    dtype = model.config.dtype
    frames = [Tensor(frame.data, dtype=dtype) for frame in task.frames]
    cache = FeatureCache(model.backbone)
    object_ids = task.object_ids
    banks = {object_id: MemoryBank() for object_id in object_ids}
    h, w = task.frame_size

    with suspended_tape():
        features = cache.get_features(0, frames[0])
        first = {object_id: Tensor(task.first_masks[object_id].data, dtype=dtype) for object_id in object_ids}
        for object_id in object_ids:
            banks[object_id].append(0, features, encode_mask(first[object_id], model.mask_encoder))
        labels = np.zeros((h, w), dtype=np.int64)
        for object_id in object_ids:
            labels[first[object_id].data[0] > 0.5] = object_id

        result = SegmentationResult(
            label_maps=[labels],
            object_ids=object_ids,
            backbone_calls=0,
            per_object_probs=[] if keep_probs else None,
        )
        for t in range(1, len(frames)):
            features = cache.get_features(t, frames[t])
            attention = dict() if attention_dir else None
            probs = segment_frame(model, features, t, banks, policy, threads=threads, attention=attention)
            labels = merge(probs, mode=merge_mode)
            for object_id in object_ids:
                mask = _binary_mask(labels, object_id, dtype)
                banks[object_id].append(t, features, encode_mask(mask, model.mask_encoder))
            selected = select(t, policy)
            result.memory_indices.append(selected)
            result.memory_sizes.append(len(selected))
            result.label_maps.append(labels)
            if keep_probs:
                result.per_object_probs.append({object_id: p.numpy()[0] for object_id, p in probs.items()})
            if attention:
                for object_id, maps in attention.items():
                    dump_attention_maps(maps, attention_dir, t, object_id)
            logging.debug(  # pylint: disable=W1203
                f"run_video: {t=}, {selected=}, objects={object_ids}, extract_calls={cache.extract_calls}"
            )

    result.backbone_calls = cache.extract_calls
    result.wall_time_s = time.perf_counter() - started
    return result


def task_from_label_map(frames: List[Tensor], first_labels: np.ndarray) -> VideoTask:
    object_ids = [int(v) for v in np.unique(first_labels) if v != 0]
    masks = {
        object_id: Tensor((first_labels == object_id)[None].astype(np.float64), dtype=frames[0].dtype)
        for object_id in object_ids
    }
    return VideoTask(frames=frames, first_masks=masks)
