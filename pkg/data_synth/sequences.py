"""
Clip generators.

make_pretrain_clip: three frames; every frame after the first applies an
independently sampled transform to each sprite and to the background.
make_sequence: long clips whose transforms follow a per-component random walk
starting from identity, so distant frames differ more than near ones.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from data_synth.config import SynthConfig
from data_synth.sprites import Background, Clip, FrameTransforms, Sprite, render_clip, render_frame
from data_synth.transforms import IDENTITY, AffineTransform, TransformRanges, make_rng, sample_transform
from utils.errors import ContractError


def sample_sprite(rng: np.random.Generator, config: SynthConfig, h: int, w: int) -> Sprite:
    kind = config.kinds[int(rng.integers(0, len(config.kinds)))]
    size = float(rng.uniform(config.sprite_size_min, config.sprite_size_max))
    color = tuple(float(c) for c in rng.uniform(0.0, 1.0, size=3))
    margin = min(size / 2.0, h / 2.0 - 1, w / 2.0 - 1)
    center = (float(rng.uniform(margin, w - margin)), float(rng.uniform(margin, h - margin)))
    return Sprite(kind=kind, color=color, size=size, texture_seed=int(rng.integers(0, 2**31)), center=center)


def _place_sprites(rng: np.random.Generator, config: SynthConfig, h: int, w: int, num_objects: int):
    """
    Sprites and a background seed such that every object keeps at least
    min_visible_pixels in the untransformed first frame.
    """
    for _ in range(config.max_attempts):
        sprites = [sample_sprite(rng, config, h, w) for _ in range(num_objects)]
        background_seed = int(rng.integers(0, 2**31))
        identity = FrameTransforms(IDENTITY, [IDENTITY] * num_objects)
        _, owner = render_frame(Background(background_seed), sprites, identity, h, w)
        counts = [int(np.sum(owner == position + 1)) for position in range(num_objects)]
        if min(counts) >= config.min_visible_pixels:
            return sprites, background_seed
    raise ContractError(
        f"_place_sprites: no layout with {num_objects} visible objects after {config.max_attempts} attempts"
    )


def make_pretrain_clip(
    rng: np.random.Generator,
    num_objects: int,
    h: int,
    w: int,
    config: Optional[SynthConfig] = None,
    dtype: str = "float32",
    seed: Optional[int] = None,
) -> Clip:
    config = config or SynthConfig(height=h, width=w)
    ranges = TransformRanges.from_config(config, h, w)
    sprites, background_seed = _place_sprites(rng, config, h, w, num_objects)
    transforms = [FrameTransforms(IDENTITY, [IDENTITY] * num_objects)]
    for _ in range(2):
        sprite_transforms = [sample_transform(rng, ranges) for _ in range(num_objects)]
        transforms.append(FrameTransforms(sample_transform(rng, ranges), sprite_transforms))
    return render_clip(background_seed, sprites, transforms, h, w, dtype=dtype, seed=seed)


def _walk(
    rng: np.random.Generator, start: AffineTransform, steps: np.ndarray, ranges: TransformRanges, length: int
) -> List[AffineTransform]:
    trajectory = [start]
    for _ in range(length - 1):
        trajectory.append(ranges.clip(trajectory[-1].step(rng.normal(0.0, 1.0, size=5) * steps)))
    return trajectory


def make_sequence(
    rng: np.random.Generator,
    length: int,
    num_objects: int,
    h: int,
    w: int,
    config: Optional[SynthConfig] = None,
    dtype: str = "float32",
    seed: Optional[int] = None,
) -> Clip:
    if length < 3:
        raise ContractError(f"make_sequence: {length=} must be >= 3")
    config = config or SynthConfig(height=h, width=w)
    ranges = TransformRanges.from_config(config, h, w)
    sprites, background_seed = _place_sprites(rng, config, h, w, num_objects)
    sprite_steps = np.array(
        [config.rotation_step, config.scale_step, config.shear_step, config.translate_step, config.translate_step]
    )
    background_steps = np.array([0.0, 0.0, 0.0, config.background_step, config.background_step])
    sprite_paths = [_walk(rng, IDENTITY, sprite_steps, ranges, length) for _ in range(num_objects)]
    background_path = _walk(rng, IDENTITY, background_steps, ranges, length)
    transforms = [
        FrameTransforms(background_path[t], [path[t] for path in sprite_paths]) for t in range(length)
    ]
    clip = render_clip(background_seed, sprites, transforms, h, w, dtype=dtype, seed=seed)
    logging.debug(  # pylint: disable=W1203
        f"make_sequence: {length=}, {num_objects=}, visible per frame={[len(m) for m in clip.masks]}"
    )
    return clip


def sample_triple_indices(
    rng: np.random.Generator, length: int, interval_max: int, interval: Optional[int] = None
) -> Tuple[int, int, int]:
    """
    (i, i + d, i + 2d) with d uniform in [0, interval_max] unless given,
    capped so the triple fits in the clip.
    """
    if length < 1:
        raise ContractError(f"sample_triple_indices: {length=} must be positive")
    if interval is None:
        interval = int(rng.integers(0, interval_max + 1))
    if interval < 0:
        raise ContractError(f"sample_triple_indices: {interval=} must be non-negative")
    d = min(interval, (length - 1) // 2)
    start = int(rng.integers(0, length - 2 * d))
    return start, start + d, start + 2 * d


def sub_clip(clip: Clip, indices: Tuple[int, ...]) -> Clip:
    """
    Clip restricted to the given frames; objects absent from the new
    first frame are removed.
    """
    present = [object_id for object_id in clip.object_ids if object_id in clip.masks[indices[0]]]
    masks = [{k: v for k, v in clip.masks[index].items() if k in present} for index in indices]
    return Clip(frames=[clip.frames[index] for index in indices], masks=masks, seed=clip.seed, object_ids=present)


def clip_seeds(seed: int, count: int) -> List[int]:
    rng = make_rng(seed)
    return [int(value) for value in rng.integers(0, 2**31, size=count)]
