"""
Procedural sprites and backgrounds, evaluated analytically per pixel so the
masks are exact supports with no anti-aliasing.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from data_synth.config import SPRITE_KINDS
from data_synth.transforms import AffineTransform, make_rng
from tensor_core.tensor import Tensor
from utils.errors import ContractError, DimensionError
from utils.misc import ensure_divisible

RING_INNER_FRACTION = 0.55


@dataclass(frozen=True)
class Sprite:
    kind: str
    color: Tuple[float, float, float]
    size: float
    texture_seed: int
    center: Tuple[float, float]

    def __post_init__(self):
        if self.kind not in SPRITE_KINDS:
            raise ContractError(f"Sprite: unknown {self.kind=}")
        if self.size <= 0:
            raise ContractError(f"Sprite: {self.size=} must be positive")
        if min(self.color) < 0 or max(self.color) > 1:
            raise ContractError(f"Sprite: {self.color=} must lie in [0, 1]")

    def support(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """
        Boolean support in sprite-local coordinates (origin at the center).
        """
        radius = self.size / 2.0
        if self.kind == "disk":
            return u * u + v * v <= radius * radius
        if self.kind == "ring":
            squared = u * u + v * v
            inner = RING_INNER_FRACTION * radius
            return (squared <= radius * radius) & (squared >= inner * inner)
        if self.kind == "rectangle":
            return (np.abs(u) <= radius) & (np.abs(v) <= self.size / 3.0)
        # triangle pointing up (image y grows downward); inradius is radius / 2
        inside = np.ones(u.shape, dtype=bool)
        for angle in (math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3):
            inside &= u * math.cos(angle) + v * math.sin(angle) <= radius / 2.0
        return inside

    def texture(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        rng = make_rng(self.texture_seed)
        fu, fv = rng.uniform(0.2, 0.6, size=2)
        phase_u, phase_v = rng.uniform(0.0, 2 * math.pi, size=2)
        shade = 0.8 + 0.2 * np.sin(fu * u + phase_u) * np.cos(fv * v + phase_v)
        return np.clip(np.array(self.color)[:, None, None] * shade[None], 0.0, 1.0)


@dataclass(frozen=True)
class Background:
    """
    Gradient plus a few sinusoids, all parameters drawn from one seed.
    """

    seed: int

    def evaluate(self, x: np.ndarray, y: np.ndarray, h: int, w: int) -> np.ndarray:
        rng = make_rng(self.seed)
        base = rng.uniform(0.3, 0.7, size=3)
        gradient = rng.uniform(-0.15, 0.15, size=(3, 2))
        frequencies = rng.uniform(0.05, 0.3, size=(3, 2))
        phases = rng.uniform(0.0, 2 * math.pi, size=3)
        amplitudes = rng.uniform(0.02, 0.08, size=(3, 3))
        nx, ny = x / w - 0.5, y / h - 0.5
        image = base[:, None, None] + gradient[:, 0, None, None] * nx + gradient[:, 1, None, None] * ny
        for k in range(3):
            wave = np.sin(frequencies[k, 0] * x + frequencies[k, 1] * y + phases[k])
            image = image + amplitudes[:, k, None, None] * wave[None]
        return np.clip(image, 0.0, 1.0)


@dataclass
class FrameTransforms:
    background: AffineTransform
    sprites: List[AffineTransform]


@dataclass
class Clip:
    frames: List[Tensor]
    masks: List[Dict[int, np.ndarray]]
    seed: int
    object_ids: List[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) != len(self.masks):
            raise DimensionError(f"Clip: {len(self.frames)} frames but {len(self.masks)} mask maps")
        missing = sorted(set(self.object_ids) - set(self.masks[0]))
        if missing:
            raise ContractError(f"Clip: objects {missing} are not visible in frame 0")
        for index, masks in enumerate(self.masks):
            if masks:
                coverage = np.sum(np.stack(list(masks.values())), axis=0)
                if coverage.max() > 1:
                    raise ContractError(f"Clip: masks overlap in frame {index}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_size(self) -> Tuple[int, int]:
        return self.frames[0].shape[1], self.frames[0].shape[2]

    def label_map(self, index: int) -> np.ndarray:
        labels = np.zeros(self.frame_size, dtype=np.int64)
        for object_id, mask in self.masks[index].items():
            labels[mask > 0] = object_id
        return labels

    def label_maps(self) -> List[np.ndarray]:
        return [self.label_map(index) for index in range(len(self))]

    def mask(self, index: int, object_id: int) -> np.ndarray:
        """
        Binary h×w mask, all zeros when the object is absent from the frame.
        """
        if object_id in self.masks[index]:
            return self.masks[index][object_id]
        return np.zeros(self.frame_size, dtype=np.uint8)


def render_frame(
    background: Background,
    sprites: List[Sprite],
    transforms: FrameTransforms,
    h: int,
    w: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One frame: (3×h×w image, h×w map of sprite positions + 1, 0 = background).
    Later sprites are composited over earlier ones.
    """
    if len(transforms.sprites) != len(sprites):
        raise DimensionError(f"render_frame: {len(sprites)} sprites but {len(transforms.sprites)} transforms")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    bx, by = transforms.background.source_coords(xs, ys, (w / 2.0, h / 2.0))
    image = background.evaluate(bx + w / 2.0, by + h / 2.0, h, w)
    owner = np.zeros((h, w), dtype=np.int64)
    for position, (sprite, transform) in enumerate(zip(sprites, transforms.sprites)):
        u, v = transform.source_coords(xs, ys, sprite.center)
        support = sprite.support(u, v)
        image = np.where(support[None], sprite.texture(u, v), image)
        owner[support] = position + 1
    return image, owner


def render_clip(
    background_seed: int,
    sprites: List[Sprite],
    transforms: List[FrameTransforms],
    h: int,
    w: int,
    object_ids: Optional[List[int]] = None,
    dtype: str = "float32",
    seed: Optional[int] = None,
) -> Clip:
    """
    Objects fully hidden or out of frame are dropped from that frame's masks.
    """
    ensure_divisible(h, w, 16)
    object_ids = object_ids or list(range(1, len(sprites) + 1))
    if len(object_ids) != len(sprites):
        raise ContractError(f"render_clip: {len(object_ids)} ids for {len(sprites)} sprites")
    background = Background(background_seed)
    frames, masks = [], []
    for frame_transforms in transforms:
        image, owner = render_frame(background, sprites, frame_transforms, h, w)
        frames.append(Tensor(image, dtype=dtype))
        visible = {}
        for position, object_id in enumerate(object_ids):
            mask = (owner == position + 1).astype(np.uint8)
            if mask.any():
                visible[object_id] = mask
        masks.append(visible)
    return Clip(frames=frames, masks=masks, seed=background_seed if seed is None else seed, object_ids=object_ids)
