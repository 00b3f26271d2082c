import math
from dataclasses import dataclass, field
from typing import List

from constants import DESK_CROP
from utils.errors import ContractError

SPRITE_KINDS = ["disk", "rectangle", "triangle", "ring"]


@dataclass
class SynthConfig:
    # NOTE default affine ranges:
    # rotation ±30°, scale 0.5–2.0, shear ±0.2, translation ±20% of the frame
    height: int = DESK_CROP
    width: int = DESK_CROP
    num_objects: int = 1
    length: int = 20
    sprite_size_min: float = 14.0
    sprite_size_max: float = 24.0
    kinds: List[str] = field(default_factory=lambda: list(SPRITE_KINDS))
    rotation_max: float = math.pi / 6
    scale_min: float = 0.5
    scale_max: float = 2.0
    shear_max: float = 0.2
    translate_max: float = 0.2
    # per-frame random-walk step deviations of long sequences
    rotation_step: float = 0.05
    scale_step: float = 0.03
    shear_step: float = 0.01
    translate_step: float = 1.5
    background_step: float = 0.5
    min_visible_pixels: int = 16
    max_attempts: int = 100

    def __post_init__(self):
        if self.height % 16 or self.width % 16 or self.height < 16 or self.width < 16:
            raise ContractError(f"SynthConfig: {self.height=} and {self.width=} must be positive multiples of 16")
        if self.num_objects < 1 or self.num_objects > 255:
            raise ContractError(f"SynthConfig: {self.num_objects=} must lie in [1, 255]")
        if not 0 < self.sprite_size_min <= self.sprite_size_max:
            raise ContractError(f"SynthConfig: invalid sprite sizes {self.sprite_size_min}, {self.sprite_size_max}")
        unknown = sorted(set(self.kinds) - set(SPRITE_KINDS))
        if not self.kinds or unknown:
            raise ContractError(f"SynthConfig: sprite kinds must be drawn from {SPRITE_KINDS}, got {self.kinds}")
        steps = (self.rotation_step, self.scale_step, self.shear_step, self.translate_step, self.background_step)
        if min(steps) < 0:
            raise ContractError(f"SynthConfig: random-walk steps must be non-negative, got {steps}")
