from dataclasses import dataclass, field
from typing import List

from constants import MASK_ENCODER_CHANNELS, MODEL_CHANNELS, STAGE_CHANNELS, STEM_CHANNELS
from utils.errors import ContractError


@dataclass
class BackboneConfig:
    # NOTE stem (stride 2) plus three stride-2 stages give outputs
    # at strides 4, 8 and 16. Widths are desk-scale defaults.
    stage_channels: List[int] = field(default_factory=lambda: list(STAGE_CHANNELS))
    projection_channels: int = MODEL_CHANNELS
    mask_encoder_channels: List[int] = field(default_factory=lambda: list(MASK_ENCODER_CHANNELS))
    stem_channels: int = STEM_CHANNELS

    def __post_init__(self):
        if len(self.stage_channels) != 3 or len(self.mask_encoder_channels) != 3:
            raise ContractError(
                f"BackboneConfig: need 3 stage widths, got {self.stage_channels=}, {self.mask_encoder_channels=}"
            )
        if min(self.stage_channels + self.mask_encoder_channels) < 1:
            raise ContractError("BackboneConfig: channel counts must be positive")
        if self.projection_channels < 1 or self.stem_channels < 1:
            raise ContractError(
                f"BackboneConfig: invalid {self.projection_channels=} or {self.stem_channels=}"
            )

    @property
    def mask_stem_channels(self) -> int:
        return max(1, self.stem_channels // 2)
