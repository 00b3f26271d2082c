from dataclasses import dataclass
from typing import Optional

from constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    BASE_LR,
    BATCH_SIZE,
    DESK_CROP,
    FEEDBACK_GROUND_TRUTH,
    FEEDBACK_PREDICTED,
    INTERVAL_MAX,
    LOSS_FRAMES_BOTH,
    LOSS_FRAMES_FIRST,
    LOSS_FRAMES_SECOND,
    POLY_POWER,
)
from utils.errors import ContractError


@dataclass
class TrainConfig:
    # full-scale recipe: base_lr 1e-5, batch 4, crop 384; crop defaults to the desk size
    base_lr: float = BASE_LR
    poly_power: float = POLY_POWER
    batch_size: int = BATCH_SIZE
    crop: int = DESK_CROP
    max_steps: int = 100
    interval_max: int = INTERVAL_MAX
    seed: int = 0
    num_objects: int = 1
    sequence_length: int = 60
    sequence_pool: int = 8
    # a synth dataset directory; when set it replaces the generated main-stage pool
    dataset: Optional[str] = None
    feedback: str = FEEDBACK_PREDICTED
    loss_frames: str = LOSS_FRAMES_BOTH
    checkpoint_every: int = 0
    log_every: int = 10
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    adam_eps: float = ADAM_EPS

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ContractError(f"TrainConfig: {self.base_lr=} must be positive")
        if self.poly_power <= 0:
            raise ContractError(f"TrainConfig: {self.poly_power=} must be positive")
        if self.crop < 16 or self.crop % 16:
            raise ContractError(f"TrainConfig: {self.crop=} must be a positive multiple of 16")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ContractError(f"TrainConfig: invalid {self.batch_size=} or {self.max_steps=}")
        if self.sequence_length < 3 or self.sequence_pool < 1:
            raise ContractError(f"TrainConfig: invalid {self.sequence_length=} or {self.sequence_pool=}")
        if self.feedback not in (FEEDBACK_PREDICTED, FEEDBACK_GROUND_TRUTH):
            raise ContractError(f"TrainConfig: unknown {self.feedback=}")
        if self.loss_frames not in (LOSS_FRAMES_BOTH, LOSS_FRAMES_FIRST, LOSS_FRAMES_SECOND):
            raise ContractError(f"TrainConfig: unknown {self.loss_frames=}")
