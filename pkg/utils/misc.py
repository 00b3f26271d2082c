import inspect
from typing import Sequence, Tuple

import numpy as np

from utils.errors import ContractError, DimensionError


def ensure_divisible(h: int, w: int, divisor: int) -> None:
    if h % divisor != 0 or w % divisor != 0:
        caller = inspect.stack()[1].function
        raise DimensionError(
            f"{caller}: frame dims must be divisible by {divisor}, got {h=}, {w=}"
        )


def ensure_unit_interval(values: np.ndarray, what: str) -> None:
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        caller = inspect.stack()[1].function
        raise ContractError(
            f"{caller}: {what} values must lie in [0, 1], got min={values.min()}, max={values.max()}"
        )


def spatial_dims(shape: Sequence[int]) -> Tuple[int, int]:
    """
    Return (h, w) of a c×h×w shape.
    """
    if len(shape) != 3:
        caller = inspect.stack()[1].function
        raise DimensionError(f"{caller}: expected a c×h×w tensor, got shape {tuple(shape)}")
    return int(shape[1]), int(shape[2])
