"""
Region similarity J, contour accuracy F and their mean.
"""
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

from constants import BOUNDARY_TOLERANCE_FRACTION
from tensor_core.tensor import Tensor
from utils.errors import ContractError, DimensionError

MaskLike = Union[np.ndarray, Tensor]

FOUR_CONNECTIVITY = ndimage.generate_binary_structure(2, 1)


def _as_binary(mask: MaskLike, what: str) -> np.ndarray:
    data = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    data = np.squeeze(data)
    if data.ndim != 2:
        raise DimensionError(f"FramePair: {what} must be h×w, got {data.shape}")
    if not np.all((data == 0) | (data == 1)):
        raise ContractError(f"FramePair: {what} values must be 0 or 1")
    return data.astype(bool)


@dataclass(frozen=True)
class FramePair:
    predicted: np.ndarray
    truth: np.ndarray

    @classmethod
    def of(cls, predicted: MaskLike, truth: MaskLike) -> "FramePair":
        p, t = _as_binary(predicted, "predicted"), _as_binary(truth, "truth")
        if p.shape != t.shape:
            raise DimensionError(f"FramePair: predicted {p.shape} and truth {t.shape} differ")
        return cls(p, t)


def jaccard(pair: FramePair) -> float:
    p, t = pair.predicted, pair.truth
    union = np.sum(p | t)
    if union == 0:
        return 1.0
    return float(np.sum(p & t)) / float(union)


def boundary(mask: np.ndarray) -> np.ndarray:
    """
    Foreground pixels with at least one 4-neighbour in the background;
    pixels outside the image count as background.
    """
    eroded = ndimage.binary_erosion(mask, structure=FOUR_CONNECTIVITY, border_value=0)
    return mask & ~eroded


def _within(source: np.ndarray, target: np.ndarray, tolerance_px: float) -> float:
    # exact Euclidean distance from every pixel to the nearest target pixel
    distance = ndimage.distance_transform_edt(~target)
    return float(np.sum(distance[source] <= tolerance_px)) / float(np.sum(source))


def boundary_f(pair: FramePair, tolerance_px: float) -> float:
    if tolerance_px < 0:
        raise ContractError(f"boundary_f: {tolerance_px=} must be non-negative")
    b_p, b_t = boundary(pair.predicted), boundary(pair.truth)
    if not b_p.any() and not b_t.any():
        return 1.0
    if not b_p.any() or not b_t.any():
        return 0.0
    precision = _within(b_p, b_t, tolerance_px)
    recall = _within(b_t, b_p, tolerance_px)
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def jf_mean(j: float, f: float) -> float:
    return (j + f) / 2.0


def default_tolerance(h: int, w: int) -> int:
    return int(math.ceil(BOUNDARY_TOLERANCE_FRACTION * math.hypot(h, w)))
