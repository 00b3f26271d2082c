import numpy as np

from constants import CROSS_ENTROPY_CLAMP
from tensor_core.ops import clamp, log, mul, scale, sum_all
from tensor_core.tensor import Tensor
from utils.errors import DimensionError


def cross_entropy(probs: Tensor, truth: np.ndarray) -> Tensor:
    """
    Mean over pixels of -log(probability of the true class),
    probabilities clamped to [1e-7, 1]. Channel 0 is background, 1 foreground.
    """
    truth = np.squeeze(np.asarray(truth))
    if probs.ndim != 3 or probs.shape[0] != 2 or probs.shape[1:] != truth.shape:
        raise DimensionError(f"cross_entropy: {probs.shape=} does not match truth {truth.shape}")
    foreground = (truth > 0.5).astype(np.float64)
    onehot = Tensor(np.stack([1.0 - foreground, foreground]), dtype=probs.dtype)
    picked = mul(log(clamp(probs, CROSS_ENTROPY_CLAMP, 1.0)), onehot)
    return scale(sum_all(picked), -1.0 / foreground.size)
