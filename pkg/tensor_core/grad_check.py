from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np

from constants import FINITE_DIFF_STEP
from tensor_core.tensor import Parameter, Tensor, suspended_tape
from utils.errors import ContractError

ScalarFunc = Callable[[Tensor], Union[Tensor, float]]


def _as_float(value: Union[Tensor, float]) -> float:
    return value.item() if isinstance(value, Tensor) else float(value)


def finite_diff_grad(f: ScalarFunc, x: Tensor, h: float = FINITE_DIFF_STEP) -> Tensor:
    """
    Central differences (f(x + h·e_i) − f(x − h·e_i)) / 2h for every element of x.
    f is evaluated with recording suspended.
    """
    if h <= 0:
        raise ContractError(f"finite_diff_grad: step {h=} must be positive")
    base = x.numpy()
    grad = np.zeros_like(base)
    with suspended_tape():
        for index in np.ndindex(base.shape):
            original = base[index]
            base[index] = original + h
            f_plus = _as_float(f(Tensor(base, dtype=x.dtype)))
            base[index] = original - h
            f_minus = _as_float(f(Tensor(base, dtype=x.dtype)))
            base[index] = original
            grad[index] = (f_plus - f_minus) / (2.0 * h)
    return Tensor(grad, dtype=x.dtype)


def parameter_finite_diff(
    loss_fn: Callable[[], Union[Tensor, float]],
    parameter: Parameter,
    h: float = FINITE_DIFF_STEP,
    indices: Optional[Iterable[Tuple[int, ...]]] = None,
) -> np.ndarray:
    """
    Central differences of a closure with respect to a Parameter.
    Only the listed element indices are perturbed when indices is given;
    the remaining entries of the result stay zero.
    """
    if h <= 0:
        raise ContractError(f"parameter_finite_diff: step {h=} must be positive")
    original = parameter.value.numpy()
    grad = np.zeros_like(original)
    targets = list(indices) if indices is not None else list(np.ndindex(original.shape))
    with suspended_tape():
        for index in targets:
            probe = original.copy()
            probe[index] = original[index] + h
            parameter.assign(probe)
            f_plus = _as_float(loss_fn())
            probe[index] = original[index] - h
            parameter.assign(probe)
            f_minus = _as_float(loss_fn())
            grad[index] = (f_plus - f_minus) / (2.0 * h)
    parameter.assign(original)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """
    max|a − n| normalised by the larger of the two max-abs magnitudes.
    """
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale
