"""
Polynomial learning-rate decay and the adaptive-moment update.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np

from constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from tensor_core.tensor import Parameter
from utils.errors import ContractError, DimensionError


def poly_lr(step: int, total: int, base: float, power: float) -> float:
    if step < 0 or step > total:
        raise ContractError(f"poly_lr: {step=} must lie in [0, {total=}]")
    if total == 0:
        return base
    return base * math.pow(1.0 - step / total, power)


@dataclass
class OptimizerState:
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def moments(self, parameter: Parameter):
        if parameter.name not in self.first_moment:
            self.first_moment[parameter.name] = np.zeros(parameter.shape, dtype=np.float64)
            self.second_moment[parameter.name] = np.zeros(parameter.shape, dtype=np.float64)
        m, v = self.first_moment[parameter.name], self.second_moment[parameter.name]
        if m.shape != parameter.shape:
            raise DimensionError(f"OptimizerState: moments of {parameter.name} are {m.shape}, parameter is {parameter.shape}")
        return m, v


def optimizer_step(params: Iterable[Parameter], state: OptimizerState, lr: float) -> None:
    """
    Bias-corrected update of every parameter, then its gradient is cleared.
    """
    if lr < 0:
        raise ContractError(f"optimizer_step: {lr=} must be non-negative")
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for parameter in params:
        m, v = state.moments(parameter)
        g = parameter.gradient.data.astype(np.float64)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        if lr > 0:
            update = lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
            parameter.assign(parameter.value.data - update)
        parameter.zero_grad()
