import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from tensor_core.tensor import Parameter
from utils.errors import ContractError, DimensionError

HEAD_CHANNELS = 2


def _check_3x3(kernel: Parameter) -> None:
    if kernel.value.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise ContractError(f"decoder kernels must be 3×3, {kernel.name} has shape {kernel.shape}")


@dataclass
class ResidualParams:
    """
    x + conv2(relu(conv1(relu(x)))), both kernels width→width.
    """

    conv1: Parameter
    conv2: Parameter

    def __post_init__(self):
        for kernel in (self.conv1, self.conv2):
            _check_3x3(kernel)
        width = self.conv1.shape[0]
        if self.conv1.shape[:2] != (width, width) or self.conv2.shape[:2] != (width, width):
            raise DimensionError(
                f"ResidualParams: kernels must map {width}→{width}, got {self.conv1.shape}, {self.conv2.shape}"
            )

    def parameters(self) -> Iterator[Parameter]:
        yield from (self.conv1, self.conv2)


@dataclass
class RefinementParams:
    skip_conv: Parameter
    merge_residual: ResidualParams
    post_residual: ResidualParams

    def __post_init__(self):
        _check_3x3(self.skip_conv)

    def parameters(self) -> Iterator[Parameter]:
        yield self.skip_conv
        yield from self.merge_residual.parameters()
        yield from self.post_residual.parameters()


@dataclass
class DecoderParams:
    entry_conv: Parameter
    entry_residual: ResidualParams
    refine8: RefinementParams
    refine4: RefinementParams
    head: Parameter

    def __post_init__(self):
        _check_3x3(self.entry_conv)
        _check_3x3(self.head)
        if self.head.shape[0] != HEAD_CHANNELS:
            raise ContractError(f"DecoderParams: head must output {HEAD_CHANNELS} channels, got {self.head.shape}")

    @property
    def width(self) -> int:
        return self.entry_conv.shape[0]

    def parameters(self) -> Iterator[Parameter]:
        yield self.entry_conv
        yield from self.entry_residual.parameters()
        yield from self.refine8.parameters()
        yield from self.refine4.parameters()
        yield self.head


def _kernel(name: str, c_out: int, c_in: int, rng: np.random.Generator, dtype: str) -> Parameter:
    std = math.sqrt(2.0 / (c_in * 9))
    return Parameter(name, rng.normal(0.0, std, (c_out, c_in, 3, 3)), dtype=dtype)


def _residual(prefix: str, width: int, rng: np.random.Generator, dtype: str) -> ResidualParams:
    return ResidualParams(
        conv1=_kernel(f"{prefix}.conv1", width, width, rng, dtype),
        conv2=_kernel(f"{prefix}.conv2", width, width, rng, dtype),
    )


def _refinement(prefix: str, skip_channels: int, width: int, rng: np.random.Generator, dtype: str):
    return RefinementParams(
        skip_conv=_kernel(f"{prefix}.skip_conv", width, skip_channels, rng, dtype),
        merge_residual=_residual(f"{prefix}.merge_residual", width, rng, dtype),
        post_residual=_residual(f"{prefix}.post_residual", width, rng, dtype),
    )


def init_decoder_params(
    in_channels: int,
    f8_channels: int,
    f4_channels: int,
    width: int,
    rng: np.random.Generator,
    dtype: str,
) -> DecoderParams:
    return DecoderParams(
        entry_conv=_kernel("decoder.entry_conv", width, in_channels, rng, dtype),
        entry_residual=_residual("decoder.entry_residual", width, rng, dtype),
        refine8=_refinement("decoder.refine8", f8_channels, width, rng, dtype),
        refine4=_refinement("decoder.refine4", f4_channels, width, rng, dtype),
        head=_kernel("decoder.head", HEAD_CHANNELS, width, rng, dtype),
    )
