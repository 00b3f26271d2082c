"""
Siamese frame encoder and light-weight mask encoder.

One BackboneParams instance serves both the memory role and the query role,
so a frame's features are computed once and reused in either role.
The trailing number of a feature name is its stride (f16 -> stride 16).
"""
import math
import threading
from dataclasses import dataclass
from typing import Dict, Iterator, List

import numpy as np

from backbone.config import BackboneConfig
from constants import BACKBONE_STRIDE
from tensor_core.ops import conv2d, pad2d, relu, reshape, transpose
from tensor_core.tensor import Parameter, Tensor
from utils.errors import DimensionError
from utils.misc import ensure_divisible, ensure_unit_interval, spatial_dims


class InvocationCounter:
    """
    Thread-safe count of backbone extractions.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def increment(self) -> None:
        with self._lock:
            self._count += 1

    @property
    def count(self) -> int:
        with self._lock:
            return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


EXTRACT_INVOCATIONS = InvocationCounter()


@dataclass
class ConvStage:
    down: Parameter
    conv: Parameter


@dataclass
class BackboneParams:
    config: BackboneConfig
    stem: Parameter
    stages: List[ConvStage]
    projection: Parameter

    def parameters(self) -> Iterator[Parameter]:
        yield self.stem
        for stage in self.stages:
            yield stage.down
            yield stage.conv
        yield self.projection


@dataclass
class MaskEncoderParams:
    stem: Parameter
    stages: List[ConvStage]
    projection: Parameter

    def parameters(self) -> Iterator[Parameter]:
        yield self.stem
        for stage in self.stages:
            yield stage.down
            yield stage.conv
        yield self.projection


@dataclass(frozen=True)
class FrameFeatures:
    f4: Tensor
    f8: Tensor
    f16: Tensor
    embedding: Tensor

    def __post_init__(self):
        h, w = spatial_dims(self.f16.shape)
        if spatial_dims(self.f8.shape) != (2 * h, 2 * w) or spatial_dims(self.f4.shape) != (4 * h, 4 * w):
            raise DimensionError(
                f"FrameFeatures: pyramid mismatch {self.f4.shape}, {self.f8.shape}, {self.f16.shape}"
            )
        if self.embedding.shape[0] != h * w:
            raise DimensionError(
                f"FrameFeatures: embedding rows {self.embedding.shape[0]} != H·W = {h * w}"
            )

    @property
    def grid(self):
        return spatial_dims(self.f16.shape)


def _he_kernel(
    name: str, c_out: int, c_in: int, size: int, rng: np.random.Generator, dtype: str
) -> Parameter:
    std = math.sqrt(2.0 / (c_in * size * size))
    return Parameter(name, rng.normal(0.0, std, (c_out, c_in, size, size)), dtype=dtype)


def _init_stages(
    prefix: str, c_in: int, widths: List[int], rng: np.random.Generator, dtype: str
) -> List[ConvStage]:
    stages = []
    for index, width in enumerate(widths):
        stages.append(
            ConvStage(
                down=_he_kernel(f"{prefix}.stage{index + 1}.down", width, c_in, 3, rng, dtype),
                conv=_he_kernel(f"{prefix}.stage{index + 1}.conv", width, width, 3, rng, dtype),
            )
        )
        c_in = width
    return stages


def init_backbone_params(config: BackboneConfig, rng: np.random.Generator, dtype: str) -> BackboneParams:
    return BackboneParams(
        config=config,
        stem=_he_kernel("backbone.stem", config.stem_channels, 3, 3, rng, dtype),
        stages=_init_stages("backbone", config.stem_channels, config.stage_channels, rng, dtype),
        projection=_he_kernel(
            "backbone.projection", config.projection_channels, config.stage_channels[-1], 1, rng, dtype
        ),
    )


def init_mask_encoder_params(
    config: BackboneConfig, rng: np.random.Generator, dtype: str
) -> MaskEncoderParams:
    # input channel of the first layer is 1: the mask alone
    return MaskEncoderParams(
        stem=_he_kernel("mask_encoder.stem", config.mask_stem_channels, 1, 3, rng, dtype),
        stages=_init_stages(
            "mask_encoder", config.mask_stem_channels, config.mask_encoder_channels, rng, dtype
        ),
        projection=_he_kernel(
            "mask_encoder.projection",
            config.projection_channels,
            config.mask_encoder_channels[-1],
            1,
            rng,
            dtype,
        ),
    )


def downsample_conv(x: Tensor, kernel: Parameter) -> Tensor:
    """
    3×3 stride-2 convolution; one leading row/column of zeros keeps
    the output extent integral (h/2) for even inputs.
    """
    return conv2d(pad2d(x, 1, 0, 1, 0), kernel.value, stride=2, padding=0)


def _run_stages(x: Tensor, stem: Parameter, stages: List[ConvStage]) -> List[Tensor]:
    x = relu(downsample_conv(x, stem))
    outputs = []
    for stage in stages:
        x = relu(downsample_conv(x, stage.down))
        x = relu(conv2d(x, stage.conv.value, stride=1, padding=1))
        outputs.append(x)
    return outputs


def project(f16: Tensor, projection: Parameter) -> Tensor:
    """
    1×1 convolution to C channels, then flatten the grid row-major to H·W rows.
    """
    embedded = conv2d(f16, projection.value, stride=1, padding=0)
    channels, h, w = embedded.shape
    return transpose(reshape(embedded, (channels, h * w)))


def extract(frame: Tensor, params: BackboneParams) -> FrameFeatures:
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise DimensionError(f"extract: expected a 3×h×w frame, got {frame.shape}")
    h, w = spatial_dims(frame.shape)
    ensure_divisible(h, w, BACKBONE_STRIDE)
    EXTRACT_INVOCATIONS.increment()
    f4, f8, f16 = _run_stages(frame, params.stem, params.stages)
    return FrameFeatures(f4=f4, f8=f8, f16=f16, embedding=project(f16, params.projection))


def encode_mask(mask: Tensor, params: MaskEncoderParams) -> Tensor:
    """
    Mask embedding of one frame: the per-frame slice of M_E, H·W × C.
    """
    if mask.ndim != 3 or mask.shape[0] != 1:
        raise DimensionError(f"encode_mask: expected a 1×h×w mask, got {mask.shape}")
    h, w = spatial_dims(mask.shape)
    ensure_divisible(h, w, BACKBONE_STRIDE)
    ensure_unit_interval(mask.data, "mask")
    f16 = _run_stages(mask, params.stem, params.stages)[-1]
    return project(f16, params.projection)


class FeatureCache:
    """
    Per-video store of FrameFeatures keyed by frame index.
    A frame is extracted on first request and served from the cache after that.
    """

    def __init__(self, params: BackboneParams):
        self.params = params
        self.features: Dict[int, FrameFeatures] = dict()
        self.extract_calls = 0

    def get_features(self, frame_index: int, frame: Tensor) -> FrameFeatures:
        if frame_index not in self.features:
            self.features[frame_index] = extract(frame, self.params)
            self.extract_calls += 1
        return self.features[frame_index]

    def __contains__(self, frame_index: int) -> bool:
        return frame_index in self.features
