"""
SitvosModel bundles every parameter group under hierarchical names:
backbone.*, mask_encoder.*, transformer.<block>.*, decoder.*
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from backbone.config import BackboneConfig
from backbone.extractor import (
    BackboneParams,
    FrameFeatures,
    MaskEncoderParams,
    init_backbone_params,
    init_mask_encoder_params,
)
from constants import DECODER_CHANNELS, DEFAULT_DTYPE, LAYER_NORM_EPS, MODEL_CHANNELS, MODEL_KEY_DIM
from interactive_transformer.transformer import InteractiveTransformerParams, TransformerState, forward, init_transformer_params
from seg_decoder.decoder import decode
from seg_decoder.params import DecoderParams, init_decoder_params
from tensor_core.ops import take_channels
from tensor_core.serialization import load_tensors, save_tensors
from tensor_core.tensor import Parameter, Tensor, resolve_dtype
from utils.errors import ContractError, FormatError


@dataclass
class ModelConfig:
    channels: int = MODEL_CHANNELS
    d_k: int = MODEL_KEY_DIM
    decoder_channels: int = DECODER_CHANNELS
    use_fim: bool = True
    ln_eps: float = LAYER_NORM_EPS
    dtype: str = DEFAULT_DTYPE
    backbone: BackboneConfig = field(default_factory=BackboneConfig)

    def __post_init__(self):
        if isinstance(self.backbone, dict):
            self.backbone = BackboneConfig(**self.backbone)
        resolve_dtype(self.dtype)
        if self.channels < 1 or self.d_k < 1 or self.decoder_channels < 1:
            raise ContractError(
                f"ModelConfig: invalid {self.channels=}, {self.d_k=}, {self.decoder_channels=}"
            )
        if self.ln_eps <= 0:
            raise ContractError(f"ModelConfig: {self.ln_eps=} must be positive")
        # the projection width of both encoders is the embedding width C
        self.backbone.projection_channels = self.channels


@dataclass
class SitvosModel:
    config: ModelConfig
    backbone: BackboneParams
    mask_encoder: MaskEncoderParams
    transformer: InteractiveTransformerParams
    decoder: DecoderParams

    def parameters(self) -> Iterator[Parameter]:
        yield from self.backbone.parameters()
        yield from self.mask_encoder.parameters()
        yield from self.transformer.parameters()
        yield from self.decoder.parameters()

    def named_parameters(self) -> Dict[str, Parameter]:
        named = {}
        for parameter in self.parameters():
            if parameter.name in named:
                raise ContractError(f"SitvosModel: duplicate parameter name {parameter.name}")
            named[parameter.name] = parameter
        return named

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.zero_grad()


def build_model(config: Optional[ModelConfig] = None, seed: int = 0, dtype: Optional[str] = None) -> SitvosModel:
    config = config or ModelConfig()
    if dtype is not None:
        config = replace(config, dtype=dtype)
    rng = np.random.default_rng(seed)
    stages = config.backbone.stage_channels
    return SitvosModel(
        config=config,
        backbone=init_backbone_params(config.backbone, rng, config.dtype),
        mask_encoder=init_mask_encoder_params(config.backbone, rng, config.dtype),
        transformer=init_transformer_params(config.channels, config.d_k, rng, config.dtype, eps=config.ln_eps),
        decoder=init_decoder_params(
            in_channels=config.channels,
            f8_channels=stages[1],
            f4_channels=stages[0],
            width=config.decoder_channels,
            rng=rng,
            dtype=config.dtype,
        ),
    )


def save_model(model: SitvosModel, path: str, extra_meta: Optional[dict] = None) -> None:
    meta = {"model": asdict(model.config)}
    meta.update(extra_meta or {})
    save_tensors({name: p.value for name, p in model.named_parameters().items()}, path, meta=meta)


def load_model(path: str) -> Tuple[SitvosModel, dict]:
    tensors, meta = load_tensors(path)
    if "model" not in meta:
        raise FormatError(f"load_model: manifest of {path} has no model config")
    model = build_model(ModelConfig(**meta["model"]))
    named = model.named_parameters()
    missing = sorted(set(named) - set(tensors))
    unexpected = sorted(set(tensors) - set(named))
    if missing or unexpected:
        raise FormatError(f"load_model: {path} does not match the model, {missing=}, {unexpected=}")
    for name, parameter in named.items():
        if tensors[name].shape != parameter.shape:
            raise FormatError(f"load_model: {name} has shape {tensors[name].shape}, expected {parameter.shape}")
        parameter.assign(tensors[name].numpy())
    logging.debug(f"load_model: {len(named)} parameters from {path}")  # pylint: disable=W1203
    return model, meta


def segment_object(
    model: SitvosModel,
    query: FrameFeatures,
    m_ori: Tensor,
    m_e: Tensor,
    collect_attention: bool = False,
) -> Tuple[Tensor, TransformerState]:
    """
    One object's transformer and decoder pass.
    Returns the full-resolution 2×h×w probability map and the transformer state.
    """
    state = forward(
        m_ori,
        m_e,
        query.embedding,
        model.transformer,
        use_fim=model.config.use_fim,
        collect_attention=collect_attention,
    )
    probs = decode(state.t_out, query.f8, query.f4, model.decoder)
    return probs, state


def foreground(probs: Tensor) -> Tensor:
    return take_channels(probs, 1, 2)
