import math
from dataclasses import dataclass
from typing import Dict, Iterator, Optional

import numpy as np

from constants import LAYER_NORM_EPS
from tensor_core.ops import add, layer_norm, matmul, scale, softmax_rows, transpose
from tensor_core.tensor import Parameter, Tensor
from utils.errors import DimensionError

AttentionSink = Dict[str, np.ndarray]


@dataclass
class AttentionParams:
    """
    Single-head projections plus the post-residual layer norm.
    w_v maps back to C so the residual addition is well-formed.
    Projections carry no bias.
    """

    w_q: Parameter
    w_k: Parameter
    w_v: Parameter
    ln_gamma: Parameter
    ln_beta: Parameter

    def __post_init__(self):
        channels, d_k = self.w_q.shape
        if self.w_k.shape != (channels, d_k):
            raise DimensionError(
                f"AttentionParams: w_k {self.w_k.shape} must match w_q {self.w_q.shape}"
            )
        if self.w_v.shape != (channels, channels):
            raise DimensionError(
                f"AttentionParams: w_v must be {channels}×{channels}, got {self.w_v.shape}"
            )
        if self.ln_gamma.shape != (channels,) or self.ln_beta.shape != (channels,):
            raise DimensionError("AttentionParams: layer norm parameters must have C entries")

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_k(self) -> int:
        return self.w_q.shape[1]

    def parameters(self) -> Iterator[Parameter]:
        yield from (self.w_q, self.w_k, self.w_v, self.ln_gamma, self.ln_beta)


def init_attention_params(
    channels: int,
    d_k: int,
    rng: np.random.Generator,
    dtype: str,
    prefix: str,
) -> AttentionParams:
    std = 1.0 / math.sqrt(channels)
    return AttentionParams(
        w_q=Parameter(f"{prefix}.w_q", rng.normal(0.0, std, (channels, d_k)), dtype=dtype),
        w_k=Parameter(f"{prefix}.w_k", rng.normal(0.0, std, (channels, d_k)), dtype=dtype),
        w_v=Parameter(f"{prefix}.w_v", rng.normal(0.0, std, (channels, channels)), dtype=dtype),
        ln_gamma=Parameter(f"{prefix}.ln_gamma", np.ones(channels), dtype=dtype),
        ln_beta=Parameter(f"{prefix}.ln_beta", np.zeros(channels), dtype=dtype),
    )


def attention_weights(q: Tensor, k: Tensor) -> Tensor:
    """
    softmax_rows(q·kᵀ / √d_k), one row per query.
    """
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise DimensionError(f"attention_weights: q and k must share d_k, {q.shape=}, {k.shape=}")
    return softmax_rows(scale(matmul(q, transpose(k)), 1.0 / math.sqrt(q.shape[1])))


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    if v.ndim != 2 or k.shape[0] != v.shape[0]:
        raise DimensionError(f"scaled_dot_attention: k and v must share n_k, {k.shape=}, {v.shape=}")
    return matmul(attention_weights(q, k), v)


def _check_channels(block: str, params: AttentionParams, *sources: Tensor) -> None:
    for source in sources:
        if source.ndim != 2 or source.shape[1] != params.channels:
            raise DimensionError(
                f"{block}: inputs must have {params.channels} columns, got {source.shape}"
            )


def ca_block(
    query_src: Tensor,
    key_src: Tensor,
    value_src: Tensor,
    params: AttentionParams,
    eps: float = LAYER_NORM_EPS,
    sink: Optional[AttentionSink] = None,
    name: str = "ca",
) -> Tensor:
    """
    layer_norm(Attention(query_src·W_Q, key_src·W_K, value_src·W_V) + query_src).
    key_src and value_src may be different tensors with the same row count.
    """
    _check_channels("ca_block", params, query_src, key_src, value_src)
    if key_src.shape[0] != value_src.shape[0]:
        raise DimensionError(
            f"ca_block: key and value sources must share rows, {key_src.shape=}, {value_src.shape=}"
        )
    weights = attention_weights(
        matmul(query_src, params.w_q.value), matmul(key_src, params.w_k.value)
    )
    if sink is not None:
        sink[name] = weights.numpy()
    attended = matmul(weights, matmul(value_src, params.w_v.value))
    return layer_norm(add(attended, query_src), params.ln_gamma.value, params.ln_beta.value, eps)


def sa_block(
    x: Tensor,
    params: AttentionParams,
    eps: float = LAYER_NORM_EPS,
    sink: Optional[AttentionSink] = None,
    name: str = "sa",
) -> Tensor:
    return ca_block(x, x, x, params, eps=eps, sink=sink, name=name)
