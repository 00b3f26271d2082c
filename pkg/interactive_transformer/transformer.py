"""
Encoder SA, decoder SA, feature interaction module (two CA blocks) and decoder CA.
One block per role, single head, no feed-forward sublayer, no positional encoding.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from attention.blocks import AttentionParams, AttentionSink, ca_block, init_attention_params, sa_block
from constants import LAYER_NORM_EPS
from tensor_core.ops import mul
from tensor_core.tensor import Parameter, Tensor
from utils.errors import DimensionError

BLOCK_NAMES = ("enc_sa", "dec_sa", "fim_mem_ca", "fim_query_ca", "dec_ca")


@dataclass
class InteractiveTransformerParams:
    # five independent parameter sets, nothing shared across blocks
    enc_sa: AttentionParams
    dec_sa: AttentionParams
    fim_mem_ca: AttentionParams
    fim_query_ca: AttentionParams
    dec_ca: AttentionParams
    eps: float = LAYER_NORM_EPS

    def blocks(self) -> Dict[str, AttentionParams]:
        return {name: getattr(self, name) for name in BLOCK_NAMES}

    def parameters(self) -> Iterator[Parameter]:
        for block in self.blocks().values():
            yield from block.parameters()


def init_transformer_params(
    channels: int,
    d_k: int,
    rng: np.random.Generator,
    dtype: str,
    eps: float = LAYER_NORM_EPS,
) -> InteractiveTransformerParams:
    blocks = {
        name: init_attention_params(channels, d_k, rng, dtype, prefix=f"transformer.{name}")
        for name in BLOCK_NAMES
    }
    return InteractiveTransformerParams(eps=eps, **blocks)


@dataclass
class TransformerState:
    m_ori: Tensor
    q_ori: Tensor
    m_sa: Tensor
    q_sa: Tensor
    m_e: Tensor
    m_x: Tensor
    m_out: Tensor
    q_out: Tensor
    t_out: Tensor
    attention: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        memory_rows = self.m_ori.shape[0]
        query_rows = self.q_ori.shape[0]
        for name in ("m_sa", "m_e", "m_x", "m_out"):
            if getattr(self, name).shape != self.m_ori.shape:
                raise DimensionError(f"TransformerState: {name} rows differ from T·HW = {memory_rows}")
        for name in ("q_sa", "q_out", "t_out"):
            if getattr(self, name).shape != self.q_ori.shape:
                raise DimensionError(f"TransformerState: {name} rows differ from HW = {query_rows}")


def encode(m_ori: Tensor, params: InteractiveTransformerParams, sink: Optional[AttentionSink] = None) -> Tensor:
    return sa_block(m_ori, params.enc_sa, eps=params.eps, sink=sink, name="enc_sa")


def decoder_self(q_ori: Tensor, params: InteractiveTransformerParams, sink: Optional[AttentionSink] = None) -> Tensor:
    return sa_block(q_ori, params.dec_sa, eps=params.eps, sink=sink, name="dec_sa")


def gate_memory(m_e: Tensor, m_ori: Tensor) -> Tensor:
    """
    M_x = M_E ⊙ M_ori, raw elementwise product.
    """
    return mul(m_e, m_ori)


def fim(
    m_sa: Tensor,
    q_sa: Tensor,
    m_ori: Tensor,
    m_e: Tensor,
    params: InteractiveTransformerParams,
    sink: Optional[AttentionSink] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Feature interaction: memory attends to the query (q_sa is key and value),
    the query attends to the memory with mask-gated values M_x.
    """
    if m_e.shape != m_ori.shape or m_sa.shape != m_ori.shape:
        raise DimensionError(f"fim: memory tensors differ, {m_sa.shape=}, {m_ori.shape=}, {m_e.shape=}")
    return _interact(m_sa, q_sa, gate_memory(m_e, m_ori), params, sink)


def _interact(
    m_sa: Tensor,
    q_sa: Tensor,
    m_x: Tensor,
    params: InteractiveTransformerParams,
    sink: Optional[AttentionSink],
) -> Tuple[Tensor, Tensor]:
    m_out = ca_block(m_sa, q_sa, q_sa, params.fim_mem_ca, eps=params.eps, sink=sink, name="fim_mem_ca")
    q_out = ca_block(q_sa, m_sa, m_x, params.fim_query_ca, eps=params.eps, sink=sink, name="fim_query_ca")
    return m_out, q_out


def decode_cross(
    q_out: Tensor,
    m_out: Tensor,
    params: InteractiveTransformerParams,
    sink: Optional[AttentionSink] = None,
) -> Tensor:
    return ca_block(q_out, m_out, m_out, params.dec_ca, eps=params.eps, sink=sink, name="dec_ca")


def forward(
    m_ori: Tensor,
    m_e: Tensor,
    q_ori: Tensor,
    params: InteractiveTransformerParams,
    use_fim: bool = True,
    collect_attention: bool = False,
) -> TransformerState:
    """
    encode and decoder_self are independent; fim and decode_cross follow.
    With use_fim False the interaction is bypassed: m_out = m_sa, q_out = q_sa.
    """
    if m_ori.ndim != 2 or q_ori.ndim != 2 or m_ori.shape[1] != q_ori.shape[1]:
        raise DimensionError(f"forward: memory and query must share C, {m_ori.shape=}, {q_ori.shape=}")
    if m_ori.shape[0] % q_ori.shape[0] != 0:
        raise DimensionError(f"forward: memory rows {m_ori.shape[0]} are not a multiple of HW = {q_ori.shape[0]}")
    sink: Optional[AttentionSink] = dict() if collect_attention else None
    m_sa = encode(m_ori, params, sink=sink)
    q_sa = decoder_self(q_ori, params, sink=sink)
    if m_e.shape != m_ori.shape:
        raise DimensionError(f"forward: {m_e.shape=} must equal {m_ori.shape=}")
    m_x = gate_memory(m_e, m_ori)
    if use_fim:
        m_out, q_out = _interact(m_sa, q_sa, m_x, params, sink)
    else:
        m_out, q_out = m_sa, q_sa
    t_out = decode_cross(q_out, m_out, params, sink=sink)
    return TransformerState(
        m_ori=m_ori,
        q_ori=q_ori,
        m_sa=m_sa,
        q_sa=q_sa,
        m_e=m_e,
        m_x=m_x,
        m_out=m_out,
        q_out=q_out,
        t_out=t_out,
        attention=sink or dict(),
    )
