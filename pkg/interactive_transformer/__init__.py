from .debug_dump import dump_attention_maps
from .transformer import (
    BLOCK_NAMES,
    InteractiveTransformerParams,
    TransformerState,
    decode_cross,
    decoder_self,
    encode,
    fim,
    forward,
    gate_memory,
    init_transformer_params,
)
