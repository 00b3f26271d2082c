from .blocks import (
    AttentionParams,
    attention_weights,
    ca_block,
    init_attention_params,
    sa_block,
    scaled_dot_attention,
)
