from .decoder import decode, decode_quarter, refinement, residual_block, to_grid, upsample2
from .params import DecoderParams, RefinementParams, ResidualParams, init_decoder_params
