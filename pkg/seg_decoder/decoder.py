"""
Segmentation decoder: stride-16 transformer output to a full-resolution
two-channel (background, foreground) probability map.
"""
from seg_decoder.params import DecoderParams, RefinementParams, ResidualParams
from tensor_core.ops import add, bilinear_resize, conv2d, relu, reshape, softmax_channels, transpose
from tensor_core.tensor import Tensor
from utils.errors import DimensionError
from utils.misc import spatial_dims


def residual_block(x: Tensor, params: ResidualParams) -> Tensor:
    inner = conv2d(relu(x), params.conv1.value, stride=1, padding=1)
    return add(x, conv2d(relu(inner), params.conv2.value, stride=1, padding=1))


def upsample2(x: Tensor) -> Tensor:
    h, w = spatial_dims(x.shape)
    return bilinear_resize(x, 2 * h, 2 * w)


def refinement(x: Tensor, skip: Tensor, params: RefinementParams) -> Tensor:
    h, w = spatial_dims(x.shape)
    if spatial_dims(skip.shape) != (2 * h, 2 * w):
        raise DimensionError(f"refinement: skip {skip.shape} must be twice the spatial size of {x.shape}")
    if skip.shape[0] != params.skip_conv.shape[1]:
        raise DimensionError(
            f"refinement: skip has {skip.shape[0]} channels, kernel expects {params.skip_conv.shape[1]}"
        )
    s = conv2d(skip, params.skip_conv.value, stride=1, padding=1)
    merged = add(s, upsample2(residual_block(x, params.merge_residual)))
    return residual_block(merged, params.post_residual)


def to_grid(t_out: Tensor, h: int, w: int) -> Tensor:
    """
    HW×C rows (row-major over the grid) back to C×H×W.
    """
    if t_out.ndim != 2 or t_out.shape[0] != h * w:
        raise DimensionError(f"to_grid: {t_out.shape=} does not hold {h}×{w} rows")
    return reshape(transpose(t_out), (t_out.shape[1], h, w))


def decode_quarter(t_out: Tensor, f8: Tensor, f4: Tensor, params: DecoderParams) -> Tensor:
    h8, w8 = spatial_dims(f8.shape)
    if spatial_dims(f4.shape) != (2 * h8, 2 * w8) or h8 % 2 or w8 % 2:
        raise DimensionError(f"decode: f8 {f8.shape} and f4 {f4.shape} are not strides 8 and 4")
    x = to_grid(t_out, h8 // 2, w8 // 2)
    x = residual_block(conv2d(x, params.entry_conv.value, stride=1, padding=1), params.entry_residual)
    x = refinement(x, f8, params.refine8)
    x = refinement(x, f4, params.refine4)
    return softmax_channels(conv2d(x, params.head.value, stride=1, padding=1))


def decode(t_out: Tensor, f8: Tensor, f4: Tensor, params: DecoderParams) -> Tensor:
    quarter = decode_quarter(t_out, f8, f4, params)
    h4, w4 = spatial_dims(quarter.shape)
    return bilinear_resize(quarter, 4 * h4, 4 * w4)
