from .grad_check import finite_diff_grad, parameter_finite_diff, relative_error
from .ops import (
    add,
    bilinear_resize,
    clamp,
    concat_rows,
    conv2d,
    layer_norm,
    log,
    matmul,
    mean_all,
    mul,
    pad2d,
    pointwise,
    relu,
    reshape,
    scale,
    softmax_channels,
    softmax_rows,
    sub,
    sum_all,
    take_channels,
    transpose,
)
from .serialization import load_tensors, read_tensor_file, save_tensors, write_tensor_file
from .tensor import Parameter, Tape, Tensor, active_tape, backward, suspended_tape
