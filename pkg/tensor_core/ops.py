"""
Differentiable primitives over Tensor.

Every op computes its result with numpy, checks it is finite,
and, when a Tape is active on the current thread, records a
vector-Jacobian product closure for the reverse sweep.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from constants import LAYER_NORM_EPS
from tensor_core.tensor import Tensor, VjpFunc, active_tape
from utils.errors import ContractError, DimensionError, NonFiniteError

Scalar = Union[int, float]


def _finish(op_name: str, inputs: Tuple[Tensor, ...], out: np.ndarray, vjp: VjpFunc) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{op_name}: result holds NaN or Inf values")
    result = Tensor(out, dtype=inputs[0].dtype)
    tape = active_tape()
    if tape is not None:
        tape.record(op_name, inputs, result, vjp)
    return result


def _ensure_dtype(op_name: str, *tensors: Tensor) -> None:
    dtypes = {t.dtype for t in tensors}
    if len(dtypes) > 1:
        raise ContractError(f"{op_name}: mixed dtypes {sorted(dtypes)}")


def _ensure_rank(op_name: str, tensor: Tensor, rank: int) -> None:
    if tensor.ndim != rank:
        raise DimensionError(f"{op_name}: expected rank {rank}, got shape {tensor.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _ensure_rank("matmul", a, 2)
    _ensure_rank("matmul", b, 2)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner extents differ, {a.shape=}, {b.shape=}")
    _ensure_dtype("matmul", a, b)
    a_data, b_data = a.data, b.data

    def vjp(g: np.ndarray):
        return g @ b_data.T, a_data.T @ g

    return _finish("matmul", (a, b), a_data @ b_data, vjp)


def transpose(a: Tensor) -> Tensor:
    _ensure_rank("transpose", a, 2)
    return _finish("transpose", (a,), a.data.T, lambda g: (g.T,))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}")
    in_shape = a.shape
    return _finish("reshape", (a,), a.data.reshape(shape), lambda g: (g.reshape(in_shape),))


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ContractError("concat_rows: nothing to concatenate")
    columns = {t.shape[1:] for t in tensors}
    if len(columns) != 1:
        raise DimensionError(f"concat_rows: trailing extents differ, {[t.shape for t in tensors]}")
    _ensure_dtype("concat_rows", *tensors)
    bounds = np.cumsum([t.shape[0] for t in tensors])[:-1]

    def vjp(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=0))

    return _finish("concat_rows", tuple(tensors), np.concatenate([t.data for t in tensors], axis=0), vjp)


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return _finish("add_scalar", (a,), a.data + b, lambda g: (g,))
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes differ, {a.shape=}, {b.shape=}")
    _ensure_dtype("add", a, b)
    return _finish("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes differ, {a.shape=}, {b.shape=}")
    _ensure_dtype("sub", a, b)
    return _finish("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return scale(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes differ, {a.shape=}, {b.shape=}")
    _ensure_dtype("mul", a, b)
    a_data, b_data = a.data, b.data
    return _finish("mul", (a, b), a_data * b_data, lambda g: (g * b_data, g * a_data))


def scale(a: Tensor, factor: Scalar) -> Tensor:
    factor = float(factor)
    return _finish("scale", (a,), a.data * factor, lambda g: (g * factor,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _finish("relu", (a,), np.where(mask, a.data, 0), lambda g: (g * mask,))


def pointwise(op_kind: str, a: Tensor, b: Optional[Union[Tensor, Scalar]] = None) -> Tensor:
    """
    Elementwise dispatcher over add, mul, relu and scale.
    """
    if op_kind == "relu":
        return relu(a)
    if b is None:
        raise ContractError(f"pointwise: {op_kind=} needs a second operand")
    if op_kind == "add":
        return add(a, b)
    if op_kind == "mul":
        return mul(a, b)
    if op_kind == "scale":
        if isinstance(b, Tensor):
            raise ContractError("pointwise: scale takes a scalar factor")
        return scale(a, b)
    raise ContractError(f"pointwise: unknown {op_kind=}")


def sum_all(a: Tensor) -> Tensor:
    in_shape = a.shape
    return _finish("sum_all", (a,), np.sum(a.data), lambda g: (np.broadcast_to(g, in_shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    in_shape, n = a.shape, a.size
    return _finish(
        "mean_all", (a,), np.mean(a.data), lambda g: (np.broadcast_to(g / n, in_shape).copy(),)
    )


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NonFiniteError("log: input must be strictly positive")
    a_data = a.data
    return _finish("log", (a,), np.log(a_data), lambda g: (g / a_data,))


def clamp(a: Tensor, low: float, high: float) -> Tensor:
    if low > high:
        raise ContractError(f"clamp: {low=} exceeds {high=}")
    inside = (a.data >= low) & (a.data <= high)
    return _finish("clamp", (a,), np.clip(a.data, low, high), lambda g: (g * inside,))


def softmax_rows(x: Tensor) -> Tensor:
    _ensure_rank("softmax_rows", x, 2)
    shifted = x.data - np.max(x.data, axis=1, keepdims=True)
    exp = np.exp(shifted)
    y = exp / np.sum(exp, axis=1, keepdims=True)

    def vjp(g: np.ndarray):
        return (y * (g - np.sum(g * y, axis=1, keepdims=True)),)

    return _finish("softmax_rows", (x,), y, vjp)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    _ensure_rank("layer_norm", x, 2)
    if eps <= 0:
        raise ContractError(f"layer_norm: {eps=} must be positive")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"layer_norm: {x.shape=} needs gamma/beta of ({c},), got {gamma.shape}, {beta.shape}")
    _ensure_dtype("layer_norm", x, gamma, beta)
    mu = np.mean(x.data, axis=1, keepdims=True)
    var = np.var(x.data, axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mu) * inv_std
    gamma_data = gamma.data

    def vjp(g: np.ndarray):
        d_gamma = np.sum(g * x_hat, axis=0)
        d_beta = np.sum(g, axis=0)
        d_hat = g * gamma_data
        d_x = inv_std / c * (
            c * d_hat
            - np.sum(d_hat, axis=1, keepdims=True)
            - x_hat * np.sum(d_hat * x_hat, axis=1, keepdims=True)
        )
        return d_x, d_gamma, d_beta

    return _finish("layer_norm", (x, gamma, beta), x_hat * gamma_data + beta.data, vjp)


def pad2d(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    _ensure_rank("pad2d", x, 3)
    if min(top, bottom, left, right) < 0:
        raise ContractError(f"pad2d: negative padding {(top, bottom, left, right)}")
    _, h, w = x.shape
    out = np.pad(x.data, ((0, 0), (top, bottom), (left, right)))

    def vjp(g: np.ndarray):
        return (g[:, top:top + h, left:left + w],)

    return _finish("pad2d", (x,), out, vjp)


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    span = extent + 2 * padding - kernel
    if span < 0 or span % stride != 0:
        raise DimensionError(
            f"conv2d: non-integral output extent for {extent=}, {kernel=}, {stride=}, {padding=}"
        )
    return span // stride + 1


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    Cross-correlation of a c_in×h×w input with a c_out×c_in×kh×kw kernel.
    Output extents must be integral; there is no silent cropping.
    """
    _ensure_rank("conv2d", x, 3)
    _ensure_rank("conv2d", kernel, 4)
    c_in, h, w = x.shape
    c_out, k_in, kh, kw = kernel.shape
    if k_in != c_in:
        raise DimensionError(f"conv2d: kernel expects {k_in} input channels, got {x.shape=}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ContractError(f"conv2d: kernel extents must be odd, got {kernel.shape=}")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d: invalid {stride=} or {padding=}")
    _ensure_dtype("conv2d", x, kernel)
    out_h = conv_output_extent(h, kh, stride, padding)
    out_w = conv_output_extent(w, kw, stride, padding)

    x_pad = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding))) if padding else x.data
    k_data = kernel.data
    rows = [slice(i, i + stride * (out_h - 1) + 1, stride) for i in range(kh)]
    cols = [slice(j, j + stride * (out_w - 1) + 1, stride) for j in range(kw)]

    out = np.zeros((c_out, out_h, out_w), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(k_data[:, :, i, j], x_pad[:, rows[i], cols[j]], axes=([1], [0]))

    def vjp(g: np.ndarray):
        d_pad = np.zeros_like(x_pad)
        d_kernel = np.zeros_like(k_data)
        for i in range(kh):
            for j in range(kw):
                patch = x_pad[:, rows[i], cols[j]]
                d_kernel[:, :, i, j] = np.tensordot(g, patch, axes=([1, 2], [1, 2]))
                d_pad[:, rows[i], cols[j]] += np.tensordot(k_data[:, :, i, j], g, axes=([0], [0]))
        d_x = d_pad[:, padding:padding + h, padding:padding + w] if padding else d_pad
        return d_x, d_kernel

    return _finish("conv2d", (x, kernel), out, vjp)


def interpolation_matrix(in_size: int, out_size: int) -> np.ndarray:
    """
    Row i holds the weights of output sample i over input positions,
    with half-pixel centers: src = (i + 0.5) * in/out - 0.5, clamped at 0.
    """
    matrix = np.zeros((out_size, in_size), dtype=np.float64)
    factor = in_size / out_size
    for i in range(out_size):
        src = max((i + 0.5) * factor - 0.5, 0.0)
        i0 = min(int(np.floor(src)), in_size - 1)
        i1 = min(i0 + 1, in_size - 1)
        frac = src - i0
        matrix[i, i0] += 1.0 - frac
        matrix[i, i1] += frac
    return matrix


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    _ensure_rank("bilinear_resize", x, 3)
    if out_h < 1 or out_w < 1:
        raise ContractError(f"bilinear_resize: invalid target size {out_h}×{out_w}")
    _, h, w = x.shape
    dtype = x.data.dtype
    rows = interpolation_matrix(h, out_h).astype(dtype)
    cols = interpolation_matrix(w, out_w).astype(dtype)
    out = np.einsum("oh,chw,pw->cop", rows, x.data, cols)

    def vjp(g: np.ndarray):
        return (np.einsum("oh,cop,pw->chw", rows, g, cols),)

    return _finish("bilinear_resize", (x,), out, vjp)


def softmax_channels(x: Tensor) -> Tensor:
    """
    Softmax over the channel axis of a c×h×w tensor.
    """
    _ensure_rank("softmax_channels", x, 3)
    c, h, w = x.shape
    per_pixel = transpose(reshape(x, (c, h * w)))
    return reshape(transpose(softmax_rows(per_pixel)), (c, h, w))


def take_channels(x: Tensor, start: int, stop: int) -> Tensor:
    _ensure_rank("take_channels", x, 3)
    if not 0 <= start < stop <= x.shape[0]:
        raise DimensionError(f"take_channels: [{start}, {stop}) outside {x.shape=}")
    in_shape = x.shape

    def vjp(g: np.ndarray):
        full = np.zeros(in_shape, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return _finish("take_channels", (x,), x.data[start:stop], vjp)

