import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from constants import DEFAULT_DTYPE
from utils.errors import ContractError, DimensionError

NUMPY_DTYPES = {"float32": np.float32, "float64": np.float64}

ArrayLike = Union[np.ndarray, Sequence, float, int]


def resolve_dtype(dtype: Optional[str]) -> np.dtype:
    name = dtype or DEFAULT_DTYPE
    if name not in NUMPY_DTYPES:
        raise ContractError(
            f"resolve_dtype: {dtype=} is not one of {sorted(NUMPY_DTYPES)}"
        )
    return np.dtype(NUMPY_DTYPES[name])


class Tensor:
    """
    Immutable dense array in row-major order.
    The payload is a read-only numpy array of float32 or float64.
    owner is set only for the value of a Parameter.
    """

    __slots__ = ("_data", "owner", "__weakref__")

    def __init__(
        self,
        data: ArrayLike,
        dtype: Optional[str] = None,
        owner: Optional["Parameter"] = None,
    ):
        if dtype is None and isinstance(data, np.ndarray) and data.dtype == np.float64:
            dtype = "float64"
        arr = np.array(data, dtype=resolve_dtype(dtype), order="C", copy=True)
        if any(extent <= 0 for extent in arr.shape):
            raise DimensionError(f"Tensor: extents must be positive, got {arr.shape=}")
        arr.setflags(write=False)
        self._data = arr
        self.owner = owner

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def dtype(self) -> str:
        return "float64" if self._data.dtype == np.float64 else "float32"

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def ndim(self) -> int:
        return self._data.ndim

    def numpy(self) -> np.ndarray:
        return self._data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"Tensor.item: tensor of shape {self.shape} is not a scalar")
        return float(self._data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"


def zeros(shape: Sequence[int], dtype: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), dtype=dtype or DEFAULT_DTYPE)


def ones(shape: Sequence[int], dtype: Optional[str] = None) -> Tensor:
    return Tensor(np.ones(tuple(shape)), dtype=dtype or DEFAULT_DTYPE)


class Parameter:
    """
    Trainable value with its accumulated gradient.
    """

    def __init__(self, name: str, value: ArrayLike, dtype: Optional[str] = None):
        self.name = name
        if isinstance(value, Tensor):
            dtype = dtype or value.dtype
            value = value.data
        self._value = Tensor(value, dtype=dtype, owner=self)
        self.gradient = Tensor(np.zeros(self._value.shape), dtype=self._value.dtype)

    @property
    def value(self) -> Tensor:
        return self._value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._value.shape

    def assign(self, new_value: np.ndarray) -> None:
        if tuple(new_value.shape) != self.shape:
            raise DimensionError(
                f"Parameter.assign: {self.name} has shape {self.shape}, got {new_value.shape}"
            )
        self._value = Tensor(new_value, dtype=self._value.dtype, owner=self)

    def accumulate(self, grad: np.ndarray) -> None:
        self.gradient = Tensor(self.gradient.data + grad, dtype=self._value.dtype)

    def zero_grad(self) -> None:
        self.gradient = Tensor(np.zeros(self.shape), dtype=self._value.dtype)

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape}, dtype={self._value.dtype})"


VjpFunc = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


@dataclass
class TapeRecord:
    op_name: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    vjp: VjpFunc


@dataclass
class Tape:
    """
    Ordered list of recorded primitive operations.
    Used as a context manager; a tape belongs to the thread that entered it.
    """

    records: List[TapeRecord] = field(default_factory=list)
    parameters: Dict[int, Parameter] = field(default_factory=dict)

    def record(self, op_name: str, inputs: Tuple[Tensor, ...], output: Tensor, vjp: VjpFunc) -> None:
        for tensor in inputs:
            if tensor.owner is not None:
                self.parameters[id(tensor)] = tensor.owner
        self.records.append(TapeRecord(op_name=op_name, inputs=inputs, output=output, vjp=vjp))

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.records)


_local = threading.local()


def _tape_stack() -> List[Tape]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape() -> Optional[Tape]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class suspended_tape:
    """
    Evaluate a block without recording, even inside an active tape.
    """

    def __enter__(self) -> None:
        self._saved = list(_tape_stack())
        _tape_stack().clear()

    def __exit__(self, *exc) -> None:
        _tape_stack().extend(self._saved)


def backward(tape: Tape, loss: Tensor) -> None:
    """
    Reverse sweep over the tape.
    Gradients of loss with respect to every Parameter reached
    are accumulated into Parameter.gradient.
    """
    if loss.size != 1:
        raise ContractError(f"backward: loss must be a scalar, got shape {loss.shape}")
    produced = any(record.output is loss for record in tape.records)
    if not produced and id(loss) not in tape.parameters:
        raise ContractError("backward: loss was not produced under this tape")

    adjoints: Dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=loss.data.dtype)}
    for record in reversed(tape.records):
        grad_out = adjoints.pop(id(record.output), None)
        if grad_out is None:
            continue
        grads = record.vjp(grad_out)
        for tensor, grad in zip(record.inputs, grads):
            if grad is None:
                continue
            key = id(tensor)
            if key in adjoints:
                adjoints[key] = adjoints[key] + grad
            else:
                adjoints[key] = grad

    for key, parameter in tape.parameters.items():
        if key in adjoints:
            parameter.accumulate(adjoints[key])
