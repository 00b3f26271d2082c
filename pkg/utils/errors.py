class DimensionError(ValueError):
    """Tensor extents or ranks do not fit the operation."""


class ContractError(ValueError):
    """A precondition of an operation is violated."""


class FormatError(ValueError):
    """An input file does not follow the expected on-disk format."""


class MemoryLookupError(KeyError):
    """A requested frame index is not held by a memory bank."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf."""


class ConfigError(ValueError):
    """Unknown or malformed configuration key."""
