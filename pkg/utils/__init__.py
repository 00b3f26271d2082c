from .errors import ConfigError, ContractError, DimensionError, FormatError, MemoryLookupError, NonFiniteError
