"""
Memory-frame selection for segmenting frame t.

Every policy returns strictly increasing indices within [0, t-1].
"""
import enum
import logging
from dataclasses import dataclass
from typing import List, Optional

from constants import DEFAULT_EVERY_K, DEFAULT_MEMORY_FRAMES_N
from utils.errors import ConfigError, ContractError


class PolicyKind(enum.Enum):
    FIRST_ONLY = "first"
    PREVIOUS_ONLY = "prev"
    FIRST_AND_PREVIOUS = "first-prev"
    EVERY_K = "every-k"
    FIXED_N = "fixed-n"


@dataclass(frozen=True)
class MemoryPolicy:
    kind: PolicyKind
    k: Optional[int] = None
    n: Optional[int] = None

    def __post_init__(self):
        if self.kind == PolicyKind.EVERY_K and (self.k is None or self.k < 1):
            raise ContractError(f"MemoryPolicy: every-k needs k >= 1, got {self.k=}")
        if self.kind == PolicyKind.FIXED_N and (self.n is None or self.n < 2):
            raise ContractError(f"MemoryPolicy: fixed-n needs n >= 2, got {self.n=}")

    @classmethod
    def first_only(cls) -> "MemoryPolicy":
        return cls(PolicyKind.FIRST_ONLY)

    @classmethod
    def previous_only(cls) -> "MemoryPolicy":
        return cls(PolicyKind.PREVIOUS_ONLY)

    @classmethod
    def first_and_previous(cls) -> "MemoryPolicy":
        return cls(PolicyKind.FIRST_AND_PREVIOUS)

    @classmethod
    def every_k(cls, k: int) -> "MemoryPolicy":
        return cls(PolicyKind.EVERY_K, k=k)

    @classmethod
    def fixed_n(cls, n: int) -> "MemoryPolicy":
        return cls(PolicyKind.FIXED_N, n=n)


def policy_label(policy: MemoryPolicy) -> str:
    if policy.kind == PolicyKind.EVERY_K:
        return f"{policy.kind.value}:{policy.k}"
    if policy.kind == PolicyKind.FIXED_N:
        return f"{policy.kind.value}:{policy.n}"
    return policy.kind.value


def parse_policy(text: str) -> MemoryPolicy:
    """
    first | prev | first-prev | every-k:K | fixed-n:N
    """
    name, _, argument = text.strip().partition(":")
    try:
        kind = PolicyKind(name)
    except ValueError as exc:
        raise ConfigError(f"parse_policy: unknown memory policy {text!r}") from exc
    if kind in (PolicyKind.EVERY_K, PolicyKind.FIXED_N):
        if not argument:
            raise ConfigError(f"parse_policy: {text!r} needs an integer argument, e.g. {name}:7")
        try:
            value = int(argument)
        except ValueError as exc:
            raise ConfigError(f"parse_policy: {argument=} in {text!r} is not an integer") from exc
        try:
            return MemoryPolicy.every_k(value) if kind == PolicyKind.EVERY_K else MemoryPolicy.fixed_n(value)
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc
    if argument:
        raise ConfigError(f"parse_policy: {name!r} takes no argument, got {text!r}")
    return MemoryPolicy(kind)


def all_policies(every_k: int = DEFAULT_EVERY_K, fixed_n: int = DEFAULT_MEMORY_FRAMES_N) -> List[MemoryPolicy]:
    return [
        MemoryPolicy.first_only(),
        MemoryPolicy.previous_only(),
        MemoryPolicy.first_and_previous(),
        MemoryPolicy.every_k(every_k),
        MemoryPolicy.fixed_n(fixed_n),
    ]


ALL_POLICY_LABELS = [policy_label(policy) for policy in all_policies()]


def _evenly_spaced(t: int, n: int) -> List[int]:
    # round(i·(t-1)/(n-1)) with halves rounded up, in integer arithmetic
    last, gaps = t - 1, n - 1
    return [(2 * i * last + gaps) // (2 * gaps) for i in range(n)]


def select(t: int, policy: MemoryPolicy) -> List[int]:
    if t < 1:
        raise ContractError(f"select: {t=} must be >= 1, frame 0 is the annotated frame")
    kind = policy.kind
    if kind == PolicyKind.FIRST_ONLY:
        indices = [0]
    elif kind == PolicyKind.PREVIOUS_ONLY:
        indices = [t - 1]
    elif kind == PolicyKind.FIRST_AND_PREVIOUS:
        indices = [0, t - 1]
    elif kind == PolicyKind.EVERY_K:
        indices = list(range(0, t, policy.k)) + [t - 1]
    elif t <= policy.n:
        indices = list(range(t))
    else:
        indices = _evenly_spaced(t, policy.n)
    selected = sorted(set(indices))
    logging.debug(f"select: {t=}, policy={policy_label(policy)}, {selected=}")  # pylint: disable=W1203
    return selected
