from .policy import (
    ALL_POLICY_LABELS,
    MemoryPolicy,
    PolicyKind,
    all_policies,
    parse_policy,
    policy_label,
    select,
)
