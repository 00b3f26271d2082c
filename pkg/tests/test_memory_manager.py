import math

import pytest

from memory_manager import (
    ALL_POLICY_LABELS,
    MemoryPolicy,
    PolicyKind,
    all_policies,
    parse_policy,
    policy_label,
    select,
)
from utils.errors import ConfigError, ContractError


@pytest.mark.parametrize(
    "policy, t, expected",
    [
        (MemoryPolicy.first_only(), 1, [0]),
        (MemoryPolicy.first_only(), 40, [0]),
        (MemoryPolicy.previous_only(), 40, [39]),
        (MemoryPolicy.first_and_previous(), 1, [0]),
        (MemoryPolicy.first_and_previous(), 40, [0, 39]),
        (MemoryPolicy.fixed_n(7), 3, [0, 1, 2]),
        (MemoryPolicy.fixed_n(7), 7, [0, 1, 2, 3, 4, 5, 6]),
        (MemoryPolicy.fixed_n(7), 100, [0, 17, 33, 50, 66, 83, 99]),
        (MemoryPolicy.every_k(12), 30, [0, 12, 24, 29]),
        (MemoryPolicy.every_k(5), 6, [0, 5]),
        (MemoryPolicy.every_k(5), 1, [0]),
    ],
)
def test_select_examples(policy, t, expected):
    assert select(t, policy) == expected


def test_select_sweep_invariants():
    policies = all_policies() + [MemoryPolicy.every_k(1), MemoryPolicy.fixed_n(2), MemoryPolicy.every_k(37)]
    for t in list(range(1, 300)) + list(range(300, 10_001, 97)) + [10_000]:
        for policy in policies:
            indices = select(t, policy)
            assert indices, (t, policy)
            assert all(a < b for a, b in zip(indices, indices[1:]))
            assert 0 <= indices[0] and indices[-1] <= t - 1
            if policy.kind != PolicyKind.PREVIOUS_ONLY:
                assert indices[0] == 0
            if policy.kind in (PolicyKind.PREVIOUS_ONLY, PolicyKind.FIRST_AND_PREVIOUS, PolicyKind.EVERY_K):
                assert indices[-1] == t - 1
            if policy.kind == PolicyKind.FIXED_N:
                assert len(indices) == min(t, policy.n)
                assert indices[-1] == t - 1


def test_fixed_n_spacing_is_even():
    n = 7
    for t in range(n + 1, 2000):
        indices = select(t, MemoryPolicy.fixed_n(n))
        bound = math.ceil((t - 1) / (n - 1))
        gaps = [b - a for a, b in zip(indices, indices[1:])]
        assert max(gaps) <= bound
        assert max(gaps) - min(gaps) <= 1


def test_every_k_memory_size():
    assert len(select(100, MemoryPolicy.every_k(5))) == 21


def test_select_rejects_annotated_frame():
    with pytest.raises(ContractError):
        select(0, MemoryPolicy.first_only())


@pytest.mark.parametrize("text", ["first", "prev", "first-prev", "every-k:5", "fixed-n:7", "fixed-n:12"])
def test_parse_policy_round_trips_label(text):
    assert policy_label(parse_policy(text)) == text


def test_parse_policy_strips_whitespace():
    assert parse_policy("  every-k:3 ") == MemoryPolicy.every_k(3)


@pytest.mark.parametrize("text", ["last", "every-k", "fixed-n:x", "fixed-n:1", "every-k:0", "first:2", ""])
def test_parse_policy_errors(text):
    with pytest.raises(ConfigError):
        parse_policy(text)


def test_policy_validation():
    with pytest.raises(ContractError):
        MemoryPolicy(PolicyKind.EVERY_K)
    with pytest.raises(ContractError):
        MemoryPolicy.fixed_n(1)


def test_default_labels():
    assert ALL_POLICY_LABELS == ["first", "prev", "first-prev", "every-k:5", "fixed-n:7"]
