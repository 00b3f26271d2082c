import os

import numpy as np
import pytest

from attention.blocks import ca_block
from interactive_transformer import (
    BLOCK_NAMES,
    decoder_self,
    dump_attention_maps,
    encode,
    fim,
    forward,
    gate_memory,
    init_transformer_params,
)
from tensor_core.ops import layer_norm, mul, sum_all
from tensor_core.serialization import read_tensor_file
from tensor_core.tensor import Parameter, Tape, Tensor, backward
from utils.errors import DimensionError

CHANNELS = 8
HW = 4
FRAMES = 2


@pytest.fixture
def params(rng):
    return init_transformer_params(CHANNELS, 4, rng, "float64")


@pytest.fixture
def inputs(rng):
    m_ori = Tensor(rng.normal(size=(FRAMES * HW, CHANNELS)))
    m_e = Tensor(rng.normal(size=(FRAMES * HW, CHANNELS)))
    q_ori = Tensor(rng.normal(size=(HW, CHANNELS)))
    return m_ori, m_e, q_ori


def test_gate_with_ones_is_exact(inputs):
    m_ori, _, _ = inputs
    gated = gate_memory(Tensor(np.ones(m_ori.shape)), m_ori)
    np.testing.assert_array_equal(gated.data, m_ori.data)


def test_zero_mask_embedding_leaves_normalised_query(params, inputs):
    m_ori, _, q_ori = inputs
    m_sa = encode(m_ori, params)
    q_sa = decoder_self(q_ori, params)
    _, q_out = fim(m_sa, q_sa, m_ori, Tensor(np.zeros(m_ori.shape)), params)
    block = params.fim_query_ca
    expected = layer_norm(q_sa, block.ln_gamma.value, block.ln_beta.value, params.eps)
    np.testing.assert_allclose(q_out.data, expected.data, atol=1e-6)


def test_forward_state_shapes(params, inputs):
    m_ori, m_e, q_ori = inputs
    state = forward(m_ori, m_e, q_ori, params)
    for name in ("m_sa", "m_e", "m_x", "m_out"):
        assert getattr(state, name).shape == (FRAMES * HW, CHANNELS)
    for name in ("q_sa", "q_out", "t_out"):
        assert getattr(state, name).shape == (HW, CHANNELS)
    assert state.attention == {}


def test_forward_matches_explicit_composition(params, inputs):
    m_ori, m_e, q_ori = inputs
    state = forward(m_ori, m_e, q_ori, params)
    m_sa = encode(m_ori, params)
    q_sa = decoder_self(q_ori, params)
    m_x = mul(m_e, m_ori)
    m_out = ca_block(m_sa, q_sa, q_sa, params.fim_mem_ca, eps=params.eps)
    q_out = ca_block(q_sa, m_sa, m_x, params.fim_query_ca, eps=params.eps)
    t_out = ca_block(q_out, m_out, m_out, params.dec_ca, eps=params.eps)
    np.testing.assert_allclose(state.t_out.data, t_out.data, atol=1e-12)


def test_interaction_bypass(params, inputs):
    m_ori, m_e, q_ori = inputs
    state = forward(m_ori, m_e, q_ori, params, use_fim=False)
    np.testing.assert_array_equal(state.m_out.data, state.m_sa.data)
    np.testing.assert_array_equal(state.q_out.data, state.q_sa.data)
    with_fim = forward(m_ori, m_e, q_ori, params, use_fim=True)
    assert not np.allclose(with_fim.t_out.data, state.t_out.data)


def test_attention_maps_collected(params, inputs):
    m_ori, m_e, q_ori = inputs
    state = forward(m_ori, m_e, q_ori, params, collect_attention=True)
    assert set(state.attention) == set(BLOCK_NAMES)
    n_m = FRAMES * HW
    assert state.attention["enc_sa"].shape == (n_m, n_m)
    assert state.attention["dec_sa"].shape == (HW, HW)
    assert state.attention["fim_mem_ca"].shape == (n_m, HW)
    assert state.attention["fim_query_ca"].shape == (HW, n_m)
    assert state.attention["dec_ca"].shape == (HW, n_m)


def test_forward_dimension_errors(params, inputs, rng):
    m_ori, m_e, q_ori = inputs
    with pytest.raises(DimensionError):
        forward(Tensor(rng.normal(size=(7, CHANNELS))), Tensor(rng.normal(size=(7, CHANNELS))), q_ori, params)
    with pytest.raises(DimensionError):
        forward(m_ori, Tensor(rng.normal(size=(HW, CHANNELS))), q_ori, params)
    with pytest.raises(DimensionError):
        forward(m_ori, m_e, Tensor(rng.normal(size=(HW, CHANNELS + 1))), params)


def test_block_parameters_are_independent(params):
    names = [parameter.name for parameter in params.parameters()]
    assert len(names) == len(set(names)) == 5 * len(BLOCK_NAMES)


def test_forward_gradients(params, rng, grad_checker):
    for block in params.blocks().values():
        block.ln_gamma.assign(rng.normal(1.0, 0.3, CHANNELS))
        block.ln_beta.assign(rng.normal(0.0, 0.3, CHANNELS))
    m_ori = Parameter("m_ori", rng.normal(size=(FRAMES * HW, CHANNELS)), dtype="float64")
    m_e = Parameter("m_e", rng.normal(size=(FRAMES * HW, CHANNELS)), dtype="float64")
    q_ori = Parameter("q_ori", rng.normal(size=(HW, CHANNELS)), dtype="float64")
    weights = Tensor(np.random.default_rng(5).normal(size=(HW, CHANNELS)))

    def loss_fn():
        state = forward(m_ori.value, m_e.value, q_ori.value, params)
        return sum_all(mul(state.t_out, weights))

    parameters = [m_ori, m_e, q_ori, *params.parameters()]
    assert grad_checker(loss_fn, parameters, max_entries=12) < 1e-5


def test_dump_attention_maps(params, inputs, tmp_path):
    m_ori, m_e, q_ori = inputs
    state = forward(m_ori, m_e, q_ori, params, collect_attention=True)
    dump_attention_maps(state.attention, str(tmp_path), frame_index=3, object_id=2)
    for name in BLOCK_NAMES:
        path = os.path.join(str(tmp_path), f"f00003_o2_{name}.sitt")
        np.testing.assert_allclose(read_tensor_file(path).data, state.attention[name])


def _randomise_norms(params, rng):
    for block in params.blocks().values():
        block.ln_gamma.assign(rng.normal(1.0, 0.3, CHANNELS))
        block.ln_beta.assign(rng.normal(0.0, 0.3, CHANNELS))


def test_frame_order_in_memory_is_immaterial(params, inputs):
    m_ori, m_e, q_ori = inputs
    swap = np.concatenate([np.arange(HW, 2 * HW), np.arange(HW)])
    state = forward(m_ori, m_e, q_ori, params)
    swapped = forward(Tensor(m_ori.data[swap]), Tensor(m_e.data[swap]), q_ori, params)
    np.testing.assert_allclose(swapped.m_out.data, state.m_out.data[swap], atol=1e-6)
    np.testing.assert_allclose(swapped.t_out.data, state.t_out.data, atol=1e-6)


def test_duplicated_memory_frame_changes_nothing(params, rng):
    frame = rng.normal(size=(HW, CHANNELS))
    mask = rng.normal(size=(HW, CHANNELS))
    q_ori = Tensor(rng.normal(size=(HW, CHANNELS)))
    single = forward(Tensor(frame), Tensor(mask), q_ori, params)
    doubled = forward(Tensor(np.vstack([frame, frame])), Tensor(np.vstack([mask, mask])), q_ori, params)
    np.testing.assert_allclose(doubled.m_sa.data[:HW], doubled.m_sa.data[HW:], atol=1e-12)
    np.testing.assert_allclose(doubled.m_sa.data[:HW], single.m_sa.data, atol=1e-10)
    np.testing.assert_allclose(doubled.t_out.data, single.t_out.data, atol=1e-10)


def test_every_block_parameter_receives_gradient(params, inputs, rng):
    _randomise_norms(params, rng)
    m_ori, m_e, q_ori = inputs
    weights = Tensor(np.random.default_rng(9).normal(size=(HW, CHANNELS)))
    for parameter in params.parameters():
        parameter.zero_grad()
    with Tape() as tape:
        state = forward(m_ori, m_e, q_ori, params)
        loss = sum_all(mul(state.t_out, weights))
    backward(tape, loss)
    silent = [p.name for p in params.parameters() if not np.any(p.gradient.data != 0.0)]
    assert silent == []
