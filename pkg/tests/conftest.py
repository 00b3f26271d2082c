import os
from typing import Callable, Iterable, List, Optional

import numpy as np
import pytest
from dotenv import load_dotenv

from backbone.config import BackboneConfig
from constants import SLOW_TESTS_ENV
from data_synth.config import SynthConfig
from data_synth.sequences import make_pretrain_clip
from data_synth.transforms import make_rng
from pipeline.model import ModelConfig, build_model
from tensor_core.grad_check import parameter_finite_diff, relative_error
from tensor_core.tensor import Parameter, Tape, backward


def pytest_collection_modifyitems(config, items):
    load_dotenv()
    if os.environ.get(SLOW_TESTS_ENV) == "1":
        return
    skip_slow = pytest.mark.skip(reason=f"set {SLOW_TESTS_ENV}=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


def tiny_model_config(**overrides) -> ModelConfig:
    params = dict(
        channels=8,
        d_k=4,
        decoder_channels=4,
        dtype="float64",
        backbone=BackboneConfig(stage_channels=[4, 4, 8], mask_encoder_channels=[2, 2, 4], stem_channels=4),
    )
    params.update(overrides)
    return ModelConfig(**params)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def tiny_model(tiny_config):
    return build_model(tiny_config, seed=0)


def small_synth_config(size: int = 32, num_objects: int = 1) -> SynthConfig:
    return SynthConfig(
        height=size,
        width=size,
        num_objects=num_objects,
        sprite_size_min=size / 4,
        sprite_size_max=size / 2.5,
        min_visible_pixels=8,
    )


@pytest.fixture
def small_clip():
    return make_pretrain_clip(make_rng(3), 1, 32, 32, small_synth_config(32), dtype="float64")


@pytest.fixture
def grad_checker() -> Callable:
    """
    Max-abs-normalised relative error between tape gradients and central
    differences over the given parameters, optionally on a subset of entries.
    """

    def check(
        loss_fn: Callable,
        parameters: Iterable[Parameter],
        max_entries: Optional[int] = None,
        seed: int = 0,
    ) -> float:
        parameters = list(parameters)
        for parameter in parameters:
            parameter.zero_grad()
        with Tape() as tape:
            loss = loss_fn()
        backward(tape, loss)
        picker = np.random.default_rng(seed)
        analytic: List[float] = []
        numeric: List[float] = []
        for parameter in parameters:
            indices = list(np.ndindex(parameter.shape))
            if max_entries is not None and len(indices) > max_entries:
                chosen = picker.choice(len(indices), size=max_entries, replace=False)
                indices = [indices[i] for i in chosen]
            estimate = parameter_finite_diff(loss_fn, parameter, indices=indices)
            for index in indices:
                analytic.append(parameter.gradient.data[index])
                numeric.append(estimate[index])
        return relative_error(np.array(analytic), np.array(numeric))

    return check


@pytest.fixture
def make_synth_config() -> Callable[..., SynthConfig]:
    return small_synth_config
