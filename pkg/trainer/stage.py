"""
Training stages.

pretrain: a fresh 3-frame simulated clip per batch entry.
main: frame triples (i, i+d, i+2d) from a pool of long sequences, d uniform in [0, interval_max].
full: pretrain then main, each with its own schedule of max_steps.
"""
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from constants import CHECKPOINT_FILE, LOSS_CURVE_CSV, LOSS_CURVE_PNG, STAGE_FULL, STAGE_MAIN, STAGE_PRETRAIN
from data_synth.config import SynthConfig
from data_synth.sequences import make_pretrain_clip, make_sequence, sample_triple_indices, sub_clip
from data_synth.sprites import Clip
from data_synth.transforms import make_rng
from data_synth.writer import load_dataset
from pipeline.model import ModelConfig, SitvosModel, build_model, save_model
from trainer.config import TrainConfig
from trainer.loss_chart import loss_curve_plot_build_save
from trainer.optim import OptimizerState, poly_lr
from trainer.step import train_clip_step
from utils.errors import ContractError

STAGES = (STAGE_PRETRAIN, STAGE_MAIN, STAGE_FULL)


@dataclass
class StageResult:
    model: SitvosModel
    loss_curve: pd.DataFrame
    checkpoint: Optional[str] = None


class ClipSource:
    """
    Deterministic stream of training batches for one stage.
    """

    def __init__(self, stage: str, config: TrainConfig, synth_config: SynthConfig, rng: np.random.Generator):
        self.stage = stage
        self.config = config
        self.synth_config = synth_config
        self.rng = rng
        self.pool: List[Clip] = []
        if stage == STAGE_MAIN and config.dataset:
            self.pool = [clip for _, clip in load_dataset(config.dataset) if len(clip) >= 3]
            if not self.pool:
                raise ContractError(f"ClipSource: no sequence of 3 or more frames in {config.dataset}")
        elif stage == STAGE_MAIN:
            self.pool = [
                make_sequence(rng, config.sequence_length, config.num_objects, config.crop, config.crop, synth_config)
                for _ in range(config.sequence_pool)
            ]

    def _triple(self) -> Clip:
        for _ in range(self.synth_config.max_attempts):
            sequence = self.pool[int(self.rng.integers(0, len(self.pool)))]
            indices = sample_triple_indices(self.rng, len(sequence), self.config.interval_max)
            clip = sub_clip(sequence, indices)
            if clip.object_ids:
                return clip
        raise ContractError("ClipSource: no triple with a visible object in its first frame")

    def next_clip(self) -> Clip:
        if self.stage == STAGE_PRETRAIN:
            crop = self.config.crop
            return make_pretrain_clip(self.rng, self.config.num_objects, crop, crop, self.synth_config)
        return self._triple()

    def next_batch(self) -> List[Clip]:
        return [self.next_clip() for _ in range(self.config.batch_size)]


def _train_loop(
    model: SitvosModel, stage: str, config: TrainConfig, synth_config: SynthConfig, rng: np.random.Generator,
    output_dir: Optional[str],
) -> List[dict]:
    source = ClipSource(stage, config, synth_config, rng)
    state = OptimizerState(beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    rows = []
    if config.max_steps == 0:
        return rows
    # a single worker prepares the next batch while the current one trains
    with ThreadPoolExecutor(max_workers=1) as executor:
        pending = executor.submit(source.next_batch)
        for step in range(config.max_steps):
            batch = pending.result()
            if step + 1 < config.max_steps:
                pending = executor.submit(source.next_batch)
            lr = poly_lr(step, config.max_steps, config.base_lr, config.poly_power)
            loss = train_clip_step(model, batch, config, state, lr)
            rows.append({"stage": stage, "step": step, "lr": lr, "loss": loss})
            logging.debug(f"run_stage: {stage=}, {step=}, {lr=}, {loss=}")  # pylint: disable=W1203
            if config.log_every and (step + 1) % config.log_every == 0:
                print(f"run_stage: {stage} step {step + 1} of {config.max_steps}, {loss=:.4f}", file=sys.stderr)
            if output_dir and config.checkpoint_every and (step + 1) % config.checkpoint_every == 0:
                save_model(model, os.path.join(output_dir, f"{stage}_step{step + 1:06d}.sitt"))
    return rows


def run_stage(
    stage: str,
    config: TrainConfig,
    model_config: Optional[ModelConfig] = None,
    synth_config: Optional[SynthConfig] = None,
    model: Optional[SitvosModel] = None,
    output_dir: Optional[str] = None,
    plot: bool = False,
) -> StageResult:
    if stage not in STAGES:
        raise ContractError(f"run_stage: unknown {stage=}, expected one of {STAGES}")
    model = model or build_model(model_config, seed=config.seed)
    synth_config = synth_config or SynthConfig(height=config.crop, width=config.crop, num_objects=config.num_objects)
    rng = make_rng(config.seed)
    stages = [STAGE_PRETRAIN, STAGE_MAIN] if stage == STAGE_FULL else [stage]
    rows = []
    for current in stages:
        rows.extend(_train_loop(model, current, config, synth_config, rng, output_dir))
    loss_curve = pd.DataFrame(rows, columns=["stage", "step", "lr", "loss"])

    checkpoint = None
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        checkpoint = os.path.join(output_dir, CHECKPOINT_FILE)
        save_model(model, checkpoint, extra_meta={"stage": stage, "steps": len(rows), "seed": config.seed})
        loss_curve.to_csv(
            os.path.join(output_dir, LOSS_CURVE_CSV), index=False
        )
        if plot and not loss_curve.empty:
            loss_curve_plot_build_save(
                loss_curve, chart_title=f"{stage} loss", file_name=os.path.join(output_dir, LOSS_CURVE_PNG)
            )
    return StageResult(model=model, loss_curve=loss_curve, checkpoint=checkpoint)
