"""
Subcommand bodies. Each takes the parsed arguments and the merged RunConfig
and returns the JSON-serialisable summary printed to standard output.
"""
import logging
import os
import sys
from dataclasses import replace
from typing import Dict, List

import numpy as np
import pandas as pd

from cli.run_config import RunConfig
from constants import (
    ATTENTION_DIR,
    BENCH_REPORT_JSON,
    BENCH_REPORT_TXT,
    RUN_MANIFEST_FILE,
)
from data_synth.sequences import clip_seeds, make_sequence
from data_synth.transforms import make_rng
from data_synth.writer import write_dataset
from memory_manager.policy import all_policies, policy_label
from metrics.report import aggregate, evaluate_sequence
from pipeline.model import SitvosModel, load_model
from pipeline.segment import run_video, task_from_label_map
from pipeline.video_io import (
    is_sequence_dir,
    list_png_files,
    list_sequences,
    read_label_map,
    read_sequence,
    write_json,
    write_label_maps,
)
from trainer.stage import run_stage
from utils.bootstrap import get_bootstrapped_mean_ci
from utils.errors import ConfigError, FormatError


def synth(args, config: RunConfig) -> dict:
    synth_config = replace(config.synth, num_objects=args.objects, length=args.length)
    if args.clips < 1:
        raise ConfigError(f"synth: --clips must be >= 1, got {args.clips}")
    clips = []
    for index, seed in enumerate(clip_seeds(config.run.seed, args.clips)):
        print(f"synth: generating clip {index + 1} of {args.clips}...", file=sys.stderr)
        clips.append(
            make_sequence(
                make_rng(seed),
                synth_config.length,
                synth_config.num_objects,
                synth_config.height,
                synth_config.width,
                synth_config,
                seed=seed,
            )
        )
    manifest = write_dataset(args.output, clips, synth_config, meta={"seed": config.run.seed})
    return {"output": args.output, "manifest": manifest, "clips": len(clips)}


def train(args, config: RunConfig) -> dict:
    train_config = config.train
    if args.steps is not None:
        train_config = replace(train_config, max_steps=args.steps)
    result = run_stage(
        args.stage,
        train_config,
        model_config=config.model,
        synth_config=config.synth,
        output_dir=args.output,
        plot=args.plot,
    )
    curve = result.loss_curve
    return {
        "checkpoint": result.checkpoint,
        "stage": args.stage,
        "steps": int(len(curve)),
        "final_loss": float(curve["loss"].iloc[-1]) if len(curve) else None,
    }


def _infer_sequence(model: SitvosModel, directory: str, output: str, config: RunConfig) -> dict:
    frames, label_maps = read_sequence(directory, dtype=model.config.dtype)
    task = task_from_label_map(frames, label_maps[0])
    attention_dir = os.path.join(output, ATTENTION_DIR) if config.run.debug_attention else None
    result = run_video(
        model,
        task,
        config.policy,
        threads=config.run.threads,
        merge_mode=config.memory.merge,
        attention_dir=attention_dir,
    )
    write_label_maps(result.label_maps, output)
    manifest = result.to_manifest(config.policy)
    manifest["sequence"] = os.path.basename(os.path.normpath(directory))
    write_json(manifest, os.path.join(output, RUN_MANIFEST_FILE))
    return manifest


def infer(args, config: RunConfig) -> dict:
    model, _ = load_model(args.checkpoint)
    sequences = list_sequences(args.input)
    single = is_sequence_dir(args.input)
    manifests = {}
    for index, directory in enumerate(sequences):
        name = os.path.basename(os.path.normpath(directory))
        print(f"infer: sequence {name}, {index + 1} of {len(sequences)}...", file=sys.stderr)
        output = args.output if single else os.path.join(args.output, name)
        manifests[name] = _infer_sequence(model, directory, output, config)
    if single:
        return next(iter(manifests.values()))
    summary = {"policy": config.memory.policy, "sequences": manifests}
    write_json(summary, os.path.join(args.output, RUN_MANIFEST_FILE))
    return summary


def _read_predictions(directory: str) -> List[np.ndarray]:
    files = list_png_files(directory)
    if not files:
        raise FormatError(f"_read_predictions: no PNG predictions in {directory}")
    return [read_label_map(path) for path in files]


def _truth_maps(directory: str) -> Dict[int, np.ndarray]:
    _, label_maps = read_sequence(directory)
    return label_maps


def evaluate(args, config: RunConfig) -> dict:
    sequences = list_sequences(args.truth)
    single = is_sequence_dir(args.truth)
    results = []
    for directory in sequences:
        name = os.path.basename(os.path.normpath(directory))
        pred_dir = args.pred if single else os.path.join(args.pred, name)
        results.append(
            evaluate_sequence(name, _read_predictions(pred_dir), _truth_maps(directory), tolerance_px=config.eval.tolerance_px)
        )
    report = aggregate(pd.concat(results, ignore_index=True)).to_dict()
    if args.output:
        write_json(report, args.output)
    return report


def _finite_or_none(value: float):
    return None if value is None or np.isnan(value) else float(value)


def bench_mem(args, config: RunConfig) -> dict:
    """
    Inference and evaluation of the same sequences under all five memory policies.
    """
    model, _ = load_model(args.checkpoint)
    every_k = args.every_k or config.eval.bench_every_k
    fixed_n = args.fixed_n or config.eval.bench_fixed_n
    sequences = [(os.path.basename(os.path.normpath(d)), *read_sequence(d, dtype=model.config.dtype)) for d in list_sequences(args.input)]
    rows = []
    for policy in all_policies(every_k=every_k, fixed_n=fixed_n):
        label = policy_label(policy)
        print(f"bench_mem: running {label}...", file=sys.stderr)
        frame_results, sizes, seconds = [], [], 0.0
        for name, frames, truth in sequences:
            result = run_video(model, task_from_label_map(frames, truth[0]), policy, threads=config.run.threads, merge_mode=config.memory.merge)
            frame_results.append(evaluate_sequence(name, result.label_maps, truth, tolerance_px=config.eval.tolerance_px))
            sizes.extend(result.memory_sizes)
            seconds += result.wall_time_s
        report = aggregate(pd.concat(frame_results, ignore_index=True))
        sequence_jf = ((report.per_sequence["J"] + report.per_sequence["F"]) / 2.0).values
        ci = get_bootstrapped_mean_ci(sequence_jf)
        rows.append(
            {
                "policy": label,
                "J": report.J,
                "F": report.F,
                "JF": report.JF,
                "JF_ci_left": _finite_or_none(ci["ci_left"]),
                "JF_ci_right": _finite_or_none(ci["ci_right"]),
                "mean_memory_size": float(np.mean(sizes)) if sizes else 0.0,
                "wall_time_s": seconds,
            }
        )
        logging.debug(f"bench_mem: {rows[-1]=}")  # pylint: disable=W1203
    table = pd.DataFrame(rows)
    os.makedirs(args.output, exist_ok=True)
    payload = {"rows": rows, "every_k": every_k, "fixed_n": fixed_n}
    write_json(payload, os.path.join(args.output, BENCH_REPORT_JSON))
    with open(os.path.join(args.output, BENCH_REPORT_TXT), "w", encoding="utf-8") as stream:
        stream.write(table.to_string(index=False, float_format=lambda value: f"{value:.4f}") + "\n")
    return payload
