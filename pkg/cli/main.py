import argparse
import json
import logging
import sys
from typing import List, Optional

from cli import commands
from cli.run_config import load_run_config
from constants import STAGE_PRETRAIN
from trainer.stage import STAGES
from utils.errors import ConfigError


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


COMMANDS = {
    "synth": commands.synth,
    "train": commands.train,
    "infer": commands.infer,
    "eval": commands.evaluate,
    "bench-mem": commands.bench_mem,
}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="flat key=value config file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override one config key"
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog="run_sitvos", description="Video object segmentation toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)

    synth = subparsers.add_parser("synth", help="generate a synthetic dataset")
    _common(synth)
    synth.add_argument("--clips", type=int, default=1)
    synth.add_argument("--length", type=int, default=20)
    synth.add_argument("--objects", type=int, default=1)
    synth.add_argument("--output", type=str, required=True)

    train = subparsers.add_parser("train", help="run a training stage")
    _common(train)
    train.add_argument("--stage", choices=STAGES, default=STAGE_PRETRAIN)
    train.add_argument("--output", type=str, required=True)
    train.add_argument("--steps", type=int, default=None)
    train.add_argument("--plot", action="store_true", help="also save the loss curve as PNG")

    infer = subparsers.add_parser("infer", help="segment a sequence or a dataset of sequences")
    _common(infer)
    infer.add_argument("--checkpoint", type=str, required=True)
    infer.add_argument("--input", type=str, required=True)
    infer.add_argument("--output", type=str, required=True)
    infer.add_argument("--memory-policy", type=str, default=None)
    infer.add_argument("--debug-attention", action="store_true")

    evaluate = subparsers.add_parser("eval", help="score predictions against ground truth")
    _common(evaluate)
    evaluate.add_argument("--pred", type=str, required=True)
    evaluate.add_argument("--truth", type=str, required=True)
    evaluate.add_argument("--output", type=str, default=None)

    bench = subparsers.add_parser("bench-mem", help="compare the five memory policies")
    _common(bench)
    bench.add_argument("--checkpoint", type=str, required=True)
    bench.add_argument("--input", type=str, required=True)
    bench.add_argument("--output", type=str, required=True)
    bench.add_argument("--every-k", type=int, default=None)
    bench.add_argument("--fixed-n", type=int, default=None)
    return parser


def _flag_overrides(args) -> List[str]:
    overrides = []
    if getattr(args, "memory_policy", None):
        overrides.append(f"memory.policy={args.memory_policy}")
    if args.seed is not None:
        overrides += [f"run.seed={args.seed}", f"train.seed={args.seed}"]
    if args.threads is not None:
        overrides.append(f"run.threads={args.threads}")
    if getattr(args, "debug_attention", False):
        overrides.append("run.debug_attention=true")
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """
    Exit code 0 on success. Any failure prints one JSON line
    {"error": kind, "message": text} to standard error and returns 1.
    """
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        config = load_run_config(args.config, list(args.overrides) + _flag_overrides(args))
        summary = COMMANDS[command](args, config)
    except Exception as exc:  # pylint: disable=broad-except
        logging.exception(f"{command} failed")  # pylint: disable=W1203
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0
