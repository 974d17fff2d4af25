"""
Command-line entry point.

    tle evaluate INPUT [--format table|json] [-o OUT] [--seed N] [--trajectory-mode per-pitch|pooled]
    tle compare INPUT INPUT... [--baseline NAME]
    tle synth [--config synth.json] -o OUT
    tle selftest

Inputs may be written ``NAME=PATH`` to set the model name shown in the reports.
Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 selftest failure.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from . import selftest
from .clustering import DEFAULT_SEED, MAX_SEED
from .core import GROUP_AXES, LabelSchema, LatentDataset
from .dataset_io import SCHEMA_FILE, load_dataset, load_schema, save_dataset, save_schema
from .report import ComparisonTable, render_relative, render_skips, render_table, report_to_json, to_json
from .synth import SynthConfig, generate, load_config
from .timbre_metrics import EvaluationConfig, TrajectoryMode, evaluate_all
from .util import get_env_bool, get_env_int, get_log_level, get_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO_ERROR = 1
EXIT_VALIDATION_ERROR = 2
EXIT_SELFTEST_FAILED = 3


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed '{text}'") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed {text} is outside the 64-bit unsigned range")
    return value


def build_parser(default_seed: int = DEFAULT_SEED) -> argparse.ArgumentParser:
    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")

    evaluation = argparse.ArgumentParser(add_help=False)
    evaluation.add_argument("--schema", type=Path, help="label schema JSON, the default schema when omitted")
    evaluation.add_argument("-o", "--output", "--out", dest="output", type=Path,
                            help="write the artifact here instead of standard output")
    evaluation.add_argument("--format", choices=("table", "json"), default="table")
    evaluation.add_argument("--seed", type=_seed, default=default_seed,
                            help=f"purity clustering seed (default {default_seed:#x})")
    evaluation.add_argument("--trajectory-mode", choices=[mode.value for mode in TrajectoryMode],
                            default=TrajectoryMode.PER_PITCH.value)
    evaluation.add_argument("--dims", type=int, help="embedding dimensionality of split inputs without meta.json")

    parser = argparse.ArgumentParser(prog="tle", description="Evaluate the timbre structure of latent spaces.")
    subcommands = parser.add_subparsers(dest="subcommand", required=True)

    evaluate = subcommands.add_parser("evaluate", parents=[verbosity, evaluation], help="evaluate one model")
    evaluate.add_argument("input", help="dataset path, optionally NAME=PATH")

    compare = subcommands.add_parser("compare", parents=[verbosity, evaluation], help="compare models side by side")
    compare.add_argument("inputs", nargs="+", help="dataset paths, optionally NAME=PATH")
    compare.add_argument("--baseline", help="model name to report relative changes against")
    compare.add_argument("--marker", default="*", help="suffix of the best value per column")

    synthesize = subcommands.add_parser("synth", parents=[verbosity], help="generate a synthetic dataset")
    synthesize.add_argument("--config", type=Path, help="SynthConfig JSON, defaults for absent fields")
    synthesize.add_argument("-o", "--output", "--out", dest="output", type=Path, required=True,
                            help="a .csv file for combined CSV, otherwise a directory for the split format")
    synthesize.add_argument("--seed", type=_seed, help="override the config seed")

    subcommands.add_parser("selftest", parents=[verbosity], help="run the embedded oracle checks")
    return parser


def _split_input(argument: str) -> tuple[Optional[str], Path]:
    name, separator, path = argument.partition("=")
    if separator and name and not Path(argument).exists():
        return name, Path(path)
    return None, Path(argument)


def _load_inputs(arguments: list[str], args: argparse.Namespace) -> list[LatentDataset]:
    schema = load_schema(args.schema) if args.schema else None
    datasets = []
    for argument in arguments:
        name, path = _split_input(argument)
        datasets.append(load_dataset(path, dims=args.dims, schema=schema, model_name=name))
    return datasets


def _present_labels(ds: LatentDataset) -> dict[str, tuple[str, ...]]:
    return {axis: tuple(label for label, count in ds.counts(axis).items() if count) for axis in GROUP_AXES}


def _check_same_labels(datasets: list[LatentDataset]) -> None:
    reference = _present_labels(datasets[0])
    for ds in datasets[1:]:
        present = _present_labels(ds)
        for axis in GROUP_AXES:
            if present[axis] != reference[axis]:
                missing = sorted(set(reference[axis]) ^ set(present[axis]))
                raise ValueError(f"schema mismatch: {ds.model_name} and {datasets[0].model_name} "
                                 f"differ in {axis} labels {', '.join(missing)}")


def _write(payload: bytes, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(payload.decode("utf-8"))
        sys.stdout.flush()
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_bytes(payload)
    logger.info("Wrote %s.", output)


def _evaluation_config(args: argparse.Namespace) -> EvaluationConfig:
    return EvaluationConfig(seed=args.seed, trajectory_mode=args.trajectory_mode)


def run_evaluate(args: argparse.Namespace) -> int:
    ds, = _load_inputs([args.input], args)
    report = evaluate_all(ds, _evaluation_config(args))
    if args.format == "json":
        payload = report_to_json(report)
    else:
        payload = (render_table(ComparisonTable.from_reports([report])) + render_skips(report)).encode("utf-8")
    _write(payload, args.output)
    return EXIT_OK


def run_compare(args: argparse.Namespace) -> int:
    if len(args.inputs) < 2:
        raise ValueError(f"compare needs at least 2 inputs, got {len(args.inputs)}")
    datasets = _load_inputs(args.inputs, args)
    _check_same_labels(datasets)
    config = _evaluation_config(args)
    cmp = ComparisonTable.from_reports(evaluate_all(ds, config) for ds in datasets)
    if args.format == "json":
        payload = to_json(cmp)
    else:
        text = render_table(cmp, marker=args.marker)
        if args.baseline:
            text += render_relative(cmp, args.baseline)
        payload = text.encode("utf-8")
    _write(payload, args.output)
    return EXIT_OK


def run_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else SynthConfig()
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    ds = generate(config)
    save_dataset(ds, args.output)
    if config.label_schema != LabelSchema():
        directory = args.output.parent if args.output.suffix.lower() == ".csv" else args.output
        save_schema(config.label_schema, directory / SCHEMA_FILE)
        logger.info("Wrote the non-default schema to %s.", directory / SCHEMA_FILE)
    return EXIT_OK


def run_selftest(args: argparse.Namespace) -> int:
    results = selftest.run_checks()
    sys.stdout.write(selftest.render_results(results))
    if all(result.passed for result in results):
        return EXIT_OK
    logger.error("%d selftest check(s) failed.", sum(not result.passed for result in results))
    return EXIT_SELFTEST_FAILED


COMMANDS = {
    "evaluate": run_evaluate,
    "compare": run_compare,
    "synth": run_synth,
    "selftest": run_selftest,
}


def _enable_tracing() -> bool:
    try:
        from opentelemetry import trace
        from opentelemetry.sdk.trace import TracerProvider
        from opentelemetry.sdk.trace.export import ConsoleSpanExporter, SimpleSpanProcessor
    except ModuleNotFoundError:
        logger.error("Required libraries for tracing not installed.")
        logger.error("Please make sure opentelemetry-sdk is installed.")
        return False
    provider = TracerProvider()
    provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter(out=sys.stderr)))
    trace.set_tracer_provider(provider)
    logger.info("Tracing is enabled.")
    return True


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv(override=False)
    root_logger = get_logger("timbre_latent_eval", log_level=get_log_level("TLE_LOG_LEVEL"),
                             log_file_name=os.getenv("TLE_LOG_FILE"))
    default_seed = get_env_int("TLE_SEED", DEFAULT_SEED, logger, minimum=0, maximum=MAX_SEED)
    args = build_parser(default_seed).parse_args(argv)
    if args.verbose:
        get_logger("timbre_latent_eval", log_level=logging.INFO)
    if get_env_bool("TLE_ENABLE_TRACING", False) and not _enable_tracing():
        return EXIT_IO_ERROR
    try:
        return COMMANDS[args.subcommand](args)
    except OSError as e:
        root_logger.error("I/O error: %s", e)
        return EXIT_IO_ERROR
    except ValueError as e:
        root_logger.error("Invalid input: %s", e)
        return EXIT_VALIDATION_ERROR


if __name__ == "__main__":
    sys.exit(main())
