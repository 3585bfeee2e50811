#!/usr/bin/env python3

import logging
import sys
from argparse import ArgumentParser, ArgumentTypeError, RawDescriptionHelpFormatter
from functools import partial, reduce
from pathlib import Path
from textwrap import dedent
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from ..exceptions import IVCLError
from ..logging_utils import LogDict
from . import commands
from .configuration import dump_config, parse_config
from .logging_utils import configure_logging, dump_logging_configuration

CONFIG_DUMP = "config.txt"


def parse_overrides(extras: Sequence[str]) -> List[Tuple[str, str]]:
    """(key, value text) pairs of `--key value` and `--key=value` arguments.

    Raises:
        ValueError: an argument is not an override
    """
    overrides = []
    it = iter(extras)
    for arg in it:
        if not arg.startswith("--") or len(arg) == 2:
            raise ValueError(f"unrecognized argument {arg!r}")
        key, sep, value = arg[2:].partition("=")
        if not sep:
            if (value := next(it, None)) is None:
                raise ValueError(f"missing value for {arg!r}")
        overrides.append((key.replace("-", "_"), value))
    return overrides


def get_input_arguments(argv: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    def _with_ext(*ext: str) -> Callable[[Path], Path]:
        def _check(p: Path) -> Path:
            if p.suffix not in ext:
                raise ArgumentTypeError(f"{p}: extension not in {ext}.")
            return p

        return _check

    def _is_file(p: Path) -> Path:
        if not p.is_file():
            raise ArgumentTypeError(f"{p} is not a file.")
        return p

    def _is_dir(p: Path) -> Path:
        if not p.is_dir():
            raise ArgumentTypeError(f"{p} is not a directory.")
        return p

    def _existing_file(*fns: Callable[[Path], Path]) -> Callable[[str], Path]:
        def _check(s: str) -> Path:
            if not (p := Path(s)).exists():
                raise ArgumentTypeError(f"{p} not found.")
            return reduce(lambda p, fn: fn(p), fns, p)

        return _check

    parser = ArgumentParser(
        prog="ivcl",
        formatter_class=RawDescriptionHelpFormatter,
        description="Pretrain, finetune and analyze image-video models on toy reasoning worlds.",
        epilog=dedent(
            """\
            Any configuration value can be overridden after the subcommand with
            '--section.field value' or '--field value' when the field name is unique.
            """
        ),
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    # Overrides are unknown options, so prefixes of known ones must not match.
    add_parser = partial(subparsers.add_parser, allow_abbrev=False)
    parser_gen_data = add_parser("gen-data", description="Generate the toy-world datasets.")
    parser_pretrain = add_parser(
        "pretrain", description="Pretrain a model with the configured objective."
    )
    parser_finetune = add_parser(
        "finetune", description="Finetune a model on the reasoning task and evaluate it on test."
    )
    parser_eval = add_parser("eval", description="Evaluate a finetuned model.")
    parser_ablate = add_parser("ablate", description="Run the configured ablation sweeps.")
    parser_visualize = add_parser(
        "visualize", description="Export per-slot attention rollout heatmaps."
    )
    parser_gradcheck = add_parser(
        "gradcheck", description="Compare every analytic gradient with central differences."
    )
    parser_dump_logging_cfg = add_parser(
        "dump-logging-cfg",
        formatter_class=RawDescriptionHelpFormatter,
        description=dedent(
            """\
            Dump the default logging configuration in YAML format.
            The configuration can then be reused via the argument '--logging-configuration'.
        """
        ),
    )

    configured = (parser_gen_data, parser_pretrain, parser_finetune, parser_eval, parser_ablate, parser_visualize)
    for subparser in (*configured, parser_gradcheck):
        subparser.add_argument(
            "-l",
            "--logging-configuration",
            type=_existing_file(_is_file, _with_ext(".yml", ".yaml")),
            help="Yaml file with the logging configuration",
            metavar="FILE",
        )
    for subparser in configured:
        subparser.set_defaults(needs_config=True)
        subparser.add_argument(
            "-c",
            "--configuration",
            type=_existing_file(_is_file),
            help="Text file of 'key = value' lines. Defaults are used for missing keys",
            metavar="FILE",
        )
        subparser.add_argument(
            "-o",
            "--output-dir",
            type=Path,
            help="Directory receiving the outputs. Defaults to the run.output_dir setting",
            metavar="DIR",
        )
    for subparser in (parser_pretrain, parser_finetune, parser_eval):
        subparser.add_argument(
            "-d",
            "--data-dir",
            type=_existing_file(_is_dir),
            help="Directory of datasets written by gen-data. Episodes are generated when absent",
            metavar="DIR",
        )
    for subparser in (parser_finetune, parser_eval, parser_visualize):
        subparser.add_argument(
            "-k",
            "--checkpoint",
            type=_existing_file(_is_file, _with_ext(".ckpt")),
            help="Checkpoint to start from",
            metavar="FILE",
        )
    parser_eval.add_argument(
        "-p",
        "--partition",
        choices=("val", "test"),
        default="test",
        help="Partition to evaluate. Defaults to %(default)s",
    )
    parser_gradcheck.add_argument(
        "-n",
        "--max-entries",
        type=int,
        default=4,
        help="Entries checked per tensor. Defaults to %(default)s",
        metavar="INT",
    )

    parser_gen_data.set_defaults(function=commands.gen_data)
    parser_pretrain.set_defaults(function=commands.pretrain)
    parser_finetune.set_defaults(function=commands.finetune)
    parser_eval.set_defaults(function=commands.eval_)
    parser_ablate.set_defaults(function=commands.ablate)
    parser_visualize.set_defaults(function=commands.visualize)
    parser_gradcheck.set_defaults(function=commands.gradcheck)
    parser_dump_logging_cfg.set_defaults(function=dump_logging_configuration)

    namespace, extras = parser.parse_known_args(argv)
    kwargs = vars(namespace)
    if extras and not kwargs.get("needs_config"):
        parser.error(f"unrecognized arguments: {' '.join(extras)}")
    try:
        kwargs["overrides"] = parse_overrides(extras)
    except ValueError as exc:
        parser.error(str(exc))
    return kwargs


def _error_line(exc: Exception) -> str:
    message = " ".join(str(exc).split())
    return f"error: {type(exc).__name__}: {message}"


def main(argv: Optional[Sequence[str]] = None) -> None:
    kwargs = get_input_arguments(argv)
    configure_logging(kwargs.get("logging_configuration"))
    kwargs["logger"] = logger = logging.getLogger("cli")
    logger.debug("Arguments:%s", LogDict(kwargs))
    try:
        if kwargs.get("needs_config"):
            kwargs["config"] = config = parse_config(kwargs.get("configuration"), kwargs["overrides"])
            kwargs["output_dir"] = output_dir = kwargs.get("output_dir") or config.output_dir
            output_dir.mkdir(parents=True, exist_ok=True)
            dump_config(output_dir / CONFIG_DUMP, config)
        kwargs["function"](**kwargs)
    except (IVCLError, OSError, ValidationError) as exc:
        logger.error("%s failed: %s", kwargs["subcommand"], exc)
        print(_error_line(exc), file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
