import typing as t
from pathlib import Path

import click

from tensorgen_cli.cli.base_command import BaseCommand
from tensorgen_cli.cli.pipeline_runner import PipelineRunner, exit_on_error
from tensorgen_cli.cli.shared_options import config_option, override_options


@click.command("generate", cls=BaseCommand)
@config_option()
@override_options()
@exit_on_error
def cli(config_path: Path, **options: t.Dict[str, t.Any]) -> None:
    """
    Generates a synthetic tensor dataset from a config file.

    The dataset, its ground-truth factors and the manifest are written to the output path of the
    config. ``--seed``, ``--out``, ``--format`` and ``--overwrite`` take precedence over the config
    and are recorded in the manifest.
    """
    runner = PipelineRunner(config_path, **options)
    runner.generate()
