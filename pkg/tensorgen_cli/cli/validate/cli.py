import typing as t
from pathlib import Path

import click

from tensorgen_cli.cli.base_command import BaseCommand
from tensorgen_cli.cli.pipeline_runner import PipelineRunner, exit_on_error
from tensorgen_cli.cli.shared_options import config_option


@click.command("validate", cls=BaseCommand)
@config_option()
@exit_on_error
def cli(config_path: Path, **options: t.Dict[str, t.Any]) -> None:
    """
    Checks a config file without generating anything.

    Prints the config with every default filled in.
    """
    runner = PipelineRunner(config_path, **options)
    runner.validate()
