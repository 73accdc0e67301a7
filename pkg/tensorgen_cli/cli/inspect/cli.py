# pylint: disable=import-outside-toplevel

from pathlib import Path

import click

from tensorgen_cli.cli.base_command import BaseCommand
from tensorgen_cli.cli.pipeline_runner import exit_on_error
from tensorgen_cli.cli.shared_options import input_path_argument


@click.command("inspect", cls=BaseCommand)
@input_path_argument()
@exit_on_error
def cli(input_path: Path, json_output: bool = False) -> None:
    """
    Prints a summary of a dataset file (CSV or HDF5).
    """
    from tensorgen_cli.cli.inspect.tasks.report import main as report

    report(input_path, json_output=json_output)
