# pylint: disable=import-outside-toplevel

import json
import typing as t
from pathlib import Path

import click
from loguru import logger
from rich.console import Console
from rich.table import Table

from tensorgen_cli.cli.pipeline_runner import exit_on_error
from tensorgen_cli.cli.shared_callbacks import output_path_callback
from tensorgen_cli.cli.shared_options import overwrite_flag
from tensorgen_cli.core.errors import OutputExistsError

cli = click.Group(help="Lists and prints the example configs.")


@cli.command("list")
def list_recipes() -> None:
    """
    Lists the algorithm families and the recipe that targets each of them.
    """
    from tensorgen_cli.lib.recipes import list_recipes as get_all

    table = Table(title="Recipes", title_style="bold green")
    table.add_column("Name", style="bold cyan")
    table.add_column("Family")
    table.add_column("Features")
    table.add_column("Algorithms")
    table.add_column("Data")
    for recipe in get_all():
        table.add_row(recipe.name, recipe.family, recipe.features, recipe.algorithms, recipe.data)
    Console().print(table)


@cli.command("show")
@click.argument("name")
@click.option(
    "-o",
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    callback=output_path_callback,
    help="Write the config to this file instead of stdout.",
)
@overwrite_flag()
@exit_on_error
def show_recipe(name: str, out: t.Optional[Path] = None, overwrite: bool = False) -> None:
    """
    Prints the config of recipe NAME, or writes it to a file with ``--out``.
    """
    from tensorgen_cli.lib.recipes import get_recipe

    text = json.dumps(get_recipe(name).document(), indent=2) + "\n"
    if out is None:
        click.echo(text, nl=False)
        return
    if out.exists() and not overwrite:
        raise OutputExistsError(f"{out} already exists, use --overwrite to replace it")
    out.write_text(text, encoding="utf-8")
    logger.success(f"Recipe {name} saved to {out}")
