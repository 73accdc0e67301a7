import click

from tensorgen_cli.cli.generate import cli as generate
from tensorgen_cli.cli.inspect import cli as inspect_
from tensorgen_cli.cli.recipes import cli as recipes
from tensorgen_cli.cli.validate import cli as validate


@click.group(
    help="Generates synthetic tensor datasets with known ground truth.",
    commands={
        "generate": generate,
        "validate": validate,
        "inspect": inspect_,
        "recipes": recipes,
    },
)
@click.version_option(package_name="tensorgen-cli")
def cli() -> None:  # pylint: disable=missing-function-docstring
    pass


if __name__ == "__main__":
    cli()  # pylint: disable=no-value-for-parameter
