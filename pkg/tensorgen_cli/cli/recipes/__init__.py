from tensorgen_cli.cli.recipes.cli import cli

__all__ = ["cli"]
