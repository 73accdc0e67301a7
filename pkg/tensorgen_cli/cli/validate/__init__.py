from tensorgen_cli.cli.validate.cli import cli

__all__ = ["cli"]
