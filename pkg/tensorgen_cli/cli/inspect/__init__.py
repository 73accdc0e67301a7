from tensorgen_cli.cli.inspect.cli import cli

__all__ = ["cli"]
