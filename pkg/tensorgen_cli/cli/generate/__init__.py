from tensorgen_cli.cli.generate.cli import cli

__all__ = ["cli"]
