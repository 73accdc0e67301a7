import os
import typing as t
from pathlib import Path

import click
from pathvalidate import ValidationError, validate_filename

from tensorgen_cli.cli.logger import configure_logger


def verbose_callback(ctx: click.Context, _: click.Parameter, value: bool) -> bool:
    """
    Callback for ``-v/--verbose``.

    Click runs it for every invocation, so the log sink is always bound to the ``sys.stderr`` of
    the running command.
    """
    if not ctx.resilient_parsing:
        configure_logger(verbose=value)
    return value


def output_path_callback(
    ctx: click.Context, _: click.Parameter, value: t.Optional[Path]
) -> t.Optional[Path]:
    """
    Callback for ``-o/--out``.

    Checks that the file name is valid on this platform, tries to create the parent directory if
    it doesn't exist and checks that it is writable. If the callback fails, raises a
    click.BadParameter exception.

    Args:
        ctx (click.Context): click Context
        _: click Parameter
        value (t.Optional[Path]): The output file path

    Returns:
        t.Optional[Path]: The output file path
    """
    if not value or ctx.resilient_parsing:
        return None
    try:
        validate_filename(value.name, platform="auto")
    except ValidationError as e:
        raise click.BadParameter(f"Invalid output file name {value.name!r}: {e}") from e
    parent = value.parent
    try:
        parent.mkdir(parents=True, exist_ok=True)
    except Exception as e:
        raise click.BadParameter(f"Could not create output directory: {e}") from e
    if not os.access(parent, os.W_OK):
        raise click.BadParameter(f"Output directory is not writable: {parent}")
    return value
