from pathlib import Path
from typing import Callable

import click

from tensorgen_cli.cli.shared_callbacks import output_path_callback


def add_options(options: list[Callable]) -> Callable:
    """
    Add options to a click command.

    Args:
        options (t.List[t.Callable]): The options to add

    Returns:
        t.Callable: A decorator that adds the options to a click command
    """

    def _add_options(func: Callable) -> Callable:
        for option in reversed(options):
            func = option(func)
        return func

    return _add_options


def override_options() -> Callable:
    """
    Add the command-line overrides of a generation config to a click command.

    Returns:
        t.Callable: A decorator that adds the ``out``, ``fmt``, ``seed`` and ``overwrite`` options
        to a click command
    """

    return add_options([out_option(), format_option(), seed_option(), overwrite_flag()])


def config_option() -> Callable:
    """
    Add the ``-c/--config`` option to a click command.

    Returns:
        t.Callable: A decorator that adds the ``config`` option to a click command
    """
    _config_option = [
        click.option(
            "-c",
            "--config",
            "config_path",
            required=True,
            type=click.Path(exists=True, dir_okay=False, resolve_path=True, path_type=Path),
            help="""
            The generation config (JSON).

            A manifest written by ``generate`` is accepted too, and replays the dataset it
            describes.
            """,
        )
    ]
    return add_options(_config_option)


def input_path_argument() -> Callable:
    """
    Add the ``input_path`` argument to a click command.

    The ``input_path`` argument is the data file of a dataset: a ``.csv`` coordinate file (its
    sibling files are found by stem) or an ``.h5``/``.hdf5`` file.

    Returns:
        t.Callable: A decorator that adds the ``input_path argument`` to a click command
    """
    _input_path_argument = [
        click.argument(
            "input_path",
            type=click.Path(exists=True, dir_okay=False, resolve_path=True, path_type=Path),
        )
    ]
    return add_options(_input_path_argument)


def out_option() -> Callable:
    """
    Add the ``-o/--out`` option to a click command.

    Returns:
        t.Callable: A decorator that adds the ``out`` option to a click command
    """
    _out_option = [
        click.option(
            "-o",
            "--out",
            type=click.Path(dir_okay=False, path_type=Path),
            callback=output_path_callback,
            help="""
            The data file to write, overriding ``output.path`` of the config.

            Unless ``--format`` is given, a ``.h5``/``.hdf5`` suffix selects HDF5 and ``.csv``
            selects CSV. Missing parent directories are created.
            """,
        )
    ]
    return add_options(_out_option)


def format_option() -> Callable:
    """
    Add the ``--format`` option to a click command.

    Returns:
        t.Callable: A decorator that adds the ``fmt`` option to a click command
    """
    _format_option = [
        click.option(
            "--format",
            "fmt",
            type=click.Choice(["csv", "hdf5"]),
            help="""
            The output format, overriding ``output.format`` of the config.
            """,
        )
    ]
    return add_options(_format_option)


def seed_option() -> Callable:
    """
    Add the ``--seed`` option to a click command.

    Returns:
        t.Callable: A decorator that adds the ``seed`` option to a click command
    """
    _seed_option = [
        click.option(
            "--seed",
            type=int,
            help="""
            The unsigned 64-bit seed, overriding ``seed`` of the config.

            A value outside 0..2**64-1 fails validation (exit code 1).
            """,
        )
    ]
    return add_options(_seed_option)


def overwrite_flag() -> Callable:
    """
    Add the ``--overwrite`` flag to a click command.

    Returns:
        t.Callable: A decorator that adds the ``overwrite`` flag to a click command
    """
    _overwrite_flag = [
        click.option(
            "--overwrite",
            is_flag=True,
            default=False,
            help="""
            Replace existing output files.

            By default the command stops with exit code 2 when an output file already exists.
            """,
        )
    ]
    return add_options(_overwrite_flag)
