import click

from tensorgen_cli.cli.shared_callbacks import verbose_callback


class BaseCommand(click.Command):
    """
    Base command for all commands in the CLI.
    """

    def __init__(self, *args, **kwargs) -> None:  # type: ignore[no-untyped-def]
        shared_options = [
            click.Option(
                ["-v", "--verbose"],
                is_flag=True,
                default=False,
                is_eager=True,
                expose_value=False,
                callback=verbose_callback,
                help="""
                Log stage details and timings (DEBUG level) to stderr.
                """,
            ),
            click.Option(
                ["--json", "json_output"],
                is_flag=True,
                default=False,
                help="""
                Print a machine-readable JSON summary to stdout instead of the table.

                Diagnostics always go to stderr, so stdout stays parseable.
                """,
            ),
        ]
        kwargs.setdefault("params", []).extend(shared_options)
        kwargs.setdefault("context_settings", {"help_option_names": ["-h", "--help"]})
        super().__init__(*args, **kwargs)
