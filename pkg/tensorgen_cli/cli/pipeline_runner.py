import functools
import sys
import typing as t
from dataclasses import asdict, dataclass
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from tensorgen_cli.cli.logger import logger
from tensorgen_cli.cli.timer import Timer
from tensorgen_cli.core.errors import EXIT_IO, TensorGenError
from tensorgen_cli.lib.config import GenConfig, load_config
from tensorgen_cli.lib.export import export_dataset
from tensorgen_cli.lib.manifest import dump_json
from tensorgen_cli.lib.pipeline import Dataset, build_dataset

F = t.TypeVar("F", bound=t.Callable[..., t.Any])


@dataclass
class OverrideOptions:
    """
    Command-line values that take precedence over the config.
    """

    seed: t.Optional[int] = None
    out: t.Optional[Path] = None
    fmt: t.Optional[str] = None
    overwrite: bool = False


@dataclass
class ReportOptions:
    """
    How the result is reported on stdout.
    """

    json_output: bool = False


class PipelineRunnerConfig:  # pylint: disable=too-few-public-methods
    """
    Handle options for PipelineRunner.
    """

    def __init__(self, options: t.Dict[str, t.Any]):
        self.overrides = OverrideOptions()
        self.report = ReportOptions()
        self._set_options(self.overrides, options)
        self._set_options(self.report, options)

    @staticmethod
    def _set_options(
        options_group: t.Union[OverrideOptions, ReportOptions], options: t.Dict[str, t.Any]
    ) -> None:
        """
        Update attributes of an options_group with provided options if the attribute exists.
        """
        for key, value in options.items():
            if hasattr(options_group, key):
                setattr(options_group, key, value)


def log_error(e: BaseException) -> None:
    """Logs an exception as ``module.ClassName: message``."""
    # messages may contain "<", keep them out of the markup
    if hasattr(e, "__module__"):
        logger.opt(colors=True).error("<lr>{}.{}</lr>: {}", e.__module__, type(e).__name__, e)
    else:
        logger.opt(colors=True).error("<lr>{}</lr>: {}", type(e).__name__, e)


def exit_on_error(func: F) -> F:
    """
    Runs a command body, turning the tool's errors into log records and exit codes.

    Validation errors exit with 1, I/O errors with 2 and numerical errors with 3.
    """

    @functools.wraps(func)
    def wrapper(*args: t.Any, **kwargs: t.Any) -> t.Any:
        try:
            return func(*args, **kwargs)
        except TensorGenError as e:
            log_error(e)
            sys.exit(e.exit_code)
        except OSError as e:
            log_error(e)
            sys.exit(EXIT_IO)

    return t.cast(F, wrapper)


def print_summary(summary: t.Dict[str, t.Any], title: str, json_output: bool) -> None:
    """Prints a summary to stdout, as JSON or as a two-column table."""
    if json_output:
        click.echo(dump_json(summary))
        return
    table = Table(title=title, show_header=False, title_justify="left")
    table.add_column(style="bold cyan")
    table.add_column()
    for key, value in summary.items():
        if isinstance(value, list) and all(isinstance(v, int) for v in value):
            value = " x ".join(str(v) for v in value)
        elif isinstance(value, list):
            value = "\n".join(str(v) for v in value) if value else "-"
        table.add_row(key.replace("_", " "), str(value))
    Console().print(table)


class PipelineRunner:
    """
    Runs the generation pipeline on a config file.

    Attributes:
        config_path (Path): The config (or manifest) file.
        config (PipelineRunnerConfig): The parsed command-line options.
    """

    def __init__(self, config_path: Path, **options: t.Any) -> None:
        """
        Initialize a new instance of the class.

        Args:
            config_path (Path): The config (or manifest) file.
            **options (Dict[str, Any]): The command-line options to be parsed.
        """
        self.config_path = config_path
        self.config = PipelineRunnerConfig(options=options)

    def _load(self) -> GenConfig:
        with Timer(name="Config validation"):
            return load_config(self.config_path)

    def generate(self) -> None:
        """
        Generates the dataset, writes it, and prints the summary.
        """
        config, overrides = self._load().with_overrides(**asdict(self.config.overrides))
        with Timer(name="Generation"):
            dataset = build_dataset(config, overrides)
        self._report_noops(dataset)
        with Timer(name="Export"):
            written = export_dataset(
                dataset,
                config.output.data_path,
                config.output.format,
                overwrite=config.output.overwrite,
            )
        logger.success(f"Dataset saved to {written[0]}")
        print_summary(
            self._summary(dataset, config, written),
            title="Generated dataset",
            json_output=self.config.report.json_output,
        )

    def validate(self) -> None:
        """
        Validates the config without generating anything and prints it with defaults filled in.
        """
        config = self._load()
        if self.config.report.json_output:
            click.echo(dump_json({"status": "ok", "config": config.to_dict()}))
            return
        click.echo("OK")
        click.echo(dump_json(config.to_dict()))

    @staticmethod
    def _report_noops(dataset: Dataset) -> None:
        manifest = dataset.manifest
        if manifest is None:
            return
        for record in manifest.effects:
            if not record.touched:
                logger.skip(f"{record.kind} made no changes")  # type: ignore

    @staticmethod
    def _summary(dataset: Dataset, config: GenConfig, written: t.List[Path]) -> t.Dict[str, t.Any]:
        manifest = dataset.manifest
        return {
            "status": "ok",
            "seed": config.seed,
            "shape": list(config.shape.dims),
            "model_type": config.model.type,
            "ranks": list(config.model.ranks),
            "storage": dataset.storage,
            "nnz": dataset.tensor.nnz,
            "effects": [record.kind for record in manifest.effects] if manifest else [],
            "content_sha256": manifest.content_sha256 if manifest else "",
            "outputs": [str(p) for p in written],
        }
