import math
import typing as t
from pathlib import Path

import click
from loguru import logger
from rich.console import Console
from rich.table import Table

from tensorgen_cli.core.effects import EffectRecord
from tensorgen_cli.core.tensors import CpModel, SparseTensor, TuckerModel, frobenius_norm
from tensorgen_cli.lib.export import import_dataset
from tensorgen_cli.lib.manifest import dump_json
from tensorgen_cli.lib.pipeline import Dataset

__all__ = ["main", "summarize"]

FILE_STYLE = "[bold cyan]Dataset file: {name}[reset]"
SECTION_STYLE = "[bold magenta]{title}[reset]"
JUSTIFY = 16


def _norm(dataset: Dataset) -> float:
    tensor = dataset.tensor
    if isinstance(tensor, SparseTensor):
        return float(math.sqrt(float((tensor.values * tensor.values).sum())))
    return frobenius_norm(tensor)


def _effect_summary(record: EffectRecord) -> t.Dict[str, t.Any]:
    return {
        "kind": record.kind,
        "stage": record.stage,
        "regions": len(record.touched),
        "params": record.params,
        "achieved": record.achieved,
    }


def summarize(path: Path, dataset: Dataset) -> t.Dict[str, t.Any]:
    """
    Collects the facts ``inspect`` prints about a dataset.
    """
    tensor, model, manifest = dataset.tensor, dataset.model, dataset.manifest
    dims = list(tensor.shape.dims)
    size = math.prod(dims)
    if isinstance(model, CpModel):
        model_type, ranks = "cp", [model.rank] * len(dims)
    elif isinstance(model, TuckerModel):
        model_type, ranks = "tucker", list(model.ranks)
    else:
        model_type, ranks = None, None
    return {
        "file": str(path),
        "format_version": manifest.format_version if manifest else None,
        "shape": dims,
        "storage": dataset.storage,
        "nnz": int(tensor.nnz),
        "density": tensor.nnz / size if size else 0.0,
        "frobenius_norm": _norm(dataset),
        "model_type": model_type,
        "ranks": ranks,
        "seed": manifest.seed if manifest else None,
        "content_sha256": manifest.content_sha256 if manifest else None,
        "effects": [_effect_summary(r) for r in manifest.effects] if manifest else [],
    }


def _row(key: str, value: t.Any) -> str:
    return f"{key.ljust(JUSTIFY)} : {'-' if value is None else value}"


def _print_table(summary: t.Dict[str, t.Any]) -> None:
    table = Table(show_header=False, title_style="bold green")
    table.add_row(FILE_STYLE.format(name=summary["file"]))
    table.add_section()
    for key in ("format_version", "shape", "storage", "nnz", "model_type", "ranks", "seed"):
        table.add_row(_row(key.replace("_", " "), summary[key]))
    table.add_row(_row("density", f"{summary['density']:.6g}"))
    table.add_row(_row("frobenius norm", f"{summary['frobenius_norm']:.12g}"))
    table.add_section()
    table.add_row(SECTION_STYLE.format(title="Effects"))
    table.add_section()
    if not summary["effects"]:
        table.add_row("none")
    for i, effect in enumerate(summary["effects"]):
        achieved = ", ".join(f"{k}={v}" for k, v in effect["achieved"].items())
        table.add_row(
            f"[bold cyan]{str(i).rjust(3)}[reset] : {effect['kind'].ljust(JUSTIFY)} : "
            f"{effect['stage']}, {effect['regions']} region(s)" + (f", {achieved}" if achieved else "")
        )
    Console().print(table)


def main(input_path: Path, json_output: bool = False) -> None:
    """
    Reads a dataset and prints its summary.

    In JSON mode the Frobenius norm is printed at full precision.
    """
    dataset = import_dataset(input_path)
    logger.debug(f"Read {dataset.storage} dataset {input_path}")
    summary = summarize(input_path, dataset)
    if json_output:
        click.echo(dump_json(summary))
        return
    _print_table(summary)
