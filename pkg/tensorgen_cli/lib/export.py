"""
CSV and HDF5 export and import of datasets.

CSV files use the coordinate format with 1-based indices: a header ``i1,...,iN,value`` and one row
per stored entry. Factor matrices, weights and the Tucker core go to sibling files and the manifest
to ``<stem>.manifest.json``. HDF5 files hold everything in one file with 0-based coordinates.
"""

import csv
import math
import typing as t
from pathlib import Path

import h5py
import numpy as np
from loguru import logger
from pathvalidate import sanitize_filename

from tensorgen_cli.core.errors import (
    DatasetFormatError,
    OutputExistsError,
    ShapeError,
    StructureError,
    VersionMismatchError,
)
from tensorgen_cli.core.tensors import (
    CpModel,
    DenseTensor,
    FloatArray,
    Model,
    SparseTensor,
    TuckerModel,
)
from tensorgen_cli.lib.config import HDF5_SUFFIXES
from tensorgen_cli.lib.manifest import (
    CSV_INDEX_BASE,
    FORMAT_VERSION,
    HDF5_INDEX_BASE,
    SUPPORTED_VERSIONS,
    Manifest,
)
from tensorgen_cli.lib.pipeline import Dataset, Tensor, dataset_digest

__all__ = [
    "DENSE_CSV_WARN_LIMIT",
    "format_value",
    "csv_paths",
    "export_csv",
    "export_hdf5",
    "export_dataset",
    "import_dataset",
]

DENSE_CSV_WARN_LIMIT = 10**7


def format_value(value: float) -> str:
    """
    Returns the shortest decimal that reads back as the same float64.

    Integral values lose their trailing ``.0``, so 2.0 is written ``2``.
    """
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def _sanitized(path: Path) -> Path:
    return path.with_name(sanitize_filename(path.name, platform="auto"))


def _index_header(order: int) -> t.List[str]:
    return [f"i{n}" for n in range(1, order + 1)] + ["value"]


def _stem(path: Path) -> str:
    return path.name[: -len(path.suffix)] if path.suffix else path.name


def _sibling(path: Path, role: str) -> Path:
    return path.parent / f"{_stem(path)}.{role}"


def csv_paths(path: Path, model: t.Optional[Model] = None) -> t.Dict[str, Path]:
    """
    Returns every file written by a CSV export to ``path``, keyed by role.

    The keys are ``data``, ``manifest``, and with a model ``mode<n>`` (1-based) plus ``lambda``
    or ``core``.
    """
    path = Path(path)
    paths = {"data": path, "manifest": _sibling(path, "manifest.json")}
    if model is not None:
        for n in range(1, len(model.factors) + 1):
            paths[f"mode{n}"] = _sibling(path, f"mode{n}.csv")
        if isinstance(model, CpModel):
            paths["lambda"] = _sibling(path, "lambda.csv")
        else:
            paths["core"] = _sibling(path, "core.csv")
    return paths


def _check_collisions(paths: t.Iterable[Path], overwrite: bool) -> None:
    existing = [str(p) for p in paths if p.exists()]
    if existing and not overwrite:
        raise OutputExistsError(
            f"Output already exists: {', '.join(existing)} (use --overwrite to replace it)"
        )


def _write_csv(path: Path, header: t.Sequence[str], rows: t.Iterable[t.Sequence[str]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _coordinate_rows(coords: np.ndarray, values: np.ndarray) -> t.Iterator[t.List[str]]:
    for idx, value in zip(coords.tolist(), values.tolist()):
        yield [str(i + CSV_INDEX_BASE) for i in idx] + [format_value(value)]


def _dense_coords(dims: t.Sequence[int]) -> np.ndarray:
    return np.indices(tuple(dims)).reshape(len(dims), -1).T


def _matrix_rows(matrix: np.ndarray) -> t.Iterator[t.List[str]]:
    for row in np.atleast_2d(matrix).tolist():
        yield [format_value(v) for v in row]


def export_csv(dataset: Dataset, path: Path, overwrite: bool = False) -> t.List[Path]:
    """
    Writes the dataset as coordinate CSV files.

    Args:
        dataset (Dataset): The dataset to write.
        path (Path): The data file; siblings share its stem.
        overwrite (bool): Replace existing files.

    Returns:
        List[Path]: The files written, data file first.

    Raises:
        OutputExistsError: If a target file exists and ``overwrite`` is False.
    """
    paths = csv_paths(_sanitized(Path(path)), dataset.model)
    _check_collisions(paths.values(), overwrite)
    paths["data"].parent.mkdir(parents=True, exist_ok=True)

    tensor = dataset.tensor
    header = _index_header(tensor.shape.order)
    if isinstance(tensor, SparseTensor):
        _write_csv(paths["data"], header, _coordinate_rows(tensor.coords, tensor.values))
    else:
        if tensor.size > DENSE_CSV_WARN_LIMIT:
            logger.warning(
                f"Writing {tensor.size} dense entries to CSV; HDF5 is much faster at this size"
            )
        rows = _coordinate_rows(_dense_coords(tensor.shape.dims), tensor.values.reshape(-1))
        _write_csv(paths["data"], header, rows)

    model = dataset.model
    if model is not None:
        for n, u in enumerate(model.factors, start=1):
            columns = [f"c{r}" for r in range(1, u.shape[1] + 1)]
            _write_csv(paths[f"mode{n}"], columns, _matrix_rows(u))
        if isinstance(model, CpModel):
            _write_csv(paths["lambda"], ["lambda"], ([format_value(w)] for w in model.weights))
        else:
            core = model.core
            rows = _coordinate_rows(_dense_coords(core.shape.dims), core.values.reshape(-1))
            _write_csv(paths["core"], _index_header(core.shape.order), rows)

    written = [p for key, p in paths.items() if key != "manifest"]
    if dataset.manifest is not None:
        paths["manifest"].write_text(dataset.manifest.to_json(), encoding="utf-8")
        written.append(paths["manifest"])
    return written


def export_hdf5(dataset: Dataset, path: Path, overwrite: bool = False) -> t.List[Path]:
    """
    Writes the dataset, its model and its manifest to a single HDF5 file.

    Layout: ``/tensor`` (dense) or ``/sparse/coords`` + ``/sparse/values`` (0-based coordinates),
    ``/model/factors/mode<n>`` (1-based labels), ``/model/lambda`` or ``/model/core``, and the
    manifest JSON in ``/meta/manifest``. Root attributes: ``format_version``, ``seed``, ``shape``.

    Raises:
        OutputExistsError: If the file exists and ``overwrite`` is False.
    """
    path = _sanitized(Path(path))
    _check_collisions([path], overwrite)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensor = dataset.tensor
    with h5py.File(path, "w") as f:
        f.attrs["format_version"] = FORMAT_VERSION
        if dataset.manifest is not None:
            f.attrs["seed"] = np.uint64(dataset.manifest.seed)
        f.attrs["shape"] = np.asarray(tensor.shape.dims, dtype=np.int64)
        if isinstance(tensor, SparseTensor):
            group = f.create_group("sparse")
            group.attrs["index_base"] = HDF5_INDEX_BASE
            group.create_dataset("coords", data=tensor.coords, track_times=False)
            group.create_dataset("values", data=tensor.values, track_times=False)
        else:
            f.create_dataset("tensor", data=tensor.values, track_times=False)

        model = dataset.model
        if model is not None:
            group = f.create_group("model")
            group.attrs["type"] = "cp" if isinstance(model, CpModel) else "tucker"
            factors = group.create_group("factors")
            for n, u in enumerate(model.factors, start=1):
                factors.create_dataset(f"mode{n}", data=u, track_times=False)
            if isinstance(model, CpModel):
                group.create_dataset("lambda", data=model.weights, track_times=False)
            else:
                group.create_dataset("core", data=model.core.values, track_times=False)

        if dataset.manifest is not None:
            f.create_dataset(
                "meta/manifest",
                data=dataset.manifest.to_json(),
                dtype=h5py.string_dtype("utf-8"),
                track_times=False,
            )
    return [path]


def export_dataset(dataset: Dataset, path: Path, fmt: str, overwrite: bool = False) -> t.List[Path]:
    """Writes the dataset in ``fmt`` (``csv`` or ``hdf5``)."""
    if fmt == "hdf5":
        return export_hdf5(dataset, path, overwrite=overwrite)
    return export_csv(dataset, path, overwrite=overwrite)


def _read_csv(path: Path) -> t.Tuple[t.List[str], t.List[t.List[str]]]:
    try:
        with path.open(encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except UnicodeDecodeError as e:
        raise DatasetFormatError(f"{path} is not a text CSV file") from e
    if not rows:
        raise DatasetFormatError(f"{path} is empty")
    return rows[0], rows[1:]


def _parse_coordinates(path: Path) -> t.Tuple[np.ndarray, FloatArray]:
    header, rows = _read_csv(path)
    order = len(header) - 1
    if order < 2 or header != _index_header(order):
        raise DatasetFormatError(
            f"{path} does not have a coordinate header i1,...,iN,value (got {','.join(header)})"
        )
    coords = np.empty((len(rows), order), dtype=np.int64)
    values = np.empty(len(rows), dtype=np.float64)
    for line, row in enumerate(rows, start=2):
        if len(row) != order + 1:
            raise DatasetFormatError(f"{path}:{line}: expected {order + 1} fields, got {len(row)}")
        try:
            coords[line - 2] = [int(i) for i in row[:order]]
            values[line - 2] = float(row[order])
        except ValueError as e:
            raise DatasetFormatError(f"{path}:{line}: {e}") from e
    if coords.size and coords.min() < CSV_INDEX_BASE:
        raise DatasetFormatError(f"{path}: CSV indices are 1-based, found an index below 1")
    return coords - CSV_INDEX_BASE, values


def _assemble_dense(
    path: Path, coords: np.ndarray, values: FloatArray, dims: t.Tuple[int, ...]
) -> DenseTensor:
    size = math.prod(dims)
    flat = np.ravel_multi_index(tuple(coords.T), dims) if coords.size else np.empty(0, np.int64)
    if flat.shape[0] != size or np.unique(flat).shape[0] != size:
        raise DatasetFormatError(
            f"{path}: a dense tensor of shape {list(dims)} needs {size} distinct rows, "
            f"got {flat.shape[0]}"
        )
    out = np.empty(size)
    out[flat] = values
    return DenseTensor(out.reshape(dims))


def _read_matrix(path: Path, header: t.Sequence[str]) -> FloatArray:
    found, rows = _read_csv(path)
    if found != list(header) or not rows:
        raise DatasetFormatError(f"{path}: expected the header {','.join(header)}")
    try:
        return np.asarray([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as e:
        raise DatasetFormatError(f"{path}: {e}") from e


def _read_factor(path: Path) -> FloatArray:
    header, _ = _read_csv(path)
    return _read_matrix(path, [f"c{r}" for r in range(1, len(header) + 1)])


def _read_csv_model(path: Path, order: int) -> t.Optional[Model]:
    mode_paths = [_sibling(path, f"mode{n}.csv") for n in range(1, order + 1)]
    if not all(p.exists() for p in mode_paths):
        return None
    factors = tuple(_read_factor(p) for p in mode_paths)
    lam, core = _sibling(path, "lambda.csv"), _sibling(path, "core.csv")
    if lam.exists():
        return CpModel(factors=factors, weights=_read_matrix(lam, ["lambda"]).reshape(-1))
    if core.exists():
        coords, values = _parse_coordinates(core)
        ranks = tuple(u.shape[1] for u in factors)
        return TuckerModel(factors=factors, core=_assemble_dense(core, coords, values, ranks))
    raise DatasetFormatError(f"Factor files found but neither {lam.name} nor {core.name}")


def _import_csv(path: Path) -> Dataset:
    manifest_path = _sibling(path, "manifest.json")
    manifest = None
    if manifest_path.exists():
        manifest = Manifest.from_json(manifest_path.read_text(encoding="utf-8"))
    else:
        logger.warning(f"No manifest next to {path}, only the tensor can be described")

    coords, values = _parse_coordinates(path)
    order = coords.shape[1]
    if manifest is not None:
        dims = tuple(manifest.shape)
        if len(dims) != order or (coords.size and np.any(coords.max(axis=0) >= np.asarray(dims))):
            raise DatasetFormatError(
                f"{path}: coordinates do not fit the manifest shape {list(dims)}"
            )
        storage = manifest.storage
    else:
        if not coords.size:
            raise DatasetFormatError(
                f"{path}: cannot infer the shape of an empty file without a manifest"
            )
        dims = tuple(int(d) + 1 for d in coords.max(axis=0))
        flat = np.ravel_multi_index(tuple(coords.T), dims)
        complete = flat.shape[0] == math.prod(dims) == np.unique(flat).shape[0]
        storage = "dense" if complete else "sparse"

    tensor: Tensor
    try:
        if storage == "dense":
            tensor = _assemble_dense(path, coords, values, dims)
        else:
            tensor = SparseTensor(shape=dims, coords=coords, values=values)
        model = _read_csv_model(path, order)
    except (ShapeError, StructureError) as e:
        raise DatasetFormatError(f"{path}: {e}") from e
    return _verified(Dataset(tensor=tensor, model=model, manifest=manifest), path)


def _attr_str(value: t.Any) -> str:
    return value.decode("utf-8") if isinstance(value, bytes) else str(value)


def _import_hdf5(path: Path) -> Dataset:  # pylint: disable=too-many-branches
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise DatasetFormatError(f"{path} is not a readable HDF5 file: {e}") from e
    with f:
        if "format_version" not in f.attrs or "shape" not in f.attrs:
            raise DatasetFormatError(f"{path} was not written by tensorgen-cli")
        version = _attr_str(f.attrs["format_version"])
        if version not in SUPPORTED_VERSIONS:
            raise VersionMismatchError(
                f"{path} has format version {version!r}, this tool reads {', '.join(SUPPORTED_VERSIONS)}"
            )
        try:
            dims = tuple(int(d) for d in f.attrs["shape"])
            manifest = None
            if "meta/manifest" in f:
                manifest = Manifest.from_json(f["meta/manifest"].asstr()[()])
                if "seed" in f.attrs and int(f.attrs["seed"]) != manifest.seed:
                    raise DatasetFormatError(f"{path}: the seed attribute disagrees with the manifest")
            else:
                logger.warning(f"{path} has no manifest, only the tensor can be described")

            tensor: Tensor
            if "tensor" in f:
                tensor = DenseTensor(f["tensor"][()])
            elif "sparse" in f:
                group = f["sparse"]
                if int(group.attrs.get("index_base", -1)) != HDF5_INDEX_BASE:
                    raise DatasetFormatError(f"{path}: sparse coordinates must be 0-based")
                tensor = SparseTensor(
                    shape=dims, coords=group["coords"][()], values=group["values"][()]
                )
            else:
                raise DatasetFormatError(f"{path} holds neither /tensor nor /sparse")
            if tensor.shape.dims != dims:
                raise DatasetFormatError(
                    f"{path}: tensor shape {list(tensor.shape.dims)} disagrees with the shape "
                    f"attribute {list(dims)}"
                )

            model: t.Optional[Model] = None
            if "model" in f:
                group = f["model"]
                factors = tuple(
                    group["factors"][f"mode{n}"][()] for n in range(1, len(dims) + 1)
                )
                if _attr_str(group.attrs["type"]) == "cp":
                    model = CpModel(factors=factors, weights=group["lambda"][()])
                else:
                    model = TuckerModel(factors=factors, core=DenseTensor(group["core"][()]))
        except (KeyError, ValueError, TypeError, ShapeError, StructureError) as e:
            raise DatasetFormatError(f"{path}: malformed dataset: {e}") from e
    return _verified(Dataset(tensor=tensor, model=model, manifest=manifest), path)


def _verified(dataset: Dataset, path: Path) -> Dataset:
    manifest = dataset.manifest
    if manifest is None or not manifest.content_sha256:
        return dataset
    if dataset_digest(dataset) != manifest.content_sha256:
        raise DatasetFormatError(f"{path}: content checksum does not match the manifest")
    return dataset


def import_dataset(path: Path) -> Dataset:
    """
    Reads a dataset written by :func:`export_csv` or :func:`export_hdf5`.

    The format is picked by the suffix (``.h5``/``.hdf5`` or ``.csv``) and, for other suffixes,
    by the HDF5 signature.

    Raises:
        DatasetFormatError: If the file is malformed, truncated, foreign, or fails the manifest
            checksum.
        VersionMismatchError: If the file format version is not supported.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"{path} is not a file")
    if path.suffix.lower() in HDF5_SUFFIXES or (
        path.suffix.lower() != ".csv" and h5py.is_hdf5(path)
    ):
        return _import_hdf5(path)
    return _import_csv(path)
