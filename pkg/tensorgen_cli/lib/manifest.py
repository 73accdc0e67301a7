"""
The Manifest: the machine-readable ground truth of a generated dataset.

It stores the materialised recipe (enough to regenerate the dataset bit for bit), the ordered
effect log with the exact touched coordinates, the content digest of the exported payload and
the index conventions of both file formats.
"""

import datetime
import json
import math
import os
import typing as t
from dataclasses import dataclass, field

import numpy as np

from tensorgen_cli import VERSION
from tensorgen_cli.core.effects import EffectRecord
from tensorgen_cli.core.errors import DatasetFormatError, VersionMismatchError
from tensorgen_cli.core.rng import RNG_ALGORITHM

__all__ = [
    "FORMAT_VERSION",
    "SUPPORTED_VERSIONS",
    "CSV_INDEX_BASE",
    "HDF5_INDEX_BASE",
    "Manifest",
    "created_timestamp",
    "json_safe",
    "dump_json",
]

FORMAT_VERSION = "1.0"
SUPPORTED_VERSIONS = (FORMAT_VERSION,)
CSV_INDEX_BASE = 1
HDF5_INDEX_BASE = 0


def json_safe(value: t.Any) -> t.Any:
    """
    Replaces the non-finite floats of a JSON-ready value with the strings ``inf``, ``-inf`` and
    ``nan``, which standard JSON parsers can read.
    """
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return "nan"
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    return value


def dump_json(value: t.Any) -> str:
    """Serialises a JSON-ready value to indented, standard JSON."""
    return json.dumps(json_safe(value), indent=2, allow_nan=False)


def created_timestamp() -> str:
    """
    Returns the export timestamp (ISO 8601, UTC).

    ``SOURCE_DATE_EPOCH`` pins it, which makes the manifest itself reproducible.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None and epoch.strip().isdigit():
        moment = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(tz=datetime.timezone.utc).replace(microsecond=0)
    return moment.isoformat()


@dataclass
class Manifest:  # pylint: disable=too-many-instance-attributes
    """
    Generation record of one dataset.

    Attributes:
        seed (int): The seed the dataset was generated with.
        shape (List[int]): The tensor shape.
        model_type (str): ``cp`` or ``tucker``.
        ranks (List[int]): The rank of each mode (all equal for CP).
        modes (List[Dict[str, Any]]): The generator or temporal spec of each mode.
        effects (List[EffectRecord]): The effects, in application order.
        recipe (Dict[str, Any]): The materialised generation config.
        storage (str): ``dense`` or ``sparse``.
        content_sha256 (str): Digest of the tensor and model payload.
        overrides (Dict[str, Any]): Command-line overrides applied on top of the config.
        created (str): Export timestamp.
        format_version (str): The file format version.
    """

    seed: int
    shape: t.List[int]
    model_type: str
    ranks: t.List[int]
    modes: t.List[t.Dict[str, t.Any]]
    effects: t.List[EffectRecord]
    recipe: t.Dict[str, t.Any]
    storage: str = "dense"
    content_sha256: str = ""
    overrides: t.Dict[str, t.Any] = field(default_factory=dict)
    created: str = field(default_factory=created_timestamp)
    format_version: str = FORMAT_VERSION
    rng: t.Dict[str, str] = field(
        default_factory=lambda: {"algorithm": RNG_ALGORITHM, "numpy": np.__version__}
    )
    generator: str = f"tensorgen-cli {VERSION}"

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the JSON-ready form."""
        return {
            "format_version": self.format_version,
            "generator": self.generator,
            "created": self.created,
            "seed": self.seed,
            "rng": self.rng,
            "shape": list(self.shape),
            "model_type": self.model_type,
            "ranks": list(self.ranks),
            "storage": self.storage,
            "index_base": {"csv": CSV_INDEX_BASE, "hdf5": HDF5_INDEX_BASE},
            "modes": self.modes,
            "effects": [effect.to_dict() for effect in self.effects],
            "overrides": self.overrides,
            "content_sha256": self.content_sha256,
            "recipe": self.recipe,
        }

    def to_json(self) -> str:
        """Serialises the manifest to indented JSON."""
        return dump_json(self.to_dict()) + "\n"

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "Manifest":
        """
        Rebuilds a manifest.

        Raises:
            VersionMismatchError: If the format version is not supported.
            DatasetFormatError: If a required field is missing.
        """
        version = data.get("format_version")
        if version not in SUPPORTED_VERSIONS:
            raise VersionMismatchError(
                f"Unsupported manifest format version {version!r}, this tool reads "
                f"{', '.join(SUPPORTED_VERSIONS)}"
            )
        index_base = data.get("index_base", {})
        if index_base and (
            index_base.get("csv") != CSV_INDEX_BASE or index_base.get("hdf5") != HDF5_INDEX_BASE
        ):
            raise DatasetFormatError(f"Unexpected index conventions {index_base}")
        try:
            return cls(
                seed=int(data["seed"]),
                shape=[int(d) for d in data["shape"]],
                model_type=str(data["model_type"]),
                ranks=[int(r) for r in data["ranks"]],
                modes=list(data.get("modes", [])),
                effects=[EffectRecord.from_dict(e) for e in data.get("effects", [])],
                recipe=dict(data["recipe"]),
                storage=str(data.get("storage", "dense")),
                content_sha256=str(data.get("content_sha256", "")),
                overrides=dict(data.get("overrides", {})),
                created=str(data.get("created", "")),
                format_version=str(version),
                rng=dict(data.get("rng", {})),
                generator=str(data.get("generator", "")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetFormatError(f"Malformed manifest: {type(e).__name__}: {e}") from e

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        """Parses a manifest from JSON text."""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"Manifest is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise DatasetFormatError("Manifest must be a JSON object")
        return cls.from_dict(data)

    @staticmethod
    def looks_like_manifest(data: t.Mapping[str, t.Any]) -> bool:
        """Whether a parsed JSON document is a manifest rather than a config."""
        return "format_version" in data and "recipe" in data
