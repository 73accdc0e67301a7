"""
GenConfig: the declarative JSON description of one dataset.

Loading runs in two passes. The document is first checked against the published JSON schema, then
the semantic rules that need the shape and ranks (orthogonal sizes, positive definiteness, the
temporal mode, effect order, index ranges) are enforced while the frozen dataclasses are built.
Every default is materialised, so ``GenConfig.to_dict()`` is a self-contained recipe.
"""

import functools
import json
import math
import typing as t
from dataclasses import dataclass, field, replace
from pathlib import Path

from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match
from loguru import logger

from tensorgen_cli.core.effects import (
    EFFECT_STAGES,
    STAGE_FACTORS,
    STAGE_MODEL,
    STAGE_TENSOR,
    compound_symmetric,
)
from tensorgen_cli.core.errors import ConfigError, ParameterError, ShapeError
from tensorgen_cli.core.factors import (
    FACTOR_DEFAULTS,
    FactorSpec,
    canonical_factor_method,
    canonical_weight_method,
)
from tensorgen_cli.core.rng import MAX_SEED
from tensorgen_cli.core.temporal import SeasonalSpec, StreamSpec, TemporalSpec, WaveSpec
from tensorgen_cli.core.tensors import Shape
from tensorgen_cli.lib.manifest import Manifest

__all__ = [
    "SCHEMA_PATH",
    "DEFAULT_GENERATOR",
    "DEFAULT_OUTPUT_PATH",
    "HDF5_SUFFIXES",
    "GeneratorConfig",
    "WeightsConfig",
    "ModelConfig",
    "ModeConfig",
    "EffectConfig",
    "OutputConfig",
    "GenConfig",
    "load_config",
    "load_schema",
]

SCHEMA_PATH = Path(__file__).with_name("schema") / "gen_config.schema.json"
DEFAULT_GENERATOR = "multi_normal"
DEFAULT_OUTPUT_PATH = "tensorgen.csv"
HDF5_SUFFIXES = (".h5", ".hdf5")

_STAGE_ORDER = {STAGE_FACTORS: 0, STAGE_MODEL: 1, STAGE_TENSOR: 2}
_EFFECT_DEFAULTS: t.Dict[str, t.Dict[str, t.Any]] = {
    "change_point": {"magnitude": None},
    "factor_noise": {"modes": None},
    "nonneg_factors": {"modes": None},
    "sparsify_factors": {"modes": None},
    "anomaly": {"rank": 1, "amplitude": 1.0},
}


@functools.lru_cache(maxsize=None)
def load_schema() -> t.Dict[str, t.Any]:
    """Returns the published GenConfig JSON schema."""
    with SCHEMA_PATH.open(encoding="utf-8") as f:
        return json.load(f)


def _join(prefix: str, *parts: t.Union[str, int]) -> str:
    out = prefix
    for part in parts:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else part
    return out


def _check_schema(data: t.Any) -> None:
    validator = Draft202012Validator(load_schema())
    error = best_match(validator.iter_errors(data))
    if error is not None:
        raise ConfigError(_join("", *error.absolute_path) or "<root>", error.message)


@dataclass(frozen=True)
class GeneratorConfig:
    """
    A factor generator and its parameters, defaults filled in.

    Attributes:
        method (str): The canonical generator name.
        params (Mapping[str, Any]): Every parameter of that generator.
    """

    method: str
    params: t.Mapping[str, t.Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any], where: str) -> "GeneratorConfig":
        """Builds the config and materialises the defaults of the generator."""
        try:
            method = canonical_factor_method(str(data["method"]))
        except ParameterError as e:
            raise ConfigError(_join(where, "method"), str(e)) from e
        given = {k: v for k, v in data.items() if k != "method"}
        unknown = set(given) - set(FACTOR_DEFAULTS[method])
        if unknown:
            raise ConfigError(
                _join(where, sorted(unknown)[0]), f"not a parameter of the {method} generator"
            )
        params = {**FACTOR_DEFAULTS[method], **given}
        if method == "gamma" and params["mu"] == 0 and params["sigma2"] == 0 and not params["shapes"]:
            raise ConfigError(_join(where, "sigma2"), "mu = 0 with sigma2 = 0 gives zero gamma shapes")
        return cls(method=method, params=params)

    def spec(self, rows: int, cols: int) -> FactorSpec:
        """Returns the request for a ``rows x cols`` factor."""
        return FactorSpec(self.method, rows=rows, cols=cols, params=dict(self.params))

    def check(self, rows: int, cols: int, where: str) -> None:
        """Raises ConfigError when the generator cannot produce a ``rows x cols`` factor."""
        try:
            self.spec(rows, cols)
        except ShapeError as e:
            raise ConfigError(_join(where, "method"), str(e)) from e
        except ParameterError as e:
            raise ConfigError(where, str(e)) from e
        for name in ("shapes", "mus", "sigmas"):
            value = self.params.get(name)
            if isinstance(value, (list, tuple)) and len(value) != cols:
                raise ConfigError(
                    _join(where, name), f"needs one value per column ({cols}), got {len(value)}"
                )

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised JSON form."""
        return {"method": self.method, **self.params}


@dataclass(frozen=True)
class WeightsConfig:
    """
    The CP weights or Tucker core entries.

    Attributes:
        method (str): ``ones``, ``uniform``, ``normal`` or ``custom``.
        values (Optional[Tuple[float, ...]]): The values of ``custom`` weights.
    """

    method: str = "ones"
    values: t.Optional[t.Tuple[float, ...]] = None

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised JSON form."""
        return {"method": self.method, "values": list(self.values) if self.values else None}


@dataclass(frozen=True)
class ModelConfig:
    """
    The model family.

    Attributes:
        type (str): ``cp`` or ``tucker``.
        ranks (Tuple[int, ...]): Columns of each factor matrix (all equal for CP).
        weights (WeightsConfig): How the weights (CP) or the row-major core entries (Tucker) are
            generated.
    """

    type: str
    ranks: t.Tuple[int, ...]
    weights: WeightsConfig = field(default_factory=WeightsConfig)

    @property
    def weight_count(self) -> int:
        """The number of weights (R) or core entries (product of the ranks)."""
        return self.ranks[0] if self.type == "cp" else math.prod(self.ranks)

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised JSON form."""
        out: t.Dict[str, t.Any] = {"type": self.type}
        if self.type == "cp":
            out["rank"] = self.ranks[0]
        else:
            out["ranks"] = list(self.ranks)
        out["weights"] = self.weights.to_dict()
        return out


@dataclass(frozen=True)
class ModeConfig:
    """
    How the factor matrix of one mode is produced: exactly one of ``generator`` or ``temporal``.
    """

    generator: t.Optional[GeneratorConfig] = None
    temporal: t.Optional[TemporalSpec] = None

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised JSON form."""
        if self.temporal is not None:
            return {"temporal": _temporal_to_dict(self.temporal)}
        return {"generator": t.cast(GeneratorConfig, self.generator).to_dict()}


@dataclass(frozen=True)
class EffectConfig:
    """
    One configured effect.

    Attributes:
        kind (str): The effect kind.
        params (Mapping[str, Any]): Its parameters, defaults filled in.
    """

    kind: str
    params: t.Mapping[str, t.Any] = field(default_factory=dict)

    @property
    def stage(self) -> str:
        """The pipeline stage of the effect."""
        return EFFECT_STAGES[self.kind]

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised JSON form."""
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class OutputConfig:
    """
    Where and how the dataset is written.

    Attributes:
        format (str): ``csv`` or ``hdf5``.
        path (str): The data file path; the suffix is forced to match the format.
        sparse (bool): Store the tensor in coordinate (sparse) form even without a sparsity effect.
        zero_tol (float): Entries with magnitude <= zero_tol are dropped by the sparse conversion.
        overwrite (bool): Replace existing files.
    """

    format: str = "csv"
    path: str = DEFAULT_OUTPUT_PATH
    sparse: bool = False
    zero_tol: float = 0.0
    overwrite: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", str(_with_format_suffix(Path(self.path), self.format)))

    @property
    def data_path(self) -> Path:
        """The path of the data file."""
        return Path(self.path)

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised JSON form."""
        return {
            "format": self.format,
            "path": self.path,
            "sparse": self.sparse,
            "zero_tol": self.zero_tol,
            "overwrite": self.overwrite,
        }


def _with_format_suffix(path: Path, fmt: str) -> Path:
    if fmt == "hdf5":
        return path if path.suffix.lower() in HDF5_SUFFIXES else path.with_suffix(".h5")
    return path if path.suffix.lower() == ".csv" else path.with_suffix(".csv")


def _temporal_to_dict(spec: TemporalSpec) -> t.Dict[str, t.Any]:
    if spec.kind == "periodic":
        waves = [
            {
                "waveform": w.waveform,
                "frequency": w.frequency,
                "amplitude": w.amplitude,
                "phase": w.phase,
            }
            for w in spec.waves
        ]
        return {"kind": spec.kind, "waves": waves}
    if spec.kind == "seasonal":
        seasons = [
            {
                "cycle_length": s.cycle_length,
                "pattern": s.pattern if isinstance(s.pattern, str) else list(s.pattern),
                "growth_rate": s.growth_rate,
            }
            for s in spec.seasons
        ]
        return {"kind": spec.kind, "seasons": seasons}
    stream = t.cast(StreamSpec, spec.stream)
    init = {"method": stream.init_method, **stream.init_params}
    return {"kind": spec.kind, "epsilon": stream.epsilon, "init": init}


def _parse_temporal(
    data: t.Mapping[str, t.Any], window: int, rank: int, where: str
) -> TemporalSpec:
    kind = data["kind"]
    try:
        if kind == "periodic":
            waves = tuple(WaveSpec(**w) for w in data["waves"])
            if len(waves) != rank:
                raise ConfigError(
                    _join(where, "waves"), f"defines {len(waves)} columns, the mode rank is {rank}"
                )
            return TemporalSpec(kind=kind, waves=waves)
        if kind == "seasonal":
            seasons = []
            for j, s in enumerate(data["seasons"]):
                season = SeasonalSpec(**s)
                if season.cycle_length > window:
                    raise ConfigError(
                        _join(where, "seasons", j, "cycle_length"),
                        f"{season.cycle_length} exceeds the window T = {window}",
                    )
                seasons.append(season)
            if len(seasons) != rank:
                raise ConfigError(
                    _join(where, "seasons"),
                    f"defines {len(seasons)} columns, the mode rank is {rank}",
                )
            return TemporalSpec(kind=kind, seasons=tuple(seasons))
        init = GeneratorConfig.from_dict(
            data.get("init", {"method": DEFAULT_GENERATOR}), _join(where, "init")
        )
        init.check(1, rank, _join(where, "init"))
        stream = StreamSpec(
            epsilon=float(data["epsilon"]), init_method=init.method, init_params=dict(init.params)
        )
        return TemporalSpec(kind=kind, stream=stream)
    except ConfigError:
        raise
    except ParameterError as e:
        raise ConfigError(where, str(e)) from e


def _check_modes_list(modes: t.Optional[t.Sequence[int]], order: int, where: str) -> None:
    for mode in modes or ():
        if mode >= order:
            raise ConfigError(where, f"mode {mode} out of range for a {order}-mode tensor")


def _parse_effect(  # pylint: disable=too-many-branches
    data: t.Mapping[str, t.Any],
    index: int,
    shape: Shape,
    model: ModelConfig,
    temporal_mode: t.Optional[int],
) -> EffectConfig:
    where = _join("effects", index)
    kind = data["kind"]
    params = {**_EFFECT_DEFAULTS.get(kind, {}), **{k: v for k, v in data.items() if k != "kind"}}
    if params.get("snr_db") == "inf":
        params["snr_db"] = math.inf
    order = shape.order

    if kind == "change_point":
        if temporal_mode is None:
            raise ConfigError(_join(where, "kind"), "change points need a temporal_mode")
        if params["column"] >= model.ranks[temporal_mode]:
            raise ConfigError(
                _join(where, "column"),
                f"{params['column']} is not a column of the rank-{model.ranks[temporal_mode]} "
                f"temporal factor",
            )
        if params["start"] > params["end"]:
            raise ConfigError(_join(where, "start"), "start must be <= end")
        if params["end"] >= shape[temporal_mode]:
            raise ConfigError(
                _join(where, "end"), f"{params['end']} is past the window T = {shape[temporal_mode]}"
            )

    elif kind in ("column_correlation", "column_congruence"):
        mode = params["mode"]
        if mode >= order:
            raise ConfigError(_join(where, "mode"), f"mode {mode} out of range")
        if mode == temporal_mode:
            raise ConfigError(_join(where, "mode"), f"{kind} does not apply to the temporal mode")
        rows, cols = shape[mode], model.ranks[mode]
        try:
            compound_symmetric(cols, float(params["c"]))
        except ParameterError as e:
            raise ConfigError(_join(where, "c"), str(e)) from e
        if kind == "column_congruence" and rows < cols:
            raise ConfigError(
                _join(where, "mode"), f"Congruent factors need rows >= cols, got {rows}x{cols}"
            )
        if kind == "column_correlation" and rows < 2:
            raise ConfigError(_join(where, "mode"), f"Correlated factors need rows >= 2, got {rows}")

    elif kind in ("factor_noise", "nonneg_factors", "sparsify_factors"):
        if params["modes"] is not None:
            _check_modes_list(params["modes"], order, _join(where, "modes"))
            params["modes"] = sorted(set(params["modes"]))

    elif kind == "sign_fix" and model.type != "cp":
        raise ConfigError(_join(where, "kind"), "sign_fix applies to CP models only")

    elif kind == "anomaly":
        block = [list(r) for r in params["block"]]
        if len(block) != order:
            raise ConfigError(
                _join(where, "block"), f"needs {order} ranges, one per mode, got {len(block)}"
            )
        for n, (start, stop) in enumerate(block):
            if not start < stop <= shape[n]:
                raise ConfigError(
                    _join(where, "block", n),
                    f"[{start}, {stop}) is not a non-empty range inside mode size {shape[n]}",
                )
        params["block"] = block
        generator = GeneratorConfig.from_dict(
            params.get("generator", {"method": "uniform"}), _join(where, "generator")
        )
        for start, stop in block:
            generator.check(stop - start, params["rank"], _join(where, "generator"))
        params["generator"] = generator.to_dict()
        weights = _parse_weights(
            params.get("weights", {"method": "ones"}), params["rank"], _join(where, "weights")
        )
        params["weights"] = weights.to_dict()

    return EffectConfig(kind=kind, params=params)


def _parse_weights(data: t.Mapping[str, t.Any], count: int, where: str) -> WeightsConfig:
    method = canonical_weight_method(str(data["method"]))
    values = data.get("values")
    if method == "custom":
        if values is None:
            raise ConfigError(_join(where, "values"), "custom weights need values")
        if len(values) != count:
            raise ConfigError(_join(where, "values"), f"expected {count} values, got {len(values)}")
        return WeightsConfig(method=method, values=tuple(float(v) for v in values))
    return WeightsConfig(method=method)


def _parse_model(data: t.Mapping[str, t.Any], shape: Shape) -> ModelConfig:
    kind = data.get("type", "cp")
    if kind == "cp":
        if "ranks" in data:
            raise ConfigError("model.ranks", "CP models take a single rank, use model.rank")
        ranks = (int(data.get("rank", 1)),) * shape.order
    else:
        if "rank" in data:
            raise ConfigError("model.rank", "Tucker models take per-mode ranks, use model.ranks")
        if "ranks" not in data:
            raise ConfigError("model.ranks", "Tucker models need per-mode ranks")
        ranks = tuple(int(r) for r in data["ranks"])
        if len(ranks) != shape.order:
            raise ConfigError(
                "model.ranks", f"needs {shape.order} ranks, one per mode, got {len(ranks)}"
            )
    partial = ModelConfig(type=kind, ranks=ranks)
    weights = _parse_weights(
        data.get("weights", {"method": "ones"}), partial.weight_count, "model.weights"
    )
    return replace(partial, weights=weights)


@dataclass(frozen=True)
class GenConfig:  # pylint: disable=too-many-instance-attributes
    """
    A validated generation config.

    Attributes:
        seed (int): The unsigned 64-bit seed.
        shape (Shape): The tensor shape.
        model (ModelConfig): Model family, ranks and weights.
        modes (Tuple[ModeConfig, ...]): One factor recipe per mode.
        temporal_mode (Optional[int]): The 0-based index of the temporal mode, if any.
        effects (Tuple[EffectConfig, ...]): The effects, in stage order.
        output (OutputConfig): The export settings.
    """

    seed: int
    shape: Shape
    model: ModelConfig
    modes: t.Tuple[ModeConfig, ...]
    temporal_mode: t.Optional[int] = None
    effects: t.Tuple[EffectConfig, ...] = ()
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, data: t.Any) -> "GenConfig":
        """
        Validates a parsed JSON document and builds the config.

        Raises:
            ConfigError: On the first schema or semantic violation, naming the offending field.
        """
        _check_schema(data)
        try:
            shape = Shape(tuple(data["shape"]))
        except ShapeError as e:
            raise ConfigError("shape", str(e)) from e
        model = _parse_model(data.get("model", {}), shape)

        temporal_mode = data.get("temporal_mode")
        if temporal_mode is not None and temporal_mode >= shape.order:
            raise ConfigError(
                "temporal_mode", f"{temporal_mode} is out of range for a {shape.order}-mode tensor"
            )

        default = GeneratorConfig.from_dict(
            data.get("generator", {"method": DEFAULT_GENERATOR}), "generator"
        )
        entries = data.get("modes") or [None] * shape.order
        if len(entries) != shape.order:
            raise ConfigError("modes", f"needs {shape.order} entries, one per mode, got {len(entries)}")
        modes = []
        for n, entry in enumerate(entries):
            rows, cols = shape[n], model.ranks[n]
            where = _join("modes", n)
            if entry and "temporal" in entry:
                if n != temporal_mode:
                    raise ConfigError(
                        _join(where, "temporal"),
                        f"temporal specs are only allowed on the temporal mode "
                        f"(temporal_mode = {temporal_mode})",
                    )
                spec = _parse_temporal(entry["temporal"], rows, cols, _join(where, "temporal"))
                modes.append(ModeConfig(temporal=spec))
            elif entry and "generator" in entry:
                generator = GeneratorConfig.from_dict(entry["generator"], _join(where, "generator"))
                generator.check(rows, cols, _join(where, "generator"))
                modes.append(ModeConfig(generator=generator))
            else:
                default.check(rows, cols, "generator")
                modes.append(ModeConfig(generator=default))

        effects = []
        last_stage = 0
        for i, entry in enumerate(data.get("effects", [])):
            effect = _parse_effect(entry, i, shape, model, temporal_mode)
            stage = _STAGE_ORDER[effect.stage]
            if stage < last_stage:
                raise ConfigError(
                    _join("effects", i, "kind"),
                    f"{effect.kind} is a {effect.stage}-stage effect and must come before "
                    f"later-stage effects (order: factors, model, tensor)",
                )
            if effects and effects[-1].kind == "poisson_counts":
                raise ConfigError(
                    _join("effects", i, "kind"), "poisson_counts must be the last effect"
                )
            last_stage = stage
            effects.append(effect)

        out = data.get("output", {})
        output = OutputConfig(
            format=out.get("format", "csv"),
            path=out.get("path", DEFAULT_OUTPUT_PATH),
            sparse=bool(out.get("sparse", False)),
            zero_tol=float(out.get("zero_tol", 0.0)),
            overwrite=bool(out.get("overwrite", False)),
        )
        return cls(
            seed=int(data["seed"]),
            shape=shape,
            model=model,
            modes=tuple(modes),
            temporal_mode=temporal_mode,
            effects=tuple(effects),
            output=output,
        )

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the materialised recipe, valid input for ``from_dict``."""
        return {
            "seed": self.seed,
            "shape": list(self.shape.dims),
            "model": self.model.to_dict(),
            "temporal_mode": self.temporal_mode,
            "modes": [mode.to_dict() for mode in self.modes],
            "effects": [effect.to_dict() for effect in self.effects],
            "output": self.output.to_dict(),
        }

    def with_overrides(
        self,
        seed: t.Optional[int] = None,
        out: t.Optional[Path] = None,
        fmt: t.Optional[str] = None,
        overwrite: t.Optional[bool] = None,
    ) -> t.Tuple["GenConfig", t.Dict[str, t.Any]]:
        """
        Applies command-line overrides, which take precedence over the config values.

        When only an output path is given, its suffix picks the format (``.h5``/``.hdf5`` for HDF5,
        ``.csv`` for CSV).

        Returns:
            Tuple[GenConfig, Dict[str, Any]]: The new config and the overrides that were given.
        """
        overrides: t.Dict[str, t.Any] = {}
        config = self
        if seed is not None:
            if not 0 <= seed <= MAX_SEED:
                raise ConfigError("seed", f"{seed} is not an unsigned 64-bit integer")
            overrides["seed"] = seed
            config = replace(config, seed=seed)
        output = config.output
        if out is not None:
            overrides["path"] = str(out)
            if fmt is None and out.suffix.lower() in HDF5_SUFFIXES:
                fmt = "hdf5"
            elif fmt is None and out.suffix.lower() == ".csv":
                fmt = "csv"
            output = replace(output, path=str(out))
        if fmt is not None:
            overrides["format"] = fmt
            output = replace(output, format=fmt)
        if overwrite:
            overrides["overwrite"] = True
            output = replace(output, overwrite=True)
        if output is not config.output:
            config = replace(config, output=output)
        return config, overrides


def load_config(path: Path) -> GenConfig:
    """
    Reads and validates a GenConfig JSON file.

    A Manifest file is accepted as well: its stored recipe is replayed.

    Raises:
        ConfigError: If the document is not valid JSON or violates the schema or a semantic rule.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<document>", f"not valid JSON: {e}") from e
    if isinstance(data, dict) and Manifest.looks_like_manifest(data):
        logger.info(f"{path} is a manifest, replaying its recipe")
        data = data["recipe"]
    return GenConfig.from_dict(data)
