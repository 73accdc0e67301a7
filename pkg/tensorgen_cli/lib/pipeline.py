"""
Executes a GenConfig: factors, effects on factors, model, reconstruction, effects on the tensor.

Random numbers are drawn from fixed sub-streams of the seed: ``factors/<mode>`` for the factor
matrices, ``weights`` for the CP weights or Tucker core, and ``effects/<index>`` for the effect at
that position of the config. Adding an effect therefore never changes the factors, and the same
config always produces the same bytes.
"""

import hashlib
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from loguru import logger

from tensorgen_cli.core.effects import (
    AnomalySpec,
    ChangePointSpec,
    EffectRecord,
    add_awgn,
    add_factor_noise,
    add_sparse_noise,
    apply_change_point,
    apply_nonneg,
    impose_congruence,
    impose_correlation,
    inject_anomaly,
    normalize_tensor,
    sample_poisson_counts,
    sign_fix,
    sparsify,
)
from tensorgen_cli.core.errors import NumericalError
from tensorgen_cli.core.factors import gen_weights, generate_factor
from tensorgen_cli.core.rng import RngStream
from tensorgen_cli.core.temporal import generate_temporal
from tensorgen_cli.core.tensors import (
    CpModel,
    DenseTensor,
    FloatArray,
    Model,
    SparseTensor,
    TuckerModel,
    reconstruct,
    to_sparse,
)
from tensorgen_cli.lib.config import EffectConfig, GenConfig
from tensorgen_cli.lib.manifest import Manifest

__all__ = ["Dataset", "Tensor", "build_dataset", "replay", "dataset_digest"]

Tensor = t.Union[DenseTensor, SparseTensor]


@dataclass
class Dataset:
    """
    A generated (or imported) dataset.

    Attributes:
        tensor (Union[DenseTensor, SparseTensor]): The data tensor.
        model (Optional[Model]): The ground-truth CP or Tucker model.
        manifest (Optional[Manifest]): The generation record; None for files without one.
    """

    tensor: Tensor
    model: t.Optional[Model] = None
    manifest: t.Optional[Manifest] = None

    @property
    def storage(self) -> str:
        """``sparse`` or ``dense``."""
        return "sparse" if isinstance(self.tensor, SparseTensor) else "dense"


def _update_array(digest: t.Any, name: str, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array)
    digest.update(name.encode("utf-8"))
    digest.update(np.asarray(array.shape, dtype="<i8").tobytes())
    digest.update(array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes())


def dataset_digest(dataset: Dataset) -> str:
    """
    Returns the SHA-256 of the tensor and model payload of a dataset.

    The digest covers the storage kind, the shape, the coordinates and values (row-major,
    little-endian) and every model array, in a fixed order.
    """
    tensor, model = dataset.tensor, dataset.model
    digest = hashlib.sha256()
    if isinstance(tensor, SparseTensor):
        digest.update(b"sparse")
        digest.update(np.asarray(tensor.shape.dims, dtype="<i8").tobytes())
        _update_array(digest, "coords", tensor.coords)
        _update_array(digest, "values", tensor.values)
    else:
        digest.update(b"dense")
        _update_array(digest, "values", tensor.values)
    if isinstance(model, CpModel):
        digest.update(b"cp")
        for n, u in enumerate(model.factors):
            _update_array(digest, f"mode{n}", u)
        _update_array(digest, "lambda", model.weights)
    elif isinstance(model, TuckerModel):
        digest.update(b"tucker")
        for n, u in enumerate(model.factors):
            _update_array(digest, f"mode{n}", u)
        _update_array(digest, "core", model.core.values)
    return digest.hexdigest()


def _factor_effect(
    effect: EffectConfig,
    factors: t.List[FloatArray],
    config: GenConfig,
    rng: RngStream,
) -> t.Tuple[t.List[FloatArray], EffectRecord]:
    params = effect.params
    if effect.kind == "change_point":
        mode = t.cast(int, config.temporal_mode)
        spec = ChangePointSpec(
            column=params["column"],
            start=params["start"],
            end=params["end"],
            magnitude=params["magnitude"],
        )
        factors[mode], record = apply_change_point(factors[mode], spec, mode)
        return factors, record
    if effect.kind in ("column_correlation", "column_congruence"):
        mode, c = params["mode"], float(params["c"])
        rows, cols = factors[mode].shape
        impose = impose_correlation if effect.kind == "column_correlation" else impose_congruence
        factors[mode] = impose(rows, cols, c, rng)
        record = EffectRecord(
            kind=effect.kind,
            params={"mode": mode, "c": c},
            touched=[{"target": "factor", "mode": mode, "block": [[0, rows], [0, cols]]}],
        )
        return factors, record
    if effect.kind == "factor_noise":
        return add_factor_noise(factors, float(params["eta"]), rng, params["modes"])
    if effect.kind == "nonneg_factors":
        selected = params["modes"]
        if selected is None:
            return apply_nonneg(factors)
        # only the selected modes go through the constraint
        subset, record = apply_nonneg([factors[n] for n in selected])
        for region in record.touched:
            region["mode"] = selected[region["mode"]]
        for n, u in zip(selected, subset):
            factors[n] = u
        record.params["modes"] = list(selected)
        return factors, record
    sparsified, _, record = sparsify(factors, float(params["fraction"]), rng, params["modes"])
    return sparsified, record


def _tensor_effect(
    effect: EffectConfig, tensor: DenseTensor, rng: RngStream
) -> t.Tuple[Tensor, EffectRecord]:
    params = effect.params
    if effect.kind == "anomaly":
        weights = params["weights"]
        generator = dict(params["generator"])
        spec = AnomalySpec(
            block=tuple(tuple(r) for r in params["block"]),
            rank=params["rank"],
            amplitude=float(params["amplitude"]),
            generator=generator.pop("method"),
            generator_params={k: v for k, v in generator.items() if v is not None},
            weights=weights["method"],
            weight_values=tuple(weights["values"]) if weights["values"] else None,
        )
        return inject_anomaly(tensor, spec, rng)
    if effect.kind == "tensor_awgn":
        return add_awgn(tensor, float(params["snr_db"]), rng)
    if effect.kind == "sparse_awgn":
        return add_sparse_noise(tensor, float(params["snr_db"]), float(params["density"]), rng)
    if effect.kind == "nonneg_tensor":
        return apply_nonneg(tensor)
    if effect.kind == "normalize_tensor":
        return normalize_tensor(tensor)
    if effect.kind == "sparsify_tensor":
        result, _, record = sparsify(tensor, float(params["fraction"]), rng)
        return result, record
    counts = sample_poisson_counts(tensor, rng)
    record = EffectRecord(
        kind="poisson_counts",
        touched=[{"target": "tensor", "block": [[0, d] for d in tensor.shape.dims]}],
        achieved={"nnz": counts.nnz, "total": float(counts.values.sum()) if counts.nnz else 0.0},
    )
    return counts, record


def _build_model(config: GenConfig, factors: t.List[FloatArray], rng: RngStream) -> Model:
    weights_config = config.model.weights
    values = gen_weights(
        weights_config.method, config.model.weight_count, rng, weights_config.values
    )
    if config.model.type == "cp":
        return CpModel(factors=tuple(factors), weights=values)
    return TuckerModel(
        factors=tuple(factors), core=DenseTensor(values.reshape(config.model.ranks))
    )


def build_dataset(
    config: GenConfig, overrides: t.Optional[t.Mapping[str, t.Any]] = None
) -> Dataset:
    """
    Generates the dataset described by ``config``.

    Args:
        config (GenConfig): A validated config.
        overrides (Optional[Mapping[str, Any]]): Command-line overrides already applied to the
            config, recorded in the manifest.

    Returns:
        Dataset: The tensor, its ground-truth model and the manifest.

    Raises:
        ParameterError: If a stage rejects its parameters.
        NumericalError: If a stage hits a numerical failure, or the result is not finite.
    """
    root = RngStream(config.seed)
    shape = config.shape
    logger.debug(f"Generating factors for shape {list(shape.dims)}, ranks {list(config.model.ranks)}")
    factors: t.List[FloatArray] = []
    for n, mode in enumerate(config.modes):
        rows, cols = shape[n], config.model.ranks[n]
        stream = root.child("factors", n)
        if mode.temporal is not None:
            factors.append(generate_temporal(mode.temporal, rows, cols, stream))
        else:
            factors.append(generate_factor(mode.generator.spec(rows, cols), stream))  # type: ignore[union-attr]

    records: t.List[EffectRecord] = []
    for i, effect in enumerate(config.effects):
        if effect.stage != "factors":
            continue
        factors, record = _factor_effect(effect, factors, config, root.child("effects", i))
        logger.debug(f"Applied {effect.kind} to the factors")
        records.append(record)

    model = _build_model(config, factors, root.child("weights"))
    for effect in (e for e in config.effects if e.stage == "model"):
        model, record = sign_fix(t.cast(CpModel, model))
        logger.debug(f"Applied {effect.kind} to the model")
        records.append(record)

    tensor: Tensor = reconstruct(model)
    for i, effect in enumerate(config.effects):
        if effect.stage != "tensor":
            continue
        tensor, record = _tensor_effect(effect, t.cast(DenseTensor, tensor), root.child("effects", i))
        logger.debug(f"Applied {effect.kind} to the tensor")
        records.append(record)

    if isinstance(tensor, DenseTensor):
        if not tensor.is_finite():
            raise NumericalError("The generated tensor has non-finite entries")
        kinds = {e.kind for e in config.effects}
        if config.output.sparse or "sparsify_tensor" in kinds:
            tensor = to_sparse(tensor, config.output.zero_tol)

    digest = dataset_digest(Dataset(tensor=tensor, model=model))
    manifest = Manifest(
        seed=config.seed,
        shape=list(shape.dims),
        model_type=config.model.type,
        ranks=list(config.model.ranks),
        modes=[mode.to_dict() for mode in config.modes],
        effects=records,
        recipe=config.to_dict(),
        storage="sparse" if isinstance(tensor, SparseTensor) else "dense",
        content_sha256=digest,
        overrides=dict(overrides or {}),
    )
    nnz = tensor.nnz
    logger.info(
        f"Generated a {config.model.type.upper()} tensor of shape {list(shape.dims)} "
        f"({nnz} non-zeros of {math.prod(shape.dims)}, {len(records)} effects)"
    )
    return Dataset(tensor=tensor, model=model, manifest=manifest)


def replay(manifest: Manifest) -> Dataset:
    """Regenerates a dataset from the recipe stored in its manifest."""
    config = GenConfig.from_dict(manifest.recipe)
    dataset = build_dataset(config, manifest.overrides)
    if manifest.content_sha256 and dataset.manifest is not None:
        if dataset.manifest.content_sha256 != manifest.content_sha256:
            logger.warning(
                "Replayed content digest differs from the manifest; the numpy version may differ "
                f"(recorded {manifest.rng.get('numpy', '?')}, running {np.__version__})"
            )
    return dataset
