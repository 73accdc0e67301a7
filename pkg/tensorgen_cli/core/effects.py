"""
Post-generation effects: change points, anomaly injection, noise, constraints, sparsity and
Poisson count sampling.

Every effect returns its result together with an :class:`EffectRecord` describing its parameters,
the exact coordinates it touched and the quantities it achieved (noise level, norms, scale).
"""

import itertools
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from tensorgen_cli.core.errors import NumericalError, ParameterError
from tensorgen_cli.core.factors import (
    FactorSpec,
    gen_gamma,
    gen_orthogonal,
    gen_weights,
    generate_factor,
)
from tensorgen_cli.core.rng import RngStream
from tensorgen_cli.core.tensors import (
    CpModel,
    DenseTensor,
    FloatArray,
    Shape,
    SparseTensor,
    cp_reconstruct,
    frobenius_norm,
    to_sparse,
)

__all__ = [
    "STAGE_FACTORS",
    "STAGE_MODEL",
    "STAGE_TENSOR",
    "EFFECT_STAGES",
    "EffectRecord",
    "ChangePointSpec",
    "AnomalySpec",
    "NoiseSpec",
    "ConstraintSpec",
    "round_half_up",
    "compound_symmetric",
    "apply_change_point",
    "inject_anomaly",
    "noise_sigma",
    "add_awgn",
    "add_sparse_noise",
    "add_factor_noise",
    "apply_nonneg",
    "impose_congruence",
    "impose_correlation",
    "normalize_tensor",
    "sign_fix",
    "sparsify",
    "sample_poisson_counts",
    "gen_poisson_count",
]

STAGE_FACTORS = "factors"
STAGE_MODEL = "model"
STAGE_TENSOR = "tensor"

EFFECT_STAGES: t.Dict[str, str] = {
    "change_point": STAGE_FACTORS,
    "column_correlation": STAGE_FACTORS,
    "column_congruence": STAGE_FACTORS,
    "factor_noise": STAGE_FACTORS,
    "nonneg_factors": STAGE_FACTORS,
    "sparsify_factors": STAGE_FACTORS,
    "sign_fix": STAGE_MODEL,
    "anomaly": STAGE_TENSOR,
    "tensor_awgn": STAGE_TENSOR,
    "sparse_awgn": STAGE_TENSOR,
    "nonneg_tensor": STAGE_TENSOR,
    "normalize_tensor": STAGE_TENSOR,
    "sparsify_tensor": STAGE_TENSOR,
    "poisson_counts": STAGE_TENSOR,
}

Coordinate = t.Tuple[str, t.Optional[int], t.Tuple[int, ...]]


@dataclass
class EffectRecord:
    """
    One entry of the ordered effect log.

    Attributes:
        kind (str): The effect kind (a key of ``EFFECT_STAGES``).
        params (Dict[str, Any]): The parameters the effect ran with, defaults resolved.
        touched (List[Dict[str, Any]]): Touched regions. A region names its ``target``
            (``tensor``, ``factor`` or ``weights``), the factor ``mode`` when relevant, and
            either a ``block`` of half-open ``[start, stop)`` ranges or ``flat_indices``
            (row-major) inside ``shape``.
        achieved (Dict[str, Any]): Measured outcomes (noise sigma, norms, scale factors...).
    """

    kind: str
    params: t.Dict[str, t.Any] = field(default_factory=dict)
    touched: t.List[t.Dict[str, t.Any]] = field(default_factory=list)
    achieved: t.Dict[str, t.Any] = field(default_factory=dict)

    @property
    def stage(self) -> str:
        """The pipeline stage the effect belongs to."""
        return EFFECT_STAGES[self.kind]

    def coordinates(self) -> t.Set[Coordinate]:
        """Expands the touched regions into ``(target, mode, index)`` tuples."""
        coords: t.Set[Coordinate] = set()
        for region in self.touched:
            target, mode = region["target"], region.get("mode")
            if "block" in region:
                ranges = [range(start, stop) for start, stop in region["block"]]
                coords.update((target, mode, idx) for idx in itertools.product(*ranges))
            else:
                flat = np.asarray(region["flat_indices"], dtype=np.int64)
                unravelled = np.unravel_index(flat, tuple(region["shape"]))
                coords.update(
                    (target, mode, tuple(int(i) for i in idx)) for idx in zip(*unravelled)
                )
        return coords

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Returns the JSON-ready form stored in the Manifest."""
        return {
            "kind": self.kind,
            "stage": self.stage,
            "params": self.params,
            "touched": self.touched,
            "achieved": self.achieved,
        }

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "EffectRecord":
        """Rebuilds a record read back from a Manifest."""
        return cls(
            kind=data["kind"],
            params=dict(data.get("params", {})),
            touched=list(data.get("touched", [])),
            achieved=dict(data.get("achieved", {})),
        )


def _block_region(
    target: str, block: t.Sequence[t.Tuple[int, int]], mode: t.Optional[int] = None
) -> t.Dict[str, t.Any]:
    region: t.Dict[str, t.Any] = {"target": target}
    if mode is not None:
        region["mode"] = mode
    region["block"] = [[int(a), int(b)] for a, b in block]
    return region


def _flat_region(
    target: str, shape: t.Sequence[int], indices: np.ndarray, mode: t.Optional[int] = None
) -> t.Dict[str, t.Any]:
    region: t.Dict[str, t.Any] = {"target": target}
    if mode is not None:
        region["mode"] = mode
    region["shape"] = [int(d) for d in shape]
    region["flat_indices"] = [int(i) for i in indices]
    return region


def _whole(shape: t.Sequence[int]) -> t.List[t.Tuple[int, int]]:
    return [(0, int(d)) for d in shape]


def round_half_up(value: float) -> int:
    """Rounds to the nearest integer, halves away from zero (for non-negative counts)."""
    return int(math.floor(value + 0.5))


@dataclass(frozen=True)
class ChangePointSpec:
    """
    A level change of one temporal column over the closed window ``[start, end]``.

    Attributes:
        column (int): The temporal factor column.
        start (int): First affected time index.
        end (int): Last affected time index.
        magnitude (Optional[float]): Additive offset; ``None`` means 3 x the column's sample
            standard deviation (ddof=1).
    """

    column: int
    start: int
    end: int
    magnitude: t.Optional[float] = None

    def __post_init__(self) -> None:
        if self.column < 0:
            raise ParameterError(f"column must be >= 0, got {self.column}")
        if not 0 <= self.start <= self.end:
            raise ParameterError(f"Need 0 <= start <= end, got start={self.start}, end={self.end}")
        if self.magnitude is not None and not math.isfinite(self.magnitude):
            raise ParameterError(f"magnitude must be finite, got {self.magnitude}")

    def classify(self, window: int) -> str:
        """Names the change: singular outlier, structural shift or temporary change."""
        if self.start == self.end:
            return "singular_outlier"
        if self.end == window - 1:
            return "structural_shift"
        return "temporary_change"


@dataclass(frozen=True)
class AnomalySpec:
    """
    A contiguous block replaced by an independently generated small CP tensor.

    Attributes:
        block (Tuple[Tuple[int, int], ...]): Half-open ``[a_n, b_n)`` range per mode.
        rank (int): Rank of the anomaly.
        amplitude (float): Target ratio of the anomaly norm to the replaced block's norm.
        generator (str): Factor generator for the anomaly's factors.
        generator_params (Mapping[str, Any]): Its parameters.
        weights (str): Weight generator for the anomaly.
        weight_values (Optional[Tuple[float, ...]]): Values for ``custom`` weights.
    """

    block: t.Tuple[t.Tuple[int, int], ...]
    rank: int = 1
    amplitude: float = 1.0
    generator: str = "uniform"
    generator_params: t.Mapping[str, t.Any] = field(default_factory=dict)
    weights: str = "ones"
    weight_values: t.Optional[t.Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        block = tuple((int(a), int(b)) for a, b in self.block)
        if any(b <= a for a, b in block):
            raise ParameterError(f"Anomaly block ranges must be non-empty, got {block}")
        if self.rank < 1:
            raise ParameterError(f"rank must be >= 1, got {self.rank}")
        if not self.amplitude > 0 or not math.isfinite(self.amplitude):
            raise ParameterError(f"amplitude must be a finite value > 0, got {self.amplitude}")
        object.__setattr__(self, "block", block)


@dataclass(frozen=True)
class NoiseSpec:
    """
    A noise effect.

    Attributes:
        kind (str): ``tensor_awgn``, ``sparse_awgn`` or ``factor_noise``.
        snr_db (float): Target SNR for the AWGN kinds; ``inf`` disables the effect.
        density (float): Fraction of perturbed entries for ``sparse_awgn``, in (0, 1].
        eta (float): Relative noise level for ``factor_noise``.
    """

    kind: str
    snr_db: float = math.inf
    density: float = 1.0
    eta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("tensor_awgn", "sparse_awgn", "factor_noise"):
            raise ParameterError(f"Unknown noise kind {self.kind!r}")
        if self.kind == "sparse_awgn" and not 0.0 < self.density <= 1.0:
            raise ParameterError(f"density must be in (0, 1], got {self.density}")
        if self.kind == "factor_noise" and not self.eta >= 0:
            raise ParameterError(f"eta must be >= 0, got {self.eta}")


@dataclass(frozen=True)
class ConstraintSpec:
    """
    A constraint.

    Attributes:
        kind (str): ``nonneg_factors``, ``nonneg_tensor``, ``column_correlation``,
            ``column_congruence``, ``normalize_tensor`` or ``sign_fix``.
        c (float): Target pairwise correlation or congruence for the column kinds.
    """

    kind: str
    c: float = 0.0

    def __post_init__(self) -> None:
        kinds = (
            "nonneg_factors",
            "nonneg_tensor",
            "column_correlation",
            "column_congruence",
            "normalize_tensor",
            "sign_fix",
        )
        if self.kind not in kinds:
            raise ParameterError(f"Unknown constraint kind {self.kind!r}")
        if self.kind in ("column_correlation", "column_congruence") and not -1.0 < self.c < 1.0:
            raise ParameterError(f"c must be in (-1, 1), got {self.c}")


def apply_change_point(
    factor: FloatArray, spec: ChangePointSpec, mode: t.Optional[int] = None
) -> t.Tuple[FloatArray, EffectRecord]:
    """
    Adds ``spec.magnitude`` to rows ``start..end`` (inclusive) of one temporal column.

    Args:
        factor (FloatArray): The ``T x R`` temporal factor.
        spec (ChangePointSpec): The change.
        mode (Optional[int]): The temporal mode, for the record.

    Returns:
        Tuple[FloatArray, EffectRecord]: The modified copy and its log entry.
    """
    window, rank = factor.shape
    if spec.end >= window:
        raise ParameterError(f"end must be < T = {window}, got {spec.end}")
    if spec.column >= rank:
        raise ParameterError(f"column must be < R = {rank}, got {spec.column}")
    magnitude = spec.magnitude
    if magnitude is None:
        # sample standard deviation; a one-step window has none
        magnitude = 3.0 * float(np.std(factor[:, spec.column], ddof=1)) if window > 1 else 0.0
    out = np.array(factor, dtype=np.float64)
    out[spec.start : spec.end + 1, spec.column] += magnitude
    record = EffectRecord(
        kind="change_point",
        params={
            "column": spec.column,
            "start": spec.start,
            "end": spec.end,
            "magnitude": spec.magnitude,
        },
        touched=[
            _block_region(
                "factor", [(spec.start, spec.end + 1), (spec.column, spec.column + 1)], mode
            )
        ],
        achieved={"magnitude": magnitude, "classification": spec.classify(window)},
    )
    return out, record


def inject_anomaly(
    host: DenseTensor, spec: AnomalySpec, rng: RngStream
) -> t.Tuple[DenseTensor, EffectRecord]:
    """
    Overwrites a block of ``host`` with a rescaled, independently generated CP tensor.

    The anomaly is rescaled so that its Frobenius norm is ``amplitude`` times the norm of the
    block it replaces. When that block is all zero, the target becomes
    ``amplitude * ||host|| * sqrt(block volume / host volume)``. A zero-norm anomaly is injected
    as zeros.
    """
    if len(spec.block) != host.shape.order:
        raise ParameterError(
            f"Anomaly block has {len(spec.block)} ranges, the tensor has {host.shape.order} modes"
        )
    for n, ((start, stop), size) in enumerate(zip(spec.block, host.shape)):
        if start < 0 or stop > size:
            raise ParameterError(f"Anomaly range [{start}, {stop}) exceeds mode {n} size {size}")
    block_shape = tuple(stop - start for start, stop in spec.block)
    factors = [
        generate_factor(
            FactorSpec(spec.generator, rows, spec.rank, dict(spec.generator_params)),
            rng.child("factors", n),
        )
        for n, rows in enumerate(block_shape)
    ]
    weights = gen_weights(spec.weights, spec.rank, rng.child("weights"), spec.weight_values)
    anomaly = cp_reconstruct(CpModel(factors=tuple(factors), weights=weights)).values

    index = tuple(slice(start, stop) for start, stop in spec.block)
    old_block = host.values[index]
    old_norm = float(np.linalg.norm(old_block.reshape(-1)))
    if old_norm > 0.0:
        target = spec.amplitude * old_norm
    else:
        volume_ratio = math.prod(block_shape) / host.size
        target = spec.amplitude * frobenius_norm(host) * math.sqrt(volume_ratio)
    raw_norm = float(np.linalg.norm(anomaly.reshape(-1)))
    scale = target / raw_norm if raw_norm > 0.0 else 0.0
    if raw_norm == 0.0:
        logger.warning(f"The anomaly for block {[list(r) for r in spec.block]} is all zero")
    anomaly = anomaly * scale

    values = np.array(host.values)
    values[index] = anomaly
    record = EffectRecord(
        kind="anomaly",
        params={
            "block": [list(r) for r in spec.block],
            "rank": spec.rank,
            "amplitude": spec.amplitude,
            "generator": spec.generator,
            "generator_params": dict(spec.generator_params),
            "weights": spec.weights,
            "weight_values": list(spec.weight_values) if spec.weight_values is not None else None,
        },
        touched=[_block_region("tensor", spec.block)],
        achieved={
            "replaced_norm": old_norm,
            "target_norm": target,
            "injected_norm": float(np.linalg.norm(anomaly.reshape(-1))),
            "scale": scale,
        },
    )
    return DenseTensor(values), record


def noise_sigma(tensor: DenseTensor, snr_db: float) -> t.Tuple[float, float]:
    """
    Calibrates the noise standard deviation from the measured signal power.

    Returns:
        Tuple[float, float]: ``(sigma, signal_power)``.

    Raises:
        NumericalError: If the tensor has zero norm, or the SNR gives a sigma that is not positive
            or whose square (the noise power) is not finite.
    """
    norm = frobenius_norm(tensor)
    if norm == 0.0:
        raise NumericalError("Cannot calibrate an SNR on a zero-norm tensor")
    power = norm**2 / tensor.size
    # sigma = sqrt(power / 10^(snr/10)), evaluated in the log domain
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        sigma = float(np.power(10.0, 0.5 * np.log10(power) - np.float64(snr_db) / 20.0))
    if not math.isfinite(sigma * sigma) or sigma <= 0.0:
        raise NumericalError(
            f"An SNR of {snr_db} dB gives a noise level of {sigma} for a signal power of {power:g}"
        )
    return sigma, power


def add_awgn(
    tensor: DenseTensor, snr_db: float, rng: RngStream
) -> t.Tuple[DenseTensor, EffectRecord]:
    """
    Adds white Gaussian noise at the requested SNR (dB) to every entry.

    An infinite ``snr_db`` disables the effect.
    """
    params = {"snr_db": snr_db}
    if math.isinf(snr_db) and snr_db > 0:
        return tensor, EffectRecord(kind="tensor_awgn", params=params, achieved={"sigma": 0.0})
    sigma, power = noise_sigma(tensor, snr_db)
    noise = sigma * rng.generator().standard_normal(tensor.shape.dims)
    noise_power = float(np.mean(noise**2))
    record = EffectRecord(
        kind="tensor_awgn",
        params=params,
        touched=[_block_region("tensor", _whole(tensor.shape))],
        achieved={
            "sigma": sigma,
            "signal_power": power,
            "noise_power": noise_power,
            "measured_snr_db": 10 * math.log10(power / noise_power) if noise_power else math.inf,
        },
    )
    return tensor.with_values(tensor.values + noise), record


def add_sparse_noise(
    tensor: DenseTensor, snr_db: float, density: float, rng: RngStream
) -> t.Tuple[DenseTensor, EffectRecord]:
    """
    Adds white Gaussian noise to ``round(density * numel)`` uniformly chosen entries.

    Sigma is calibrated on the whole tensor's power, so density and SNR are independent knobs.
    """
    if not 0.0 < density <= 1.0:
        raise ParameterError(f"density must be in (0, 1], got {density}")
    params = {"snr_db": snr_db, "density": density}
    if math.isinf(snr_db) and snr_db > 0:
        return tensor, EffectRecord(kind="sparse_awgn", params=params, achieved={"sigma": 0.0})
    sigma, power = noise_sigma(tensor, snr_db)
    gen = rng.generator()
    count = round_half_up(density * tensor.size)
    positions = np.sort(gen.choice(tensor.size, size=count, replace=False))
    flat = np.array(tensor.values).reshape(-1)
    flat[positions] += sigma * gen.standard_normal(count)
    record = EffectRecord(
        kind="sparse_awgn",
        params=params,
        touched=[_flat_region("tensor", tensor.shape.dims, positions)],
        achieved={"sigma": sigma, "signal_power": power, "count": count},
    )
    return tensor.with_values(flat.reshape(tensor.shape.dims)), record


def add_factor_noise(
    factors: t.Sequence[FloatArray],
    eta: float,
    rng: RngStream,
    modes: t.Optional[t.Sequence[int]] = None,
) -> t.Tuple[t.List[FloatArray], EffectRecord]:
    """
    Perturbs factor matrices before reconstruction.

    Each selected factor ``U`` becomes ``U + sigma_f * Normal(0, 1)`` with
    ``sigma_f = eta * ||U||_F / sqrt(numel(U))``; every mode draws from its own sub-stream.
    """
    if not eta >= 0:
        raise ParameterError(f"eta must be >= 0, got {eta}")
    selected = list(range(len(factors))) if modes is None else sorted(set(modes))
    out = [np.array(u, dtype=np.float64) for u in factors]
    sigmas: t.Dict[str, float] = {}
    touched = []
    for n in selected:
        if not 0 <= n < len(factors):
            raise ParameterError(f"mode {n} out of range for {len(factors)} factors")
        u = out[n]
        sigma = eta * float(np.linalg.norm(u)) / math.sqrt(u.size)
        sigmas[str(n)] = sigma
        if sigma > 0.0:
            out[n] = u + sigma * rng.child("mode", n).generator().standard_normal(u.shape)
            touched.append(_block_region("factor", _whole(u.shape), n))
    record = EffectRecord(
        kind="factor_noise",
        params={"eta": eta, "modes": selected},
        touched=touched,
        achieved={"sigmas": sigmas},
    )
    return out, record


NonnegTarget = t.TypeVar("NonnegTarget", DenseTensor, t.List[FloatArray])


def apply_nonneg(target: NonnegTarget) -> t.Tuple[NonnegTarget, EffectRecord]:
    """
    Makes factors or a tensor non-negative.

    Factor entries take their absolute value, which keeps the magnitude structure. Tensor entries
    are clamped at zero, since the absolute value of a reconstructed tensor has no model reading.
    """
    if isinstance(target, DenseTensor):
        negative = np.flatnonzero(target.values.reshape(-1) < 0)
        record = EffectRecord(
            kind="nonneg_tensor",
            params={"rule": "clamp"},
            touched=[_flat_region("tensor", target.shape.dims, negative)] if negative.size else [],
            achieved={"changed": int(negative.size)},
        )
        return t.cast(NonnegTarget, target.with_values(np.maximum(target.values, 0.0))), record
    out = []
    touched = []
    changed = 0
    for n, u in enumerate(target):
        negative = np.flatnonzero(np.asarray(u).reshape(-1) < 0)
        if negative.size:
            touched.append(_flat_region("factor", np.shape(u), negative, n))
            changed += int(negative.size)
        out.append(np.abs(u))
    record = EffectRecord(
        kind="nonneg_factors",
        params={"rule": "abs"},
        touched=touched,
        achieved={"changed": changed},
    )
    return t.cast(NonnegTarget, out), record


def compound_symmetric(cols: int, c: float) -> FloatArray:
    """
    Returns ``K = (1 - c) I + c 11^T`` and checks that it is positive definite.

    K has eigenvalues ``1 - c`` and ``1 + (cols - 1) c``, so it is positive definite exactly when
    ``-1 / (cols - 1) < c < 1``.
    """
    if cols < 1:
        raise ParameterError(f"cols must be >= 1, got {cols}")
    if not c < 1.0 or (cols > 1 and not c > -1.0 / (cols - 1)):
        lower = -1.0 / (cols - 1) if cols > 1 else -math.inf
        raise ParameterError(
            f"c = {c} does not give a positive definite {cols}x{cols} matrix: "
            f"need {lower:g} < c < 1"
        )
    return (1.0 - c) * np.eye(cols) + c * np.ones((cols, cols))


def _cholesky(matrix: FloatArray) -> FloatArray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as e:
        raise ParameterError(f"Target matrix is not positive definite: {e}") from e


def impose_congruence(rows: int, cols: int, c: float, rng: RngStream) -> FloatArray:
    """
    Draws a factor whose columns have unit norm and pairwise congruence (cosine) ``c``.

    ``U = Q L^T`` with ``Q`` Haar-orthonormal and ``L`` the Cholesky factor of the
    compound-symmetric ``K``, so ``U^T U = K``.
    """
    if rows < cols:
        raise ParameterError(f"Congruent factors need rows >= cols, got {rows}x{cols}")
    lower = _cholesky(compound_symmetric(cols, c))
    return gen_orthogonal(rows, cols, rng) @ lower.T


def impose_correlation(rows: int, cols: int, c: float, rng: RngStream) -> FloatArray:
    """
    Draws a factor whose columns are jointly Gaussian with pairwise Pearson correlation ``c``.
    """
    if rows < 2:
        raise ParameterError(f"Correlated factors need rows >= 2, got {rows}")
    lower = _cholesky(compound_symmetric(cols, c))
    return rng.generator().standard_normal((rows, cols)) @ lower.T


def normalize_tensor(tensor: DenseTensor) -> t.Tuple[DenseTensor, EffectRecord]:
    """Scales the tensor to unit Frobenius norm."""
    norm = frobenius_norm(tensor)
    if norm == 0.0:
        raise NumericalError("Cannot normalize a zero-norm tensor")
    scale = 1.0 / norm
    record = EffectRecord(
        kind="normalize_tensor",
        touched=[_block_region("tensor", _whole(tensor.shape))],
        achieved={"norm": norm, "scale": scale},
    )
    return tensor.with_values(tensor.values * scale), record


def sign_fix(model: CpModel) -> t.Tuple[CpModel, EffectRecord]:
    """
    Makes the largest-magnitude entry of every factor column non-negative.

    For each component, a flip in modes ``0..N-2`` is compensated by flipping the same column of
    the last mode; if the last mode's column is then negative-led, the flip is absorbed by the
    weight. Negations are exact, so the reconstruction is unchanged bit for bit.

    Only columns whose net sign changed are logged, as the non-zero entries of that column, with
    a ``weights`` region for every negated non-zero weight.
    """
    factors = [np.array(u) for u in model.factors]
    weights = np.array(model.weights)
    last = len(factors) - 1
    parity = np.zeros((len(factors), model.rank), dtype=bool)
    negated = np.zeros(model.rank, dtype=bool)
    for r in range(model.rank):
        for n in range(last):
            column = factors[n][:, r]
            if column[np.argmax(np.abs(column))] < 0:
                factors[n][:, r] = -column
                factors[last][:, r] = -factors[last][:, r]
                parity[n, r] ^= True
                parity[last, r] ^= True
        column = factors[last][:, r]
        if column[np.argmax(np.abs(column))] < 0:
            factors[last][:, r] = -column
            weights[r] = -weights[r]
            parity[last, r] ^= True
            negated[r] = True

    touched = []
    flips = []
    for n, r in zip(*np.nonzero(parity)):
        n, r = int(n), int(r)
        rows, cols = factors[n].shape
        nonzero = np.flatnonzero(factors[n][:, r])
        if nonzero.size:
            touched.append(_flat_region("factor", (rows, cols), nonzero * cols + r, n))
        flips.append([n, r])
    changed_weights = np.flatnonzero(negated & (weights != 0))
    if changed_weights.size:
        touched.append(_flat_region("weights", weights.shape, changed_weights))
    record = EffectRecord(
        kind="sign_fix",
        touched=touched,
        achieved={"flips": flips, "negated_weights": [int(r) for r in np.flatnonzero(negated)]},
    )
    return CpModel(factors=tuple(factors), weights=weights), record


def _drop(values: np.ndarray, fraction: float, gen: np.random.Generator) -> np.ndarray:
    nonzero = np.flatnonzero(values.reshape(-1))
    count = round_half_up(fraction * nonzero.size)
    return np.sort(gen.choice(nonzero, size=count, replace=False))


SparsifyTarget = t.TypeVar("SparsifyTarget", DenseTensor, t.List[FloatArray])


def sparsify(
    target: SparsifyTarget,
    fraction: float,
    rng: RngStream,
    modes: t.Optional[t.Sequence[int]] = None,
) -> t.Tuple[SparsifyTarget, t.Optional[SparseTensor], EffectRecord]:
    """
    Zeroes ``round(fraction * nnz)`` uniformly chosen non-zero entries.

    Args:
        target (Union[DenseTensor, List[FloatArray]]): A tensor, or factor matrices (each selected
            mode sparsified independently on its own sub-stream).
        fraction (float): Drop fraction in [0, 1).
        rng (RngStream): The stream to draw from.
        modes (Optional[Sequence[int]]): Factor modes to sparsify; all by default.

    Returns:
        The sparsified target, its SparseTensor view (tensors only), and the log entry.
    """
    if not 0.0 <= fraction < 1.0:
        raise ParameterError(f"fraction must be in [0, 1), got {fraction}")
    if isinstance(target, DenseTensor):
        dropped = _drop(target.values, fraction, rng.generator())
        flat = np.array(target.values).reshape(-1)
        flat[dropped] = 0.0
        result = target.with_values(flat.reshape(target.shape.dims))
        record = EffectRecord(
            kind="sparsify_tensor",
            params={"fraction": fraction},
            touched=[_flat_region("tensor", target.shape.dims, dropped)] if dropped.size else [],
            achieved={"dropped": int(dropped.size), "nnz": result.nnz},
        )
        return t.cast(SparsifyTarget, result), to_sparse(result), record

    selected = list(range(len(target))) if modes is None else sorted(set(modes))
    out = [np.array(u, dtype=np.float64) for u in target]
    touched = []
    dropped_per_mode: t.Dict[str, int] = {}
    for n in selected:
        if not 0 <= n < len(out):
            raise ParameterError(f"mode {n} out of range for {len(out)} factors")
        dropped = _drop(out[n], fraction, rng.child("mode", n).generator())
        out[n].flat[dropped] = 0.0
        dropped_per_mode[str(n)] = int(dropped.size)
        if dropped.size:
            touched.append(_flat_region("factor", out[n].shape, dropped, n))
    record = EffectRecord(
        kind="sparsify_factors",
        params={"fraction": fraction, "modes": selected},
        touched=touched,
        achieved={"dropped": dropped_per_mode},
    )
    return t.cast(SparsifyTarget, out), None, record


def sample_poisson_counts(rate: DenseTensor, rng: RngStream) -> SparseTensor:
    """
    Samples one Poisson count per entry of a non-negative rate tensor; zero counts are dropped.

    Raises:
        NumericalError: If a rate is negative or not finite.
    """
    if not rate.is_finite():
        raise NumericalError("Poisson rates must be finite")
    if np.any(rate.values < 0):
        raise NumericalError("Poisson rates must be non-negative")
    counts = rng.generator().poisson(rate.values).astype(np.float64)
    return to_sparse(DenseTensor(counts))


def gen_poisson_count(
    shape: t.Union[Shape, t.Sequence[int]],
    rank: int,
    rng: RngStream,
    mu: float = 0.1,
    sigma2: float = 0.1,
    theta: float = 0.01,
    weights: t.Optional[t.Sequence[float]] = None,
) -> t.Tuple[SparseTensor, CpModel]:
    """
    Generates a sparse count tensor with a Gamma CP rate model.

    Gamma factors (one sub-stream per mode) and unit weights, unless given, define the rate tensor,
    whose entries are the means of independent Poisson draws.

    Returns:
        Tuple[SparseTensor, CpModel]: The counts and the ground-truth rate model.
    """
    dims = Shape(tuple(shape)).dims
    factors = tuple(
        gen_gamma(size, rank, rng.child("factors", n), mu=mu, sigma2=sigma2, theta=theta)
        for n, size in enumerate(dims)
    )
    lam = np.ones(rank) if weights is None else np.asarray(weights, dtype=np.float64)
    model = CpModel(factors=factors, weights=lam)
    counts = sample_poisson_counts(cp_reconstruct(model), rng.child("counts"))
    return counts, model
