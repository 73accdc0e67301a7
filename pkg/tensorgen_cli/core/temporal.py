"""
Factor matrices for the temporal mode: periodic waves, seasonal cycles with growth, and streaming
random walks. Time is 0-based and phases are normalised by the window length ``T``, so a
frequency means "cycles across the whole window".
"""

import math
import typing as t
from dataclasses import dataclass, field

import numpy as np

from tensorgen_cli.core.errors import ParameterError, ShapeError
from tensorgen_cli.core.factors import FactorSpec, generate_factor
from tensorgen_cli.core.rng import RngStream
from tensorgen_cli.core.tensors import FloatArray

__all__ = [
    "WAVEFORMS",
    "SEASONAL_PRESETS",
    "TEMPORAL_KINDS",
    "WaveSpec",
    "SeasonalSpec",
    "StreamSpec",
    "TemporalSpec",
    "gen_periodic",
    "gen_seasonal",
    "gen_streaming",
    "generate_temporal",
    "seasonal_pattern",
]

WAVEFORMS = ("sine", "cosine", "square", "sawtooth")
SEASONAL_PRESETS = ("single_peak", "double_peak")
TEMPORAL_KINDS = ("periodic", "seasonal", "streaming")


@dataclass(frozen=True)
class WaveSpec:
    """
    One periodic column.

    Attributes:
        waveform (str): ``sine``, ``cosine``, ``square`` or ``sawtooth``.
        frequency (float): Cycles over the full window, > 0.
        amplitude (float): Peak value.
        phase (float): Phase offset in radians.
    """

    waveform: str
    frequency: float
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.waveform not in WAVEFORMS:
            raise ParameterError(
                f"Unknown waveform {self.waveform!r}, expected one of {', '.join(WAVEFORMS)}"
            )
        if not self.frequency > 0:
            raise ParameterError(f"frequency must be > 0, got {self.frequency}")
        if not math.isfinite(self.amplitude):
            raise ParameterError(f"amplitude must be finite, got {self.amplitude}")
        if not math.isfinite(self.phase):
            raise ParameterError(f"phase must be finite, got {self.phase}")


@dataclass(frozen=True)
class SeasonalSpec:
    """
    One seasonal column: a pattern repeated every ``cycle_length`` steps, growing per cycle.

    Attributes:
        cycle_length (int): The cycle length L.
        pattern (Union[str, Tuple[float, ...]]): A preset name or L custom values.
        growth_rate (float): Relative growth g per cycle; cycle c is scaled by (1 + g)^c.
    """

    cycle_length: int
    pattern: t.Union[str, t.Tuple[float, ...]] = "single_peak"
    growth_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.cycle_length < 1:
            raise ParameterError(f"cycle_length must be >= 1, got {self.cycle_length}")
        if isinstance(self.pattern, str):
            if self.pattern not in SEASONAL_PRESETS:
                raise ParameterError(
                    f"Unknown seasonal preset {self.pattern!r}, expected one of "
                    f"{', '.join(SEASONAL_PRESETS)} or a list of values"
                )
        else:
            values = tuple(float(v) for v in self.pattern)
            if len(values) != self.cycle_length:
                raise ParameterError(
                    f"Custom pattern has {len(values)} values, cycle_length is {self.cycle_length}"
                )
            object.__setattr__(self, "pattern", values)
        if not math.isfinite(self.growth_rate):
            raise ParameterError(f"growth_rate must be finite, got {self.growth_rate}")


@dataclass(frozen=True)
class StreamSpec:
    """
    A streaming walk: row t + 1 = (1 - epsilon) * row t + epsilon * white noise.

    Attributes:
        epsilon (float): Variation control in [0, 1]; 0 freezes the rows, 1 makes them i.i.d.
        init_method (str): Factor generator for row 0.
        init_params (Mapping[str, Any]): Its parameters.
    """

    epsilon: float
    init_method: str = "multi_normal"
    init_params: t.Mapping[str, t.Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ParameterError(f"epsilon must be in [0, 1], got {self.epsilon}")


def _bump(positions: FloatArray, center: float, width: float) -> FloatArray:
    return np.exp(-0.5 * ((positions - center) / width) ** 2)


def seasonal_pattern(spec: SeasonalSpec) -> FloatArray:
    """Returns the L values of one cycle."""
    length = spec.cycle_length
    if not isinstance(spec.pattern, str):
        return np.asarray(spec.pattern, dtype=np.float64)
    positions = np.arange(length, dtype=np.float64)
    if spec.pattern == "single_peak":
        return _bump(positions, length / 2, length / 6)
    return _bump(positions, length / 3, length / 10) + _bump(positions, 2 * length / 3, length / 10)


def _wave(spec: WaveSpec, time: FloatArray, window: int) -> FloatArray:
    cycles = spec.frequency * time / window
    if spec.waveform == "sine":
        return spec.amplitude * np.sin(2 * np.pi * cycles + spec.phase)
    if spec.waveform == "cosine":
        return spec.amplitude * np.cos(2 * np.pi * cycles + spec.phase)
    # square and sawtooth read the position inside the current cycle
    fraction = np.mod(cycles + spec.phase / (2 * np.pi), 1.0)
    if spec.waveform == "square":
        return spec.amplitude * np.where(fraction < 0.5, 1.0, -1.0)
    return spec.amplitude * (2.0 * fraction - 1.0)


def gen_periodic(T: int, specs: t.Sequence[WaveSpec]) -> FloatArray:  # pylint: disable=invalid-name
    """
    Builds a ``T x len(specs)`` matrix, one waveform per column.

    Column ``r`` at time ``t`` is ``a * w(2 pi f t / T + phase)``. The square wave is +1 on the
    first half of every cycle (including its start) and -1 on the second half; the sawtooth rises
    linearly from -1 to 1 over each cycle.
    """
    if T < 2:
        raise ShapeError(f"Periodic factors need T >= 2, got {T}")
    if not specs:
        raise ParameterError("At least one wave is required")
    time = np.arange(T, dtype=np.float64)
    return np.column_stack([_wave(spec, time, T) for spec in specs])


def gen_seasonal(T: int, spec: SeasonalSpec) -> FloatArray:  # pylint: disable=invalid-name
    """
    Returns the length-``T`` series ``pattern[t mod L] * (1 + g)^floor(t / L)``.

    The last cycle is truncated when ``T`` is not a multiple of ``L``.
    """
    if spec.cycle_length > T:
        raise ParameterError(f"cycle_length {spec.cycle_length} exceeds the window T = {T}")
    time = np.arange(T)
    pattern = seasonal_pattern(spec)
    growth = (1.0 + spec.growth_rate) ** (time // spec.cycle_length)
    return pattern[time % spec.cycle_length] * growth


def gen_streaming(T: int, R: int, spec: StreamSpec, rng: RngStream) -> FloatArray:  # pylint: disable=invalid-name
    """
    Draws a ``T x R`` random walk that changes a little at every step.

    Row 0 comes from ``spec.init_method``; every following row is the convex AR(1) update
    ``(1 - epsilon) * previous + epsilon * w`` with standard-normal ``w``.
    """
    if T < 1:
        raise ShapeError(f"Streaming factors need T >= 1, got {T}")
    out = np.empty((T, R))
    init = FactorSpec(spec.init_method, rows=1, cols=R, params=dict(spec.init_params))
    out[0] = generate_factor(init, rng.child("init"))[0]
    noise = rng.child("walk").generator().standard_normal((max(T - 1, 0), R))
    keep = 1.0 - spec.epsilon
    for step in range(1, T):
        out[step] = keep * out[step - 1] + spec.epsilon * noise[step - 1]
    return out


@dataclass(frozen=True)
class TemporalSpec:
    """
    The recipe of the temporal factor.

    Attributes:
        kind (str): ``periodic``, ``seasonal`` or ``streaming``.
        waves (Tuple[WaveSpec, ...]): One wave per column, for ``periodic``.
        seasons (Tuple[SeasonalSpec, ...]): One seasonal spec per column, for ``seasonal``.
        stream (Optional[StreamSpec]): The walk, for ``streaming``.
    """

    kind: str
    waves: t.Tuple[WaveSpec, ...] = ()
    seasons: t.Tuple[SeasonalSpec, ...] = ()
    stream: t.Optional[StreamSpec] = None

    def __post_init__(self) -> None:
        if self.kind not in TEMPORAL_KINDS:
            raise ParameterError(
                f"Unknown temporal kind {self.kind!r}, expected one of {', '.join(TEMPORAL_KINDS)}"
            )
        if self.kind == "periodic" and not self.waves:
            raise ParameterError("periodic temporal factors need waves")
        if self.kind == "seasonal" and not self.seasons:
            raise ParameterError("seasonal temporal factors need seasons")
        if self.kind == "streaming" and self.stream is None:
            raise ParameterError("streaming temporal factors need a stream spec")

    def columns(self) -> t.Optional[int]:
        """The number of columns fixed by the spec, or None when any rank fits."""
        if self.kind == "periodic":
            return len(self.waves)
        if self.kind == "seasonal":
            return len(self.seasons)
        return None


def generate_temporal(spec: TemporalSpec, T: int, R: int, rng: RngStream) -> FloatArray:  # pylint: disable=invalid-name
    """Builds the ``T x R`` temporal factor described by ``spec``."""
    expected = spec.columns()
    if expected is not None and expected != R:
        raise ParameterError(f"The temporal spec defines {expected} columns, the rank is {R}")
    if spec.kind == "periodic":
        return gen_periodic(T, spec.waves)
    if spec.kind == "seasonal":
        return np.column_stack([gen_seasonal(T, season) for season in spec.seasons])
    return gen_streaming(T, R, t.cast(StreamSpec, spec.stream), rng)
