"""
Non-temporal random factor matrices and CP weights / Tucker core entries.

Column-separable generators draw every column from its own sub-stream (``col/<r>``), so the
numbers in column ``r`` do not depend on how many columns are requested.
"""

import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from tensorgen_cli.core.errors import ParameterError, ShapeError
from tensorgen_cli.core.rng import RngStream
from tensorgen_cli.core.tensors import FloatArray

__all__ = [
    "FACTOR_METHODS",
    "FACTOR_ALIASES",
    "FACTOR_DEFAULTS",
    "WEIGHT_METHODS",
    "WEIGHT_ALIASES",
    "FactorSpec",
    "canonical_factor_method",
    "canonical_weight_method",
    "gen_gamma",
    "gen_multi_normal",
    "gen_uniform",
    "gen_orthogonal",
    "gen_stochastic",
    "gen_binary",
    "gen_weights",
    "generate_factor",
]

FACTOR_METHODS = ("gamma", "multi_normal", "uniform", "orthogonal", "stochastic", "binary")
FACTOR_ALIASES = {"rand": "uniform", "randn": "multi_normal"}
FACTOR_DEFAULTS: t.Dict[str, t.Dict[str, t.Any]] = {
    "gamma": {"mu": 0.1, "sigma2": 0.1, "theta": 0.01, "shapes": None},
    "multi_normal": {"mus": 0.0, "sigmas": 1.0},
    "uniform": {},
    "orthogonal": {},
    "stochastic": {},
    "binary": {},
}

WEIGHT_METHODS = ("ones", "uniform", "normal", "custom")
WEIGHT_ALIASES = {"rand": "uniform", "randn": "normal"}

_MAX_REDRAWS = 64


def canonical_factor_method(method: str) -> str:
    """Resolves ``rand``/``randn`` aliases and rejects unknown factor generators."""
    method = FACTOR_ALIASES.get(method, method)
    if method not in FACTOR_METHODS:
        raise ParameterError(
            f"Unknown factor generator {method!r}, expected one of {', '.join(FACTOR_METHODS)}"
        )
    return method


def canonical_weight_method(method: str) -> str:
    """Resolves ``rand``/``randn`` aliases and rejects unknown weight generators."""
    method = WEIGHT_ALIASES.get(method, method)
    if method not in WEIGHT_METHODS:
        raise ParameterError(
            f"Unknown weight generator {method!r}, expected one of {', '.join(WEIGHT_METHODS)}"
        )
    return method


def _check_size(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise ShapeError(f"Factor matrices need rows >= 1 and cols >= 1, got {rows}x{cols}")


def _per_column(
    values: t.Union[float, t.Sequence[float], npt.ArrayLike], cols: int, name: str
) -> FloatArray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 0:
        return np.full(cols, float(array))
    array = array.reshape(-1)
    if array.shape[0] != cols:
        raise ParameterError(f"{name} must have one value per column ({cols}), got {array.shape[0]}")
    return array


def gen_gamma(
    rows: int,
    cols: int,
    rng: RngStream,
    mu: float = 0.1,
    sigma2: float = 0.1,
    theta: float = 0.01,
    shapes: t.Optional[t.Sequence[float]] = None,
) -> FloatArray:
    """
    Draws a non-negative factor whose column ``r`` is i.i.d. Gamma(k_r, theta).

    The shape ``k_r`` is drawn once per column as ``|Normal(mu, sigma2)|`` (redrawn while zero),
    unless ``shapes`` pins it.

    Args:
        rows (int): Number of rows.
        cols (int): Number of columns.
        rng (RngStream): The stream to draw from.
        mu (float): Mean of the normal distribution of the shape. Defaults to 0.1.
        sigma2 (float): Variance of the normal distribution of the shape. Defaults to 0.1.
        theta (float): Gamma scale. Defaults to 0.01.
        shapes (Optional[Sequence[float]]): Fixed positive shapes, one per column.

    Returns:
        FloatArray: The ``rows x cols`` factor matrix.
    """
    _check_size(rows, cols)
    if theta <= 0:
        raise ParameterError(f"theta must be > 0, got {theta}")
    if sigma2 < 0:
        raise ParameterError(f"sigma2 must be >= 0, got {sigma2}")
    fixed = None
    if shapes is not None:
        fixed = _per_column(shapes, cols, "shapes")
        if np.any(fixed <= 0):
            raise ParameterError("Gamma shapes must be > 0")
    elif mu == 0 and sigma2 == 0:
        raise ParameterError("mu = 0 with sigma2 = 0 can only produce a zero gamma shape")

    out = np.empty((rows, cols))
    sigma = math.sqrt(sigma2)
    for r in range(cols):
        gen = rng.child("col", r).generator()
        if fixed is not None:
            shape = float(fixed[r])
        else:
            shape = 0.0
            while shape == 0.0:
                shape = abs(float(gen.normal(mu, sigma)))
        out[:, r] = gen.gamma(shape, theta, size=rows)
    return out


def gen_multi_normal(
    rows: int,
    cols: int,
    rng: RngStream,
    mus: t.Union[float, t.Sequence[float]] = 0.0,
    sigmas: t.Union[float, t.Sequence[float]] = 1.0,
) -> FloatArray:
    """
    Fills column ``r`` with i.i.d. Normal(mus[r], sigmas[r]^2).

    With the defaults this is the standard-normal (``randn``) generator.
    """
    _check_size(rows, cols)
    mu = _per_column(mus, cols, "mus")
    sigma = _per_column(sigmas, cols, "sigmas")
    if np.any(sigma < 0):
        raise ParameterError(f"sigmas must be >= 0, got {sigma.tolist()}")
    out = np.empty((rows, cols))
    for r in range(cols):
        gen = rng.child("col", r).generator()
        out[:, r] = mu[r] + sigma[r] * gen.standard_normal(rows)
    return out


def gen_uniform(rows: int, cols: int, rng: RngStream) -> FloatArray:
    """Fills the matrix with i.i.d. Uniform[0, 1) entries."""
    _check_size(rows, cols)
    out = np.empty((rows, cols))
    for r in range(cols):
        out[:, r] = rng.child("col", r).generator().random(rows)
    return out


def gen_orthogonal(n_rows: int, n_cols: int, rng: RngStream) -> FloatArray:
    """
    Draws a matrix with orthonormal columns, Haar-distributed.

    A Gaussian matrix is QR-factorized and each column of Q is multiplied by the sign of the
    matching diagonal entry of R (a zero diagonal entry counts as positive).
    """
    _check_size(n_rows, n_cols)
    if n_rows < n_cols:
        raise ShapeError(f"Orthogonal factors need rows >= cols, got {n_rows}x{n_cols}")
    gaussian = rng.generator().standard_normal((n_rows, n_cols))
    q, r = np.linalg.qr(gaussian)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return np.ascontiguousarray(q * signs)


def gen_stochastic(rows: int, cols: int, rng: RngStream) -> FloatArray:
    """Draws a Uniform[0, 1) matrix and divides each column by its sum."""
    uniform = gen_uniform(rows, cols, rng)
    sums = uniform.sum(axis=0)
    for r in np.flatnonzero(sums == 0.0):
        for attempt in range(_MAX_REDRAWS):
            uniform[:, r] = rng.child("redraw", int(r), attempt).generator().random(rows)
            if uniform[:, r].sum() > 0.0:
                break
        sums[r] = uniform[:, r].sum()
    return uniform / sums


def gen_binary(rows: int, cols: int, rng: RngStream) -> FloatArray:
    """Puts a single 1 in every row, in a uniformly chosen column."""
    _check_size(rows, cols)
    picks = rng.generator().integers(0, cols, size=rows)
    out = np.zeros((rows, cols))
    out[np.arange(rows), picks] = 1.0
    return out


def gen_weights(
    method: str,
    length: int,
    rng: RngStream,
    custom_values: t.Optional[t.Sequence[float]] = None,
) -> FloatArray:
    """
    Generates the CP weight vector, or the flattened (row-major) entries of a Tucker core.

    Args:
        method (str): One of ``ones``, ``uniform`` (``rand``), ``normal`` (``randn``) or
            ``custom``.
        length (int): Number of values.
        rng (RngStream): The stream to draw from.
        custom_values (Optional[Sequence[float]]): The values for ``custom``.

    Returns:
        FloatArray: The vector of ``length`` values.
    """
    method = canonical_weight_method(method)
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length}")
    if method == "ones":
        return np.ones(length)
    if method == "uniform":
        return rng.generator().random(length)
    if method == "normal":
        return rng.generator().standard_normal(length)
    if custom_values is None:
        raise ParameterError("custom weights need custom_values")
    values = np.asarray(custom_values, dtype=np.float64).reshape(-1)
    if values.shape[0] != length:
        raise ParameterError(f"Expected {length} custom values, got {values.shape[0]}")
    return values.copy()


@dataclass(frozen=True)
class FactorSpec:
    """
    A request for one factor matrix.

    Attributes:
        method (str): The generator name (aliases are resolved on construction).
        rows (int): Number of rows (the mode size).
        cols (int): Number of columns (the mode rank).
        params (Mapping[str, Any]): Keyword parameters of the generator.
    """

    method: str
    rows: int
    cols: int
    params: t.Mapping[str, t.Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", canonical_factor_method(self.method))
        _check_size(self.rows, self.cols)
        if self.method == "orthogonal" and self.rows < self.cols:
            raise ShapeError(
                f"Orthogonal factors need rows >= cols, got {self.rows}x{self.cols}"
            )
        unknown = set(self.params) - set(FACTOR_DEFAULTS[self.method])
        if unknown:
            raise ParameterError(
                f"Unknown parameters for {self.method}: {', '.join(sorted(unknown))}"
            )


_GENERATORS: t.Dict[str, t.Callable[..., FloatArray]] = {
    "gamma": gen_gamma,
    "multi_normal": gen_multi_normal,
    "uniform": gen_uniform,
    "orthogonal": gen_orthogonal,
    "stochastic": gen_stochastic,
    "binary": gen_binary,
}


def generate_factor(spec: FactorSpec, rng: RngStream) -> FloatArray:
    """Runs the generator named by ``spec`` on ``rng``."""
    params = {k: v for k, v in spec.params.items() if v is not None}
    return _GENERATORS[spec.method](spec.rows, spec.cols, rng, **params)
