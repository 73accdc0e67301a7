"""
Tensor and model containers, and exact multilinear reconstruction.

All containers are immutable: arrays are copied to C-contiguous float64 (int64 for coordinates)
buffers and flagged read-only. The row-major (C order) linearization is part of the file formats.
"""

import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from tensorgen_cli.core.errors import DegenerateModelError, ShapeError, StructureError

__all__ = [
    "FloatArray",
    "IntArray",
    "Shape",
    "DenseTensor",
    "SparseTensor",
    "CpModel",
    "TuckerModel",
    "Model",
    "cp_reconstruct",
    "tucker_reconstruct",
    "reconstruct",
    "frobenius_norm",
    "normalize_cp",
    "to_sparse",
    "superdiagonal_core",
]

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

_MAX_ELEMENTS = int(np.iinfo(np.intp).max)


def _frozen(array: npt.ArrayLike, dtype: t.Any) -> np.ndarray:
    out = np.array(array, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Shape:
    """
    The size of a tensor along each of its N >= 2 modes.

    Attributes:
        dims (Tuple[int, ...]): One positive size per mode.
    """

    dims: t.Tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise ShapeError(f"A tensor needs at least 2 modes, got {len(dims)}")
        if any(d < 1 for d in dims):
            raise ShapeError(f"Every mode size must be >= 1, got {list(dims)}")
        if math.prod(dims) > _MAX_ELEMENTS:
            raise ShapeError(f"Shape {list(dims)} exceeds the platform index range")
        object.__setattr__(self, "dims", dims)

    @property
    def order(self) -> int:
        """The number of modes N."""
        return len(self.dims)

    @property
    def size(self) -> int:
        """The number of entries."""
        return math.prod(self.dims)

    def __iter__(self) -> t.Iterator[int]:
        return iter(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def __getitem__(self, mode: int) -> int:
        return self.dims[mode]


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """
    An N-dimensional float64 array.

    Attributes:
        values (FloatArray): The entries, stored C-contiguous (row-major).
    """

    values: FloatArray
    shape: Shape = field(init=False)

    def __post_init__(self) -> None:
        values = _frozen(self.values, np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", Shape(values.shape))

    @classmethod
    def zeros(cls, shape: t.Union[Shape, t.Sequence[int]]) -> "DenseTensor":
        """Returns an all-zero tensor of the given shape."""
        return cls(np.zeros(tuple(shape)))

    @property
    def size(self) -> int:
        """The number of entries."""
        return self.shape.size

    @property
    def nnz(self) -> int:
        """The number of non-zero entries."""
        return int(np.count_nonzero(self.values))

    def is_finite(self) -> bool:
        """Whether every entry is finite."""
        return bool(np.all(np.isfinite(self.values)))

    def with_values(self, values: npt.ArrayLike) -> "DenseTensor":
        """Returns a new tensor with the given values, which must keep the current shape."""
        new = DenseTensor(np.asarray(values))
        if new.shape != self.shape:
            raise ShapeError(f"Expected shape {list(self.shape)}, got {list(new.shape)}")
        return new


@dataclass(frozen=True, eq=False)
class SparseTensor:
    """
    A coordinate-list (COO) tensor.

    Attributes:
        shape (Shape): The tensor shape.
        coords (IntArray): ``nnz x N`` 0-based index tuples, one row per stored entry.
        values (FloatArray): ``nnz`` stored values, all non-zero.
    """

    shape: Shape
    coords: IntArray
    values: FloatArray

    def __post_init__(self) -> None:
        shape = self.shape if isinstance(self.shape, Shape) else Shape(tuple(self.shape))
        coords = np.asarray(self.coords, dtype=np.int64)
        if coords.size == 0:
            coords = coords.reshape(0, shape.order)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if coords.ndim != 2 or coords.shape[1] != shape.order:
            raise ShapeError(
                f"Coordinates must be an nnz x {shape.order} array, got {list(coords.shape)}"
            )
        if coords.shape[0] != values.shape[0]:
            raise ShapeError(
                f"Got {coords.shape[0]} index tuples but {values.shape[0]} values"
            )
        if coords.size and (np.any(coords < 0) or np.any(coords >= np.asarray(shape.dims))):
            raise ShapeError(f"Index tuples out of bounds for shape {list(shape.dims)}")
        if np.any(values == 0.0):
            raise ShapeError("Sparse tensors store non-zero values only")
        if coords.shape[0] > 1:
            flat = np.ravel_multi_index(tuple(coords.T), shape.dims)
            if np.unique(flat).shape[0] != flat.shape[0]:
                raise ShapeError("Duplicate index tuples in sparse tensor")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "coords", _frozen(coords, np.int64))
        object.__setattr__(self, "values", _frozen(values, np.float64))

    @property
    def nnz(self) -> int:
        """The number of stored entries."""
        return int(self.values.shape[0])

    @property
    def density(self) -> float:
        """The fraction of stored entries, ``nnz / prod(dims)``."""
        return self.nnz / self.shape.size

    def to_dense(self) -> DenseTensor:
        """Returns the dense tensor, with zeros at every position not stored."""
        out = np.zeros(self.shape.dims)
        if self.nnz:
            out[tuple(self.coords.T)] = self.values
        return DenseTensor(out)


def _check_factors(factors: t.Sequence[npt.ArrayLike]) -> t.Tuple[FloatArray, ...]:
    frozen = tuple(_frozen(u, np.float64) for u in factors)
    if len(frozen) < 2:
        raise StructureError(f"A model needs at least 2 factor matrices, got {len(frozen)}")
    for n, u in enumerate(frozen):
        if u.ndim != 2 or u.shape[0] < 1 or u.shape[1] < 1:
            raise StructureError(f"Factor of mode {n} must be a non-empty matrix, got {u.shape}")
    return frozen


@dataclass(frozen=True, eq=False)
class CpModel:
    """
    A CP (PARAFAC) model: N factor matrices sharing R columns, plus a weight vector (lambda).

    Attributes:
        factors (Tuple[FloatArray, ...]): One ``I_n x R`` matrix per mode.
        weights (FloatArray): The ``R`` component weights.
    """

    factors: t.Tuple[FloatArray, ...]
    weights: FloatArray

    def __post_init__(self) -> None:
        factors = _check_factors(self.factors)
        weights = _frozen(self.weights, np.float64).reshape(-1)
        ranks = {u.shape[1] for u in factors}
        if len(ranks) != 1:
            raise StructureError(
                f"Factor matrices must share the column count, got {[u.shape[1] for u in factors]}"
            )
        if weights.shape[0] not in ranks:
            raise StructureError(
                f"Weight vector has length {weights.shape[0]}, expected {ranks.pop()}"
            )
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weights", weights)

    @property
    def rank(self) -> int:
        """The number of components R."""
        return int(self.weights.shape[0])

    @property
    def shape(self) -> Shape:
        """The shape of the reconstructed tensor."""
        return Shape(tuple(u.shape[0] for u in self.factors))


@dataclass(frozen=True, eq=False)
class TuckerModel:
    """
    A Tucker model: N factor matrices and a dense core coupling their columns.

    Attributes:
        factors (Tuple[FloatArray, ...]): One ``I_n x R_n`` matrix per mode.
        core (DenseTensor): The ``R_1 x ... x R_N`` core tensor.
    """

    factors: t.Tuple[FloatArray, ...]
    core: DenseTensor

    def __post_init__(self) -> None:
        factors = _check_factors(self.factors)
        core = self.core if isinstance(self.core, DenseTensor) else DenseTensor(self.core)
        if core.shape.order != len(factors):
            raise StructureError(
                f"Core has {core.shape.order} modes but there are {len(factors)} factor matrices"
            )
        for n, u in enumerate(factors):
            if core.shape[n] != u.shape[1]:
                raise StructureError(
                    f"Core size {core.shape[n]} of mode {n} does not match the {u.shape[1]} "
                    f"columns of its factor matrix"
                )
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "core", core)

    @property
    def ranks(self) -> t.Tuple[int, ...]:
        """The core size along each mode."""
        return self.core.shape.dims

    @property
    def shape(self) -> Shape:
        """The shape of the reconstructed tensor."""
        return Shape(tuple(u.shape[0] for u in self.factors))


Model = t.Union[CpModel, TuckerModel]


def cp_reconstruct(model: CpModel) -> DenseTensor:
    """
    Sums the R weighted outer products of the factor columns.

    The summation order is fixed: components outermost, and within a component the weight is
    applied to the first mode before the outer products over the remaining modes.
    """
    out = np.zeros(model.shape.dims)
    for r in range(model.rank):
        component = model.weights[r] * model.factors[0][:, r]
        for u in model.factors[1:]:
            component = np.multiply.outer(component, u[:, r])
        out += component
    return DenseTensor(out)


def tucker_reconstruct(model: TuckerModel) -> DenseTensor:
    """Multiplies the core by each factor matrix along its mode (mode-n products, mode 0 first)."""
    out = np.asarray(model.core.values)
    for n, u in enumerate(model.factors):
        out = np.moveaxis(np.tensordot(u, out, axes=([1], [n])), 0, n)
    return DenseTensor(out)


def reconstruct(model: Model) -> DenseTensor:
    """Reconstructs either kind of model."""
    if isinstance(model, CpModel):
        return cp_reconstruct(model)
    return tucker_reconstruct(model)


def frobenius_norm(tensor: DenseTensor) -> float:
    """Returns the square root of the sum of squared entries."""
    flat = tensor.values.reshape(-1)
    return float(np.sqrt(np.dot(flat, flat)))


def normalize_cp(model: CpModel) -> CpModel:
    """
    Scales every factor column to unit Euclidean norm, absorbing the norms into the weights.

    Raises:
        DegenerateModelError: If a factor column is all zero.
    """
    weights = np.array(model.weights)
    factors = []
    for n, u in enumerate(model.factors):
        norms = np.linalg.norm(u, axis=0)
        if np.any(norms == 0.0):
            zero_cols = np.flatnonzero(norms == 0.0).tolist()
            raise DegenerateModelError(f"Factor of mode {n} has all-zero columns {zero_cols}")
        factors.append(u / norms)
        weights = weights * norms
    return CpModel(factors=tuple(factors), weights=weights)


def to_sparse(tensor: DenseTensor, zero_tol: float = 0.0) -> SparseTensor:
    """
    Keeps the entries whose magnitude is strictly greater than ``zero_tol``, in row-major order.
    """
    if zero_tol < 0:
        raise ShapeError(f"zero_tol must be >= 0, got {zero_tol}")
    mask = np.abs(tensor.values) > zero_tol
    return SparseTensor(shape=tensor.shape, coords=np.argwhere(mask), values=tensor.values[mask])


def superdiagonal_core(weights: npt.ArrayLike, order: int) -> DenseTensor:
    """Returns the order-N core with ``weights`` on its superdiagonal and zeros elsewhere."""
    lam = np.asarray(weights, dtype=np.float64).reshape(-1)
    core = np.zeros((lam.shape[0],) * order)
    idx = np.arange(lam.shape[0])
    core[(idx,) * order] = lam
    return DenseTensor(core)
