"""Dense and sparse (COO) tensor containers and the basic operations on them.

Everything here is order-3 or order-4, float64, and 0-based. Instances are
immutable after construction, so they can be shared freely across threads.
"""

from __future__ import annotations

import numpy as np

SUPPORTED_ORDERS = (3, 4)


def _check_shape(shape) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if len(dims) not in SUPPORTED_ORDERS:
        raise ValueError(f"tensor order must be 3 or 4, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ValueError(f"all dimensions must be >= 1, got {dims}")
    return dims


class DenseTensor:
    """Row-major float64 tensor (last index varies fastest)."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C")
        _check_shape(arr.shape)
        if not np.isfinite(arr).all():
            raise ValueError("tensor values must be finite")
        arr.flags.writeable = False
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the entries."""
        return self.data.reshape(-1)

    def __getitem__(self, idx) -> float:
        return self.data[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"DenseTensor(shape={self.shape}, nnz={self.nnz()})"

    def slice(self, mode: int, index: int) -> np.ndarray:
        """Sub-array with ``mode`` fixed at ``index`` (matrix for order 3)."""
        _check_mode_index(self.shape, mode, index)
        return np.take(self.data, index, axis=mode)

    def nnz(self) -> int:
        return int(np.count_nonzero(self.data))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def density(self) -> float:
        return self.nnz() / self.size

    def to_dense(self) -> "DenseTensor":
        return self

    def to_coo(self) -> "CooTensor":
        idx = np.argwhere(self.data != 0.0)
        vals = self.data[tuple(idx.T)] if len(idx) else np.empty(0)
        return CooTensor(self.shape, idx, vals)


class CooTensor:
    """Sparse coordinate-form tensor; entries are kept sorted by flat index."""

    __slots__ = ("shape", "indices", "values")

    def __init__(self, shape, indices, values):
        shape = _check_shape(shape)
        indices = np.array(indices, dtype=np.int64).reshape(-1, len(shape))
        values = np.array(values, dtype=np.float64).reshape(-1)
        if len(indices) != len(values):
            raise ValueError("index and value counts differ")
        if len(indices):
            if indices.min() < 0 or (indices >= np.array(shape)).any():
                raise ValueError("index out of bounds")
            if not np.isfinite(values).all():
                raise ValueError("tensor values must be finite")
            if (values == 0.0).any():
                raise ValueError("stored COO values must be non-zero")
            flat = np.ravel_multi_index(tuple(indices.T), shape)
            if len(np.unique(flat)) != len(flat):
                raise ValueError("duplicate COO index")
            order = np.argsort(flat)
            indices = indices[order]
            values = values[order]
        indices.flags.writeable = False
        values.flags.writeable = False
        self.shape = shape
        self.indices = indices
        self.values = values

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def __getitem__(self, idx) -> float:
        idx = tuple(int(i) for i in idx)
        hit = np.all(self.indices == np.array(idx), axis=1)
        where = np.nonzero(hit)[0]
        return float(self.values[where[0]]) if len(where) else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, CooTensor):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"CooTensor(shape={self.shape}, nnz={self.nnz()})"

    def slice(self, mode: int, index: int) -> np.ndarray:
        """Densified sub-array with ``mode`` fixed at ``index``."""
        _check_mode_index(self.shape, mode, index)
        rest = self.shape[:mode] + self.shape[mode + 1 :]
        out = np.zeros(rest)
        mask = self.indices[:, mode] == index
        if mask.any():
            sub = np.delete(self.indices[mask], mode, axis=1)
            out[tuple(sub.T)] = self.values[mask]
        return out

    def nnz(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def density(self) -> float:
        return self.nnz() / self.size

    def to_dense(self) -> DenseTensor:
        data = np.zeros(self.shape)
        if len(self.values):
            data[tuple(self.indices.T)] = self.values
        return DenseTensor(data)

    def to_coo(self) -> "CooTensor":
        return self


Tensor = DenseTensor | CooTensor


def _check_mode_index(shape, mode, index):
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of bounds for order-{len(shape)} tensor")
    if not 0 <= index < shape[mode]:
        raise ValueError(f"index {index} out of bounds for mode {mode} (dim {shape[mode]})")


class FactorSet:
    """CPD factor matrices, one per mode, sharing the component count R."""

    __slots__ = ("factors",)

    def __init__(self, factors):
        mats = tuple(np.array(f, dtype=np.float64) for f in factors)
        if len(mats) not in SUPPORTED_ORDERS:
            raise ValueError(f"need 3 or 4 factor matrices, got {len(mats)}")
        for m in mats:
            if m.ndim != 2:
                raise ValueError("factors must be matrices")
            if not np.isfinite(m).all():
                raise ValueError("factor entries must be finite")
        ranks = {m.shape[1] for m in mats}
        if len(ranks) != 1:
            raise ValueError(f"factors disagree on component count: {sorted(ranks)}")
        if mats[0].shape[1] < 1:
            raise ValueError("component count must be >= 1")
        for m in mats:
            m.flags.writeable = False
        self.factors = mats

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.factors)


_FROM_FACTORS_SPEC = {3: "ir,jr,kr->ijk", 4: "ir,jr,kr,lr->ijkl"}


def from_factors(f: FactorSet) -> DenseTensor:
    """Materialize the sum of R outer products described by a FactorSet."""
    _check_shape(f.dims)
    spec = _FROM_FACTORS_SPEC[len(f.factors)]
    return DenseTensor(np.einsum(spec, *f.factors, optimize=True))


def add_scaled_noise(g: DenseTensor, n: DenseTensor, alpha: float) -> DenseTensor:
    """Return ``g + alpha * (||g||_F / ||n||_F) * n``.

    The scaling makes the relative Frobenius norm of the injected noise equal
    alpha, independent of how the noise tensor was drawn.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if g.shape != n.shape:
        raise ValueError(f"shape mismatch: {g.shape} vs {n.shape}")
    if alpha == 0:
        return DenseTensor(g.data)
    nn = n.norm()
    if nn == 0.0:
        raise ValueError("noise tensor has zero norm but alpha > 0")
    return DenseTensor(g.data + (alpha * g.norm() / nn) * n.data)


def value_range(t: Tensor) -> tuple[float, float]:
    """(min, max) over all entries, counting the implicit zeros of a CooTensor."""
    if isinstance(t, CooTensor):
        if t.nnz() == 0:
            return 0.0, 0.0
        lo = float(t.values.min())
        hi = float(t.values.max())
        if t.nnz() < t.size:
            lo = min(lo, 0.0)
            hi = max(hi, 0.0)
        return lo, hi
    return float(t.data.min()), float(t.data.max())


def minmax_normalize(t: Tensor) -> DenseTensor:
    """Map entries to (x - min) / (max - min); a constant tensor maps to zeros."""
    lo, hi = value_range(t)
    data = t.to_dense().data
    if hi == lo:
        return DenseTensor(np.zeros(t.shape))
    return DenseTensor((data - lo) / (hi - lo))


def unfold(t: Tensor, mode: int) -> np.ndarray:
    """Mode-m unfolding: row i is the vectorized (row-major) slice at index i."""
    shape = t.shape
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of bounds for order-{len(shape)} tensor")
    rest = shape[:mode] + shape[mode + 1 :]
    cols = int(np.prod(rest))
    if isinstance(t, CooTensor):
        out = np.zeros((shape[mode], cols))
        if t.nnz():
            sub = np.delete(t.indices, mode, axis=1)
            flat = np.ravel_multi_index(tuple(sub.T), rest)
            out[t.indices[:, mode], flat] = t.values
        return out
    # ascontiguousarray: reshape may hand back a strided view, and the
    # summation order downstream must not depend on memory layout
    return np.ascontiguousarray(np.moveaxis(t.data, mode, 0).reshape(shape[mode], cols))
