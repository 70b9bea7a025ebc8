"""Dense complex linear algebra over explicit tensor-factor structure.

Everything downstream (channels, circuit simulation, fault-path sums) works
with operators on a tensor product of small subsystems. This module pins the
conventions once: row-major complex128 storage, explicit per-subsystem
dimensions, and a hard cap on the total dimension so a desk-scale run cannot
silently allocate gigabytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

# Total Hilbert-space dimension cap (12 qubits).
DIM_CAP = 2**12

# Tolerances used by validation predicates.
HERMITIAN_ATOL = 1e-12
PSD_EIG_FLOOR = -1e-12
TRACE_ATOL = 1e-10
PROB_SUM_ATOL = 1e-10


class DimensionCapError(ValueError):
    """Raised when a requested object would exceed DIM_CAP."""


# ---------------------------------------------------------------------------
# Subsystem bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsystemDims:
    """Ordered local dimensions of a tensor-product space.

    An empty tuple is the scalar space (total dimension 1); it shows up as
    the result of tracing out every subsystem.
    """

    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if any(d < 2 for d in self.dims):
            raise ValueError(f"subsystem dimensions must be >= 2, got {self.dims}")
        if self.total > DIM_CAP:
            raise DimensionCapError(
                f"total dimension {self.total} exceeds cap {DIM_CAP}"
            )

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __getitem__(self, i: int) -> int:
        return self.dims[i]

    def restrict(self, keep: Iterable[int]) -> "SubsystemDims":
        """Dims of the subsystems in `keep`, original order preserved."""
        kept = sorted(set(int(i) for i in keep))
        for i in kept:
            if not 0 <= i < len(self.dims):
                raise ValueError(f"subsystem index {i} out of range for {self.dims}")
        return SubsystemDims(tuple(self.dims[i] for i in kept))

    def concat(self, other: "SubsystemDims") -> "SubsystemDims":
        return SubsystemDims(self.dims + other.dims)


def qubit_dims(n: int) -> SubsystemDims:
    """n qubit factors."""
    if n < 0:
        raise ValueError("qubit count must be >= 0")
    return SubsystemDims((2,) * n)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Matrix:
    """Square complex matrix with explicit subsystem structure.

    `data` is stored as an immutable row-major complex128 array whose side
    equals `dims.total`. Arithmetic helpers return new Matrix instances with
    the same dims; anything that changes the factor structure goes through
    `tensor` / `partial_trace`.
    """

    data: np.ndarray
    dims: SubsystemDims

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] != self.dims.total:
            raise ValueError(
                f"matrix side {arr.shape[0]} does not match dims total {self.dims.total}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    # -- constructors ------------------------------------------------------

    @classmethod
    def of(cls, data, dims: SubsystemDims | Sequence[int] | None = None) -> "Matrix":
        """Wrap an array. Without dims, the matrix is one subsystem."""
        arr = np.asarray(data, dtype=np.complex128)
        if dims is None:
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError(f"expected a square matrix, got shape {arr.shape}")
            d = arr.shape[0]
            dims = SubsystemDims(() if d == 1 else (d,))
        elif not isinstance(dims, SubsystemDims):
            dims = SubsystemDims(tuple(dims))
        return cls(arr, dims)

    @classmethod
    def identity(cls, dims: SubsystemDims | Sequence[int]) -> "Matrix":
        if not isinstance(dims, SubsystemDims):
            dims = SubsystemDims(tuple(dims))
        return cls(np.eye(dims.total, dtype=np.complex128), dims)

    # -- predicates ---------------------------------------------------------

    @property
    def side(self) -> int:
        return self.data.shape[0]

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T)) <= atol)

    def is_density(self) -> bool:
        """Hermitian within 1e-12, eigenvalues >= -1e-12, trace 1 within 1e-10."""
        if not self.is_hermitian():
            return False
        if abs(self.trace() - 1.0) > TRACE_ATOL:
            return False
        return bool(np.min(np.linalg.eigvalsh(self.data)) >= PSD_EIG_FLOOR)

    def is_unitary(self, atol: float = 1e-10) -> bool:
        g = self.data.conj().T @ self.data
        return bool(np.max(np.abs(g - np.eye(self.side))) <= atol)

    # -- arithmetic ---------------------------------------------------------

    def dagger(self) -> "Matrix":
        return Matrix(self.data.conj().T, self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def __add__(self, other: "Matrix") -> "Matrix":
        self._check_same_dims(other)
        return Matrix(self.data + other.data, self.dims)

    def __sub__(self, other: "Matrix") -> "Matrix":
        self._check_same_dims(other)
        return Matrix(self.data - other.data, self.dims)

    def __matmul__(self, other: "Matrix") -> "Matrix":
        self._check_same_dims(other)
        return Matrix(self.data @ other.data, self.dims)

    def __mul__(self, scalar: complex) -> "Matrix":
        return Matrix(self.data * scalar, self.dims)

    __rmul__ = __mul__

    def __neg__(self) -> "Matrix":
        return Matrix(-self.data, self.dims)

    def allclose(self, other: "Matrix", atol: float = 1e-10) -> bool:
        return self.dims == other.dims and bool(
            np.max(np.abs(self.data - other.data)) <= atol
        )

    def _check_same_dims(self, other: "Matrix") -> None:
        if self.dims != other.dims:
            raise ValueError(f"dims mismatch: {self.dims.dims} vs {other.dims.dims}")


# ---------------------------------------------------------------------------
# Outcome distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    """Probabilities over string-labelled measurement outcomes."""

    probs: Mapping[str, float]

    def __post_init__(self) -> None:
        fixed = {str(k): float(v) for k, v in dict(self.probs).items()}
        for k, v in fixed.items():
            if v < -1e-12 or v > 1.0 + 1e-12:
                raise ValueError(f"probability of outcome {k!r} out of range: {v}")
        total = sum(fixed.values())
        if abs(total - 1.0) > PROB_SUM_ATOL:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        object.__setattr__(self, "probs", fixed)

    def __getitem__(self, outcome: str) -> float:
        return self.probs.get(outcome, 0.0)

    def outcomes(self) -> tuple[str, ...]:
        return tuple(sorted(self.probs))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def tensor(a: Matrix, b: Matrix) -> Matrix:
    """Kronecker product; factor lists concatenate (a's subsystems first)."""
    dims = a.dims.concat(b.dims)  # cap enforced here
    return Matrix(np.kron(a.data, b.data), dims)


def partial_trace(m: Matrix, keep: Iterable[int]) -> Matrix:
    """Trace out every subsystem not listed in `keep`.

    The result's factors appear in their original order regardless of the
    order of `keep`. Keeping everything is a copy; keeping nothing yields the
    1x1 matrix holding the full trace.
    """
    dims = m.dims.dims
    n = len(dims)
    kept = sorted(set(int(i) for i in keep))
    for i in kept:
        if not 0 <= i < n:
            raise ValueError(f"subsystem index {i} out of range for {dims}")
    kept_set = set(kept)
    t = m.data.reshape(dims + dims)
    row_labels = list(range(n))
    col_labels = [i if i not in kept_set else n + i for i in range(n)]
    out_labels = kept + [n + i for i in kept]
    reduced = np.einsum(t, row_labels + col_labels, out_labels)
    side = math.prod(dims[i] for i in kept) if kept else 1
    return Matrix(reduced.reshape(side, side), m.dims.restrict(kept))


def singular_values(m: Matrix | np.ndarray) -> np.ndarray:
    """Descending singular values via Hermitian eigendecomposition.

    Hermitian inputs (the usual case: densities, differences of densities)
    use |eig(M)| directly; squaring through M^dag M would cost half the
    available precision near zero.
    """
    arr = m.data if isinstance(m, Matrix) else np.asarray(m, dtype=np.complex128)
    if np.max(np.abs(arr - arr.conj().T)) <= HERMITIAN_ATOL:
        return np.sort(np.abs(np.linalg.eigvalsh(arr)))[::-1]
    w = np.linalg.eigvalsh(arr.conj().T @ arr)
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


def trace_norm(m: Matrix | np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.sum(singular_values(m)))


def operator_norm(m: Matrix | np.ndarray) -> float:
    """Largest singular value."""
    sv = singular_values(m)
    return float(sv[0]) if sv.size else 0.0


def kolmogorov_distance(p: Distribution, q: Distribution) -> float:
    """Sum of |p - q| over the union of outcomes (missing outcomes read 0)."""
    keys = set(p.probs) | set(q.probs)
    return float(sum(abs(p[k] - q[k]) for k in keys))


def embed_operator(
    op: np.ndarray,
    support: Sequence[int],
    total_dims: SubsystemDims | Sequence[int],
) -> np.ndarray:
    """Place `op`, acting on the ordered subsystems `support`, into the full
    space, identity elsewhere.

    `support` lists which global subsystems the rows/cols of `op` refer to,
    in op's own factor order. Duplicate indices are rejected.
    """
    if not isinstance(total_dims, SubsystemDims):
        total_dims = SubsystemDims(tuple(total_dims))
    dims = total_dims.dims
    n = len(dims)
    support = tuple(int(i) for i in support)
    if len(set(support)) != len(support):
        raise ValueError(f"support has duplicates: {support}")
    for i in support:
        if not 0 <= i < n:
            raise ValueError(f"support index {i} out of range for {dims}")
    op = np.asarray(op, dtype=np.complex128)
    d_sup = math.prod(dims[i] for i in support)
    if op.shape != (d_sup, d_sup):
        raise ValueError(
            f"operator shape {op.shape} does not match support dims {d_sup}"
        )
    rest = [i for i in range(n) if i not in support]
    if not rest:
        if support == tuple(range(n)):
            return op
    d_rest = math.prod(dims[i] for i in rest) if rest else 1
    full = np.kron(op, np.eye(d_rest, dtype=np.complex128))
    order = list(support) + rest  # current subsystem order of `full`
    shape = [dims[i] for i in order]
    full = full.reshape(shape + shape)
    # transpose so global subsystem i sits at axis i
    pos = np.argsort(order)
    full = full.transpose(list(pos) + [n + int(j) for j in pos])
    d = total_dims.total
    return np.ascontiguousarray(full.reshape(d, d))


# -- JSON interchange ---------------------------------------------------------
# Complex arrays travel as flat row-major lists of [re, im] pairs.


def vector_to_json(v: np.ndarray) -> list[list[float]]:
    arr = np.asarray(v, dtype=np.complex128).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in arr]


def vector_from_json(obj) -> np.ndarray:
    try:
        return np.array([complex(re, im) for re, im in obj], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"expected a list of [re, im] pairs: {exc}") from None


def matrix_to_json(m: "Matrix | np.ndarray") -> list[list[float]]:
    data = m.data if isinstance(m, Matrix) else np.asarray(m, dtype=np.complex128)
    return vector_to_json(data.reshape(-1))


def matrix_from_json(obj, dims: "SubsystemDims | None" = None) -> Matrix:
    flat = vector_from_json(obj)
    side = math.isqrt(flat.size)
    if side * side != flat.size:
        raise ValueError(f"{flat.size} entries do not fill a square matrix")
    return Matrix.of(flat.reshape(side, side), dims)
