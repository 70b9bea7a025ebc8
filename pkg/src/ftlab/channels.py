"""Completely positive trace-preserving maps in Kraus form.

Channels carry an explicit `support`: the ambient subsystem labels their
Kraus factors refer to. Composition and embedding work over the union of
supports, so single-qubit noise can be slotted into multi-qubit states
without manual kron bookkeeping.

The diamond-norm distance is reported as a certified interval. The lower
end comes from restarted projected-gradient ascent over bipartite pure
states (reference copy of the input space, which is enough to attain the
maximum); the upper end is the spectral bound on the partial trace of the
absolute Choi difference, clipped at 2. Exact SDP evaluation is out of
scope by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .matcore import (
    Matrix,
    SubsystemDims,
    embed_operator,
    matrix_from_json,
    matrix_to_json,
    operator_norm,
)

TP_ATOL = 1e-10
UNITARY_ATOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


# ---------------------------------------------------------------------------
# Channel type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Channel:
    """Kraus decomposition {K_i} with sum K_i^dag K_i = I (within 1e-10).

    `support` lists the ambient subsystem labels the Kraus factors act on,
    in the factor order of the Kraus matrices themselves.
    """

    kraus: tuple[Matrix, ...]
    support: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.kraus:
            raise ValueError("channel needs at least one Kraus operator")
        dims = self.kraus[0].dims
        for k in self.kraus:
            if k.dims != dims:
                raise ValueError("Kraus operators disagree on dims")
        support = tuple(int(s) for s in self.support)
        if len(support) != len(dims):
            raise ValueError(
                f"support length {len(support)} does not match factor count {len(dims)}"
            )
        if len(set(support)) != len(support):
            raise ValueError(f"support has duplicates: {support}")
        object.__setattr__(self, "kraus", tuple(self.kraus))
        object.__setattr__(self, "support", support)
        acc = sum(k.data.conj().T @ k.data for k in self.kraus)
        if np.max(np.abs(acc - np.eye(dims.total))) > TP_ATOL:
            raise ValueError("Kraus operators are not trace preserving")

    @property
    def dims(self) -> SubsystemDims:
        return self.kraus[0].dims

    @property
    def dim(self) -> int:
        return self.dims.total

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_kraus(
        cls,
        ops: Sequence[np.ndarray | Matrix],
        dims: SubsystemDims | Sequence[int] | None = None,
        support: Sequence[int] | None = None,
    ) -> "Channel":
        if not ops:
            raise ValueError("need at least one Kraus operator")
        mats = []
        for op in ops:
            if isinstance(op, Matrix):
                mats.append(op if dims is None else Matrix.of(op.data, dims))
            else:
                mats.append(Matrix.of(op, dims))
        if support is None:
            support = tuple(range(len(mats[0].dims)))
        return cls(tuple(mats), tuple(support))

    @classmethod
    def unitary(
        cls,
        u: np.ndarray | Matrix,
        dims: SubsystemDims | Sequence[int] | None = None,
        support: Sequence[int] | None = None,
    ) -> "Channel":
        ch = cls.from_kraus([u], dims, support)
        if not ch.kraus[0].is_unitary(UNITARY_ATOL):
            raise ValueError("operator is not unitary")
        return ch

    @classmethod
    def identity(
        cls,
        dims: SubsystemDims | Sequence[int],
        support: Sequence[int] | None = None,
    ) -> "Channel":
        if not isinstance(dims, SubsystemDims):
            dims = SubsystemDims(tuple(dims))
        return cls.from_kraus([np.eye(dims.total)], dims, support)

    def is_identity(self, atol: float = 1e-12) -> bool:
        j = _choi_array(self)
        return bool(np.max(np.abs(j - _choi_array(Channel.identity(self.dims)))) <= atol)

    def dagger_unitary(self) -> "Channel":
        """Inverse of a unitary channel."""
        if len(self.kraus) != 1 or not self.kraus[0].is_unitary(UNITARY_ATOL):
            raise ValueError("only unitary channels have a channel inverse")
        return Channel((self.kraus[0].dagger(),), self.support)


# ---------------------------------------------------------------------------
# Application, composition, embedding
# ---------------------------------------------------------------------------


def _kraus_arrays_on(ch: Channel, dims: SubsystemDims) -> list[np.ndarray]:
    """Kraus arrays embedded into `dims`, support read as positions in dims."""
    n = len(dims)
    for pos, s in enumerate(ch.support):
        if not 0 <= s < n:
            raise ValueError(f"channel support index {s} out of range for {dims.dims}")
        if dims[s] != ch.dims[pos]:
            raise ValueError(
                f"subsystem {s} has dim {dims[s]}, channel factor expects {ch.dims[pos]}"
            )
    if ch.support == tuple(range(n)):
        return [k.data for k in ch.kraus]
    return [embed_operator(k.data, ch.support, dims) for k in ch.kraus]


def apply_channel(ch: Channel, rho: Matrix, *, validate: bool = True) -> Matrix:
    """sum_i K_i rho K_i^dag, embedding the channel into rho's space."""
    if validate and not rho.is_density():
        raise ValueError("input is not a density matrix")
    ks = _kraus_arrays_on(ch, rho.dims)
    out = np.zeros_like(rho.data)
    for k in ks:
        out = out + k @ rho.data @ k.conj().T
    return Matrix(out, rho.dims)


def _union_space(a: Channel, b: Channel) -> tuple[tuple[int, ...], SubsystemDims]:
    """Sorted union of ambient labels and the corresponding dims."""
    local: dict[int, int] = {}
    for ch in (a, b):
        for pos, s in enumerate(ch.support):
            d = ch.dims[pos]
            if local.setdefault(s, d) != d:
                raise ValueError(f"channels disagree on dim of subsystem {s}")
    labels = tuple(sorted(local))
    return labels, SubsystemDims(tuple(local[s] for s in labels))


def _reindexed(ch: Channel, labels: tuple[int, ...], dims: SubsystemDims) -> list[np.ndarray]:
    positions = tuple(labels.index(s) for s in ch.support)
    if positions == tuple(range(len(dims))):
        return [k.data for k in ch.kraus]
    return [embed_operator(k.data, positions, dims) for k in ch.kraus]


def compose_channels(later: Channel, earlier: Channel) -> Channel:
    """Channel applying `earlier` first, then `later`.

    Supports may differ; both are embedded into the union of their ambient
    labels. The Kraus set of the composite is the full pairwise product, and
    trace preservation is re-verified on construction.
    """
    labels, dims = _union_space(later, earlier)
    ka = _reindexed(later, labels, dims)
    kb = _reindexed(earlier, labels, dims)
    prods = [a @ b for a in ka for b in kb]
    return Channel.from_kraus(prods, dims, labels)


def embed_channel(ch: Channel, total: SubsystemDims | Sequence[int]) -> Channel:
    """Extend the channel with identity factors to act on the full space."""
    if not isinstance(total, SubsystemDims):
        total = SubsystemDims(tuple(total))
    ks = _kraus_arrays_on(ch, total)
    return Channel.from_kraus(ks, total, tuple(range(len(total))))


# ---------------------------------------------------------------------------
# Choi matrix and diamond distance
# ---------------------------------------------------------------------------


def _choi_array(ch: Channel) -> np.ndarray:
    d = ch.dim
    j = np.zeros((d * d, d * d), dtype=np.complex128)
    for k in ch.kraus:
        v = k.data.reshape(-1)  # (K ⊗ I) applied to sum_i |i>|i>
        j += np.outer(v, v.conj())
    return j


def choi_matrix(ch: Channel) -> Matrix:
    """Choi operator: the channel applied to one half of the unnormalized
    maximally entangled state. Output factors first, reference copy second.
    Trace equals the input dimension; tracing out the output factors gives
    the identity on the reference copy.
    """
    return Matrix(_choi_array(ch), ch.dims.concat(ch.dims))


class DiamondInterval(NamedTuple):
    lower: float
    upper: float


def _diamond_upper_from_delta(delta_j: np.ndarray, d: int) -> float:
    """Certified upper bound: largest eigenvalue of Tr_out |dJ|, capped at 2."""
    w, u = np.linalg.eigh(delta_j)
    abs_j = (u * np.abs(w)) @ u.conj().T
    reduced = np.einsum(abs_j.reshape(d, d, d, d), [0, 1, 0, 2], [1, 2])
    bound = float(np.max(np.linalg.eigvalsh(reduced)))
    return min(2.0, max(0.0, bound))


def _objective(kraus_a, kraus_b, psi_mat):
    """Trace norm of ((A - B) ⊗ I)(|psi><psi|) plus the sign operator."""
    va = [k @ psi_mat for k in kraus_a]
    vb = [k @ psi_mat for k in kraus_b]
    cols = np.stack([v.reshape(-1) for v in va + vb], axis=1)
    signs = np.array([1.0] * len(va) + [-1.0] * len(vb))
    m = (cols * signs) @ cols.conj().T
    w, u = np.linalg.eigh(m)
    f = float(np.sum(np.abs(w)))
    s = (u * np.sign(w)) @ u.conj().T
    return f, s, va, vb


def _ascend(kraus_a, kraus_b, psi, tol, max_iter=400):
    d = kraus_a[0].shape[0]
    psi = psi / np.linalg.norm(psi)
    psi_mat = psi.reshape(d, d)
    f, s, va, vb = _objective(kraus_a, kraus_b, psi_mat)
    step = 1.0
    for _ in range(max_iter):
        # gradient direction: H_S psi with H_S the Heisenberg lift of the sign
        g = np.zeros(d * d, dtype=np.complex128)
        for k, v in zip(kraus_a, va):
            g += (k.conj().T @ (s @ v.reshape(-1)).reshape(d, d)).reshape(-1)
        for k, v in zip(kraus_b, vb):
            g -= (k.conj().T @ (s @ v.reshape(-1)).reshape(d, d)).reshape(-1)
        r = g - (np.vdot(psi, g)) * psi
        if np.linalg.norm(r) <= 1e-13 * max(1.0, f):
            break
        moved = False
        while step >= 1e-12:
            cand = psi + step * r
            cand = cand / np.linalg.norm(cand)
            f2, s2, va2, vb2 = _objective(kraus_a, kraus_b, cand.reshape(d, d))
            if f2 > f:
                gain = f2 - f
                psi, f, s, va, vb = cand, f2, s2, va2, vb2
                psi_mat = psi.reshape(d, d)
                step = min(step * 2.0, 64.0)
                moved = gain > tol * max(f, 1e-30)
                break
            step *= 0.5
        else:
            break
        if not moved:
            break
    return f


def diamond_distance(
    a: Channel,
    b: Channel,
    restarts: int = 32,
    tol: float = 1e-10,
    seed: int = 0,
) -> DiamondInterval:
    """Certified interval for the diamond-norm distance between two channels.

    Parameters
    ----------
    a, b : Channel
        Same dims required.
    restarts : int
        Ascent restarts. The first start is the maximally entangled state
        (already optimal for Pauli-mixture and unitary-rotation channels);
        the rest are Haar-random bipartite pure states.
    tol : float
        Relative-improvement stopping threshold for the ascent.
    seed : int
        Seeds the random restarts; fixed seed makes the result reproducible.

    Returns
    -------
    DiamondInterval
        (lower, upper) with lower <= true distance <= upper.
    """
    if a.dims != b.dims:
        raise ValueError("channels must share dims")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    d = a.dim
    delta_j = _choi_array(a) - _choi_array(b)
    upper = _diamond_upper_from_delta(delta_j, d)
    if upper <= 1e-14:
        return DiamondInterval(0.0, 0.0)
    kraus_a = [k.data for k in a.kraus]
    kraus_b = [k.data for k in b.kraus]
    best = 0.0
    for i in range(restarts):
        if i == 0:
            psi = np.eye(d, dtype=np.complex128).reshape(-1) / math.sqrt(d)
        else:
            rng = np.random.default_rng([seed, i])
            psi = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
        best = max(best, _ascend(kraus_a, kraus_b, psi, tol))
    return DiamondInterval(min(best, upper), upper)


# ---------------------------------------------------------------------------
# Noise zoo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Parameter record for the built-in single-location noise models."""

    kind: str
    delta_theta: float | None = None
    t0: float | None = None
    t1: float | None = None
    p: float | None = None
    e_op: Matrix | None = None

    KINDS = ("control_rotation", "amplitude_damping", "probabilistic", "depolarizing")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "control_rotation":
            if self.delta_theta is None:
                raise ValueError("control_rotation needs delta_theta")
        elif self.kind == "amplitude_damping":
            if self.t0 is None or self.t1 is None:
                raise ValueError("amplitude_damping needs t0 and t1")
            if self.t0 < 0 or self.t1 <= 0:
                raise ValueError("need t0 >= 0 and t1 > 0")
        elif self.kind == "probabilistic":
            if self.p is None or self.e_op is None:
                raise ValueError("probabilistic needs p and e_op")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"p out of range: {self.p}")
            if not self.e_op.is_unitary(UNITARY_ATOL):
                raise ValueError("e_op must satisfy E^dag E = I")
        elif self.kind == "depolarizing":
            if self.p is None:
                raise ValueError("depolarizing needs p")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"p out of range: {self.p}")

    @classmethod
    def control_rotation(cls, delta_theta: float) -> "NoiseSpec":
        return cls("control_rotation", delta_theta=float(delta_theta))

    @classmethod
    def amplitude_damping(cls, t0: float, t1: float) -> "NoiseSpec":
        return cls("amplitude_damping", t0=float(t0), t1=float(t1))

    @classmethod
    def probabilistic(cls, p: float, e_op: Matrix | np.ndarray) -> "NoiseSpec":
        if not isinstance(e_op, Matrix):
            e_op = Matrix.of(e_op)
        return cls("probabilistic", p=float(p), e_op=e_op)

    @classmethod
    def depolarizing(cls, p: float) -> "NoiseSpec":
        return cls("depolarizing", p=float(p))

    @property
    def gamma(self) -> float:
        """Decay weight 1 - exp(-t0/T1) of the amplitude-damping model."""
        if self.kind != "amplitude_damping":
            raise ValueError("gamma is defined for amplitude_damping only")
        return 1.0 - math.exp(-self.t0 / self.t1)


def make_noise_channel(spec: NoiseSpec, support: Sequence[int] | None = None) -> Channel:
    """Instantiate a noise model from the zoo as a Channel."""
    if spec.kind == "control_rotation":
        th = spec.delta_theta
        u = np.diag([np.exp(1j * th), np.exp(-1j * th)])  # exp(i th Z)
        return Channel.unitary(u, (2,), support)
    if spec.kind == "amplitude_damping":
        g = spec.gamma
        m0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - g)]])
        m1 = np.array([[0.0, math.sqrt(g)], [0.0, 0.0]])
        return Channel.from_kraus([m0, m1], (2,), support)
    if spec.kind == "probabilistic":
        e = spec.e_op
        ident = np.eye(e.side)
        ks = [math.sqrt(1.0 - spec.p) * ident, math.sqrt(spec.p) * e.data]
        return Channel.from_kraus(ks, e.dims, support)
    if spec.kind == "depolarizing":
        p = spec.p
        ks = [
            math.sqrt(1.0 - p) * np.eye(2),
            math.sqrt(p / 3.0) * SIGMA_X,
            math.sqrt(p / 3.0) * SIGMA_Y,
            math.sqrt(p / 3.0) * SIGMA_Z,
        ]
        return Channel.from_kraus(ks, (2,), support)
    raise ValueError(f"unknown noise kind {spec.kind!r}")


def stinespring_dilation(ch: Channel) -> tuple[Matrix, int]:
    """Unitary dilation on (system ⊗ environment), environment appended last.

    The environment dimension equals the Kraus count; starting it in |0> and
    tracing it out after the unitary reproduces the channel. For a single
    Kraus operator the channel is unitary already and the environment is
    trivial (dimension 1).
    """
    k = len(ch.kraus)
    d = ch.dim
    if k == 1:
        return ch.kraus[0], 1
    iso = np.zeros((d * k, d), dtype=np.complex128)
    for e, op in enumerate(ch.kraus):
        # joint index (s, e) -> s * k + e
        iso[e::k, :] = op.data
    q, _ = np.linalg.qr(iso, mode="complete")
    u = np.zeros((d * k, d * k), dtype=np.complex128)
    u[:, 0::k] = iso  # columns for env state |0>
    rest = iter(range(d, d * k))
    for col in range(d * k):
        if col % k != 0:
            u[:, col] = q[:, next(rest)]
    dims = SubsystemDims(ch.dims.dims + (k,))
    mat = Matrix(u, dims)
    if not mat.is_unitary(1e-9):
        raise AssertionError("dilation completion failed to be unitary")
    return mat, k


# ---------------------------------------------------------------------------
# Noise-strength evaluators
# ---------------------------------------------------------------------------


def _diamond_upper(a: Channel, b: Channel) -> float:
    if a.dims != b.dims:
        raise ValueError("channels must share dims")
    return _diamond_upper_from_delta(_choi_array(a) - _choi_array(b), a.dim)


def strength_markovian(
    noisy: Channel,
    ideal: Channel,
    *,
    decompose: bool | None = None,
) -> float:
    """Certified noise strength of a noisy location against its ideal.

    If the ideal operation is a unitary channel (the default probes for
    this), the noise factor N = noisy ∘ ideal^-1 is extracted and compared
    against the identity. Otherwise the two channels are compared directly,
    which bounds the same fault-insertion norm since composing with the
    ideal operation cannot increase it.

    Returns the certified upper end of the diamond interval, so every
    downstream inequality of the form delta <= L * eps stays valid.
    """
    if noisy.dims != ideal.dims:
        raise ValueError("channels must share dims")
    unitary_ideal = len(ideal.kraus) == 1 and ideal.kraus[0].is_unitary(UNITARY_ATOL)
    if decompose is None:
        decompose = unitary_ideal
    if decompose:
        if not unitary_ideal:
            raise ValueError("ideal channel is not an invertible unitary channel")
        n = compose_channels(noisy, ideal.dagger_unitary())
        return _diamond_upper(n, Channel.identity(n.dims, n.support))
    return _diamond_upper(noisy, ideal)


@dataclass(frozen=True)
class HamiltonianTerm:
    """One interaction term: Hermitian operator on `support`, tagged by the
    circuit location (int) or unordered location pair (tuple) it belongs to.
    """

    support: tuple[int, ...]
    op: Matrix
    label: int | tuple[int, int]

    def __post_init__(self) -> None:
        support = tuple(int(s) for s in self.support)
        if len(set(support)) != len(support):
            raise ValueError(f"support has duplicates: {support}")
        if len(support) != len(self.op.dims):
            raise ValueError("support length must match operator factor count")
        if not self.op.is_hermitian():
            raise ValueError("Hamiltonian term must be Hermitian")
        label = self.label
        if isinstance(label, (tuple, list)):
            label = tuple(int(x) for x in label)
            if len(label) != 2 or label[0] == label[1]:
                raise ValueError(f"pair label must name two distinct locations: {label}")
            label = (min(label), max(label))
        else:
            label = int(label)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "label", label)


def _grouped_norm(terms: Sequence[HamiltonianTerm]) -> float:
    """Operator norm of the sum of the terms, embedded on their union support."""
    local: dict[int, int] = {}
    for t in terms:
        for pos, s in enumerate(t.support):
            d = t.op.dims[pos]
            if local.setdefault(s, d) != d:
                raise ValueError(f"terms disagree on dim of subsystem {s}")
    labels = tuple(sorted(local))
    dims = SubsystemDims(tuple(local[s] for s in labels))
    acc = np.zeros((dims.total, dims.total), dtype=np.complex128)
    for t in terms:
        positions = tuple(labels.index(s) for s in t.support)
        acc += embed_operator(t.op.data, positions, dims)
    return operator_norm(acc)


def strength_local_hamiltonian(terms: Sequence[HamiltonianTerm], t0: float) -> float:
    """t0 times the largest per-location norm of the summed coupling terms.

    Terms sharing a location label are summed (on the union of their
    supports) before taking the norm. Larger local dimensions pass through
    unchanged, which is how leakage levels are handled.
    """
    if not terms:
        raise ValueError("no Hamiltonian terms given")
    if t0 < 0:
        raise ValueError("t0 must be >= 0")
    groups: dict[int, list[HamiltonianTerm]] = {}
    for t in terms:
        if not isinstance(t.label, int):
            raise ValueError("per-location strength needs integer labels")
        groups.setdefault(t.label, []).append(t)
    return t0 * max(_grouped_norm(g) for g in groups.values())


class LongRangeStrength(float):
    """Float with a flag for the validity condition eps^2 <= e."""

    within_validity: bool

    def __new__(cls, value: float) -> "LongRangeStrength":
        obj = super().__new__(cls, value)
        obj.within_validity = value * value <= math.e
        return obj


def strength_long_range(
    terms: Sequence[HamiltonianTerm],
    t0: float,
    c: float = 2.0 * math.e,
) -> LongRangeStrength:
    """Pairwise static coupling strength sqrt(c * t0 * max_j sum_k ||H_jk||).

    Every term must carry an unordered pair label; the inner sum for qubit j
    runs over all pairs containing j. The returned value flags whether the
    regime condition eps^2 <= e holds (`within_validity`).
    """
    if not terms:
        raise ValueError("no Hamiltonian terms given")
    if t0 < 0 or c <= 0:
        raise ValueError("need t0 >= 0 and c > 0")
    row: dict[int, float] = {}
    for t in terms:
        if not isinstance(t.label, tuple):
            raise ValueError("long-range strength needs pair labels")
        nrm = operator_norm(t.op.data)
        for j in t.label:
            row[j] = row.get(j, 0.0) + nrm
    return LongRangeStrength(math.sqrt(c * t0 * max(row.values())))


@dataclass
class CorrelationGrid:
    """Discretized absolute two-point correlation of a Gaussian environment.

    `delta_abs[p, m1, q, m2]` samples |Delta| between grid cell p with Pauli
    index m1 and cell q with Pauli index m2; `cell_volume` is the measure of
    one (position, time) cell; `gate_regions[j]` lists the cells making up
    the spacetime region of gate j.
    """

    delta_abs: np.ndarray
    cell_volume: float
    gate_regions: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.delta_abs, dtype=float)
        if arr.ndim != 4 or arr.shape[0] != arr.shape[2] or arr.shape[1] != arr.shape[3]:
            raise ValueError(
                f"delta_abs must have shape (cells, paulis, cells, paulis), got {arr.shape}"
            )
        if np.any(arr < 0):
            raise ValueError("delta_abs entries must be nonnegative")
        if self.cell_volume <= 0:
            raise ValueError("cell_volume must be positive")
        regions = tuple(tuple(int(i) for i in r) for r in self.gate_regions)
        if not regions or any(not r for r in regions):
            raise ValueError("need at least one nonempty gate region")
        n_cells = arr.shape[0]
        for r in regions:
            for i in r:
                if not 0 <= i < n_cells:
                    raise ValueError(f"cell index {i} out of range")
        arr = arr.copy()
        arr.flags.writeable = False
        self.delta_abs = arr
        self.cell_volume = float(self.cell_volume)
        self.gate_regions = regions


def strength_gaussian(grid: CorrelationGrid, c: float = 2.0 * math.e) -> float:
    """Riemann-sum Gaussian noise strength on the user-supplied grid.

    eps_j^2 = c * sum over cells of region j and all cells of all regions of
    |Delta| * cell_volume^2, summed over both Pauli indices; the result is
    the square root of the largest eps_j^2.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    all_cells = sorted({i for r in grid.gate_regions for i in r})
    vol2 = grid.cell_volume**2
    # restrict the second cell axis once, then slice per region
    sub = grid.delta_abs[:, :, all_cells, :]
    worst = 0.0
    for region in grid.gate_regions:
        total = float(np.sum(sub[list(region)])) * vol2
        worst = max(worst, c * total)
    return math.sqrt(worst)


def strength_unitary_couplings(couplings: Iterable[Matrix]) -> float:
    """max ||N - I||_inf over joint system-environment coupling unitaries.

    This is the trivial-interaction-picture upper bound on the
    non-Markovian strength; the untracked minimization over interaction
    pictures can only make it smaller.
    """
    worst = 0.0
    seen = False
    for n in couplings:
        seen = True
        worst = max(worst, operator_norm(n.data - np.eye(n.side)))
    if not seen:
        raise ValueError("no couplings given")
    return worst


# -- JSON interchange ---------------------------------------------------------


def noise_spec_to_json(spec: NoiseSpec) -> dict:
    out: dict = {"kind": spec.kind}
    for name in ("delta_theta", "t0", "t1", "p"):
        val = getattr(spec, name)
        if val is not None:
            out[name] = val
    if spec.e_op is not None:
        out["e_op"] = matrix_to_json(spec.e_op)
    return out


def noise_spec_from_json(obj: Mapping) -> NoiseSpec:
    if not isinstance(obj, Mapping) or "kind" not in obj:
        raise ValueError("noise spec must be an object with a 'kind' tag")
    kind = obj["kind"]
    if kind == "control_rotation":
        return NoiseSpec.control_rotation(obj["delta_theta"])
    if kind == "amplitude_damping":
        return NoiseSpec.amplitude_damping(obj["t0"], obj["t1"])
    if kind == "probabilistic":
        return NoiseSpec.probabilistic(obj["p"], matrix_from_json(obj["e_op"]))
    if kind == "depolarizing":
        return NoiseSpec.depolarizing(obj["p"])
    raise ValueError(f"unknown noise kind {kind!r}")


def noise_map_from_json(obj: Mapping) -> dict[int, Channel]:
    """Per-location noise: {location index: noise spec + optional support}."""
    if not isinstance(obj, Mapping):
        raise ValueError("noise map must be an object keyed by location index")
    out: dict[int, Channel] = {}
    for key, entry in obj.items():
        spec = noise_spec_from_json(entry)
        support = entry.get("support")
        out[int(key)] = make_noise_channel(
            spec, tuple(int(q) for q in support) if support is not None else None
        )
    return out


def hamiltonian_terms_from_json(obj: Sequence) -> list[HamiltonianTerm]:
    """Terms as [{support, op, label}]; label an int or a two-int list."""
    if not isinstance(obj, Sequence) or isinstance(obj, (str, bytes)):
        raise ValueError("expected a list of Hamiltonian terms")
    terms = []
    for entry in obj:
        label = entry["label"]
        if isinstance(label, Sequence):
            label = (int(label[0]), int(label[1]))
        else:
            label = int(label)
        support = tuple(int(q) for q in entry["support"])
        op = matrix_from_json(entry["op"])
        # one qubit factor per support index, not one big factor
        op = Matrix.of(op.data, (2,) * len(support))
        terms.append(HamiltonianTerm(support, op, label))
    return terms


def correlation_grid_from_json(obj: Mapping) -> CorrelationGrid:
    """Grid as {delta_abs: nested 4-d array, cell_volume, gate_regions}."""
    if not isinstance(obj, Mapping):
        raise ValueError("correlation grid must be an object")
    return CorrelationGrid(
        delta_abs=np.asarray(obj["delta_abs"], dtype=float),
        cell_volume=float(obj["cell_volume"]),
        gate_regions=tuple(tuple(int(i) for i in r) for r in obj["gate_regions"]),
    )
