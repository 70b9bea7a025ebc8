"""Step-structured qubit circuits and their simulators.

A circuit is a flat list of locations (state preparations, gates,
projective measurements, and explicit identity/storage slots) tagged with
time steps. Three evaluators live here:

* ``simulate_ideal``: density-matrix evolution, intermediate measurements
  handled by projector branching so later gates can condition on outcomes.
* ``simulate_noisy``: same walk with a per-location noise channel applied
  after each ideal operation.
* ``simulate_with_environment``: joint pure-state evolution with explicit
  environment qubits and per-location unitary couplings, for noise that is
  not described by independent per-location channels.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .matcore import (
    Distribution,
    Matrix,
    SubsystemDims,
    embed_operator,
    matrix_from_json,
    partial_trace,
    qubit_dims,
    vector_from_json,
)
from .channels import SIGMA_X, SIGMA_Y, SIGMA_Z, Channel, strength_unitary_couplings

GATE_ATOL = 1e-10
PROJ_ATOL = 1e-10

HADAMARD = (SIGMA_X + SIGMA_Z) / math.sqrt(2.0)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    dtype=np.complex128,
)

KET0 = np.array([1.0, 0.0], dtype=np.complex128)
KET1 = np.array([0.0, 1.0], dtype=np.complex128)
KET_PLUS = np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)

Z_PROJECTORS = (
    np.array([[1, 0], [0, 0]], dtype=np.complex128),
    np.array([[0, 0], [0, 1]], dtype=np.complex128),
)


def rz(theta: float) -> np.ndarray:
    """Z rotation diag(e^{-i theta/2}, e^{+i theta/2})."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


FIXED_GATES: dict[str, np.ndarray] = {
    "X": SIGMA_X,
    "Y": SIGMA_Y,
    "Z": SIGMA_Z,
    "H": HADAMARD,
    "CNOT": CNOT,
}


# ---------------------------------------------------------------------------
# Locations and circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Location:
    """One operation slot: (index, step, kind, support) plus its payload.

    kind is one of "prep" (state vector on the support), "gate" (unitary,
    optionally conditioned on an earlier measurement outcome), "measure"
    (projector list on the support), "identity" (explicit storage slot).
    condition = (measure location index, outcome position).
    """

    index: int
    step: int
    kind: str
    support: tuple[int, ...]
    state: np.ndarray | None = None
    gate: Matrix | None = None
    projectors: tuple[Matrix, ...] | None = None
    condition: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("prep", "gate", "measure", "identity"):
            raise ValueError(f"unknown location kind {self.kind!r}")
        support = tuple(int(q) for q in self.support)
        if len(set(support)) != len(support) or not support:
            raise ValueError(f"support must be nonempty and duplicate-free: {support}")
        object.__setattr__(self, "support", support)
        if self.state is not None:
            vec = np.asarray(self.state, dtype=np.complex128).reshape(-1).copy()
            if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
                raise ValueError("prep state must be normalized")
            vec.flags.writeable = False
            object.__setattr__(self, "state", vec)
        if self.condition is not None:
            object.__setattr__(
                self, "condition", (int(self.condition[0]), int(self.condition[1]))
            )

    # -- constructors --------------------------------------------------------

    @classmethod
    def prep(cls, index: int, step: int, support: int | Sequence[int], state) -> "Location":
        sup = (support,) if isinstance(support, int) else tuple(support)
        return cls(index, step, "prep", sup, state=state)

    @classmethod
    def gate_on(
        cls,
        index: int,
        step: int,
        support: int | Sequence[int],
        u: Matrix | np.ndarray,
        condition: tuple[int, int] | None = None,
    ) -> "Location":
        sup = (support,) if isinstance(support, int) else tuple(support)
        if not isinstance(u, Matrix):
            u = Matrix.of(u, qubit_dims(len(sup)))
        return cls(index, step, "gate", sup, gate=u, condition=condition)

    @classmethod
    def measure(
        cls,
        index: int,
        step: int,
        support: int | Sequence[int],
        projectors: Sequence[Matrix | np.ndarray] | None = None,
    ) -> "Location":
        sup = (support,) if isinstance(support, int) else tuple(support)
        if projectors is None:
            if len(sup) != 1:
                raise ValueError("default Z projectors are single-qubit")
            projectors = Z_PROJECTORS
        projs = tuple(
            p if isinstance(p, Matrix) else Matrix.of(p, qubit_dims(len(sup)))
            for p in projectors
        )
        return cls(index, step, "measure", sup, projectors=projs)

    @classmethod
    def wait(cls, index: int, step: int, support: int | Sequence[int]) -> "Location":
        sup = (support,) if isinstance(support, int) else tuple(support)
        return cls(index, step, "identity", sup)


@dataclass(frozen=True)
class FinalMeasure:
    qubit: int
    projectors: tuple[Matrix, ...]

    @classmethod
    def z(cls, qubit: int) -> "FinalMeasure":
        return cls(qubit, tuple(Matrix.of(p) for p in Z_PROJECTORS))


@dataclass(frozen=True)
class Circuit:
    """Ordered locations on n_system qubits plus the final read-out."""

    n_system: int
    locations: tuple[Location, ...]
    final_measure: tuple[FinalMeasure, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "final_measure", tuple(self.final_measure))
        problems = validate_circuit(self)
        if problems:
            raise ValueError("invalid circuit: " + "; ".join(problems))

    @property
    def size(self) -> int:
        return len(self.locations)

    @property
    def dims(self) -> SubsystemDims:
        return qubit_dims(self.n_system)

    def location(self, index: int) -> Location:
        return self.locations[index - 1]

    @classmethod
    def sequential(
        cls,
        n_system: int,
        ops: Sequence[Location],
        final_measure: Sequence[FinalMeasure] | None = None,
    ) -> "Circuit":
        """Re-number the given locations 1..L with one location per step."""
        locs = []
        for pos, loc in enumerate(ops):
            locs.append(
                Location(
                    pos + 1,
                    pos + 1,
                    loc.kind,
                    loc.support,
                    state=loc.state,
                    gate=loc.gate,
                    projectors=loc.projectors,
                    condition=loc.condition,
                )
            )
        if final_measure is None:
            final_measure = tuple(FinalMeasure.z(q) for q in range(n_system))
        return cls(n_system, tuple(locs), tuple(final_measure))


def validate_circuit(c: Circuit) -> list[str]:
    """Collect contract violations; empty list means the circuit is valid."""
    out: list[str] = []
    if c.n_system < 1:
        out.append("n_system must be >= 1")
        return out
    n = c.n_system
    locs = c.locations
    for pos, loc in enumerate(locs):
        if loc.index != pos + 1:
            out.append(f"location at position {pos} has index {loc.index}, want {pos + 1}")
    steps = [loc.step for loc in locs]
    if any(s < 1 for s in steps):
        out.append("steps must be >= 1")
    if any(b < a for a, b in zip(steps, steps[1:])):
        out.append("locations must be ordered by step")
    used: dict[int, set[int]] = {}
    measure_arity: dict[int, int] = {}
    for loc in locs:
        if any(not 0 <= q < n for q in loc.support):
            out.append(f"location {loc.index}: support {loc.support} out of range")
            continue
        busy = used.setdefault(loc.step, set())
        if busy & set(loc.support):
            out.append(f"location {loc.index}: step {loc.step} reuses a busy qubit")
        busy |= set(loc.support)
        d = 2 ** len(loc.support)
        if loc.kind == "prep":
            if loc.state is None or loc.state.size != d:
                out.append(f"location {loc.index}: prep state has wrong dimension")
        elif loc.kind == "gate":
            if loc.gate is None or loc.gate.side != d:
                out.append(f"location {loc.index}: gate has wrong dimension")
            elif not loc.gate.is_unitary(GATE_ATOL):
                out.append(f"location {loc.index}: gate is not unitary")
        elif loc.kind == "measure":
            if not loc.projectors:
                out.append(f"location {loc.index}: measurement needs projectors")
            else:
                bad_shape = any(p.side != d for p in loc.projectors)
                if bad_shape:
                    out.append(f"location {loc.index}: projector dimension mismatch")
                else:
                    if any(not p.is_hermitian(1e-10) for p in loc.projectors):
                        out.append(f"location {loc.index}: projectors must be Hermitian")
                    acc = sum(p.data for p in loc.projectors)
                    if np.max(np.abs(acc - np.eye(d))) > PROJ_ATOL:
                        out.append(f"location {loc.index}: projectors do not sum to I")
                    measure_arity[loc.index] = len(loc.projectors)
        if loc.condition is not None and loc.kind != "gate":
            out.append(f"location {loc.index}: only gates may be conditioned")
    by_index = {loc.index: loc for loc in locs}
    for loc in locs:
        if loc.condition is None or loc.kind != "gate":
            continue
        ref, outcome = loc.condition
        src = by_index.get(ref)
        if src is None or src.kind != "measure":
            out.append(f"location {loc.index}: condition references non-measurement {ref}")
        elif src.step >= loc.step:
            out.append(f"location {loc.index}: condition references a later step")
        elif not 0 <= outcome < measure_arity.get(ref, 0):
            out.append(f"location {loc.index}: condition outcome {outcome} out of range")
    seen_q: set[int] = set()
    for fm in c.final_measure:
        if not 0 <= fm.qubit < n:
            out.append(f"final measurement qubit {fm.qubit} out of range")
            continue
        if fm.qubit in seen_q:
            out.append(f"final measurement repeats qubit {fm.qubit}")
        seen_q.add(fm.qubit)
        acc = sum(p.data for p in fm.projectors)
        if np.max(np.abs(acc - np.eye(2))) > PROJ_ATOL:
            out.append(f"final measurement on qubit {fm.qubit} is incomplete")
    return out


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _initial_rho(n: int) -> np.ndarray:
    d = 2**n
    rho = np.zeros((d, d), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def _prep_kraus(loc: Location, dims: SubsystemDims) -> list[np.ndarray]:
    d = loc.state.size
    return [
        embed_operator(np.outer(loc.state, np.eye(d)[k]), loc.support, dims)
        for k in range(d)
    ]


def _walk(
    c: Circuit,
    noise: Mapping[int, Channel] | None,
) -> list[tuple[dict[int, int], np.ndarray]]:
    """Run the branching density-matrix evolution; returns (records, rho) pairs."""
    dims = c.dims
    branches: list[tuple[dict[int, int], np.ndarray]] = [({}, _initial_rho(c.n_system))]
    for loc in c.locations:
        if loc.kind == "prep":
            ks = _prep_kraus(loc, dims)
            branches = [
                (rec, sum(k @ rho @ k.conj().T for k in ks)) for rec, rho in branches
            ]
        elif loc.kind == "gate":
            u = embed_operator(loc.gate.data, loc.support, dims)
            ud = u.conj().T
            if loc.condition is None:
                branches = [(rec, u @ rho @ ud) for rec, rho in branches]
            else:
                ref, want = loc.condition
                branches = [
                    (rec, u @ rho @ ud if rec.get(ref) == want else rho)
                    for rec, rho in branches
                ]
        elif loc.kind == "measure":
            projs = [embed_operator(p.data, loc.support, dims) for p in loc.projectors]
            split: list[tuple[dict[int, int], np.ndarray]] = []
            for rec, rho in branches:
                for a, m in enumerate(projs):
                    new_rec = dict(rec)
                    new_rec[loc.index] = a
                    split.append((new_rec, m @ rho @ m))
            branches = split
        # identity: no state change
        if noise is not None and loc.index in noise:
            ch = noise[loc.index]
            _check_local(ch, loc)
            ks = [embed_operator(k.data, ch.support, dims) for k in ch.kraus]
            branches = [
                (rec, sum(k @ rho @ k.conj().T for k in ks)) for rec, rho in branches
            ]
    return branches


def _check_local(ch: Channel, loc: Location) -> None:
    if not set(ch.support) <= set(loc.support):
        raise ValueError(
            f"noise on location {loc.index} acts on {ch.support}, outside its "
            f"support {loc.support}"
        )


def _readout(c: Circuit, rho: np.ndarray) -> Distribution:
    dims = c.dims
    if not c.final_measure:
        return Distribution({"": 1.0})
    embedded = [
        [embed_operator(p.data, (fm.qubit,), dims) for p in fm.projectors]
        for fm in c.final_measure
    ]
    probs: dict[str, float] = {}
    labels = [""]
    ops = [np.eye(dims.total, dtype=np.complex128)]
    for projs in embedded:
        labels = [lab + str(a) for lab in labels for a in range(len(projs))]
        ops = [m @ p for m in ops for p in projs]
    for lab, m in zip(labels, ops):
        probs[lab] = max(0.0, float(np.trace(m @ rho).real))
    return Distribution(probs)


def simulate_ideal(c: Circuit) -> tuple[Matrix, Distribution]:
    """Final density matrix (before read-out) and read-out distribution."""
    branches = _walk(c, None)
    rho = sum(r for _, r in branches)
    return Matrix(rho, c.dims), _readout(c, rho)


def simulate_noisy(
    c: Circuit, noise: Mapping[int, Channel]
) -> tuple[Matrix, Distribution]:
    """Like simulate_ideal with a noise channel applied after each location.

    `noise` maps location indices to channels whose support must stay inside
    the location's support; missing indices mean noiseless locations.
    """
    for idx in noise:
        if not 1 <= idx <= c.size:
            raise ValueError(f"noise references unknown location {idx}")
    branches = _walk(c, noise)
    rho = sum(r for _, r in branches)
    return Matrix(rho, c.dims), _readout(c, rho)


# ---------------------------------------------------------------------------
# Joint system-environment evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvCoupling:
    """Unitary fault operator on (part of) a location's support plus
    environment qubits; indices are global (environment block appended
    after the system block)."""

    support: tuple[int, ...]
    unitary: Matrix

    def __post_init__(self) -> None:
        support = tuple(int(q) for q in self.support)
        if len(set(support)) != len(support) or not support:
            raise ValueError("coupling support must be nonempty and duplicate-free")
        object.__setattr__(self, "support", support)
        if self.unitary.side != 2 ** len(support):
            raise ValueError("coupling unitary dimension mismatch")
        if not self.unitary.is_unitary(GATE_ATOL):
            raise ValueError("coupling must be unitary")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Shared environment: qubit count, initial pure state, per-location
    coupling unitaries keyed by location index."""

    n_env: int
    initial: np.ndarray
    couplings: Mapping[int, EnvCoupling]

    def __post_init__(self) -> None:
        if self.n_env < 1:
            raise ValueError("n_env must be >= 1")
        vec = np.asarray(self.initial, dtype=np.complex128).reshape(-1).copy()
        if vec.size != 2**self.n_env:
            raise ValueError("environment state dimension mismatch")
        if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
            raise ValueError("environment state must be normalized")
        vec.flags.writeable = False
        object.__setattr__(self, "initial", vec)
        object.__setattr__(self, "couplings", dict(self.couplings))


def environment_strength(env: EnvironmentSpec) -> float:
    """Noise strength max_j ||N_j - I||_inf over the declared couplings."""
    if not env.couplings:
        return 0.0
    return strength_unitary_couplings(c.unitary for c in env.couplings.values())


def _completion_unitary(state: np.ndarray) -> np.ndarray:
    """Any unitary whose first column is `state` (Gram-Schmidt fill)."""
    d = state.size
    cols = [state]
    for i in range(d):
        v = np.eye(d, dtype=np.complex128)[:, i]
        for c in cols:
            v = v - np.vdot(c, v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-9:
            cols.append(v / nrm)
        if len(cols) == d:
            break
    return np.stack(cols, axis=1)


def simulate_with_environment(
    c: Circuit, env: EnvironmentSpec
) -> tuple[Matrix, Distribution]:
    """Joint pure-state evolution with per-location coupling unitaries.

    Requirements checked here: no conditioned gates (rewrite first), preps
    must be the first operation touching their qubits, measurements must be
    terminal on their qubit, uncoupled, and are applied as deferred
    non-selective projections on the reduced system state. Returns the
    reduced system density matrix and the read-out distribution.
    """
    n_sys = c.n_system
    n_tot = n_sys + env.n_env
    dims = qubit_dims(n_tot)
    env_range = set(range(n_sys, n_tot))
    for loc in c.locations:
        if loc.condition is not None:
            raise ValueError("conditioned gates unsupported here; rewrite them first")
    last_touch: dict[int, int] = {}
    for loc in c.locations:
        for q in loc.support:
            last_touch[q] = loc.index
    sys0 = np.zeros(2**n_sys, dtype=np.complex128)
    sys0[0] = 1.0
    psi = np.kron(sys0, env.initial)
    touched: set[int] = set()
    deferred: list[Location] = []
    for loc in c.locations:
        if loc.kind == "prep":
            if touched & set(loc.support):
                raise ValueError(
                    f"prep at location {loc.index} is not the first operation "
                    "on its qubits"
                )
            u = embed_operator(_completion_unitary(loc.state), loc.support, dims)
            psi = u @ psi
        elif loc.kind == "gate":
            psi = embed_operator(loc.gate.data, loc.support, dims) @ psi
        elif loc.kind == "measure":
            if loc.index in env.couplings:
                raise ValueError("measurements must be ideal (no coupling)")
            if any(last_touch[q] != loc.index for q in loc.support):
                raise ValueError(
                    f"measurement at location {loc.index} must be terminal on "
                    "its qubits"
                )
            deferred.append(loc)
        touched |= set(loc.support)
        coupling = env.couplings.get(loc.index)
        if coupling is not None:
            allowed = set(loc.support) | env_range
            if not set(coupling.support) <= allowed:
                raise ValueError(
                    f"coupling at location {loc.index} acts on {coupling.support}, "
                    f"outside support plus environment"
                )
            psi = embed_operator(coupling.unitary.data, coupling.support, dims) @ psi
    joint = Matrix(np.outer(psi, psi.conj()), dims)
    rho_sys = partial_trace(joint, range(n_sys)).data
    sys_dims = qubit_dims(n_sys)
    for loc in deferred:
        projs = [embed_operator(p.data, loc.support, sys_dims) for p in loc.projectors]
        rho_sys = sum(m @ rho_sys @ m for m in projs)
    return Matrix(rho_sys, sys_dims), _readout(c, rho_sys)


# ---------------------------------------------------------------------------
# Conditioned-gate rewrite
# ---------------------------------------------------------------------------


def _rank_one_basis(projectors: Sequence[Matrix]) -> list[np.ndarray]:
    basis = []
    for p in projectors:
        w, v = np.linalg.eigh(p.data)
        if abs(w[-1] - 1.0) > 1e-9 or np.any(np.abs(w[:-1]) > 1e-9):
            raise ValueError("conditioning requires rank-one basis projectors")
        basis.append(v[:, -1])
    return basis


def rewrite_conditioned_gates(c: Circuit) -> Circuit:
    """Eliminate classical conditioning by a unitary rewrite.

    Each single-qubit measurement that feeds conditions becomes: a basis
    change to the computational basis at the original slot, controlled
    unitaries in place of the conditioned gates, and a terminal Z
    measurement of the control qubit right after the last dependent gate.
    The read-out distribution is unchanged. Circuits without conditions are
    returned as-is.
    """
    dependents: dict[int, list[int]] = {}
    for loc in c.locations:
        if loc.condition is not None:
            dependents.setdefault(loc.condition[0], []).append(loc.index)
    if not dependents:
        return c
    by_index = {loc.index: loc for loc in c.locations}
    last_dep = {ref: max(deps) for ref, deps in dependents.items()}
    for ref, deps in dependents.items():
        src = by_index[ref]
        if len(src.support) != 1:
            raise ValueError("multi-qubit-controlled conditions are unsupported")
        m = src.support[0]
        for loc in c.locations:
            if src.index < loc.index <= last_dep[ref] and loc.index not in deps:
                if m in loc.support:
                    raise ValueError(
                        f"qubit {m} is used at location {loc.index} before its "
                        "conditioned gates resolve"
                    )
        for dep in deps:
            g = by_index[dep]
            if m in g.support:
                raise ValueError("conditioned gate may not act on the control qubit")
    new_ops: list[Location] = []
    for loc in c.locations:
        if loc.index in dependents:
            m = loc.support[0]
            basis = _rank_one_basis(loc.projectors)
            v = np.stack([b.conj() for b in basis], axis=0)  # maps b_i -> |i>
            new_ops.append(Location.gate_on(0, 0, m, Matrix.of(v, (2,))))
            continue
        if loc.condition is not None:
            ref, want = loc.condition
            m = by_index[ref].support[0]
            proj = np.zeros((2, 2), dtype=np.complex128)
            proj[want, want] = 1.0
            d_g = loc.gate.side
            ctrl = np.kron(proj, loc.gate.data) + np.kron(
                np.eye(2) - proj, np.eye(d_g)
            )
            new_ops.append(Location.gate_on(0, 0, (m,) + loc.support, ctrl))
            if loc.index == last_dep[ref]:
                new_ops.append(Location.measure(0, 0, m))
            continue
        new_ops.append(loc)
    return Circuit.sequential(c.n_system, new_ops, c.final_measure)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

_NAMED_STATES = {"0": KET0, "1": KET1, "+": KET_PLUS}
_RZ_PATTERN = re.compile(r"^Rz\(([^)]+)\)$")


def gate_from_json(obj) -> np.ndarray:
    """A named generator (X, Y, Z, H, CNOT, Rz(theta)) or a dense matrix."""
    if isinstance(obj, str):
        if obj in FIXED_GATES:
            return FIXED_GATES[obj]
        m = _RZ_PATTERN.match(obj)
        if m:
            return rz(float(m.group(1)))
        raise ValueError(f"unknown gate name {obj!r}")
    return matrix_from_json(obj).data


def _state_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        try:
            return _NAMED_STATES[obj]
        except KeyError:
            raise ValueError(f"unknown state name {obj!r}") from None
    return vector_from_json(obj)


def circuit_from_json(obj: Mapping) -> Circuit:
    """Build a circuit from {n_system, locations: [...], final_measure?}.

    Locations are listed in time order and numbered 1..L; each entry gives
    kind and support plus a payload ("state" for preps, "gate" for gates,
    "projectors" for non-default measurements) and optionally an explicit
    "step" and a "condition": [measure index, outcome position].
    final_measure is a list of qubits to read out in Z; omitted means all.
    """
    if not isinstance(obj, Mapping):
        raise ValueError("circuit config must be an object")
    n_system = int(obj["n_system"])
    locs = []
    for pos, entry in enumerate(obj.get("locations", [])):
        index = pos + 1
        step = int(entry.get("step", index))
        kind = entry["kind"]
        support = tuple(int(q) for q in entry["support"])
        condition = entry.get("condition")
        if condition is not None:
            condition = (int(condition[0]), int(condition[1]))
        if kind == "prep":
            locs.append(Location.prep(index, step, support, _state_from_json(entry["state"])))
        elif kind == "gate":
            locs.append(
                Location.gate_on(
                    index, step, support, gate_from_json(entry["gate"]), condition
                )
            )
        elif kind == "measure":
            projs = entry.get("projectors")
            if projs is not None:
                projs = [matrix_from_json(p) for p in projs]
            locs.append(Location.measure(index, step, support, projs))
        elif kind == "identity":
            locs.append(Location.wait(index, step, support))
        else:
            raise ValueError(f"unknown location kind {kind!r}")
    fm = obj.get("final_measure")
    if fm is None:
        final = tuple(FinalMeasure.z(q) for q in range(n_system))
    else:
        final = tuple(FinalMeasure.z(int(q)) for q in fm)
    return Circuit(n_system, tuple(locs), final)


def environment_spec_from_json(obj: Mapping) -> EnvironmentSpec:
    """Environment as {n_env, initial?, couplings: {loc: {support, unitary}}}.

    The initial state defaults to |0...0>; coupling supports use global
    indices with the environment block appended after the system block.
    """
    if not isinstance(obj, Mapping):
        raise ValueError("environment spec must be an object")
    n_env = int(obj["n_env"])
    initial = obj.get("initial")
    if initial is None:
        vec = np.zeros(2**n_env, dtype=np.complex128)
        vec[0] = 1.0
    else:
        vec = vector_from_json(initial)
    couplings = {}
    for key, entry in obj.get("couplings", {}).items():
        couplings[int(key)] = EnvCoupling(
            support=tuple(int(q) for q in entry["support"]),
            unitary=matrix_from_json(entry["unitary"]),
        )
    return EnvironmentSpec(n_env, vec, couplings)
