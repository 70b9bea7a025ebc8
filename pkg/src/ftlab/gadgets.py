"""Abstract gadget layer: extended gadgets over shared error-recovery
segments, iid fault sampling, the backward truncation sweep with good/bad
classification, and level-1 / level-k failure probabilities.

A gadget graph is a topologically ordered list of gadgets; each gadget owns
some locations outright and may emit error-recovery (ER) segments consumed
by later gadgets. An extended gadget spans its incoming ER segments, its own
locations, and its outgoing ER segments, so neighbours overlap on the shared
segment; truncation resolves every overlap into a partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

MC_BUDGET = 10**9


class BudgetExceededError(ValueError):
    """Monte Carlo leaf-draw budget exceeded."""


@dataclass(frozen=True)
class ERSegment:
    """Error-recovery locations handed from gadget `pred` to gadget `succ`."""

    count: int
    pred: int
    succ: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("segment must contain at least one location")
        if self.succ <= self.pred:
            raise ValueError(
                f"segment must point forward in time, got {self.pred} -> {self.succ}"
            )


@dataclass(frozen=True)
class Gadget:
    """Own-location count plus outgoing ER segments (count, successor id)."""

    own_locations: int
    er_out: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.own_locations < 1:
            raise ValueError("gadget needs at least one own location")
        object.__setattr__(
            self, "er_out", tuple((int(c), int(to)) for c, to in self.er_out)
        )


@dataclass(frozen=True)
class GadgetGraph:
    """Topologically ordered gadgets with globally numbered locations.

    Location ids are assigned 1..N in gadget order: each gadget's own
    locations first, then its outgoing segments in listed order. Every
    segment belongs to exactly two gadgets by construction (its emitter and
    its consumer), which is the only sharing shape supported.
    """

    gadgets: tuple[Gadget, ...]
    segments: tuple[ERSegment, ...] = field(init=False)
    _own_ids: tuple[tuple[int, ...], ...] = field(init=False)
    _seg_ids: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self) -> None:
        gadgets = tuple(self.gadgets)
        if not gadgets:
            raise ValueError("graph needs at least one gadget")
        object.__setattr__(self, "gadgets", gadgets)
        n = len(gadgets)
        segments: list[ERSegment] = []
        own_ids: list[tuple[int, ...]] = []
        seg_ids: list[tuple[int, ...]] = []
        next_id = 1
        for i, g in enumerate(gadgets):
            own_ids.append(tuple(range(next_id, next_id + g.own_locations)))
            next_id += g.own_locations
            for count, to in g.er_out:
                if not 0 <= to < n:
                    raise ValueError(f"gadget {i} links to unknown gadget {to}")
                segments.append(ERSegment(count, i, to))
                seg_ids.append(tuple(range(next_id, next_id + count)))
                next_id += count
        object.__setattr__(self, "segments", tuple(segments))
        object.__setattr__(self, "_own_ids", tuple(own_ids))
        object.__setattr__(self, "_seg_ids", tuple(seg_ids))

    @property
    def n_gadgets(self) -> int:
        return len(self.gadgets)

    @property
    def total_locations(self) -> int:
        return sum(g.own_locations for g in self.gadgets) + sum(
            s.count for s in self.segments
        )

    def own_ids(self, gadget: int) -> tuple[int, ...]:
        return self._own_ids[gadget]

    def segment_ids(self, segment: int) -> tuple[int, ...]:
        return self._seg_ids[segment]

    def segments_in(self, gadget: int) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.segments) if s.succ == gadget)

    def segments_out(self, gadget: int) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.segments) if s.pred == gadget)

    def extent(self, gadget: int) -> tuple[int, ...]:
        """Full extended-gadget extent: in-segments + own + out-segments."""
        ids: list[int] = []
        for s in self.segments_in(gadget):
            ids.extend(self._seg_ids[s])
        ids.extend(self._own_ids[gadget])
        for s in self.segments_out(gadget):
            ids.extend(self._seg_ids[s])
        return tuple(sorted(ids))


@dataclass(frozen=True)
class FaultConfig:
    faulty: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "faulty", frozenset(int(i) for i in self.faulty))


@dataclass(frozen=True)
class Classification:
    """Per-gadget status plus the truncated location sets (a partition)."""

    statuses: tuple[str, ...]
    truncated: tuple[frozenset[int], ...]

    @property
    def any_bad(self) -> bool:
        return "bad" in self.statuses


def sample_fault_config(g: GadgetGraph, eps: float, seed) -> FaultConfig:
    """Mark each physical location faulty independently with probability eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"fault probability out of range: {eps}")
    rng = np.random.default_rng(seed)
    hits = rng.random(g.total_locations) < eps
    return FaultConfig(frozenset(int(i) + 1 for i in np.nonzero(hits)[0]))


def truncate_and_classify(g: GadgetGraph, f: FaultConfig, t: int) -> Classification:
    """Backward truncation sweep and good/bad classification.

    Sweeping from the latest gadget to the earliest, a gadget is bad when its
    truncated extent (incoming segments + own locations + outgoing segments
    not claimed by an already-bad successor) holds more than t faults. Each
    shared segment ends up owned by its successor when the successor is bad,
    else by its predecessor, so the truncated sets partition all locations;
    good gadgets only ever shed locations, so they stay good.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    unknown = f.faulty - set(range(1, g.total_locations + 1))
    if unknown:
        raise ValueError(f"fault ids outside 1..{g.total_locations}: {sorted(unknown)}")
    n = g.n_gadgets
    bad = [False] * n
    for i in reversed(range(n)):
        ids = set(g.extent(i))
        for s in g.segments_out(i):
            if bad[g.segments[s].succ]:
                ids -= set(g.segment_ids(s))
        bad[i] = len(ids & f.faulty) > t
    truncated = []
    for i in range(n):
        ids = set(g.own_ids(i))
        if bad[i]:
            for s in g.segments_in(i):
                ids |= set(g.segment_ids(s))
        for s in g.segments_out(i):
            if not bad[g.segments[s].succ]:
                ids |= set(g.segment_ids(s))
        truncated.append(frozenset(ids))
    counts: dict[int, int] = {}
    for ids in truncated:
        for i in ids:
            counts[i] = counts.get(i, 0) + 1
    if sorted(counts) != list(range(1, g.total_locations + 1)) or any(
        v != 1 for v in counts.values()
    ):
        raise AssertionError("truncated sets failed to partition the locations")
    statuses = tuple("bad" if b else "good" for b in bad)
    return Classification(statuses, tuple(truncated))


def level1_failure_exact(L0: int, t: int, eps: float) -> float:
    """Exact binomial tail P[Bin(L0, eps) > t], summed in log space."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"fault probability out of range: {eps}")
    if not 0 <= t < L0:
        raise ValueError(f"need 0 <= t < L0, got t={t}, L0={L0}")
    if eps == 0.0:
        return 0.0
    if eps == 1.0:
        return 1.0
    log_terms = [
        math.lgamma(L0 + 1)
        - math.lgamma(i + 1)
        - math.lgamma(L0 - i + 1)
        + i * math.log(eps)
        + (L0 - i) * math.log1p(-eps)
        for i in range(t + 1, L0 + 1)
    ]
    top = max(log_terms)
    return min(1.0, math.exp(top) * math.fsum(math.exp(lt - top) for lt in log_terms))


def level1_failure_mc(
    L0: int, t: int, eps: float, samples: int, seed
) -> tuple[float, float]:
    """Sampled fraction of gadgets with > t of L0 iid faults, plus its
    binomial standard error."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"fault probability out of range: {eps}")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(samples - done, 1_000_000)
        hits += int(np.count_nonzero(rng.binomial(L0, eps, size=m) > t))
        done += m
    est = hits / samples
    return est, math.sqrt(est * (1.0 - est) / samples)


class LevelEstimate(NamedTuple):
    level: int
    probability: float
    stderr: float
    trials: int


def _reduce_chunk(
    m: int, levels: int, L0: int, t: int, eps: float, rng: np.random.Generator
) -> list[int]:
    fail = rng.random((m, L0**levels)) < eps
    counts = []
    for _ in range(levels):
        fail = fail.reshape(m, -1, L0).sum(axis=2) > t
        counts.append(int(fail.sum()))
    return counts


def level_reduce_mc(
    levels: int,
    L0: int,
    t: int,
    eps: float,
    samples: int,
    seed,
    workers: int = 1,
) -> tuple[LevelEstimate, ...]:
    """Hierarchical failure sampler over `levels` rounds of concatenation.

    Each sample draws L0^levels iid Bernoulli(eps) leaves and folds upward:
    a node fails when more than t of its L0 children fail. Nodes on one
    level sit over disjoint leaf sets, so all trials at a level are
    independent and carry an exact binomial standard error. Work is split
    into fixed-size chunks with chunk-indexed RNG streams, so results do
    not depend on the worker count.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0 <= t < L0:
        raise ValueError(f"need 0 <= t < L0, got t={t}, L0={L0}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"fault probability out of range: {eps}")
    leaves_per_sample = L0**levels
    if samples * leaves_per_sample > MC_BUDGET:
        raise BudgetExceededError(
            f"{samples} samples x {leaves_per_sample} leaves exceeds the "
            f"{MC_BUDGET} leaf budget; use the exact iterated map instead"
        )
    chunk = max(1, min(samples, (1 << 22) // leaves_per_sample or 1))
    tasks = [
        (idx, min(chunk, samples - idx * chunk))
        for idx in range((samples + chunk - 1) // chunk)
    ]

    def run(task: tuple[int, int]) -> list[int]:
        idx, m = task
        return _reduce_chunk(m, levels, L0, t, eps, np.random.default_rng([seed, idx]))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_chunk = list(pool.map(run, tasks))
    else:
        per_chunk = [run(task) for task in tasks]
    totals = [sum(c[l] for c in per_chunk) for l in range(levels)]
    out = []
    for l in range(1, levels + 1):
        trials = samples * L0 ** (levels - l)
        p = totals[l - 1] / trials
        out.append(LevelEstimate(l, p, math.sqrt(p * (1.0 - p) / trials), trials))
    return tuple(out)


def iterate_failure_map(levels: int, L0: int, t: int, eps: float) -> tuple[float, ...]:
    """Exact per-level failure probabilities p_l = P[Bin(L0, p_{l-1}) > t]."""
    out = []
    p = eps
    for _ in range(levels):
        p = level1_failure_exact(L0, t, p)
        out.append(p)
    return tuple(out)


def gadget_graph_from_json(obj: Mapping) -> tuple[GadgetGraph, int]:
    """Build a graph from {"gadgets": [{"own_locations", "er_out"}], "t"}.

    "er_out" may be one {"count", "to"} object or a list of them; "to" is
    the 0-based index of the consuming gadget.
    """
    if not isinstance(obj, Mapping):
        raise ValueError("gadget graph config must be an object")
    raw = obj.get("gadgets")
    if not isinstance(raw, Sequence) or not raw:
        raise ValueError("config needs a nonempty gadgets list")
    gadgets = []
    for entry in raw:
        er_raw = entry.get("er_out", [])
        if isinstance(er_raw, Mapping):
            er_raw = [er_raw]
        er = tuple((int(e["count"]), int(e["to"])) for e in er_raw)
        gadgets.append(Gadget(int(entry["own_locations"]), er))
    t = int(obj.get("t", 1))
    if t < 0:
        raise ValueError("t must be >= 0")
    return GadgetGraph(tuple(gadgets)), t
