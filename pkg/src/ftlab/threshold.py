"""Concatenation-level arithmetic: the strength renormalization map, its
threshold fixed point, double-exponential suppression, required coding level,
overhead scaling, and a Monte Carlo pseudothreshold locator."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gadgets import level1_failure_exact, level1_failure_mc

MAX_LEVEL = 64
BISECTION_TOL = 1e-8


@dataclass(frozen=True)
class SchemeParams:
    """Fault-tolerance scheme constants: locations per (largest) gadget L0,
    tolerated fault count t, prefactor xi >= 1, and which accuracy-bound
    variant downstream consumers pair the renormalized strength with."""

    L0: int
    t: int
    xi: float = math.e
    c_variant: str = "encoded"

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.L0 <= self.t:
            raise ValueError("L0 must exceed t")
        if self.xi < 1.0:
            raise ValueError("xi must be >= 1")
        if self.c_variant not in ("linear", "e_minus_1", "non_markovian", "encoded"):
            raise ValueError(f"unknown bound variant {self.c_variant!r}")

    @property
    def combinations(self) -> int:
        return math.comb(self.L0, self.t + 1)


def renormalize_strength(eps_prev: float, p: SchemeParams) -> float:
    """One level of coding: eps -> xi * C(L0, t+1) * eps^(t+1).

    Saturates to inf instead of raising when the input is already blown up,
    matching strength_at_level's behaviour far above threshold.
    """
    if eps_prev < 0:
        raise ValueError("strength must be >= 0")
    try:
        return p.xi * p.combinations * eps_prev ** (p.t + 1)
    except OverflowError:
        return math.inf


def threshold_value(p: SchemeParams) -> float:
    """Fixed point (xi * C(L0, t+1))^(-1/t) of the renormalization map."""
    return (p.xi * p.combinations) ** (-1.0 / p.t)


def strength_at_level(eps: float, k: int, p: SchemeParams) -> float:
    """Closed form eps0 * (eps/eps0)^((t+1)^k) for k coding levels.

    Equals the k-fold composition of renormalize_strength; evaluated in log
    space so deep levels underflow cleanly to 0 (or overflow to inf above
    threshold) instead of raising.
    """
    if eps < 0:
        raise ValueError("strength must be >= 0")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return float(eps)
    if eps == 0.0:
        return 0.0
    eps0 = threshold_value(p)
    log_val = math.log(eps0) + (p.t + 1) ** k * math.log(eps / eps0)
    try:
        return math.exp(log_val)
    except OverflowError:
        return math.inf


def required_level(L: int, delta0: float, eps: float, p: SchemeParams) -> int:
    """Smallest k with (e-1) * L * strength_at_level(eps, k) <= delta0.

    Found by direct scan (cap 64 levels) to avoid rounding ambiguity at the
    boundary; the log form of the same inequality is re-checked on the
    answer as a consistency assertion.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if not 0.0 < delta0 < 1.0:
        raise ValueError("delta0 must lie in (0, 1)")
    if eps < 0:
        raise ValueError("strength must be >= 0")
    eps0 = threshold_value(p)
    if eps > 0 and eps >= eps0:
        raise ValueError(
            f"strength {eps} is not below the threshold {eps0}; no finite "
            "coding level reaches the target"
        )
    k = next(
        (
            k
            for k in range(MAX_LEVEL + 1)
            if (math.e - 1.0) * L * strength_at_level(eps, k, p) <= delta0
        ),
        None,
    )
    if k is None:
        raise ValueError(f"target not reached within {MAX_LEVEL} coding levels")
    if k > 0 and eps > 0:
        # log form: smallest k with (t+1)^k >= log((e-1) L eps0 / delta0) / log(eps0/eps)
        ratio = math.log((math.e - 1.0) * L * eps0 / delta0) / math.log(eps0 / eps)
        assert (p.t + 1) ** k >= ratio * (1.0 - 1e-9), "level scan disagrees with log form"
        assert (p.t + 1) ** (k - 1) < ratio * (1.0 + 1e-9), "level scan is not minimal"
    return k


def overhead_ratio(L: int, k: int, p: SchemeParams) -> tuple[float, float]:
    """Per-location blowup L0^k of k coding levels and the exponent
    a = log(L0)/log(t+1) that turns it into a polylog overhead in L."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(p.L0) ** k, math.log(p.L0) / math.log(p.t + 1)


def _tail_slope(L0: int, t: int, eps: float) -> float:
    """d/d eps of P[Bin(L0, eps) > t] = L0 * C(L0-1, t) * eps^t (1-eps)^(L0-1-t)."""
    return (
        L0
        * math.comb(L0 - 1, t)
        * eps**t
        * (1.0 - eps) ** (L0 - 1 - t)
    )


def pseudothreshold_mc(
    p: SchemeParams,
    samples: int,
    seed,
    mode: str = "exact",
) -> tuple[float, tuple[float, float]]:
    """Crossing point of the level-1 failure probability with eps itself.

    Bisection on the sign of P[fail](eps) - eps over (0, 0.5). mode="exact"
    evaluates the binomial tail exactly (tolerance 1e-8) and returns the
    final bracket as the interval; mode="mc" estimates the tail from
    `samples` draws per probe and returns a 95% interval propagated through
    the local slope of the crossing.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    if mode not in ("exact", "mc"):
        raise ValueError(f"unknown mode {mode!r}")

    probes = 0

    def sign_fn(eps: float) -> float:
        nonlocal probes
        if mode == "exact":
            return level1_failure_exact(p.L0, p.t, eps) - eps
        probes += 1
        est, _ = level1_failure_mc(p.L0, p.t, eps, samples, [seed, probes])
        return est - eps

    lo, hi = 1e-12, 0.5
    f_lo = level1_failure_exact(p.L0, p.t, lo) - lo
    f_hi = level1_failure_exact(p.L0, p.t, hi) - hi
    if not (f_lo < 0.0 < f_hi):
        raise ValueError(
            "level-1 failure never crosses eps on (0, 0.5); degenerate parameters"
        )
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if sign_fn(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    mid = 0.5 * (lo + hi)
    if mode == "exact":
        return mid, (lo, hi)
    tail = level1_failure_exact(p.L0, p.t, mid)
    sigma = math.sqrt(max(tail * (1.0 - tail), 1e-300) / samples)
    slope = abs(_tail_slope(p.L0, p.t, mid) - 1.0)
    half = 1.96 * sigma / max(slope, 1e-9) + BISECTION_TOL
    return mid, (mid - half, mid + half)


@dataclass(frozen=True)
class ThresholdReport:
    """Bundle of the closed-form level analysis for one (L, delta0, eps)."""

    eps0: float
    per_level: tuple[float, ...]
    k_required: int
    overhead_ratio: float
    exponent_a: float

    def rows(self) -> list[dict]:
        """One flat record per level (CSV-friendly)."""
        return [
            {
                "level": l,
                "strength": s,
                "eps0": self.eps0,
                "k_required": self.k_required,
                "overhead_ratio": self.overhead_ratio,
                "exponent_a": self.exponent_a,
            }
            for l, s in enumerate(self.per_level)
        ]


def threshold_report(L: int, delta0: float, eps: float, p: SchemeParams) -> ThresholdReport:
    """Run the full level analysis for one operating point."""
    k = required_level(L, delta0, eps, p)
    ratio, a = overhead_ratio(L, k, p)
    return ThresholdReport(
        eps0=threshold_value(p),
        per_level=tuple(strength_at_level(eps, l, p) for l in range(k + 1)),
        k_required=k,
        overhead_ratio=ratio,
        exponent_a=a,
    )
