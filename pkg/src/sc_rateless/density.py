"""Coupled density evolution on the BEC.

Tracks per-section erasure probabilities p_i (bit -> precode check messages)
and s_i (bit -> channel node messages) for sections i in [0, L-1]; sections
outside the chain are pinned to 0 (shortening) and never stored.  One update
reads

    A_i = (1/w) sum_j [ 1 - (1 - (1/w) sum_k p_{i+j-k})^(dr-1) ]
    B_i = (1/w) sum_j [ 1 - (1-eps) (1 - (1/w) sum_k s_{i+j-k})^(dg-1) ]
    p_i <- A_i^(dl-1) * gf(B_i),     s_i <- A_i^dl * gf(B_i)

with gf the Poisson generating function (node and edge perspectives agree).
Both sliding averages are plain convolutions with a ones(w)/w kernel, so one
step is a handful of length-L numpy operations.

Decoding succeeds when the mean of p falls below a configured target; the
overhead threshold is located by bisection on alpha.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import stability
from .ensemble import EnsembleParams, NonPositiveRate, beta_from_alpha


class NoSuccessInBracket(RuntimeError):
    """Bisection could not find a decoding alpha even after expanding the
    search bracket up to alpha = 10."""


class NonMonotoneBracket(RuntimeError):
    """A spot probe decoded at an overhead below the located bracket,
    contradicting the monotonicity assumption bisection relies on."""


@dataclass
class DEState:
    """Per-section erasure probabilities and the iteration count."""

    p: np.ndarray
    s: np.ndarray
    iteration: int = 0

    @classmethod
    def all_ones(cls, L: int) -> "DEState":
        return cls(p=np.ones(L), s=np.ones(L))

    @property
    def L(self) -> int:
        return len(self.p)


@dataclass(frozen=True)
class DEConfig:
    """Discretization knobs for "P_b converges to 0".

    Defaults resolve thresholds to the 1e-4 bisection tolerance across the
    usual parameter ranges; near capacity at large L the iteration cap is the
    binding knob and may need raising.
    """

    max_iterations: int = 100_000
    fixed_point_tol: float = 1e-12
    success_target: float = 1e-10
    bisection_tol: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("fixed_point_tol", "success_target", "bisection_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class ThresholdResult:
    """Overhead threshold estimate: bracket midpoint plus the retained
    bracket for one-sided guarantees."""

    alpha_star: float
    beta_star: float
    iterations_at_threshold: int
    bracket: tuple[float, float]


@dataclass
class DERun:
    """Outcome of iterating density evolution from the all-ones start."""

    state: DEState
    converged_to_zero: bool
    trace: list[tuple[int, float]]
    hit_iteration_cap: bool = False

    @property
    def final_bit_error(self) -> float:
        return bit_error(self.state)


@dataclass
class SweepRow:
    """One threshold-sweep row: DE threshold plus the stability lower bounds.
    ``error`` records a per-row failure without aborting the sweep."""

    L: int
    alpha_star: float = math.nan
    beta_star: float = math.nan
    lower_bound_alpha: float = math.nan
    lower_bound_beta: float = math.nan
    iterations: int = 0
    error: str | None = None


def _step_arrays(params: EnsembleParams, beta: float, p: np.ndarray, s: np.ndarray):
    w = params.w
    kernel = np.full(w, 1.0 / w)
    # Inner average per check/channel section (length L+w-1, zero-extended),
    # then the outer average back onto bit sections (length L).
    pbar = np.convolve(p, kernel, mode="full")
    check_factor = 1.0 - (1.0 - pbar) ** (params.dr - 1)
    a = np.convolve(check_factor, kernel, mode="valid")
    sbar = np.convolve(s, kernel, mode="full")
    chan_factor = 1.0 - (1.0 - params.epsilon) * (1.0 - sbar) ** (params.dg - 1)
    b = np.convolve(chan_factor, kernel, mode="valid")
    gf = np.exp(-beta * (1.0 - b))
    p_next = np.clip(a ** (params.dl - 1) * gf, 0.0, 1.0)
    s_next = np.clip(a ** params.dl * gf, 0.0, 1.0)
    return p_next, s_next


def de_step(params: EnsembleParams, beta: float, state: DEState) -> DEState:
    """One synchronous density-evolution update."""
    if state.L != params.L:
        raise ValueError(f"state has {state.L} sections, params expect {params.L}")
    p_next, s_next = _step_arrays(params, beta, state.p, state.s)
    return DEState(p=p_next, s=s_next, iteration=state.iteration + 1)


def bit_error(state: DEState) -> float:
    """Mean erasure probability over the L chain sections."""
    return float(state.p.mean())


def de_run(params: EnsembleParams, beta: float, config: DEConfig = DEConfig()) -> DERun:
    """Iterate from the all-ones start until the mean erasure probability
    drops below the success target, the state stalls, or the iteration cap.

    The trace records (iteration, P_b) every iteration up to 1000, then on a
    geometric grid, and always includes the final iteration.
    """
    if beta < 0.0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    p = np.ones(params.L)
    s = np.ones(params.L)
    pb = 1.0
    trace = [(0, pb)]
    next_record = 1
    for it in range(1, config.max_iterations + 1):
        p_next, s_next = _step_arrays(params, beta, p, s)
        pb_next = float(p_next.mean())
        # From the all-ones start the map is monotone, so P_b cannot rise.
        assert pb_next <= pb + 1e-12, f"P_b rose from {pb} to {pb_next} at iteration {it}"
        change = max(
            float(np.abs(p_next - p).max(initial=0.0)),
            float(np.abs(s_next - s).max(initial=0.0)),
        )
        p, s, pb = p_next, s_next, pb_next
        if it >= next_record:
            trace.append((it, pb))
            next_record = it + 1 if it < 1000 else math.ceil(next_record * 1.1)
        done_zero = pb < config.success_target
        stalled = change < config.fixed_point_tol
        if done_zero or stalled or it == config.max_iterations:
            if trace[-1][0] != it:
                trace.append((it, pb))
            return DERun(
                state=DEState(p=p, s=s, iteration=it),
                converged_to_zero=done_zero,
                trace=trace,
                hit_iteration_cap=not (done_zero or stalled),
            )
    raise AssertionError("unreachable")  # loop always returns


def overhead_threshold(
    params: EnsembleParams,
    config: DEConfig = DEConfig(),
    search_bracket: tuple[float, float] = (0.0, 1.0),
    *,
    allow_dg1: bool = False,
) -> ThresholdResult:
    """Bisection on alpha for the smallest decoding overhead.

    The bracket must fail at its lower end and succeed at its upper end; the
    upper end is expanded by doubling the width (capped at alpha = 10) until
    it succeeds, and a succeeding lower end is pushed down to 0, which cannot
    decode (capacity).  After bisection one spot probe below the bracket
    re-checks the monotonicity assumption.
    """
    if params.dg == 1 and not allow_dg1:
        raise ValueError(
            "dg = 1 cannot reach capacity and is excluded from the threshold "
            "search by default; pass allow_dg1=True to analyze it anyway"
        )
    lo, hi = search_bracket
    if not -1.0 <= lo < hi:
        raise ValueError(f"need -1 <= lo < hi in the search bracket, got {search_bracket}")

    def decodes(alpha: float) -> tuple[bool, int]:
        run = de_run(params, beta_from_alpha(params, alpha), config)
        return run.converged_to_zero, run.state.iteration

    initial_lo = lo
    ok_lo, iters = decodes(lo)
    if ok_lo:
        if lo <= 0.0:
            # Decoding at (or below) zero overhead: nothing to bisect.
            alpha = max(lo, 0.0)
            return ThresholdResult(
                alpha_star=alpha,
                beta_star=beta_from_alpha(params, alpha),
                iterations_at_threshold=iters,
                bracket=(alpha, alpha),
            )
        hi, lo, initial_lo = lo, 0.0, 0.0
        success_iters = iters
    else:
        width = hi - lo
        while True:
            ok, success_iters = decodes(hi)
            if ok:
                break
            if hi >= 10.0:
                raise NoSuccessInBracket(
                    f"density evolution fails up to alpha = {hi:g} for {params}"
                )
            width *= 2.0
            hi = min(lo + width, 10.0)

    while hi - lo > config.bisection_tol:
        mid = 0.5 * (lo + hi)
        ok, iters = decodes(mid)
        if ok:
            hi = mid
            success_iters = iters
        else:
            lo = mid

    alpha_star = 0.5 * (lo + hi)
    # Monotonicity spot check: a point clearly below the located bracket must
    # also fail (probing just above the bracket instead would sit in the
    # critically slow regime and stall spuriously).
    spot = alpha_star - max(0.02, 10.0 * config.bisection_tol)
    if spot > initial_lo:
        ok, _ = decodes(spot)
        if ok:
            raise NonMonotoneBracket(
                f"alpha = {spot:g} decodes although the bracket bottom {lo:g} does not"
            )
    return ThresholdResult(
        alpha_star=alpha_star,
        beta_star=beta_from_alpha(params, alpha_star),
        iterations_at_threshold=success_iters,
        bracket=(lo, hi),
    )


def threshold_sweep(
    params: EnsembleParams,
    L_values,
    config: DEConfig = DEConfig(),
    *,
    allow_dg1: bool = False,
) -> list[SweepRow]:
    """Overhead thresholds and stability lower bounds over a grid of chain
    lengths.

    Rows are ordered by L, and each bisection warm-starts from the previous
    row: the threshold shrinks with L in every regime of interest, so the previous
    estimate (plus margin) caps the fresh bracket.  Per-row failures land in
    the row's ``error`` field instead of aborting the sweep.
    """
    if not L_values:
        raise ValueError("L_values must be nonempty")
    rows: list[SweepRow] = []
    prev_alpha: float | None = None
    for L in sorted(L_values):
        row = SweepRow(L=L)
        p_l = dataclasses.replace(params, L=L)
        try:
            report = stability.threshold_lower_bounds(p_l)
            row.lower_bound_alpha = report.lower_bound_alpha
            row.lower_bound_beta = report.lower_bound_beta
            bracket = (0.0, prev_alpha + 0.02) if prev_alpha is not None else (0.0, 1.0)
            result = overhead_threshold(p_l, config, bracket, allow_dg1=allow_dg1)
            row.alpha_star = result.alpha_star
            row.beta_star = result.beta_star
            row.iterations = result.iterations_at_threshold
            prev_alpha = result.alpha_star
        except (NonPositiveRate, NoSuccessInBracket, NonMonotoneBracket, ValueError) as exc:
            row.error = str(exc)
        rows.append(row)
    return rows
