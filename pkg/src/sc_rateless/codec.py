"""Finite-length realization of the coupled rateless code.

Samples a member of the coupled precode ensemble, encodes information bits
through a systematic form computed once per graph by GF(2) elimination,
draws the endless channel-node stream truncated at n received symbols over
BEC(eps), and runs the peeling decoder (sum-product reduces to iterative
erasure filling on the BEC).  The Monte Carlo harness aggregates decoding
trials over an overhead grid to cross-validate density evolution.

Sampling convention: bit sections live in [0, L-1]; sections within w-1 of
either end of the chain are shortened (known zero, not transmitted) and
their stubs pre-fill boundary check sockets.  Each section's M*dl edge stubs
are dealt to the w forward offsets in equal shares (plus/minus one when w
does not divide M*dl), so every one of the L+w-1 check sections receives
exactly M*dl stubs for its M*dl sockets and socket matching is a single
permutation per section.  Repeated bit references inside one factor cancel
mod 2 and are folded out of the stored supports; shortened references carry
known zeros and are folded out as well.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gf2
from .ensemble import EnsembleParams, design_rate


class InvalidM(ValueError):
    """M violates the divisibility/size preconditions of the sampler."""


@dataclass(eq=False)
class PrecodeGraph:
    """A sampled coupled precode: CSR of folded check supports over the L*M
    in-chain bits, plus the raw socket census used by structural tests."""

    params: EnsembleParams
    M: int
    check_section: np.ndarray
    check_indptr: np.ndarray
    check_indices: np.ndarray
    check_real_stubs: np.ndarray
    _encoder: tuple | None = field(default=None, repr=False)

    @property
    def num_bits(self) -> int:
        return self.params.L * self.M

    @property
    def checks_per_section(self) -> int:
        return self.M * self.params.dl // self.params.dr

    @property
    def num_checks(self) -> int:
        return len(self.check_section)

    def check_support(self, check_id: int) -> np.ndarray:
        return self.check_indices[self.check_indptr[check_id]:self.check_indptr[check_id + 1]]

    def design_dimension(self) -> int:
        """Nominal information size k = R(L) * L * M, rounded to an integer."""
        return round(design_rate(self.params) * self.num_bits)

    def _systematic_form(self):
        if self._encoder is None:
            supports = np.split(self.check_indices, self.check_indptr[1:-1])
            packed = gf2.rows_from_support(supports, self.num_bits)
            reduced, pivots = gf2.rref(packed, self.num_bits)
            pivots = np.asarray(pivots, dtype=np.int64)
            free = np.setdiff1d(np.arange(self.num_bits), pivots)
            self._encoder = (reduced[: len(pivots)], pivots, free)
        return self._encoder

    def realized_dimension(self) -> int:
        """Actual code dimension L*M - rank; exceeds the design k by the
        rank deficiency of the sampled graph."""
        return self.num_bits - len(self._systematic_form()[1])

    def syndrome_weight(self, bits: np.ndarray) -> int:
        """Number of violated precode checks for a full bit assignment."""
        edge_check = np.repeat(np.arange(self.num_checks), np.diff(self.check_indptr))
        parities = np.bincount(
            edge_check, weights=bits[self.check_indices], minlength=self.num_checks
        ).astype(np.int64) & 1
        return int(parities.sum())


def _double_edge_sockets(sock_bit, sock_check):
    order = np.lexsort((sock_bit, sock_check))
    b = sock_bit[order]
    c = sock_check[order]
    dup = (b[1:] == b[:-1]) & (c[1:] == c[:-1]) & (b[1:] >= 0)
    return order[1:][dup]


def _parallel_pair_sockets(sock_bit, sock_check, num_bits, dl):
    # One socket per surplus bit sharing an identical check pair.  Only
    # meaningful for dl = 2, where such pairs defeat even ML decoding unless
    # a channel node happens to split them.
    order = np.argsort(sock_bit, kind="stable")
    order = order[sock_bit[order] >= 0]
    checks = np.sort(sock_check[order].reshape(num_bits, dl), axis=1)
    keys = checks[:, 0] * np.int64(2 ** 32) + checks[:, 1]
    sort_idx = np.argsort(keys, kind="stable")
    surplus = sort_idx[1:][keys[sort_idx][1:] == keys[sort_idx][:-1]]
    return order.reshape(num_bits, dl)[surplus, 0]


def _condition_matching(sock_bit, sock_check, section_of_socket, stubs, num_bits, dl, rng):
    """Swap stubs (within their check section) until no check repeats a bit
    and, for dl = 2, no two bits share the same pair of checks.

    Repeated bits cancel mod 2 (leaving dl = 2 bits disconnected from the
    precode) and identical check pairs are undecodable two-bit cores, so the
    socket matching is conditioned to exclude both, as usual in finite-length
    constructions.  Swaps stay inside one section and preserve its stub
    multiset, so degrees and socket counts are untouched.
    """
    for _ in range(200):
        bad = _double_edge_sockets(sock_bit, sock_check)
        if bad.size == 0 and dl == 2:
            bad = _parallel_pair_sockets(sock_bit, sock_check, num_bits, dl)
        if bad.size == 0:
            return
        for socket in bad:
            section_start = section_of_socket[socket] * stubs
            partner = section_start + int(rng.integers(stubs))
            sock_bit[socket], sock_bit[partner] = sock_bit[partner], sock_bit[socket]


def sample_precode(params: EnsembleParams, M: int, seed) -> PrecodeGraph:
    """Draw one member of the coupled precode ensemble.

    Requires dr | M*dl (integral check count per section) and M >= dr.
    """
    dl, dr, L, w = params.dl, params.dr, params.L, params.w
    if (M * dl) % dr != 0:
        raise InvalidM(f"M*dl = {M * dl} must be divisible by dr = {dr}")
    if M < dr:
        raise InvalidM(f"M = {M} must be at least dr = {dr}")
    rng = np.random.default_rng(seed)
    stubs = M * dl
    cps = stubs // dr
    num_bits = L * M
    shares = np.full(w, stubs // w, dtype=np.int64)
    shares[: stubs % w] += 1
    bounds = np.concatenate(([0], np.cumsum(shares)))

    # Offset-j chunk of each in-chain section's permuted stub list.
    chunks = {}
    for s in range(L):
        perm = rng.permutation(np.repeat(np.arange(s * M, (s + 1) * M, dtype=np.int64), dl))
        for j in range(w):
            chunks[(s, j)] = perm[bounds[j]:bounds[j + 1]]

    # Flat socket layout: check section c owns sockets [c*stubs, (c+1)*stubs),
    # dr consecutive sockets per check node.
    num_sections = L + w - 1
    num_checks = num_sections * cps
    section_of_socket = np.repeat(np.arange(num_sections), stubs)
    sock_check = (
        section_of_socket * cps + np.tile(np.arange(stubs) // dr, num_sections)
    )
    sock_bit = np.empty(num_sections * stubs, dtype=np.int64)
    for c in range(num_sections):
        arrivals = []
        for j in range(w):
            s = c - j
            if 0 <= s < L:
                arrivals.append(chunks[(s, j)])
            else:
                # Shortened filler: occupies sockets, carries a known zero.
                arrivals.append(np.full(shares[j], -1, dtype=np.int64))
        sock_bit[c * stubs:(c + 1) * stubs] = rng.permutation(np.concatenate(arrivals))

    _condition_matching(sock_bit, sock_check, section_of_socket, stubs, num_bits, dl, rng)

    real = sock_bit >= 0
    real_stubs = np.bincount(sock_check[real], minlength=num_checks)
    # Fold repeated (check, bit) incidences mod 2 (possible only for dl > 2
    # parallel pairs the conditioning leaves alone).
    keys, counts = np.unique(
        sock_check[real] * np.int64(num_bits) + sock_bit[real], return_counts=True
    )
    keys = keys[counts % 2 == 1]
    check_idx = keys // num_bits
    indptr = np.concatenate(
        ([0], np.cumsum(np.bincount(check_idx, minlength=num_checks)))
    )
    return PrecodeGraph(
        params=params,
        M=M,
        check_section=np.repeat(np.arange(num_sections), cps),
        check_indptr=indptr,
        check_indices=keys % num_bits,
        check_real_stubs=real_stubs,
    )


def encode(graph: PrecodeGraph, info_bits) -> np.ndarray:
    """Map info bits onto a precode codeword (all check sums zero mod 2).

    ``info_bits`` must have the realized dimension of the sampled graph; the
    free positions of the systematic form carry them and the pivot positions
    are filled by back-substitution.
    """
    reduced, pivots, free = graph._systematic_form()
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    if info_bits.shape != (len(free),):
        raise ValueError(
            f"expected {len(free)} info bits (realized dimension), got shape {info_bits.shape}"
        )
    x = np.zeros(graph.num_bits, dtype=np.uint8)
    x[free] = info_bits & 1
    # Each reduced row reads x[pivot] + sum of its free-column bits = 0.
    x[pivots] = gf2.dot_rows(reduced, gf2.pack_vector(x))
    return x


@dataclass(frozen=True)
class ChannelNodeDescriptor:
    """One received rateless symbol: the section it lives in, the section
    shifts and bit indices of its dg referenced bits, and the received value
    (None once erased by the channel)."""

    t: int
    section: int
    shifts: tuple[int, ...]
    bit_indices: tuple[int, ...]
    value: int | None


@dataclass(eq=False)
class ChannelStream:
    """Struct-of-arrays form of n channel-node descriptors.

    ``bit_ids`` holds flattened in-chain bit numbers, -1 where the reference
    lands on a shortened section.
    """

    sections: np.ndarray
    shifts: np.ndarray
    bit_indices: np.ndarray
    bit_ids: np.ndarray
    values: np.ndarray
    erased: np.ndarray

    def __len__(self) -> int:
        return len(self.sections)

    def descriptor(self, t: int) -> ChannelNodeDescriptor:
        return ChannelNodeDescriptor(
            t=t,
            section=int(self.sections[t]),
            shifts=tuple(int(j) for j in self.shifts[t]),
            bit_indices=tuple(int(l) for l in self.bit_indices[t]),
            value=None if self.erased[t] else int(self.values[t]),
        )

    def __iter__(self):
        return (self.descriptor(t) for t in range(len(self)))


def channel_stream(
    graph: PrecodeGraph, codeword, n: int, epsilon: float, seed
) -> ChannelStream:
    """Sample n received symbols of the rateless inner code.

    Each symbol picks a uniform section in [0, L+w-2], dg uniform backward
    shifts and dg uniform bit indices (both with repetition), transmits the
    mod-2 sum of the referenced bits (shortened references are zero), and is
    erased independently with probability epsilon.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    params, M = graph.params, graph.M
    L, w, dg = params.L, params.w, params.dg
    codeword = np.asarray(codeword, dtype=np.uint8)
    if codeword.shape != (graph.num_bits,):
        raise ValueError(f"codeword must have length {graph.num_bits}")
    rng = np.random.default_rng(seed)
    sections = rng.integers(0, L + w - 1, size=n)
    shifts = rng.integers(0, w, size=(n, dg))
    bit_indices = rng.integers(0, M, size=(n, dg))
    ref_sections = sections[:, None] - shifts
    in_chain = (ref_sections >= 0) & (ref_sections < L)
    bit_ids = np.where(in_chain, ref_sections * M + bit_indices, -1)
    values = (
        (codeword[bit_ids] * in_chain).sum(axis=1, dtype=np.int64) & 1
    ).astype(np.uint8)
    erased = rng.random(n) < epsilon
    return ChannelStream(
        sections=sections,
        shifts=shifts,
        bit_indices=bit_indices,
        bit_ids=bit_ids,
        values=values,
        erased=erased,
    )


@dataclass(eq=False)
class TrialResult:
    """One decoding trial: stream accounting, the residual unresolved
    fraction at the peeling fixpoint, and the resolved assignment
    (-1 marks bits still unknown)."""

    n: int
    erased_channel_nodes: int
    residual_bit_erasure: float
    peeling_rounds: int
    assignment: np.ndarray


def _concat_ranges(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    before = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    return np.repeat(starts - before, lengths) + np.arange(total, dtype=np.int64)


def peel(graph: PrecodeGraph, stream: ChannelStream) -> TrialResult:
    """Iterative erasure filling to its fixpoint.

    Factor nodes are the precode checks (target value 0) and the unerased
    channel nodes (target value y); erased channel nodes constrain nothing
    and are dropped.  Any factor with exactly one unknown incident bit
    resolves it to the XOR of the rest; rounds are level-synchronous sweeps
    of the resolution frontier, so the fixpoint and the round count do not
    depend on scheduling.
    """
    num_bits = graph.num_bits
    num_checks = graph.num_checks
    n = len(stream)

    # Fold each unerased channel node's in-chain references mod 2.
    live = ~stream.erased
    node_of_ref = np.repeat(np.arange(n), stream.bit_ids.shape[1])
    ref_bits = stream.bit_ids.ravel()
    usable = live[node_of_ref] & (ref_bits >= 0)
    keys, counts = np.unique(
        node_of_ref[usable] * num_bits + ref_bits[usable], return_counts=True
    )
    keys = keys[counts % 2 == 1]

    edge_factor = np.concatenate(
        [
            np.repeat(np.arange(num_checks), np.diff(graph.check_indptr)),
            num_checks + keys // num_bits,
        ]
    )
    edge_bit = np.concatenate([graph.check_indices, keys % num_bits])
    num_factors = num_checks + n
    target = np.concatenate(
        [np.zeros(num_checks, dtype=np.int64), stream.values.astype(np.int64)]
    )

    unk_count = np.bincount(edge_factor, minlength=num_factors)
    unk_sum = np.bincount(
        edge_factor, weights=edge_bit, minlength=num_factors
    ).astype(np.int64)
    by_bit = np.argsort(edge_bit, kind="stable")
    bit_indptr = np.concatenate(
        ([0], np.cumsum(np.bincount(edge_bit, minlength=num_bits)))
    )

    state = np.full(num_bits, -1, dtype=np.int8)
    frontier = np.flatnonzero(unk_count == 1)
    rounds = 0
    while frontier.size:
        bits_new, first = np.unique(unk_sum[frontier], return_index=True)
        vals_new = target[frontier[first]]
        state[bits_new] = vals_new
        lengths = bit_indptr[bits_new + 1] - bit_indptr[bits_new]
        edges = by_bit[_concat_ranges(bit_indptr[bits_new], lengths)]
        factors = edge_factor[edges]
        unk_count -= np.bincount(factors, minlength=num_factors)
        unk_sum -= np.bincount(
            factors, weights=edge_bit[edges], minlength=num_factors
        ).astype(np.int64)
        target ^= (
            np.bincount(
                factors,
                weights=np.repeat(vals_new, lengths).astype(float),
                minlength=num_factors,
            ).astype(np.int64)
            & 1
        )
        touched = np.unique(factors)
        frontier = touched[unk_count[touched] == 1]
        rounds += 1

    return TrialResult(
        n=n,
        erased_channel_nodes=int(stream.erased.sum()),
        residual_bit_erasure=float((state < 0).sum() / num_bits),
        peeling_rounds=rounds,
        assignment=state,
    )


@dataclass
class MonteCarloRow:
    """Aggregated decoding trials at one overhead point."""

    alpha: float
    n_symbols: float
    dimension: float
    success_rate: float
    mean_residual: float
    trials: int
    trial_errors: int


def _run_trial(args) -> tuple[float, float, float] | None:
    try:
        return _run_trial_strict(args)
    except Exception:
        return None


def _run_trial_strict(args) -> tuple[float, float, float]:
    params, M, alpha, seed, alpha_index, trial_index, zero_codeword = args
    root = np.random.SeedSequence([seed, alpha_index, trial_index])
    graph_seed, info_seed, stream_seed = root.spawn(3)
    graph = sample_precode(params, M, graph_seed)
    if zero_codeword:
        # Erasure dynamics on the BEC do not depend on the codeword, so the
        # all-zero shortcut is exact; it skips the GF(2) elimination and uses
        # the design dimension for the overhead accounting.
        k = graph.design_dimension()
        codeword = np.zeros(graph.num_bits, dtype=np.uint8)
    else:
        k = graph.realized_dimension()
        info = np.random.default_rng(info_seed).integers(0, 2, size=k, dtype=np.uint8)
        codeword = encode(graph, info)
    n = max(1, round((1.0 + alpha) * k / (1.0 - params.epsilon)))
    stream = channel_stream(graph, codeword, n, params.epsilon, stream_seed)
    result = peel(graph, stream)
    return result.residual_bit_erasure, float(n), float(k)


def monte_carlo(
    params: EnsembleParams,
    M: int,
    alpha_grid,
    trials: int,
    seed: int,
    *,
    zero_codeword: bool = False,
    allow_dg1: bool = False,
    workers: int = 1,
) -> list[MonteCarloRow]:
    """Decoding-trial statistics over an overhead grid.

    Every trial draws a fresh graph and stream from a PRNG keyed by
    (seed, alpha index, trial index), so trials are reproducible and
    order-independent; rows come back sorted by alpha.  Per-trial failures
    are recorded in the row rather than aborting the run.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if params.dg == 1 and not allow_dg1:
        raise ValueError(
            "dg = 1 cannot reach capacity and is excluded from simulation "
            "by default; pass allow_dg1=True to simulate it anyway"
        )
    if (M * params.dl) % params.dr != 0 or M < params.dr:
        raise InvalidM(f"M = {M} fails the sampler preconditions for {params}")

    alphas = sorted(float(a) for a in alpha_grid)
    jobs = [
        (params, M, alpha, seed, ai, t, zero_codeword)
        for ai, alpha in enumerate(alphas)
        for t in range(trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial, jobs, chunksize=8))
    else:
        outcomes = [_run_trial(job) for job in jobs]

    rows = []
    for ai, alpha in enumerate(alphas):
        chunk = outcomes[ai * trials:(ai + 1) * trials]
        good = [c for c in chunk if c is not None]
        errors = len(chunk) - len(good)
        if good:
            residuals = np.array([g[0] for g in good])
            row = MonteCarloRow(
                alpha=alpha,
                n_symbols=float(np.mean([g[1] for g in good])),
                dimension=float(np.mean([g[2] for g in good])),
                success_rate=float((residuals == 0.0).mean()),
                mean_residual=float(residuals.mean()),
                trials=len(good),
                trial_errors=errors,
            )
        else:
            row = MonteCarloRow(alpha, math.nan, math.nan, math.nan, math.nan, 0, errors)
        rows.append(row)
    return rows


def factor_graph_lines(graph: PrecodeGraph, stream: ChannelStream | None = None):
    """Plain-text adjacency of the decoder factor graph, one line per factor
    node: type, section, sorted bit coordinates (section:index), and for
    channel nodes the received value.  Intended for reproducibility checks
    and external inspection."""
    M = graph.M
    for c in range(graph.num_checks):
        coords = [f"{b // M}:{b % M}" for b in graph.check_support(c)]
        yield " ".join(["check", str(int(graph.check_section[c]))] + coords)
    if stream is None:
        return
    for t in range(len(stream)):
        bits = sorted(int(b) for b in stream.bit_ids[t] if b >= 0)
        coords = [f"{b // M}:{b % M}" for b in bits]
        value = "?" if stream.erased[t] else str(int(stream.values[t]))
        yield " ".join(["chan", str(int(stream.sections[t]))] + coords + [f"y={value}"])
