"""Capacity bounds for Gaussian relay networks with interference.

The upper bound takes each cut at full coherence (amplitudes add before the
log); the achievable side charges each receiver the largest single crossing
power against the total incoming power, clamped at zero per term.  The gap
between the two is bounded by the in-degree census of the network, which
depends on topology only.

Also here: the cut-pair rate functional used by the time-expanded analysis,
its intersection-union rearrangement inequality checker, and the exact
layer-DP minimum over time-expanded cuts with its steady-cut sandwich.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import GuardError
from .network import Cut, RelayNetwork, TimeExpandedNetwork, enumerate_cuts

_TIE_TOL = 1e-12


def _positive_part(x: float) -> float:
    return max(x, 0.0)


def upper_bound_cut_term(net: RelayNetwork, cut: Cut) -> float:
    """Coherent-sum capacity of one cut, in bits."""
    total = 0.0
    for v in sorted(cut.boundary_in):
        amp = sum(math.sqrt(net.edge_power[(u, v)]) for u in cut.incoming_across[v])
        total += 0.5 * math.log2(1.0 + amp * amp)
    return total


def achievable_cut_term(net: RelayNetwork, cut: Cut) -> float:
    """Lattice-achievable rate of one cut, in bits.

    Per receiver: [log2((1/sum-in-power + 1) * max crossing power)/2]^+ where
    the sum runs over the full in-neighborhood and the max over crossing
    edges only.
    """
    total = 0.0
    for v in sorted(cut.boundary_in):
        p_max = max(net.edge_power[(u, v)] for u in cut.incoming_across[v])
        if p_max <= 0.0:
            continue
        p_sum = sum(net.edge_power[(u, v)] for u in net.in_neighbors(v))
        term = 0.5 * math.log2((1.0 / p_sum + 1.0) * p_max)
        total += _positive_part(term)
    return total


def gaussian_upper_bound(net: RelayNetwork) -> float:
    """Relaxed cut-set upper bound on the multicast capacity, in bits."""
    _require_gaussian(net)
    return min(upper_bound_cut_term(net, c) for c in enumerate_cuts(net))


def gaussian_achievable(net: RelayNetwork) -> float:
    """Nested-lattice achievable multicast rate, in bits."""
    _require_gaussian(net)
    return min(achievable_cut_term(net, c) for c in enumerate_cuts(net))


def gaussian_gap_bound(net: RelayNetwork) -> float:
    """Topology-only bound on (upper - achievable): sum of log2 in-degrees."""
    _require_gaussian(net)
    total = 0.0
    for v in net.vertices:
        if v == net.source:
            continue
        total += math.log2(net.in_degree(v))
    return total


def _require_gaussian(net: RelayNetwork):
    if net.mode != "gaussian":
        raise ValueError("operation requires a gaussian-mode network")


@dataclass(frozen=True)
class RateReport:
    """Bounds plus the per-cut terms and minimizing cuts behind them."""

    upper_bound: float
    achievable: float
    gap_bound: float
    per_cut_terms: Mapping[frozenset, tuple[float, float]]
    upper_argmin: tuple[frozenset, ...]
    achievable_argmin: tuple[frozenset, ...]


def rate_report(net: RelayNetwork) -> RateReport:
    """Evaluate all three bounds with per-cut detail.

    Cuts are keyed by member set, ordered by subset bitmask; argmin lists
    report every cut within 1e-12 of the minimum.
    """
    _require_gaussian(net)
    cuts = enumerate_cuts(net)
    terms = {}
    for c in cuts:
        terms[c.members] = (upper_bound_cut_term(net, c), achievable_cut_term(net, c))
    ub = min(t[0] for t in terms.values())
    ach = min(t[1] for t in terms.values())
    gap = gaussian_gap_bound(net)
    ub_arg = tuple(m for m, t in terms.items() if t[0] <= ub + _TIE_TOL)
    ach_arg = tuple(m for m, t in terms.items() if t[1] <= ach + _TIE_TOL)
    if not (-1e-9 <= ub - ach and ub - ach <= gap + 1e-9):
        raise AssertionError(
            f"bound sandwich violated: ub={ub!r} ach={ach!r} gap_bound={gap!r}"
        )
    return RateReport(ub, ach, gap, terms, ub_arg, ach_arg)


# ---------------------------------------------------------------------------
# Cut-pair rate functional and its rearrangement inequality


def _members(cut) -> frozenset:
    return cut.members if isinstance(cut, Cut) else frozenset(cut)


def cut_pair_rate(
    net: RelayNetwork,
    from_cut,
    to_cut,
    rates: Mapping[tuple[int, int], float],
) -> float:
    """Sum over receivers outside `to_cut` of the largest rate entering from
    `from_cut`; absent edges count as rate zero."""
    s1 = _members(from_cut)
    s2 = _members(to_cut)
    total = 0.0
    for v in net.vertices:
        if v in s2:
            continue
        best = 0.0
        for u in s1:
            r = rates.get((u, v), 0.0)
            if r > best:
                best = r
        total += best
    return total


def intersection_union_cuts(cuts: Sequence) -> list[frozenset]:
    """For each k, the union of all k-wise intersections of the cut sets."""
    sets = [_members(c) for c in cuts]
    L = len(sets)
    out = []
    import itertools

    for k in range(1, L + 1):
        acc: set = set()
        for combo in itertools.combinations(range(L), k):
            inter = set(sets[combo[0]])
            for i in combo[1:]:
                inter &= sets[i]
            acc |= inter
        out.append(frozenset(acc))
    return out


def submodular_chain_check(
    net: RelayNetwork,
    cuts: Sequence,
    rates: Mapping[tuple[int, int], float],
) -> tuple[float, float, bool]:
    """Check the cyclic rearrangement inequality for a cut sequence.

    Left side: sum of cut_pair_rate over consecutive pairs (wrapping).
    Right side: same functional on the diagonal of the intersection-union
    family.  Returns (lhs, rhs, lhs >= rhs - 1e-9).
    """
    seq = list(cuts)
    if not seq:
        raise ValueError("cut sequence must be nonempty")
    lhs = 0.0
    for i, c in enumerate(seq):
        nxt = seq[(i + 1) % len(seq)]
        lhs += cut_pair_rate(net, c, nxt, rates)
    rhs = 0.0
    for s in intersection_union_cuts(seq):
        rhs += cut_pair_rate(net, s, s, rates)
    return lhs, rhs, lhs >= rhs - 1e-9


# ---------------------------------------------------------------------------
# Time-expanded minimum cut rate


def steady_cut_min(net: RelayNetwork, rates: Mapping[tuple[int, int], float]) -> float:
    """min over cuts of the self-pair rate (the steady-cut per-layer cost)."""
    return min(cut_pair_rate(net, c, c, rates) for c in enumerate_cuts(net))


def expanded_min_cut_rate(
    te: TimeExpandedNetwork,
    rates: Mapping[tuple[int, int], float],
    state_guard: int = 1_000_000,
) -> float:
    """Exact minimum over time-expanded cuts of the layered max-rate sum.

    The objective decomposes over adjacent layers, so a shortest path over
    per-layer cut states computes it exactly: states are the original-network
    cuts containing the source and excluding the destination under test,
    transition cost is the cut-pair rate, and the path length is the number
    of transmission layers.
    """
    net = te.network
    n = net.vertex_count
    per_dest_states = 1 << (n - 2)
    if per_dest_states * max(te.depth, 1) > state_guard:
        raise GuardError(
            f"time-expanded DP guard: {per_dest_states} states x {te.depth} layers exceeds {state_guard}"
        )
    best_overall = math.inf
    others = [v for v in net.vertices if v != net.source]
    for d in sorted(net.destinations):
        free = [v for v in others if v != d]
        states = []
        for mask in range(1 << len(free)):
            members = {net.source}
            for i, v in enumerate(free):
                if mask >> i & 1:
                    members.add(v)
            states.append(frozenset(members))
        cost = [
            [cut_pair_rate(net, a, b, rates) for b in states] for a in states
        ]
        dist = [0.0] * len(states)
        for _ in range(te.depth):  # transitions k-1 -> k for k = 2..L+1
            dist = [
                min(dist[i] + cost[i][j] for i in range(len(states)))
                for j in range(len(states))
            ]
        best_overall = min(best_overall, min(dist))
    return best_overall


def expanded_min_cut_sandwich(
    net: RelayNetwork,
    rates: Mapping[tuple[int, int], float],
    block_count: int,
) -> tuple[float, float]:
    """(lower, upper) bracket for the time-expanded minimum via steady cuts.

    upper = L * m with m the steady minimum (restricting to steady cuts can
    only increase the minimum).  lower = max(0, L - |cuts| + 1) * m: peel
    repeated-value loops off the layer-cut sequence, each loop of length
    ell costs at least ell * m by the rearrangement inequality, and the
    repeat-free remainder leaves at most |cuts| - 1 transitions uncovered.
    The coefficient is clamped at zero where the count gives nothing.

    The loop-count coefficient is one less than sometimes quoted: a
    two-node network has exactly one cut, every layer sequence is constant,
    and the minimum equals L * m exactly, so any coefficient above L is
    impossible.
    """
    m = steady_cut_min(net, rates)
    L = block_count + net.vertex_count - 2
    gamma = len(enumerate_cuts(net))
    return max(0, L - gamma + 1) * m, L * m


# ---------------------------------------------------------------------------
# Numeric forms of the gap inequalities


def coherent_minus_single_rate(powers: Sequence[float], subset: Sequence[int]) -> float:
    """Coherent-sum rate of `subset` minus the clamped single-user rate of its
    smallest index, with the sum-power penalty over all users.  Bounded by
    log2 K for descending nonnegative powers."""
    P = [float(p) for p in powers]
    A = sorted(set(int(i) for i in subset))
    if not A:
        raise ValueError("subset must be nonempty")
    total = sum(P)
    amp = sum(math.sqrt(P[j]) for j in A)
    lhs = 0.5 * math.log2(1.0 + amp * amp)
    l = A[0]
    if total > 0 and P[l] > 0:
        single = 0.5 * math.log2((1.0 / total + 1.0) * P[l])
    else:
        single = 0.0
    return lhs - max(single, 0.0)


def min_difference_bound(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """(min a - min b, max elementwise a-b); the first never exceeds the second."""
    if len(a) != len(b) or len(a) == 0:
        raise ValueError("sequences must be nonempty and equal length")
    return min(a) - min(b), max(x - y for x, y in zip(a, b))
