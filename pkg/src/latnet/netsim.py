"""End-to-end multicast simulation over the time-expanded network.

Every MAC in the network runs the dithered nested-lattice scheme; relays
decode the modular combination of their incoming leaders and forward it
through a fresh uniform random mapping per time-expanded edge.  Destinations
decode by deterministic replay: with all dithers and mapping tables known,
they simulate every candidate source message tuple and keep the ones whose
modular-combination stream matches what they observed.  Replay ambiguity
(no match, or more than one) counts as an error.

Relays that have not yet received anything forward the zero-rate dummy
(index 0, the zero leader), which the replayer reproduces deterministically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .chain import LatticeChain
from .errors import ChainMismatchError, GuardError
from .macsim import mmse_coefficient
from .network import RelayNetwork, time_expand
from .rngutil import (
    DOMAIN_DITHER,
    DOMAIN_MAPPING,
    DOMAIN_NOISE,
    DOMAIN_TRIAL,
    substream,
)

REPLAY_GUARD = 1 << 16


class MulticastCode:
    """Edge-level codebooks and level assignment for one network."""

    def __init__(self, net: RelayNetwork, chains: Mapping[int, LatticeChain]):
        if net.mode != "gaussian":
            raise ValueError("multicast simulation requires a gaussian-mode network")
        self.net = net
        self.chains = dict(chains)
        dims = {c.dimension for c in self.chains.values()}
        if len(dims) != 1:
            raise ChainMismatchError(f"chains must share one dimension, got {sorted(dims)}")
        self.dimension = dims.pop()
        self.edge_level: dict[tuple[int, int], int] = {}
        for v in net.vertices:
            if v == net.source:
                continue
            if v not in self.chains:
                raise ChainMismatchError(f"node {v} has no chain")
            chain = self.chains[v]
            incoming = sorted(net.in_neighbors(v), key=lambda u: (-net.edge_power[(u, v)], u))
            if chain.user_count != len(incoming):
                raise ChainMismatchError(
                    f"node {v}: chain has {chain.user_count} levels, in-degree is {len(incoming)}"
                )
            for rank, u in enumerate(incoming):
                p_target = chain.target_powers[rank]
                p_edge = net.edge_power[(u, v)]
                if abs(p_target - p_edge) > 1e-9 * max(1.0, p_edge):
                    raise ChainMismatchError(
                        f"node {v}: level {rank + 1} targets power {p_target}, edge ({u},{v}) has {p_edge}"
                    )
                self.edge_level[(u, v)] = rank + 1
        # Force leader enumeration up front (also runs the cardinality checks).
        for (u, v), lvl in self.edge_level.items():
            self.chains[v].coset_leaders(lvl)
        for v in self.chains:
            self.chains[v].coset_leaders(1)

    def edge_leaders(self, u: int, v: int):
        return self.chains[v].coset_leaders(self.edge_level[(u, v)])

    def edge_rates(self) -> dict[tuple[int, int], float]:
        return {
            (u, v): self.chains[v].rates[lvl - 1] for (u, v), lvl in self.edge_level.items()
        }

    def state_domain(self, u: int, source_messages: int) -> int:
        """Alphabet a node's transmissions are mapped from."""
        if u == self.net.source:
            return source_messages
        return self.chains[u].coset_leaders(1).cardinality


@dataclass(frozen=True)
class MulticastTrial:
    messages: tuple[int, ...]
    observed: Mapping[int, tuple]  # destination -> per-layer decoded indices
    relay_decode_errors: Mapping[tuple[int, int], bool]  # (node, layer) -> error
    matches: Mapping[int, tuple]  # destination -> candidate tuples that replay to observed
    errors: Mapping[int, bool]  # destination -> end-to-end error flag


@dataclass(frozen=True)
class MulticastOutcome:
    trials: int
    block_count: int
    source_messages: int
    destination_errors: Mapping[int, int]
    any_destination_errors: int
    relay_decode_errors: Mapping[int, int]  # node -> decode-error count over all layers/trials

    @property
    def error_rate(self) -> float:
        return self.any_destination_errors / self.trials


def multicast_trials(
    net: RelayNetwork,
    chains: Mapping[int, LatticeChain],
    block_count: int,
    trials: int,
    seed: int,
    source_messages: int,
    noise_variance: float = 1.0,
) -> Iterator[MulticastTrial]:
    """Yield full per-trial records of the multicast simulation."""
    code = MulticastCode(net, chains)
    if source_messages < 1:
        raise ValueError("source_messages must be positive")
    if source_messages**block_count > REPLAY_GUARD:
        raise GuardError(
            f"replay guard: {source_messages}^{block_count} candidate messages exceed {REPLAY_GUARD}"
        )
    te = time_expand(net, block_count)
    L = te.depth
    n = code.dimension
    net_edges = net.sorted_edges()
    receivers = [v for v in net.vertices if v != net.source]
    dests = sorted(net.destinations)

    for trial in range(trials):
        # Fresh mappings, dithers and noise per trial: the simulation averages
        # over the random-code ensemble as well as the channel.
        msg_rng = substream(seed, DOMAIN_TRIAL, trial)
        messages = tuple(int(m) for m in msg_rng.integers(0, source_messages, size=block_count))
        tables = {}
        dithers = {}
        for k in range(1, L + 1):
            for ei, (u, v) in enumerate(net_edges):
                dom = code.state_domain(u, source_messages)
                card = code.edge_leaders(u, v).cardinality
                trng = substream(seed, DOMAIN_MAPPING, trial, k, ei)
                # Source edges inject when the message set fits the codebook
                # (a source operating within the edge rate never merges two
                # messages); relay forwards stay plain random functions.
                if u == net.source and dom <= card:
                    tables[(u, v, k)] = trng.permutation(card)[:dom]
                else:
                    tables[(u, v, k)] = trng.integers(0, card, size=dom)
                drng = substream(seed, DOMAIN_DITHER, trial, k, ei)
                lam = code.chains[v].shaping[code.edge_level[(u, v)] - 1]
                dithers[(u, v, k)] = lam.fold_many(drng.random((1, n)) @ lam.generator)[0]

        target_cache: dict = {}
        in_edges_of = {v: [e for e in net_edges if e[1] == v] for v in receivers}

        def edge_w_index(u, v, k, state_u):
            if u == net.source and k > block_count:
                return 0  # zero-rate dummy once the message stream ends
            return int(tables[(u, v, k)][state_u])

        def node_target_index(v, k, in_indices: tuple[int, ...]) -> int:
            """Deterministic modular combination at node v, received at layer k+1."""
            key = (v, k, in_indices)
            if key in target_cache:
                return target_cache[key]
            chain = code.chains[v]
            acc = np.zeros(n)
            for (u, _), w_idx in zip(in_edges_of[v], in_indices):
                lvl = code.edge_level[(u, v)]
                wvec = code.edge_leaders(u, v).leaders[w_idx]
                dith = dithers[(u, v, k)]
                acc = acc + wvec - chain.shaping[lvl - 1].nearest_point(wvec + dith)
            t_vec = chain.shaping[0].reduce(acc)
            idx = chain.coset_leaders(1).index_of[chain.leader_id(1, t_vec)]
            target_cache[key] = idx
            return idx

        def propagate(source_inputs, physical: bool):
            """Run the layered network once.

            physical=True: transmit through the Gaussian MACs and lattice-decode
            (returns observed streams and per-node decode errors).
            physical=False: deterministic replay of the modular combinations.
            """
            states = {v: 0 for v in receivers}
            streams = {d: [] for d in dests}
            decode_errors = {}
            for k in range(1, L + 1):
                w_index = {}
                for (u, v) in net_edges:
                    st = source_inputs[k - 1] if u == net.source else states[u]
                    w_index[(u, v)] = edge_w_index(u, v, k, st)
                new_states = {}
                for v in receivers:
                    in_idx = tuple(w_index[e] for e in in_edges_of[v])
                    t_true = node_target_index(v, k, in_idx)
                    if physical:
                        chain = code.chains[v]
                        y = np.zeros(n)
                        for (u, vv) in in_edges_of[v]:
                            lvl = code.edge_level[(u, v)]
                            y += chain.encode(lvl, w_index[(u, v)], dithers[(u, v, k)], validate=False)
                        nrng = substream(seed, DOMAIN_NOISE, trial, k, v)
                        y += nrng.standard_normal(n) * math.sqrt(noise_variance)
                        alpha = mmse_coefficient(chain, noise_variance)
                        dsum = np.sum([dithers[(u, v, k)] for (u, vv) in in_edges_of[v]], axis=0)
                        folded = chain.shaping[0].reduce(alpha * y - dsum)
                        point = chain.code_lattice.nearest_point(folded)
                        t_hat = chain.coset_leaders(1).index_of[chain.leader_id(1, point)]
                        decode_errors[(v, k + 1)] = t_hat != t_true
                        new_states[v] = t_hat
                    else:
                        new_states[v] = t_true
                states = new_states
                for d in dests:
                    streams[d].append(states[d])
            return {d: tuple(s) for d, s in streams.items()}, decode_errors

        source_seq = [messages[k] if k < block_count else 0 for k in range(L)]
        observed, decode_errors = propagate(source_seq, physical=True)

        matches = {d: [] for d in dests}
        for cand in itertools.product(range(source_messages), repeat=block_count):
            cand_seq = [cand[k] if k < block_count else 0 for k in range(L)]
            replayed, _ = propagate(cand_seq, physical=False)
            for d in dests:
                if replayed[d] == observed[d]:
                    matches[d].append(cand)
        errors = {d: (matches[d] != [messages]) for d in dests}
        yield MulticastTrial(
            messages,
            observed,
            decode_errors,
            {d: tuple(m) for d, m in matches.items()},
            errors,
        )


def run_multicast(
    net: RelayNetwork,
    chains: Mapping[int, LatticeChain],
    block_count: int,
    trials: int,
    seed: int,
    source_messages: int,
    noise_variance: float = 1.0,
) -> MulticastOutcome:
    """Monte Carlo multicast error statistics (see `multicast_trials`)."""
    dest_errors = {d: 0 for d in sorted(net.destinations)}
    relay_errors = {v: 0 for v in net.vertices if v != net.source}
    any_errors = 0
    for tr in multicast_trials(net, chains, block_count, trials, seed, source_messages, noise_variance):
        hit = False
        for d, e in tr.errors.items():
            dest_errors[d] += e
            hit = hit or e
        any_errors += hit
        for (v, _k), e in tr.relay_decode_errors.items():
            relay_errors[v] += e
    return MulticastOutcome(trials, block_count, source_messages, dest_errors, any_errors, relay_errors)


# ---------------------------------------------------------------------------
# Per-MAC distinguishability under independent uniform mappings


@dataclass(frozen=True)
class CollisionReport:
    pattern: tuple[int, ...]
    probability: float
    stderr: float
    bound: float
    trials: int


def collision_probabilities(
    chain: LatticeChain,
    pattern,
    trials: int,
    seed: int,
) -> CollisionReport:
    """Probability that two source messages produce the same modular sum.

    `pattern` lists the user levels whose mapped leaders differ between the
    two messages (independent uniform redraw); the rest transmit identical
    leaders.  Empty pattern: the combination collides with certainty.  For a
    nonempty pattern the collision probability is at most 2^(-n R_l) with l
    the smallest (largest-rate) level in the pattern.
    """
    A = sorted(set(int(i) for i in pattern))
    K = chain.user_count
    if K > 3:
        raise GuardError(f"collision estimation guard: {K} users exceed 3")
    if any(not (1 <= a <= K) for a in A):
        raise ValueError(f"pattern levels must lie in 1..{K}")
    leader_sets = [chain.coset_leaders(i) for i in range(1, K + 1)]
    hits = 0
    from .macsim import modular_sum

    for ci in range(trials):
        rng = substream(seed, DOMAIN_TRIAL, ci)
        dith = [chain.sample_dither(j + 1, rng) for j in range(K)]
        w1 = [int(rng.integers(0, leader_sets[j].cardinality)) for j in range(K)]
        w2 = list(w1)
        for a in A:
            w2[a - 1] = int(rng.integers(0, leader_sets[a - 1].cardinality))
        v1 = [leader_sets[j].leaders[w1[j]] for j in range(K)]
        v2 = [leader_sets[j].leaders[w2[j]] for j in range(K)]
        t1 = chain.leader_id(1, modular_sum(chain, v1, dith))
        t2 = chain.leader_id(1, modular_sum(chain, v2, dith))
        hits += t1 == t2
    p_hat = hits / trials
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-300) / trials)
    if A:
        bound = 2.0 ** (-chain.dimension * chain.rates[A[0] - 1])
    else:
        bound = 1.0
    return CollisionReport(tuple(A), p_hat, se, bound, trials)
