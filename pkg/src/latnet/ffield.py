"""Linear finite-field symmetric networks: channels, codes, capacity, simulation.

Symbols live in a prime field Z_q.  Each receiving node owns a symmetric
discrete memoryless channel whose input is the field sum of its (coefficient
scaled) incoming signals, so with every incoming edge pre-scaled by the
inverse coefficient and encoded through the node's linear code, the node
observes a noisy codeword of the plain message sum.  Relays decode that sum
exhaustively (maximum likelihood), and the multicast pipeline mirrors the
Gaussian one with field sums replacing modular lattice combinations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .chain import is_prime
from .errors import ChainMismatchError, GuardError, SchemaError
from .network import RelayNetwork, time_expand
from .rngutil import DOMAIN_CODE, DOMAIN_MAPPING, DOMAIN_NOISE, DOMAIN_TRIAL, substream

ML_GUARD = 1 << 16


def field_inverse(x: int, q: int) -> int:
    if x % q == 0:
        raise ZeroDivisionError("zero has no inverse")
    return pow(int(x), q - 2, q)


class SymmetricDmc:
    """Discrete memoryless channel with a Gallager-symmetric transition matrix.

    Symmetry certificate: group output symbols by the multiset of their
    transition column; within each group the rows (restricted to the group)
    must be permutations of each other.  Grouping by column multiset is the
    coarsest candidate partition, so if it fails no valid partition exists.
    Non-symmetric matrices are rejected outright: uniform input would not be
    guaranteed optimal, and we do not silently compute lower bounds.
    """

    def __init__(self, input_size: int, matrix):
        P = np.array(matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != input_size:
            raise ValueError(f"transition matrix must have {input_size} rows")
        if np.any(P < -1e-15):
            raise ValueError("transition probabilities must be nonnegative")
        P = np.clip(P, 0.0, None)
        rows = P.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ValueError("transition matrix rows must sum to 1 within 1e-12")
        self.input_size = int(input_size)
        self.matrix = P
        self.matrix.setflags(write=False)
        self.output_size = P.shape[1]
        self.partition = self._certify()
        with np.errstate(divide="ignore"):
            self._log = np.log(P)
        self._cum = np.cumsum(P, axis=1)

    def _certify(self) -> list[tuple[int, ...]]:
        cols: dict[tuple, list[int]] = {}
        for y in range(self.output_size):
            key = tuple(np.sort(np.round(self.matrix[:, y], 12)))
            cols.setdefault(key, []).append(y)
        partition = [tuple(v) for v in cols.values()]
        for group in partition:
            sub = self.matrix[:, group]
            profile = np.sort(np.round(sub[0], 12))
            for x in range(1, self.input_size):
                if not np.array_equal(np.sort(np.round(sub[x], 12)), profile):
                    raise ValueError(
                        "channel is not symmetric: rows of an output group are not permutations"
                    )
        return partition

    @classmethod
    def q_ary_symmetric(cls, q: int, error_prob: float) -> "SymmetricDmc":
        """Uniform-error channel: stay with prob 1-eps, else uniform over the rest."""
        if not (0.0 <= error_prob <= 1.0):
            raise ValueError("error probability must lie in [0, 1]")
        P = np.full((q, q), error_prob / (q - 1) if q > 1 else 0.0)
        np.fill_diagonal(P, 1.0 - error_prob)
        return cls(q, P)

    @classmethod
    def identity(cls, q: int) -> "SymmetricDmc":
        return cls(q, np.eye(q))

    def capacity_bits(self) -> float:
        """Mutual information under uniform input (optimal for symmetric DMCs)."""
        q = self.input_size
        p_y = self.matrix.mean(axis=0)
        h_y = -sum(p * math.log2(p) for p in p_y if p > 0)
        h_y_given_x = 0.0
        for x in range(q):
            h_y_given_x -= sum(p * math.log2(p) for p in self.matrix[x] if p > 0)
        h_y_given_x /= q
        return h_y - h_y_given_x

    def sample(self, inputs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Channel outputs for a vector of input symbols."""
        x = np.asarray(inputs, dtype=np.int64)
        r = rng.random(x.shape[0])
        cum = self._cum[x]
        return (r[:, None] < cum).argmax(axis=1)

    def log_likelihood_table(self) -> np.ndarray:
        return self._log


def channel_from_dict(spec: dict, q: int) -> SymmetricDmc:
    """Parse the channel schema: qsc / identity / explicit matrix."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise SchemaError("channel spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "qsc":
        allowed = {"type", "q", "eps"}
        unknown = set(spec) - allowed
        if unknown:
            raise SchemaError(f"unknown field {sorted(unknown)[0]!r} in channel spec")
        if int(spec.get("q", q)) != q:
            raise SchemaError("channel field size disagrees with network field_size")
        return SymmetricDmc.q_ary_symmetric(q, float(spec["eps"]))
    if kind == "identity":
        return SymmetricDmc.identity(q)
    if kind == "matrix":
        allowed = {"type", "matrix"}
        unknown = set(spec) - allowed
        if unknown:
            raise SchemaError(f"unknown field {sorted(unknown)[0]!r} in channel spec")
        return SymmetricDmc(q, np.array(spec["matrix"], dtype=float))
    raise SchemaError(f"unknown channel type {kind!r}")


# ---------------------------------------------------------------------------
# Multicast capacity


def finite_field_capacity(net: RelayNetwork) -> float:
    """Multicast capacity: min over cuts of the crossing receivers' capacities.

    Achievable and converse coincide for these networks, so this is the
    capacity itself rather than a bound pair.
    """
    from .network import enumerate_cuts

    if net.mode != "finite-field":
        raise ValueError("operation requires a finite-field network")
    caps = {v: net.node_channel[v].capacity_bits() for v in net.vertices if v != net.source}
    return min(sum(caps[v] for v in c.boundary_in) for c in enumerate_cuts(net))


def finite_field_cut_terms(net: RelayNetwork) -> dict[frozenset, float]:
    from .network import enumerate_cuts

    caps = {v: net.node_channel[v].capacity_bits() for v in net.vertices if v != net.source}
    return {c.members: sum(caps[v] for v in c.boundary_in) for c in enumerate_cuts(net)}


# ---------------------------------------------------------------------------
# Linear codes with exhaustive maximum-likelihood decoding


def _message_vectors(k: int, q: int) -> np.ndarray:
    out = np.zeros((q**k, k), dtype=np.int64)
    tmp = np.arange(q**k, dtype=np.int64)
    for j in range(k):
        out[:, j] = tmp % q
        tmp //= q
    return out


@dataclass(frozen=True)
class LinearCode:
    """Systematic-free random linear code over Z_q with generator (n x k)."""

    blocklength: int
    dimension: int
    field_size: int
    generator: np.ndarray  # codeword = (generator @ message) mod q

    def __post_init__(self):
        if self.field_size**self.dimension > ML_GUARD:
            raise GuardError(
                f"ML guard: {self.field_size}^{self.dimension} codewords exceed {ML_GUARD}"
            )

    def encode(self, message: np.ndarray) -> np.ndarray:
        return (self.generator @ np.asarray(message, dtype=np.int64)) % self.field_size

    def all_codewords(self) -> np.ndarray:
        msgs = _message_vectors(self.dimension, self.field_size)
        return (msgs @ self.generator.T) % self.field_size

    def message_index(self, message: np.ndarray) -> int:
        return int(sum(int(m) * self.field_size**j for j, m in enumerate(np.asarray(message))))

    def message_vector(self, index: int) -> np.ndarray:
        out = np.zeros(self.dimension, dtype=np.int64)
        for j in range(self.dimension):
            out[j] = index % self.field_size
            index //= self.field_size
        return out


def _rank_mod_p(mat: np.ndarray, p: int) -> int:
    from .chain import _rref_mod_p

    return len(_rref_mod_p(mat, p)[1])


def random_linear_code(n: int, k: int, q: int, seed: int) -> LinearCode:
    """Uniformly random full-column-rank generator (bounded retries)."""
    if not is_prime(q):
        raise ValueError(f"field size must be prime, got {q}")
    if not (0 <= k <= n):
        raise ValueError(f"code dimension {k} out of range 0..{n}")
    if q**k > ML_GUARD:
        raise GuardError(f"ML guard: {q}^{k} codewords exceed {ML_GUARD}")
    rng = substream(seed, DOMAIN_CODE)
    for _ in range(200):
        G = rng.integers(0, q, size=(n, k)).astype(np.int64)
        if k == 0 or _rank_mod_p(G.T, q) == k:
            return LinearCode(n, k, q, G)
    raise RuntimeError("failed to draw a full-rank generator")


def ml_decode_indices(code: LinearCode, received: np.ndarray, channel: SymmetricDmc) -> np.ndarray:
    """Exhaustive ML decoding of a batch of received words -> message indices.

    Ties break toward the smallest message index (argmax picks the first).
    """
    Y = np.atleast_2d(np.asarray(received, dtype=np.int64))
    cw = code.all_codewords()  # (q^k, n)
    logp = channel.log_likelihood_table()
    out = np.empty(len(Y), dtype=np.int64)
    chunk = max(1, int(2e7) // max(1, cw.shape[0] * cw.shape[1]))
    for lo in range(0, len(Y), chunk):
        block = Y[lo : lo + chunk]  # (b, n)
        scores = logp[cw[:, None, :], block[None, :, :]].sum(axis=2)  # (q^k, b)
        out[lo : lo + chunk] = scores.argmax(axis=0)
    return out


def ml_decode(code: LinearCode, received: np.ndarray, channel: SymmetricDmc) -> np.ndarray:
    """Single-word ML decode -> message vector."""
    return code.message_vector(int(ml_decode_indices(code, received, channel)[0]))


@dataclass(frozen=True)
class CodeErrorReport:
    trials: int
    errors: int
    error_rate: float
    stderr: float
    rate_bits: float
    capacity_bits: float


def simulate_code(code: LinearCode, channel: SymmetricDmc, trials: int, seed: int) -> CodeErrorReport:
    """Block error rate of the code over its channel with uniform messages."""
    rng = substream(seed, DOMAIN_TRIAL)
    q, n, k = code.field_size, code.blocklength, code.dimension
    msgs = rng.integers(0, q**k, size=trials)
    cw = code.all_codewords()
    sent = cw[msgs]
    received = np.empty_like(sent)
    for t in range(trials):
        received[t] = channel.sample(sent[t], rng)
    decoded = ml_decode_indices(code, received, channel)
    errors = int((decoded != msgs).sum())
    p_hat = errors / trials
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-300) / trials)
    rate = (k / n) * math.log2(q)
    return CodeErrorReport(trials, errors, p_hat, se, rate, channel.capacity_bits())


# ---------------------------------------------------------------------------
# End-to-end finite-field multicast simulation

REPLAY_GUARD = 1 << 16


@dataclass(frozen=True)
class FiniteFieldTrial:
    messages: tuple[int, ...]
    observed: Mapping[int, tuple]
    relay_decode_errors: Mapping[tuple[int, int], bool]
    matches: Mapping[int, tuple]
    errors: Mapping[int, bool]
    edge_messages: Mapping[tuple, np.ndarray]  # (u, v, k) -> transmitted message vector


@dataclass(frozen=True)
class FiniteFieldOutcome:
    trials: int
    block_count: int
    source_messages: int
    destination_errors: Mapping[int, int]
    any_destination_errors: int
    relay_decode_errors: Mapping[int, int]

    @property
    def error_rate(self) -> float:
        return self.any_destination_errors / self.trials


def finite_field_trials(
    net: RelayNetwork,
    codes: Mapping[int, LinearCode],
    block_count: int,
    trials: int,
    seed: int,
    source_messages: int,
) -> Iterator[FiniteFieldTrial]:
    """Yield per-trial records of the finite-field multicast simulation.

    Each receiving node uses its own linear code; all incoming edges of node
    v carry messages in that code's message space and are pre-scaled by the
    inverse channel coefficient, so the node's channel input is the encoded
    field sum of the incoming messages.  Noiseless runs use identity
    channels, under which decoding is exact arithmetic.
    """
    if net.mode != "finite-field":
        raise ValueError("finite-field simulation requires a finite-field network")
    q = net.field_size
    for v in net.vertices:
        if v == net.source:
            continue
        if v not in codes:
            raise ChainMismatchError(f"node {v} has no code")
        if codes[v].field_size != q:
            raise ChainMismatchError(f"node {v}: code field size differs from network field size")
    blocklengths = {codes[v].blocklength for v in codes}
    if len(blocklengths) != 1:
        raise ChainMismatchError("all codes must share one blocklength")
    if source_messages**block_count > REPLAY_GUARD:
        raise GuardError(
            f"replay guard: {source_messages}^{block_count} candidate messages exceed {REPLAY_GUARD}"
        )
    te = time_expand(net, block_count)
    L = te.depth
    net_edges = net.sorted_edges()
    receivers = [v for v in net.vertices if v != net.source]
    dests = sorted(net.destinations)

    def state_domain(u):
        return source_messages if u == net.source else q ** codes[u].dimension

    for trial in range(trials):
        msg_rng = substream(seed, DOMAIN_TRIAL, trial)
        messages = tuple(int(m) for m in msg_rng.integers(0, source_messages, size=block_count))
        tables = {}
        for k in range(1, L + 1):
            for ei, (u, v) in enumerate(net_edges):
                trng = substream(seed, DOMAIN_MAPPING, trial, k, ei)
                dom = state_domain(u)
                card = q ** codes[v].dimension
                # Source edges inject when possible (see netsim); relays are
                # plain random functions.
                if u == net.source and dom <= card:
                    tables[(u, v, k)] = trng.permutation(card)[:dom]
                else:
                    tables[(u, v, k)] = trng.integers(0, card, size=dom)

        def edge_msg_index(u, v, k, state_u):
            if u == net.source and k > block_count:
                return 0
            return int(tables[(u, v, k)][state_u])

        edge_messages = {}

        def propagate(source_inputs, physical: bool):
            states = {v: 0 for v in receivers}
            streams = {d: [] for d in dests}
            decode_errors = {}
            for k in range(1, L + 1):
                w_vec = {}
                for (u, v) in net_edges:
                    st = source_inputs[k - 1] if u == net.source else states[u]
                    idx = edge_msg_index(u, v, k, st)
                    w_vec[(u, v)] = codes[v].message_vector(idx)
                    if physical:
                        edge_messages[(u, v, k)] = w_vec[(u, v)]
                new_states = {}
                for v in receivers:
                    incoming = [e for e in net_edges if e[1] == v]
                    t_true = np.zeros(codes[v].dimension, dtype=np.int64)
                    for e in incoming:
                        t_true = (t_true + w_vec[e]) % q
                    t_true_idx = codes[v].message_index(t_true)
                    if physical:
                        # Channel input: sum of coefficient-scaled pre-scaled
                        # codewords == encoded message sum.
                        x_v = np.zeros(codes[v].blocklength, dtype=np.int64)
                        for (u, _) in incoming:
                            beta = net.edge_coeff[(u, v)]
                            x_uv = (field_inverse(beta, q) * codes[v].encode(w_vec[(u, v)])) % q
                            x_v = (x_v + beta * x_uv) % q
                        nrng = substream(seed, DOMAIN_NOISE, trial, k, v)
                        y_v = net.node_channel[v].sample(x_v, nrng)
                        t_hat_idx = int(ml_decode_indices(codes[v], y_v, net.node_channel[v])[0])
                        decode_errors[(v, k + 1)] = t_hat_idx != t_true_idx
                        new_states[v] = t_hat_idx
                    else:
                        new_states[v] = t_true_idx
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
        yield FiniteFieldTrial(
            messages,
            observed,
            decode_errors,
            {d: tuple(m) for d, m in matches.items()},
            errors,
            dict(edge_messages),
        )


def run_finite_field_multicast(
    net: RelayNetwork,
    codes: Mapping[int, LinearCode],
    block_count: int,
    trials: int,
    seed: int,
    source_messages: int,
) -> FiniteFieldOutcome:
    dest_errors = {d: 0 for d in sorted(net.destinations)}
    relay_errors = {v: 0 for v in net.vertices if v != net.source}
    any_errors = 0
    for tr in finite_field_trials(net, codes, block_count, trials, seed, source_messages):
        hit = False
        for d, e in tr.errors.items():
            dest_errors[d] += e
            hit = hit or e
        any_errors += hit
        for (v, _k), e in tr.relay_decode_errors.items():
            relay_errors[v] += e
    return FiniteFieldOutcome(
        trials, block_count, source_messages, dest_errors, any_errors, relay_errors
    )
