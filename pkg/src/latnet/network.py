"""Relay networks with orthogonal outgoing channels and interfering inputs.

The model: a directed graph where vertex 1 is the source, a nonempty set of
sink vertices are destinations, every node's outgoing channels are orthogonal
and its incoming signals superpose through a MAC.  Two channel modes exist:
Gaussian (per-edge power constraints) and finite-field (per-edge nonzero
coefficients plus a per-node symmetric DMC).

This module owns the graph structure: validation, cut enumeration, cut
boundaries, and unfolding into a layered time-expanded graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import GuardError, NetworkValidationError, SchemaError

SOURCE = 1

GAUSSIAN = "gaussian"
FINITE_FIELD = "finite-field"

CUT_ENUMERATION_MAX_VERTICES = 24


@dataclass(frozen=True)
class RelayNetwork:
    """Validated relay network with interference.

    Vertices are 1-based contiguous integers with the source fixed at 1.
    Instances are immutable after construction; treat the mapping fields as
    read-only.  Use `build_network` / `network_from_dict` instead of the raw
    constructor so the structural invariants are checked.
    """

    vertex_count: int
    destinations: frozenset[int]
    edges: frozenset[tuple[int, int]]
    mode: str
    edge_power: Mapping[tuple[int, int], float] = field(default_factory=dict)
    edge_coeff: Mapping[tuple[int, int], int] = field(default_factory=dict)
    field_size: int | None = None
    node_channel: Mapping[int, object] = field(default_factory=dict)

    @property
    def source(self) -> int:
        return SOURCE

    @property
    def vertices(self) -> range:
        return range(1, self.vertex_count + 1)

    @property
    def relays(self) -> list[int]:
        return [v for v in self.vertices if v != SOURCE and v not in self.destinations]

    def in_neighbors(self, v: int) -> frozenset[int]:
        return frozenset(u for (u, w) in self.edges if w == v)

    def out_neighbors(self, v: int) -> frozenset[int]:
        return frozenset(w for (u, w) in self.edges if u == v)

    def in_degree(self, v: int) -> int:
        return len(self.in_neighbors(v))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class Cut:
    """A source-side vertex set with its derived boundaries.

    `boundary_out` is the set of members with an edge into the complement,
    `boundary_in` the set of complement vertices receiving such an edge, and
    `incoming_across[v]` the members feeding complement vertex v.
    """

    members: frozenset[int]
    boundary_out: frozenset[int]
    boundary_in: frozenset[int]
    incoming_across: Mapping[int, frozenset[int]]


def _reachable_from(edges: Iterable[tuple[int, int]], start: int) -> set[int]:
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def build_network(
    vertex_count: int,
    destinations: Iterable[int],
    edges: Iterable[tuple[int, int]],
    mode: str = GAUSSIAN,
    edge_power: Mapping[tuple[int, int], float] | None = None,
    edge_coeff: Mapping[tuple[int, int], int] | None = None,
    field_size: int | None = None,
    node_channel: Mapping[int, object] | None = None,
) -> RelayNetwork:
    """Build and validate a RelayNetwork.

    Raises NetworkValidationError naming the offending element when any
    structural assumption fails: incoming edge at the source, outgoing edge
    at a destination, unreachable vertices, relays that reach no destination,
    duplicated/self/parallel edges, nonpositive vertex count, empty
    destination set, negative powers, zero coefficients, or a mode whose
    required channel data is missing.
    """
    if vertex_count <= 0:
        raise NetworkValidationError(f"vertex_count must be positive, got {vertex_count}")
    dests = frozenset(int(d) for d in destinations)
    if not dests:
        raise NetworkValidationError("destination set is empty")
    if SOURCE in dests:
        raise NetworkValidationError("source vertex 1 cannot be a destination")
    for d in dests:
        if not (1 <= d <= vertex_count):
            raise NetworkValidationError(f"destination {d} outside vertex range 1..{vertex_count}")

    edge_list = [(int(u), int(v)) for (u, v) in edges]
    edge_set = frozenset(edge_list)
    if len(edge_list) != len(edge_set):
        raise NetworkValidationError("parallel edges are not allowed (at most one edge per ordered pair)")
    for u, v in edge_set:
        if u == v:
            raise NetworkValidationError(f"self-loop at vertex {u}")
        if not (1 <= u <= vertex_count and 1 <= v <= vertex_count):
            raise NetworkValidationError(f"edge ({u},{v}) outside vertex range")
        if v == SOURCE:
            raise NetworkValidationError(f"source has incoming edge ({u},{v})")
        if u in dests:
            raise NetworkValidationError(f"destination {u} has outgoing edge ({u},{v})")

    reach = _reachable_from(edge_set, SOURCE)
    for v in range(1, vertex_count + 1):
        if v != SOURCE and v not in reach:
            raise NetworkValidationError(f"vertex {v} is not reachable from the source")
    for v in range(1, vertex_count + 1):
        if v == SOURCE or v in dests:
            continue
        if not (_reachable_from(edge_set, v) & dests):
            raise NetworkValidationError(f"relay {v} cannot reach any destination")

    if mode == GAUSSIAN:
        if edge_coeff or node_channel or field_size is not None:
            raise NetworkValidationError("gaussian mode must not carry finite-field data")
        powers = dict(edge_power or {})
        missing = edge_set - set(powers)
        if missing:
            raise NetworkValidationError(f"edge {sorted(missing)[0]} has no power")
        extra = set(powers) - edge_set
        if extra:
            raise NetworkValidationError(f"power given for non-edge {sorted(extra)[0]}")
        for e, p in powers.items():
            if not (p >= 0.0 and math.isfinite(p)):
                raise NetworkValidationError(f"edge {e} has negative or non-finite power {p}")
        return RelayNetwork(vertex_count, dests, edge_set, GAUSSIAN, edge_power=dict(powers))

    if mode == FINITE_FIELD:
        if edge_power:
            raise NetworkValidationError("finite-field mode must not carry edge powers")
        if field_size is None or field_size < 2:
            raise NetworkValidationError(f"finite-field mode needs a prime field_size >= 2, got {field_size}")
        coeffs = dict(edge_coeff or {})
        missing = edge_set - set(coeffs)
        if missing:
            raise NetworkValidationError(f"edge {sorted(missing)[0]} has no coefficient")
        for e, b in coeffs.items():
            if not (1 <= int(b) < field_size):
                raise NetworkValidationError(f"edge {e} coefficient {b} is zero or outside the field")
        channels = dict(node_channel or {})
        for v in range(2, vertex_count + 1):
            if v not in channels:
                raise NetworkValidationError(f"node {v} has no channel")
        return RelayNetwork(
            vertex_count,
            dests,
            edge_set,
            FINITE_FIELD,
            edge_coeff={e: int(b) for e, b in coeffs.items()},
            field_size=int(field_size),
            node_channel=channels,
        )

    raise NetworkValidationError(f"unknown mode {mode!r}")


def cut_boundaries(net: RelayNetwork, members: Iterable[int]) -> Cut:
    """Compute the boundaries and crossing in-sets of a cut member set."""
    s = frozenset(int(v) for v in members)
    if SOURCE not in s:
        raise NetworkValidationError("cut must contain the source")
    complement = set(net.vertices) - s
    if not (complement & net.destinations):
        raise NetworkValidationError("cut complement contains no destination")
    boundary_out = frozenset(u for (u, v) in net.edges if u in s and v in complement)
    boundary_in = frozenset(v for (u, v) in net.edges if u in s and v in complement)
    incoming = {v: frozenset(u for u in net.in_neighbors(v) if u in s) for v in sorted(boundary_in)}
    return Cut(s, boundary_out, boundary_in, incoming)


def enumerate_cuts(net: RelayNetwork) -> list[Cut]:
    """Enumerate every cut: source inside, some destination outside.

    Deterministic order: ascending bitmask over vertices 2..|V|.  For
    single-destination networks the count is exactly 2^(|V|-2).
    """
    n = net.vertex_count
    if n > CUT_ENUMERATION_MAX_VERTICES:
        raise GuardError(f"cut enumeration guard: |V|={n} exceeds {CUT_ENUMERATION_MAX_VERTICES}")
    others = list(range(2, n + 1))
    cuts = []
    for mask in range(1 << len(others)):
        members = {SOURCE}
        for i, v in enumerate(others):
            if mask >> i & 1:
                members.add(v)
        if net.destinations - members:
            cuts.append(cut_boundaries(net, members))
    return cuts


# ---------------------------------------------------------------------------
# Time expansion

VIRTUAL_SOURCE = ("S",)


def virtual_destination(d: int) -> tuple:
    return ("D", int(d))


@dataclass(frozen=True)
class TimeExpandedNetwork:
    """Layered unfolding of a relay network over transmission blocks.

    Real nodes are (vertex, layer) pairs with layers 1..depth+1; the virtual
    source sits at layer 0 and virtual destinations at layer depth+2.  MAC
    edges replicate the original edge set between adjacent layers; chain
    edges are the lossless virtual links along the source and destination
    node copies.  Chain edges carry no power and never enter rate formulas.
    """

    network: RelayNetwork
    block_count: int
    depth: int  # number of transmission layers L = B + |V| - 2
    layers: tuple[frozenset, ...]  # real layers 1..L+1
    mac_edges: frozenset
    chain_edges: frozenset

    @property
    def virtual_source(self) -> tuple:
        return VIRTUAL_SOURCE

    @property
    def virtual_destinations(self) -> frozenset:
        return frozenset(virtual_destination(d) for d in sorted(self.network.destinations))

    @property
    def edges(self) -> frozenset:
        return self.mac_edges | self.chain_edges

    def layer_index(self, node) -> int:
        if node == VIRTUAL_SOURCE:
            return 0
        if isinstance(node, tuple) and len(node) == 2 and node[0] == "D":
            return self.depth + 2
        return node[1]


def time_expand(net: RelayNetwork, block_count: int) -> TimeExpandedNetwork:
    """Unfold `net` over block_count blocks into a layered acyclic graph."""
    if block_count < 1:
        raise NetworkValidationError(f"block_count must be >= 1, got {block_count}")
    depth = block_count + net.vertex_count - 2
    layers = tuple(frozenset((v, k) for v in net.vertices) for k in range(1, depth + 2))
    mac = set()
    for k in range(1, depth + 1):
        for (u, v) in net.edges:
            mac.add(((u, k), (v, k + 1)))
    chain = set()
    chain.add((VIRTUAL_SOURCE, (SOURCE, 1)))
    for k in range(1, depth + 1):
        chain.add(((SOURCE, k), (SOURCE, k + 1)))
    for d in net.destinations:
        for k in range(1, depth + 1):
            chain.add(((d, k), (d, k + 1)))
        chain.add(((d, depth + 1), virtual_destination(d)))
    return TimeExpandedNetwork(net, block_count, depth, layers, frozenset(mac), frozenset(chain))


# ---------------------------------------------------------------------------
# Random instances (for property suites)


def random_gaussian_network(
    rng: np.random.Generator,
    vertex_count: int,
    edge_prob: float = 0.4,
    power_range: tuple[float, float] = (0.1, 100.0),
) -> RelayNetwork:
    """Random single-destination Gaussian network with log-uniform powers.

    Always valid: the destination is the last vertex, extra edges are added
    until every vertex is reachable from the source and every relay reaches
    the destination.  Cycles are permitted.
    """
    if vertex_count < 2:
        raise ValueError("need at least source and destination")
    n = vertex_count
    dest = n
    candidates = [(u, v) for u in range(1, n) for v in range(2, n + 1) if u != v]
    edges = {e for e in candidates if rng.random() < edge_prob}
    # Patch connectivity without ever violating degree rules.
    reach = _reachable_from(edges, SOURCE)
    for v in range(2, n + 1):
        if v not in reach:
            sources = sorted(reach - {dest}) or [SOURCE]
            u = int(sources[rng.integers(0, len(sources))])
            edges.add((u, v))
            reach = _reachable_from(edges, SOURCE)
    for v in range(2, n):
        if dest not in _reachable_from(edges, v):
            edges.add((v, dest))
    lo, hi = power_range
    powers = {e: float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) for e in sorted(edges)}
    return build_network(n, [dest], edges, GAUSSIAN, edge_power=powers)


def random_tree_network(
    rng: np.random.Generator,
    vertex_count: int,
    power_range: tuple[float, float] = (0.1, 100.0),
) -> RelayNetwork:
    """Random out-tree rooted at the source; every leaf is a destination.

    All in-degrees are exactly 1, so the coherent-sum upper bound and the
    achievable rate coincide cut by cut.
    """
    if vertex_count < 2:
        raise ValueError("need at least source and one leaf")
    n = vertex_count
    edges = set()
    for v in range(2, n + 1):
        parent = int(rng.integers(1, v))
        edges.add((parent, v))
    children = {u for (u, _) in edges}
    leaves = [v for v in range(2, n + 1) if v not in children]
    lo, hi = power_range
    powers = {e: float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) for e in sorted(edges)}
    return build_network(n, leaves, edges, GAUSSIAN, edge_power=powers)


# ---------------------------------------------------------------------------
# JSON interface

_TOP_KEYS_COMMON = {"vertices", "source", "destinations", "mode", "edges"}
_TOP_KEYS_FF = _TOP_KEYS_COMMON | {"field_size", "channels"}


def network_from_dict(doc: dict) -> RelayNetwork:
    """Parse the documented network-description schema; unknown fields are rejected."""
    if not isinstance(doc, dict):
        raise SchemaError("network description must be a JSON object")
    mode = doc.get("mode")
    if mode == GAUSSIAN:
        allowed = _TOP_KEYS_COMMON
    elif mode == FINITE_FIELD:
        allowed = _TOP_KEYS_FF
    else:
        raise SchemaError(f"field 'mode' must be 'gaussian' or 'finite-field', got {mode!r}")
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"unknown field {sorted(unknown)[0]!r} in network description")
    for key in ("vertices", "destinations", "edges"):
        if key not in doc:
            raise SchemaError(f"missing field {key!r}")
    if int(doc.get("source", SOURCE)) != SOURCE:
        raise SchemaError("field 'source' must be 1 (vertex ids are 1-based with source first)")

    edge_power: dict[tuple[int, int], float] = {}
    edge_coeff: dict[tuple[int, int], int] = {}
    edges = []
    per_edge_allowed = {"from", "to", "power"} if mode == GAUSSIAN else {"from", "to", "coeff"}
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, dict):
            raise SchemaError(f"edge #{i} must be an object")
        unknown = set(e) - per_edge_allowed
        if unknown:
            raise SchemaError(f"unknown field {sorted(unknown)[0]!r} in edge #{i}")
        if "from" not in e or "to" not in e:
            raise SchemaError(f"edge #{i} missing 'from'/'to'")
        uv = (int(e["from"]), int(e["to"]))
        edges.append(uv)
        if mode == GAUSSIAN:
            if "power" not in e:
                raise SchemaError(f"edge #{i} missing 'power'")
            edge_power[uv] = float(e["power"])
        else:
            if "coeff" not in e:
                raise SchemaError(f"edge #{i} missing 'coeff'")
            edge_coeff[uv] = int(e["coeff"])

    if mode == GAUSSIAN:
        return build_network(int(doc["vertices"]), doc["destinations"], edges, GAUSSIAN, edge_power=edge_power)

    from .ffield import channel_from_dict  # deferred: avoids import cycle

    if "field_size" not in doc:
        raise SchemaError("missing field 'field_size'")
    if "channels" not in doc:
        raise SchemaError("missing field 'channels'")
    q = int(doc["field_size"])
    channels = {}
    for key, spec in doc["channels"].items():
        channels[int(key)] = channel_from_dict(spec, q)
    return build_network(
        int(doc["vertices"]),
        doc["destinations"],
        edges,
        FINITE_FIELD,
        edge_coeff=edge_coeff,
        field_size=q,
        node_channel=channels,
    )


def load_network(path: str) -> RelayNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    return network_from_dict(doc)
