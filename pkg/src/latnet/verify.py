"""Runnable property suites behind the `verify` CLI subcommand.

Each suite returns a list of (name, passed, detail) checks.  The suites
mirror the repository's acceptance tests at configurable sizes so a user can
re-verify the model invariants on demand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bounds import (
    coherent_minus_single_rate,
    cut_pair_rate,
    expanded_min_cut_rate,
    expanded_min_cut_sandwich,
    gaussian_achievable,
    gaussian_gap_bound,
    gaussian_upper_bound,
    min_difference_bound,
    submodular_chain_check,
)
from .chain import build_chain, mac_rate_targets
from .ffield import SymmetricDmc, random_linear_code, simulate_code
from .lattice import hexagonal_lattice, integer_lattice, poltyrev_exponent, second_moment
from .macsim import effective_noise_stats, mac_trials, modular_sum_statistics, simulate_mac
from .netsim import collision_probabilities
from .network import build_network, enumerate_cuts, random_gaussian_network, random_tree_network, time_expand
from .rngutil import substream


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _check(name, passed, detail=""):
    return Check(name, bool(passed), detail)


def suite_gap(seed: int = 7, count: int = 100) -> list[Check]:
    """Upper/achievable/gap sandwich on random single-destination networks."""
    rng = substream(seed, 100)
    worst_low, worst_high = math.inf, -math.inf
    ok = True
    for i in range(count):
        n = int(rng.integers(2, 9))
        net = random_gaussian_network(rng, n)
        ub = gaussian_upper_bound(net)
        ach = gaussian_achievable(net)
        gap = gaussian_gap_bound(net)
        worst_low = min(worst_low, ub - ach)
        worst_high = max(worst_high, ub - ach - gap)
        ok = ok and (ub - ach >= -1e-9) and (ub - ach <= gap + 1e-9)
    checks = [_check("gap.sandwich", ok, f"{count} networks, min(ub-ach)={worst_low:.3g}, max(ub-ach-gap)={worst_high:.3g}")]
    rng2 = substream(seed, 101)
    ok2 = True
    worst = 0.0
    for i in range(20):
        net = random_tree_network(rng2, int(rng2.integers(2, 9)))
        diff = abs(gaussian_upper_bound(net) - gaussian_achievable(net))
        worst = max(worst, diff)
        ok2 = ok2 and diff <= 1e-12
    checks.append(_check("gap.single-indegree-equality", ok2, f"20 trees, max |ub-ach| = {worst:.3g}"))
    return checks


def suite_lemma67(seed: int = 7, count: int = 10_000) -> list[Check]:
    """Numeric inequalities behind the constant-gap argument."""
    rng = substream(seed, 102)
    viol1 = 0
    for _ in range(count):
        K = int(rng.integers(1, 7))
        powers = np.sort(rng.uniform(0.0, 100.0, size=K))[::-1]
        size = int(rng.integers(1, K + 1))
        subset = sorted(rng.choice(K, size=size, replace=False))
        margin = math.log2(K) - coherent_minus_single_rate(powers, subset)
        if margin < -1e-9:
            viol1 += 1
    rng = substream(seed, 103)
    viol2 = 0
    for _ in range(count):
        k = int(rng.integers(1, 8))
        a = rng.normal(size=k)
        b = rng.normal(size=k)
        lhs, rhs = min_difference_bound(a, b)
        if lhs > rhs + 1e-12:
            viol2 += 1
    return [
        _check("lemma67.coherent-gap", viol1 == 0, f"{count} power vectors, {viol1} violations"),
        _check("lemma67.min-max", viol2 == 0, f"{count} vectors, {viol2} violations"),
    ]


def _random_small_net(rng) -> "RelayNetwork":
    return random_gaussian_network(rng, 4, edge_prob=float(rng.uniform(0.25, 0.7)))


def _random_rates(rng, net):
    return {e: float(rng.uniform(0.0, 3.0)) for e in net.sorted_edges()}


def _brute_expanded_min(net, rates, block_count):
    te_depth = block_count + net.vertex_count - 2
    best = math.inf
    for d in sorted(net.destinations):
        free = [v for v in net.vertices if v not in (net.source, d)]
        cuts = []
        for mask in range(1 << len(free)):
            members = {net.source} | {v for i, v in enumerate(free) if mask >> i & 1}
            cuts.append(frozenset(members))
        for seq in itertools.product(cuts, repeat=te_depth + 1):
            total = sum(cut_pair_rate(net, seq[i], seq[i + 1], rates) for i in range(te_depth))
            best = min(best, total)
    return best


def suite_submodular(seed: int = 7, networks: int = 50, triples: int = 1000) -> list[Check]:
    """Cut-pair rearrangement inequality plus the layer-DP cross-checks."""
    rng = substream(seed, 104)
    viol = 0
    pairs = 0
    for _ in range(networks):
        net = _random_small_net(rng)
        rates = _random_rates(rng, net)
        cuts = [c.members for c in enumerate_cuts(net)]
        for a, b in itertools.product(cuts, repeat=2):
            if a == b:
                continue
            pairs += 1
            _, _, holds = submodular_chain_check(net, [a, b], rates)
            viol += not holds
    checks = [_check("submodular.pairs", viol == 0, f"{pairs} ordered pairs, {viol} violations")]

    rng = substream(seed, 105)
    viol3 = 0
    for _ in range(triples):
        net = _random_small_net(rng)
        rates = _random_rates(rng, net)
        cuts = [c.members for c in enumerate_cuts(net)]
        idx = rng.integers(0, len(cuts), size=3)
        seq = [cuts[i] for i in idx]
        if len({tuple(sorted(s)) for s in seq}) < 2:
            continue
        _, _, holds = submodular_chain_check(net, seq, rates)
        viol3 += not holds
    checks.append(_check("submodular.triples", viol3 == 0, f"{triples} random length-3 sequences, {viol3} violations"))

    rng = substream(seed, 106)
    dp_ok = True
    sandwich_ok = True
    for _ in range(20):
        net = _random_small_net(rng)
        rates = _random_rates(rng, net)
        B = int(rng.integers(1, 3))
        te = time_expand(net, B)
        dp = expanded_min_cut_rate(te, rates)
        if te.depth <= 4:
            brute = _brute_expanded_min(net, rates, B)
            dp_ok = dp_ok and abs(dp - brute) <= 1e-9
        lo, hi = expanded_min_cut_sandwich(net, rates, B)
        sandwich_ok = sandwich_ok and (lo - 1e-9 <= dp <= hi + 1e-9)
    checks.append(_check("submodular.dp-vs-brute", dp_ok, "layer DP equals sequence enumeration"))
    checks.append(_check("submodular.dp-sandwich", sandwich_ok, "steady-cut bracket holds"))
    return checks


def suite_lattice(seed: int = 7) -> list[Check]:
    checks = []
    for n in (1, 2, 4, 8):
        sm, se = second_moment(integer_lattice(n), 100_000, seed=seed + n)
        checks.append(
            _check(
                f"lattice.Z{n}-second-moment",
                abs(sm - 1.0 / 12.0) <= 3 * se,
                f"estimate {sm:.6f} +/- {se:.1e}, target 1/12",
            )
        )
    a2 = hexagonal_lattice()
    sm, se = second_moment(a2, 400_000, seed=seed)
    nsm = sm / a2.volume
    checks.append(
        _check(
            "lattice.A2-nsm",
            abs(nsm - 5.0 / (36.0 * math.sqrt(3.0))) <= 3 * se / a2.volume,
            f"estimate {nsm:.6f}, target {5.0 / (36.0 * math.sqrt(3.0)):.6f}",
        )
    )
    rng = substream(seed, 107)
    coarse = integer_lattice(2).scaled(6.0)
    fine = integer_lattice(2).scaled(2.0)
    worst = 0.0
    for _ in range(2000):
        x = rng.uniform(-30, 30, size=2)
        lhs = fine.reduce(coarse.reduce(x))
        rhs = fine.reduce(x)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    checks.append(_check("lattice.nesting-identity", worst <= 1e-9, f"max deviation {worst:.2e}"))
    eps = [poltyrev_exponent(m) for m in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 8.0)]
    mono = all(b >= a for a, b in zip(eps, eps[1:]))
    cont = abs(poltyrev_exponent(2 - 1e-9) - poltyrev_exponent(2 + 1e-9)) < 1e-6 and abs(
        poltyrev_exponent(4 - 1e-9) - poltyrev_exponent(4 + 1e-9)
    ) < 1e-6
    checks.append(_check("lattice.exponent", mono and cont and eps[0] == 0.0 and eps[1] == 0.0, "piecewise form"))
    return checks


def suite_chain(seed: int = 7) -> list[Check]:
    checks = []
    ch = build_chain(integer_lattice(1), [48.0, 12.0], 3, 1, tolerance=0.1, seed=seed)
    checks.append(
        _check(
            "chain.integer-ratio-ladder",
            abs((ch.rates[0] - ch.rates[1]) - 1.0) <= 1e-12,
            f"R1-R2 = {ch.rates[0] - ch.rates[1]}",
        )
    )
    ok_power = all(0.0 < a <= t + 1e-12 for a, t in zip(ch.achieved_powers, ch.target_powers))
    checks.append(_check("chain.power-floor", ok_power, str(ch.achieved_powers)))
    rep = modular_sum_statistics(ch, 2000, seed=seed + 1)
    checks.append(_check("chain.sum-uniformity", rep.uniformity_pvalue > 1e-3, f"p = {rep.uniformity_pvalue:.4f}"))
    bad = modular_sum_statistics(ch, 2000, seed=seed + 2, fix_first_message=0)
    checks.append(_check("chain.negative-control", bad.uniformity_pvalue < 1e-3, f"p = {bad.uniformity_pvalue:.2e}"))
    return checks


def suite_mac(seed: int = 7, trials: int = 2000) -> list[Check]:
    checks = []
    ch = build_chain(integer_lattice(1), [48.0, 12.0], 3, 1, tolerance=0.1, seed=seed)
    res0 = simulate_mac(ch, 200, seed=seed, noise_variance=0.0)
    checks.append(_check("mac.zero-noise", res0.errors == 0, f"{res0.errors} errors"))
    eff = effective_noise_stats(ch, trials, seed=seed + 1)
    checks.append(
        _check(
            "mac.effective-noise",
            eff.mean_per_dim <= eff.bound + 3 * eff.stderr,
            f"{eff.mean_per_dim:.4f} <= {eff.bound:.4f} + 3se",
        )
    )
    worst = 0.0
    for tr in mac_trials(ch, 200, seed=seed + 2):
        recon = ch.shaping[0].reduce(tr.target_vector + tr.effective_noise)
        worst = max(worst, float(np.abs(recon - tr.folded).max()))
    checks.append(_check("mac.receiver-identity", worst <= 1e-9, f"max deviation {worst:.2e}"))
    return checks


def suite_lemma4(seed: int = 7, trials: int = 4000) -> list[Check]:
    ch = build_chain(integer_lattice(1), [48.0, 12.0], 3, 1, tolerance=0.1, seed=seed)
    checks = []
    for pattern in [(), (1,), (2,), (1, 2)]:
        rep = collision_probabilities(ch, pattern, trials, seed=seed + 10)
        if pattern:
            ok = rep.probability <= rep.bound + 3 * rep.stderr
        else:
            ok = rep.probability == 1.0
        checks.append(
            _check(
                f"lemma4.pattern-{''.join(map(str, pattern)) or 'empty'}",
                ok,
                f"p={rep.probability:.4f} bound={rep.bound:.4f}",
            )
        )
    return checks


def suite_ff(seed: int = 7) -> list[Check]:
    checks = []
    bsc = SymmetricDmc.q_ary_symmetric(2, 0.11)
    hb = -(0.11 * math.log2(0.11) + 0.89 * math.log2(0.89))
    checks.append(_check("ff.bsc-capacity", abs(bsc.capacity_bits() - (1 - hb)) < 1e-12, f"{bsc.capacity_bits():.6f}"))
    try:
        SymmetricDmc(2, [[0.9, 0.1], [0.5, 0.5]])
        checks.append(_check("ff.asymmetric-rejected", False, "should have raised"))
    except ValueError:
        checks.append(_check("ff.asymmetric-rejected", True, "non-symmetric matrix rejected"))
    code = random_linear_code(24, 12, 2, seed=seed)
    rep = simulate_code(code, SymmetricDmc.q_ary_symmetric(2, 0.02), trials=500, seed=seed + 1)
    checks.append(_check("ff.below-capacity", rep.error_rate < 0.1, f"error {rep.error_rate:.3f} at rate {rep.rate_bits}"))
    code2 = random_linear_code(24, 16, 2, seed=seed + 2)
    rep2 = simulate_code(code2, SymmetricDmc.q_ary_symmetric(2, 0.11), trials=200, seed=seed + 3)
    checks.append(_check("ff.above-capacity", rep2.error_rate > 0.5, f"error {rep2.error_rate:.3f} at rate {rep2.rate_bits:.3f}"))
    return checks


SUITES = {
    "gap": suite_gap,
    "lemma67": suite_lemma67,
    "submodular": suite_submodular,
    "lattice": suite_lattice,
    "chain": suite_chain,
    "mac": suite_mac,
    "lemma4": suite_lemma4,
    "ff": suite_ff,
}


def run_suites(names, seed: int = 7, count: int | None = None) -> list[Check]:
    out = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        fn = SUITES[name]
        if name == "gap" and count is not None:
            out.extend(fn(seed=seed, count=count))
        else:
            out.extend(fn(seed=seed))
    return out
