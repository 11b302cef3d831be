"""Monte Carlo simulation of the dithered nested-lattice Gaussian MAC.

Users transmit dithered coset leaders; the receiver MMSE-scales the sum,
removes the dithers, folds by the coarsest shaping lattice, and decodes the
nearest code-lattice point.  The decoding target is the modular combination
of the transmitted leaders, not the individual messages.

Trials stream through `mac_trials`, which yields full per-trial records so
property tests can inspect the internal identities; the aggregate operations
fold over the same stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import stats

from .chain import LatticeChain, mac_rate_targets
from .lattice import poltyrev_exponent
from .rngutil import DOMAIN_TRIAL, chunk_sizes, substream


@dataclass(frozen=True)
class MacTrial:
    """One channel use of the simulated MAC."""

    messages: tuple[int, ...]
    dithers: tuple[np.ndarray, ...]
    inputs: tuple[np.ndarray, ...]
    noise: np.ndarray
    received: np.ndarray
    alpha: float
    folded: np.ndarray  # receiver's processed signal
    effective_noise: np.ndarray
    target_id: tuple
    decoded_id: tuple
    target_vector: np.ndarray

    @property
    def error(self) -> bool:
        return self.target_id != self.decoded_id


def mmse_coefficient(chain: LatticeChain, noise_variance: float = 1.0) -> float:
    """Scaling that minimizes the effective-noise variance: sumP/(sumP+var).

    Uses the chain's achieved per-level powers, which are the actual
    transmit second moments.
    """
    total = sum(chain.achieved_powers)
    return total / (total + noise_variance)


def modular_sum(chain: LatticeChain, messages: list[np.ndarray], dithers: list[np.ndarray]) -> np.ndarray:
    """Deterministic decoding target: the dither-quantized combination of the
    transmitted leaders, folded by the coarsest shaping lattice.

    Returns the canonical leader vector (a level-1 codebook member).
    """
    K = chain.user_count
    if len(messages) != K or len(dithers) != K:
        raise ValueError(f"need {K} messages and dithers")
    acc = np.array(messages[0], dtype=float)
    for j in range(1, K):
        w = np.asarray(messages[j], float)
        acc = acc + w - chain.shaping[j].nearest_point(w + dithers[j])
    return chain.canonical_leader(1, chain.shaping[0].reduce(acc))


def _decode_fold(chain: LatticeChain, folded: np.ndarray) -> tuple:
    """Nearest code-lattice point of the folded signal, as a level-1 coset id."""
    point = chain.code_lattice.nearest_point(folded)
    return chain.leader_id(1, point)


def mac_trials(
    chain: LatticeChain,
    trials: int,
    seed: int,
    noise_variance: float = 1.0,
    alpha_override: float | None = None,
    chunk: int = 512,
) -> Iterator[MacTrial]:
    """Yield seeded MAC trials; the stream depends only on (chain, seed).

    Trials are generated in fixed-size chunks with per-chunk RNG substreams,
    so identical arguments give identical trials regardless of how callers
    parallelize downstream.
    """
    for ci, csize in enumerate(chunk_sizes(trials, chunk)):
        yield from _chunk_trials(chain, ci, csize, seed, noise_variance, alpha_override)


@dataclass(frozen=True)
class MacSimResult:
    trials: int
    errors: int
    error_rate: float
    stderr: float
    exponent_bound: float
    rate_bits: float
    rate_target_bits: float
    backoff_bits: float
    alpha: float
    seed: int


def simulate_mac(
    chain: LatticeChain,
    trials: int,
    seed: int,
    noise_variance: float = 1.0,
    alpha_override: float | None = None,
    threads: int = 1,
    chunk: int = 512,
) -> MacSimResult:
    """Estimate the modular-sum decoding error rate.

    Reports the empirical rate with binomial standard error alongside the
    asymptotic exponent bound exp(-n E_P(2^(2 backoff))) evaluated at the
    chain's actual coarsest-level rate.  The bound is asymptotic: at desk
    scale it is reported, not asserted.
    """
    if trials < 1000:
        raise ValueError(f"trials must be >= 1000, got {trials}")

    def run_chunk(ci_csize):
        ci, csize = ci_csize
        errs = 0
        # Reconstruct this chunk's slice of the stream: same substream layout.
        for trial in _chunk_trials(chain, ci, csize, seed, noise_variance, alpha_override):
            errs += trial.error
        return errs

    pieces = list(enumerate(chunk_sizes(trials, chunk)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = sum(pool.map(run_chunk, pieces))
    else:
        errors = sum(run_chunk(p) for p in pieces)

    p_hat = errors / trials
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / trials)
    rate = chain.rates[0]
    target = mac_rate_targets(chain.achieved_powers)[0]
    backoff = target - rate
    mu = 2.0 ** (2.0 * backoff)
    bound = math.exp(-chain.dimension * poltyrev_exponent(mu)) if mu > 0 else 1.0
    return MacSimResult(trials, errors, p_hat, se, bound, rate, target, backoff,
                        mmse_coefficient(chain, noise_variance) if alpha_override is None else alpha_override,
                        seed)


def _chunk_trials(chain, ci, csize, seed, noise_variance, alpha_override):
    """One chunk of the mac_trials stream (used for thread-parallel folding)."""
    K = chain.user_count
    n = chain.dimension
    leader_sets = [chain.coset_leaders(i) for i in range(1, K + 1)]
    level1 = leader_sets[0]
    alpha = mmse_coefficient(chain, noise_variance) if alpha_override is None else float(alpha_override)
    sigma = math.sqrt(noise_variance)
    lam1 = chain.shaping[0]
    rng = substream(seed, DOMAIN_TRIAL, ci)
    for _ in range(csize):
        msg = tuple(int(rng.integers(0, leader_sets[j].cardinality)) for j in range(K))
        dith = tuple(chain.sample_dither(j + 1, rng) for j in range(K))
        noise = rng.standard_normal(n) * sigma
        x = tuple(chain.encode(j + 1, msg[j], dith[j], validate=False) for j in range(K))
        xsum = np.sum(x, axis=0)
        y = xsum + noise
        folded = lam1.reduce(alpha * y - np.sum(dith, axis=0))
        eff = -(1.0 - alpha) * xsum + alpha * noise
        wvecs = [leader_sets[j].leaders[msg[j]] for j in range(K)]
        t_vec = modular_sum(chain, wvecs, list(dith))
        t_id = chain.leader_id(1, t_vec)
        if t_id not in level1.index_of:
            raise AssertionError("modular combination left the level-1 codebook")
        d_id = _decode_fold(chain, folded)
        yield MacTrial(msg, dith, x, noise, y, alpha, folded, eff, t_id, d_id, t_vec)


@dataclass(frozen=True)
class EffectiveNoiseReport:
    mean_per_dim: float
    stderr: float
    bound: float
    trials: int


def effective_noise_stats(
    chain: LatticeChain,
    trials: int,
    seed: int,
    noise_variance: float = 1.0,
    alpha_override: float | None = None,
) -> EffectiveNoiseReport:
    """Empirical per-dimension variance of the effective noise.

    The reported bound is sum(target powers)/(sum(target powers)+1); the
    MMSE-scaled variance sits at or below it because transmit powers never
    exceed their targets.
    """
    if trials < 10_000:
        raise ValueError(f"trials must be >= 10000, got {trials}")
    vals = np.empty(trials)
    for i, tr in enumerate(mac_trials(chain, trials, seed, noise_variance, alpha_override)):
        vals[i] = float(tr.effective_noise @ tr.effective_noise) / chain.dimension
    total = sum(chain.target_powers)
    bound = total / (total + 1.0)
    return EffectiveNoiseReport(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)), bound, trials)


@dataclass(frozen=True)
class ModularSumStatistics:
    uniformity_pvalue: float
    independence_pvalue: float
    counts: dict
    trials: int


def modular_sum_statistics(
    chain: LatticeChain,
    trials: int,
    seed: int,
    fix_first_message: int | None = None,
    energy_bins: int = 4,
) -> ModularSumStatistics:
    """Chi-square checks on the decoding target's distribution.

    (a) uniformity of the modular combination over the level-1 codebook;
    (b) an independence proxy: the per-dimension effective-noise energy,
    quartile-binned, must be homogeneous across target values.  Full joint
    independence is not testable at finite samples; this checks a scalar
    projection.  `fix_first_message` pins user 1's message (negative
    control: uniformity must then fail).
    """
    level1 = chain.coset_leaders(1)
    m = level1.cardinality
    if trials < 50 * m:
        raise ValueError(f"need >= {50 * m} trials for {m} cells, got {trials}")
    ids = []
    energies = []
    K = chain.user_count
    for ci, csize in enumerate(chunk_sizes(trials, 512)):
        rng = substream(seed, DOMAIN_TRIAL, ci)
        for _ in range(csize):
            msg = [int(rng.integers(0, chain.coset_leaders(j + 1).cardinality)) for j in range(K)]
            if fix_first_message is not None:
                msg[0] = fix_first_message
            dith = [chain.sample_dither(j + 1, rng) for j in range(K)]
            noise = rng.standard_normal(chain.dimension)
            x = [chain.encode(j + 1, msg[j], dith[j], validate=False) for j in range(K)]
            xsum = np.sum(x, axis=0)
            alpha = mmse_coefficient(chain, 1.0)
            eff = -(1.0 - alpha) * xsum + alpha * noise
            wvecs = [chain.coset_leaders(j + 1).leaders[msg[j]] for j in range(K)]
            t_id = chain.leader_id(1, modular_sum(chain, wvecs, dith))
            ids.append(level1.index_of[t_id])
            energies.append(float(eff @ eff) / chain.dimension)
    ids_arr = np.array(ids)
    counts = np.bincount(ids_arr, minlength=m)
    chi = stats.chisquare(counts)
    # Independence proxy: contingency of target value vs energy quartile.
    edges = np.quantile(energies, np.linspace(0, 1, energy_bins + 1)[1:-1])
    bins = np.digitize(energies, edges)
    table = np.zeros((m, energy_bins))
    for t, b in zip(ids_arr, bins):
        table[t, b] += 1
    keep = table.sum(axis=1) > 0
    chi2 = stats.chi2_contingency(table[keep]) if keep.sum() > 1 else None
    return ModularSumStatistics(
        float(chi.pvalue),
        float(chi2.pvalue) if chi2 is not None else float("nan"),
        {int(i): int(c) for i, c in enumerate(counts)},
        trials,
    )
