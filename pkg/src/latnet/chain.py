"""Nested lattice chains for multiple-access coding.

Construction: the finest shaping lattice is a scaled copy of a base lattice
matched to the smallest power; coarser shaping lattices are integer multiples
of it (nesting for free, transmit power never above target); the code lattice
refines the finest shaping lattice through a mod-p linear code (Construction
A).  Achievable powers and rates are therefore quantized; the builder reports
the slack instead of pretending the asymptotic targets are met exactly.

Coset bookkeeping is exact: every code-lattice point is identified by the
integer residue of its basis coefficients modulo each shaping lattice, so
message comparison never depends on floating-point geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._cvp import residue_mod_hnf, row_hnf
from .errors import GuardError, InfeasibleToleranceError
from .lattice import Lattice
from .rngutil import DOMAIN_CODE, substream

COSET_ENUMERATION_MAX = 1 << 20

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def mac_rate_targets(powers) -> list[float]:
    """Per-user target rates [log2(P_i / sum P + P_i) / 2]^+ in bits."""
    P = [float(p) for p in powers]
    if any(p < 0 for p in P):
        raise ValueError("powers must be nonnegative")
    if any(P[i] < P[i + 1] for i in range(len(P) - 1)):
        raise ValueError("powers must be sorted in descending order")
    total = sum(P)
    if total == 0:
        raise ValueError("all powers are zero")
    return [max(0.0, 0.5 * math.log2(p / total + p)) if p > 0 else 0.0 for p in P]


def _digit_rows(count: int, radix: int, width: int) -> np.ndarray:
    """Rows 0..count-1 written as little-endian base-`radix` digit vectors."""
    out = np.zeros((count, width), dtype=np.int64)
    tmp = np.arange(count, dtype=np.int64)
    for j in range(width):
        out[:, j] = tmp % radix
        tmp //= radix
    return out


def _rref_mod_p(mat: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_p; returns (rref, pivot columns)."""
    M = np.array(mat, dtype=np.int64) % p
    rows, cols = M.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        pivot_row = None
        for i in range(r, rows):
            if M[i, c] % p:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        M[[r, pivot_row]] = M[[pivot_row, r]]
        inv = pow(int(M[r, c]), p - 2, p)
        M[r] = (M[r] * inv) % p
        for i in range(rows):
            if i != r and M[i, c] % p:
                M[i] = (M[i] - M[i, c] * M[r]) % p
        pivots.append(c)
        r += 1
    return M[:r], pivots


@dataclass(frozen=True)
class CosetLeaderSet:
    """Explicit codebook for one chain level.

    `leaders` rows are the canonical Voronoi representatives of the code
    lattice modulo the level's shaping lattice, in enumeration order (which
    is also the message order).  `ids` are the exact integer coset labels;
    `index_of` inverts them.
    """

    level: int
    leaders: np.ndarray
    ids: tuple[tuple[int, ...], ...]
    index_of: dict

    @property
    def cardinality(self) -> int:
        return len(self.ids)


class LatticeChain:
    """A nested family of shaping lattices under one code lattice."""

    def __init__(
        self,
        base: Lattice,
        target_powers,
        prime: int,
        code_dimension: int,
        tolerance: float,
        seed: int,
        base_scale: float,
        multipliers,
        code_generator: np.ndarray,
        base_second_moment: float,
        base_second_moment_stderr: float,
    ):
        self.base = base
        self.target_powers = tuple(float(p) for p in target_powers)
        self.user_count = len(self.target_powers)
        self.prime = int(prime)
        self.code_dimension = int(code_dimension)
        self.tolerance = float(tolerance)
        self.seed = int(seed)
        self.base_scale = float(base_scale)
        self.multipliers = tuple(int(m) for m in multipliers)
        self.code_generator = np.array(code_generator, dtype=np.int64)
        self.base_second_moment = float(base_second_moment)
        self.base_second_moment_stderr = float(base_second_moment_stderr)

        n = base.dimension
        self.dimension = n
        self.shaping = [base.scaled(m * base_scale) for m in self.multipliers]
        self.code_lattice = Lattice((base_scale / prime) * self._construction_a_rows() @ base.generator)
        self.achieved_powers = tuple(
            (m * base_scale) ** 2 * base_second_moment for m in self.multipliers
        )
        log2p = math.log2(prime)
        self.rates = tuple(
            math.log2(m) + (self.code_dimension / n) * log2p for m in self.multipliers
        )
        self.partitioning_ratios = tuple(2.0**r for r in self.rates)
        self._leader_cache: dict[int, CosetLeaderSet] = {}
        self._residue_hnf: dict[int, np.ndarray] = {}
        self._check_consistency()

    # -- construction helpers ------------------------------------------------

    def _construction_a_rows(self) -> np.ndarray:
        """Integer basis of {x in Z^n : x mod p in code}, rows."""
        n = self.dimension
        p = self.prime
        if self.code_dimension == 0:
            return p * np.eye(n, dtype=np.int64)
        rref, pivots = _rref_mod_p(self.code_generator, p)
        if len(pivots) != self.code_dimension:
            raise ValueError("code generator does not have full row rank")
        rows = [rref[i] for i in range(len(pivots))]
        nonpivot = [j for j in range(n) if j not in pivots]
        for j in nonpivot:
            e = np.zeros(n, dtype=np.int64)
            e[j] = p
            rows.append(e)
        return np.array(rows, dtype=np.int64)

    def _check_consistency(self):
        n = self.dimension
        # Rates from volumes must agree with the closed form.
        for i, lam in enumerate(self.shaping):
            r_vol = math.log2(lam.volume / self.code_lattice.volume) / n
            if abs(r_vol - self.rates[i]) > 1e-9:
                raise AssertionError("volume-derived rate disagrees with closed form")
        # Nesting: every basis vector of each shaping lattice belongs to the
        # next finer shaping lattice and to the code lattice.
        for i, lam in enumerate(self.shaping):
            for row in lam.generator:
                if i + 1 < self.user_count and not self.shaping[i + 1].contains(row):
                    raise AssertionError(f"nesting violated between levels {i + 1} and {i + 2}")
                if not self.code_lattice.contains(row):
                    raise AssertionError(f"level {i + 1} is not a sublattice of the code lattice")

    # -- coset bookkeeping ----------------------------------------------------

    def _level_hnf(self, level: int) -> np.ndarray:
        if level not in self._residue_hnf:
            M = self.shaping[level - 1].generator @ self.code_lattice._inv
            Mi = np.round(M).astype(np.int64)
            if np.abs(M - Mi).max() > 1e-9:
                raise AssertionError("shaping lattice is not integral over the code lattice")
            self._residue_hnf[level] = row_hnf(Mi)
        return self._residue_hnf[level]

    def leader_id(self, level: int, point) -> tuple[int, ...]:
        """Exact coset label of a code-lattice point modulo shaping level."""
        c = np.asarray(point, float) @ self.code_lattice._inv
        ci = np.round(c).astype(np.int64)
        if np.abs(c - ci).max() > 1e-6:
            raise ValueError("point is not a code-lattice member")
        return residue_mod_hnf(ci, self._level_hnf(level))

    def canonical_leader(self, level: int, point) -> np.ndarray:
        """Voronoi representative of a code-lattice point's coset."""
        return self.shaping[level - 1].reduce(np.asarray(point, float))

    def coset_leaders(self, level: int) -> CosetLeaderSet:
        """Enumerate the codebook of `level` (1-based, 1 = coarsest).

        Representatives are lifted codewords plus p-multiples of the shaping
        multiplier grid, folded into the level's Voronoi region.  Verified
        pairwise distinct and complete against the volume ratio.
        """
        if not (1 <= level <= self.user_count):
            raise ValueError(f"level {level} out of range 1..{self.user_count}")
        if level in self._leader_cache:
            return self._leader_cache[level]
        n = self.dimension
        p = self.prime
        m = self.multipliers[level - 1]
        count = (m**n) * (p**self.code_dimension)
        if count > COSET_ENUMERATION_MAX:
            raise GuardError(f"coset enumeration guard: {count} leaders exceed {COSET_ENUMERATION_MAX}")
        expected = self.shaping[level - 1].volume / self.code_lattice.volume
        if abs(expected - count) > 1e-6 * count:
            raise AssertionError("leader count disagrees with volume ratio")

        # All messages of the mod-p code, then all multiplier-grid shifts.
        # Message index -> little-endian base-p digits; leader index is
        # codeword-major: index = c_idx * m^n + t_idx.
        codewords = (_digit_rows(p** self.code_dimension, p, self.code_dimension) @ self.code_generator) % p
        shifts = _digit_rows(m**n, m, n)
        reps = (codewords[:, None, :] + p * shifts[None, :, :]).reshape(-1, n)
        points = (self.base_scale / p) * (reps @ self.base.generator)
        leaders = self.shaping[level - 1].fold_many(points)
        ids = tuple(self.leader_id(level, x) for x in points)
        index_of = {}
        for idx, key in enumerate(ids):
            if key in index_of:
                raise AssertionError("duplicate coset leader")
            index_of[key] = idx
        out = CosetLeaderSet(level, leaders, ids, index_of)
        self._leader_cache[level] = out
        return out

    # -- encoding -------------------------------------------------------------

    def voronoi_contains(self, level: int, x, tol: float = 1e-9) -> bool:
        lam = self.shaping[level - 1]
        near = lam.nearest_point(x)
        return bool(np.abs(near).max() <= tol * max(1.0, float(np.abs(x).max())))

    def encode(self, level: int, message_index: int, dither, validate: bool = True) -> np.ndarray:
        """Dithered transmit vector: (leader + dither) mod shaping lattice."""
        leaders = self.coset_leaders(level)
        if not (0 <= message_index < leaders.cardinality):
            raise ValueError(
                f"message index {message_index} out of range 0..{leaders.cardinality - 1}"
            )
        dither = np.asarray(dither, float)
        if validate and not self.voronoi_contains(level, dither):
            raise ValueError("dither lies outside the shaping Voronoi region")
        return self.shaping[level - 1].reduce(leaders.leaders[message_index] + dither)

    def sample_dither(self, level: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform sample over the level's shaping Voronoi region."""
        lam = self.shaping[level - 1]
        return lam.fold_many(rng.random((1, self.dimension)) @ lam.generator)[0]

    # -- reporting -------------------------------------------------------------

    def summary_rows(self) -> list[dict]:
        rows = []
        for i in range(self.user_count):
            rows.append(
                {
                    "level": i + 1,
                    "target_power": self.target_powers[i],
                    "achieved_power": self.achieved_powers[i],
                    "power_slack": self.target_powers[i] - self.achieved_powers[i],
                    "multiplier": self.multipliers[i],
                    "rate_bits": self.rates[i],
                    "partitioning_ratio": self.partitioning_ratios[i],
                }
            )
        return rows


def random_code_generator(n: int, k: int, p: int, seed: int) -> np.ndarray:
    """Uniform full-row-rank k x n generator over F_p (fixed retry budget)."""
    rng = substream(seed, DOMAIN_CODE)
    for _ in range(200):
        G = rng.integers(0, p, size=(k, n))
        if k == 0 or len(_rref_mod_p(G, p)[1]) == k:
            return G.astype(np.int64)
    raise RuntimeError("failed to draw a full-rank code generator")


def build_chain(
    base: Lattice,
    powers,
    prime: int,
    code_dimension: int,
    tolerance: float = 0.5,
    seed: int = 0,
    code_generator: np.ndarray | None = None,
) -> LatticeChain:
    """Construct a nested chain realizing `powers` on a scaled-base grid.

    The finest shaping lattice is scaled so its per-dimension second moment
    equals the smallest power (exactly, when the base has a closed-form
    second moment); coarser levels use the largest integer multiple whose
    power stays at or below target.  If the integer grid cannot reach
    [P_i - tolerance, P_i] the construction is rejected and the nearest
    achievable power is reported.
    """
    P = [float(x) for x in powers]
    if not P:
        raise ValueError("powers must be nonempty")
    if any(p <= 0 for p in P):
        raise ValueError("powers must be positive")
    if any(P[i] < P[i + 1] for i in range(len(P) - 1)):
        raise ValueError("powers must be sorted in descending order")
    if not is_prime(int(prime)):
        raise ValueError(f"prime must be prime, got {prime}")
    n = base.dimension
    if not (0 <= code_dimension <= n):
        raise ValueError(f"code dimension {code_dimension} out of range 0..{n}")
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")

    sm = base.second_moment_exact()
    sm_err = 0.0
    if sm is None:
        from .lattice import second_moment as mc_second_moment

        sm, sm_err = mc_second_moment(base, 400_000, seed)
    p_fine = P[-1]
    base_scale = math.sqrt(p_fine / sm)
    fine_power = base_scale**2 * sm  # == p_fine up to float rounding

    multipliers = []
    for i, target in enumerate(P):
        m = int(math.floor(math.sqrt(target / fine_power)))
        m = max(m, 1)
        while (m + 1) ** 2 * fine_power <= target:  # guard against floor slipping low
            m += 1
        achieved = m**2 * fine_power
        if achieved > target * (1 + 1e-12):
            raise InfeasibleToleranceError(
                f"level {i + 1}: achieved power {achieved} exceeds target {target}",
                nearest_achievable=achieved,
            )
        if achieved < target - tolerance - 1e-12:
            raise InfeasibleToleranceError(
                f"level {i + 1}: integer scaling reaches {achieved:.6g}, "
                f"below the window [{target - tolerance:.6g}, {target:.6g}]",
                nearest_achievable=achieved,
            )
        multipliers.append(m)

    if code_generator is None:
        code_generator = random_code_generator(n, code_dimension, int(prime), seed)
    else:
        code_generator = np.asarray(code_generator, dtype=np.int64) % int(prime)
        if code_generator.shape != (code_dimension, n):
            raise ValueError("code generator has the wrong shape")
        if code_dimension and len(_rref_mod_p(code_generator, int(prime))[1]) != code_dimension:
            raise ValueError("code generator is not full rank")

    return LatticeChain(
        base=base,
        target_powers=P,
        prime=int(prime),
        code_dimension=int(code_dimension),
        tolerance=float(tolerance),
        seed=int(seed),
        base_scale=base_scale,
        multipliers=multipliers,
        code_generator=code_generator,
        base_second_moment=sm,
        base_second_moment_stderr=sm_err,
    )


def rate_grid(n: int, max_multiplier: int = 1, primes=_SMALL_PRIMES) -> list[tuple[float, int, int, int]]:
    """Achievable (rate, p, k, m) grid points for an n-dimensional chain level."""
    out = []
    for p in primes:
        for k in range(0, n + 1):
            for m in range(1, max_multiplier + 1):
                out.append((math.log2(m) + (k / n) * math.log2(p), p, k, m))
    return sorted(out)


def choose_code_below(target_rate: float, n: int, primes=_SMALL_PRIMES) -> tuple[int, int, float]:
    """Largest grid rate (k/n) log2 p not exceeding `target_rate`.

    Resolves finite-dimension rate matching: the asymptotic construction
    allows any rate, the finite one only grid points, so we take the closest
    point below the target.
    """
    best = (2, 0, 0.0)
    for p in primes:
        for k in range(0, n + 1):
            r = (k / n) * math.log2(p)
            if r <= target_rate + 1e-12 and r > best[2]:
                best = (p, k, r)
    return best


def chain_from_spec(spec: dict) -> LatticeChain:
    """Build a chain from the documented config schema."""
    from .errors import SchemaError
    from .lattice import lattice_from_spec

    allowed = {"base", "dimension", "generator", "powers", "prime", "code_dimension", "tolerance", "seed"}
    unknown = set(spec) - allowed
    if unknown:
        raise SchemaError(f"unknown field {sorted(unknown)[0]!r} in chain config")
    for key in ("powers", "prime", "code_dimension"):
        if key not in spec:
            raise SchemaError(f"missing field {key!r} in chain config")
    if "generator" in spec:
        base = lattice_from_spec({"generator": spec["generator"]})
    else:
        base = lattice_from_spec({"preset": spec.get("base", "Zn"), "dimension": spec.get("dimension", 1)})
    return build_chain(
        base,
        spec["powers"],
        int(spec["prime"]),
        int(spec["code_dimension"]),
        tolerance=float(spec.get("tolerance", 0.5)),
        seed=int(spec.get("seed", 0)),
    )
