"""Finite-dimensional lattice geometry.

A lattice is given by a full-rank square generator matrix whose rows are the
basis vectors.  Exact nearest-point search (dimension guard 12) backs the
quantizer and modulo operations; Monte Carlo folding backs second-moment and
normalized-second-moment estimation.  Ties in the quantizer are broken by the
lexicographically smallest coefficient vector so every operation is
deterministic and shift-consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._cvp import enumerate_minimum, enumerate_within, lll_reduce, positive_qr
from .errors import GuardError
from .rngutil import substream

MAX_EXACT_DIMENSION = 12

_A2_NSM = 5.0 / (36.0 * math.sqrt(3.0))  # normalized second moment of the hexagonal lattice


class Lattice:
    """Full-rank lattice with exact decoding support.

    Immutable after construction.  `generator` rows are the basis; points are
    coefficient-row @ generator.
    """

    def __init__(self, generator, exact_nsm: float | None = None):
        G = np.array(generator, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"generator must be square, got shape {G.shape}")
        det = np.linalg.det(G)
        if abs(det) < 1e-12 * max(1.0, float(np.abs(G).max()) ** G.shape[0]):
            raise ValueError("generator is singular")
        G.setflags(write=False)
        self._gen = G
        self._n = G.shape[0]
        self._volume = abs(float(det))
        self._inv = np.linalg.inv(G)
        self._gram = G @ G.T
        diag = np.diag(G).copy()
        self._diag = diag if np.allclose(G, np.diag(diag), atol=0.0) else None
        self._exact_nsm = exact_nsm
        self._decoder = None  # lazy (reduced basis, unimodular map, QR factors)
        self._fold_cache = None
        self._fold_ready = False

    # -- basic attributes ---------------------------------------------------

    @property
    def dimension(self) -> int:
        return self._n

    @property
    def generator(self) -> np.ndarray:
        return self._gen

    @property
    def volume(self) -> float:
        return self._volume

    @property
    def gram(self) -> np.ndarray:
        return self._gram

    def scaled(self, factor: float) -> "Lattice":
        """The lattice factor * self (every point scaled)."""
        return Lattice(factor * self._gen, exact_nsm=self._exact_nsm)

    def __repr__(self):
        return f"Lattice(n={self._n}, volume={self._volume:.6g})"

    # -- membership ---------------------------------------------------------

    def coefficients(self, x) -> np.ndarray:
        """Real coefficient vector c with x = c @ generator."""
        return np.asarray(x, float) @ self._inv

    def contains(self, x, tol: float = 1e-9) -> bool:
        """Membership test: solves the linear system, checks integrality."""
        c = self.coefficients(x)
        return bool(np.all(np.abs(c - np.round(c)) <= tol))

    # -- decoding -----------------------------------------------------------

    def _get_decoder(self):
        if self._decoder is None:
            if self._n > MAX_EXACT_DIMENSION:
                raise GuardError(
                    f"exact search guard: dimension {self._n} exceeds {MAX_EXACT_DIMENSION}"
                )
            reduced, U = lll_reduce(self._gen)
            R, Q = positive_qr(reduced)
            self._decoder = (np.ascontiguousarray(R), Q, U)
        return self._decoder

    def nearest_coefficients(self, x) -> np.ndarray:
        """Integer coefficients (own basis) of the nearest lattice point.

        Exact bounded enumeration seeded by Babai rounding; ties broken by
        the lexicographically smallest coefficient vector.
        """
        x = np.asarray(x, float)
        if x.shape != (self._n,):
            raise ValueError(f"dimension mismatch: point has shape {x.shape}, lattice is {self._n}-dim")
        if self._n > MAX_EXACT_DIMENSION:
            raise GuardError(f"exact search guard: dimension {self._n} exceeds {MAX_EXACT_DIMENSION}")
        if self._diag is not None:
            t = x / self._diag
            return np.ceil(t - 0.5).astype(np.int64)
        R, Q, U = self._get_decoder()
        z = Q.T @ x
        w, dmin = enumerate_minimum(R, z)
        margin = 1e-12 * (1.0 + dmin)
        cands = enumerate_within(R, z, dmin + margin)
        coeffs = cands @ U
        best = min(map(tuple, coeffs))
        return np.array(best, dtype=np.int64)

    def nearest_point(self, x) -> np.ndarray:
        return self.nearest_coefficients(x) @ self._gen

    def reduce(self, x) -> np.ndarray:
        """x mod lattice: subtract the nearest lattice point.

        The result lies in the fundamental Voronoi region (its own nearest
        point is the origin), and the operation depends only on the coset
        of x.
        """
        x = np.asarray(x, float)
        return x - self.nearest_point(x)

    def fold_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorized `reduce` over rows of X (used for Monte Carlo)."""
        X = np.asarray(X, float)
        if self._diag is not None:
            T = X / self._diag
            return X - np.ceil(T - 0.5) * self._diag
        cands = self._fold_candidates()
        if cands is not None:
            inv = self._inv
            G = self._gen
            out = np.empty_like(X)
            chunk = max(1, int(4e6) // max(1, len(cands)))
            for lo in range(0, len(X), chunk):
                block = X[lo : lo + chunk]
                resid = block - np.round(block @ inv) @ G
                d2 = ((resid[:, None, :] - cands[None, :, :]) ** 2).sum(axis=2)
                out[lo : lo + chunk] = resid - cands[np.argmin(d2, axis=1)]
            return out
        return np.array([self.reduce(x) for x in X])

    def _fold_candidates(self, max_count: int = 20000):
        """Lattice points that can be nearest to any Babai-rounded residual."""
        if self._fold_ready:
            return self._fold_cache
        self._fold_ready = True
        try:
            R, Q, U = self._get_decoder()
        except GuardError:
            return None
        # A Babai-rounded residual has norm <= half the sum of basis norms, so
        # its nearest point has norm at most twice that.
        reduced = U @ self._gen
        rad = float(np.linalg.norm(reduced, axis=1).sum())
        try:
            W = enumerate_within(R, np.zeros(self._n), rad * rad * (1 + 1e-9), cap=max_count)
        except RuntimeError:
            return None
        self._fold_cache = (W @ U) @ self._gen
        return self._fold_cache

    def sample_voronoi(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform samples over the Voronoi region.

        Draw uniformly in the fundamental parallelepiped, then fold; folding
        is volume preserving between the two fundamental domains.
        """
        U = rng.random((count, self._n))
        return self.fold_many(U @ self._gen)

    # -- moments ------------------------------------------------------------

    def second_moment_exact(self) -> float | None:
        """Closed-form per-dimension second moment, when one is known.

        Diagonal generators: the Voronoi region is a box, sigma^2 =
        mean(a_i^2)/12.  Presets constructed with a known normalized second
        moment also report exactly.  Returns None otherwise.
        """
        if self._diag is not None:
            return float(np.mean(self._diag**2) / 12.0)
        if self._exact_nsm is not None:
            return self._exact_nsm * self._volume ** (2.0 / self._n)
        return None


def second_moment(lat: Lattice, sample_count: int, seed: int) -> tuple[float, float]:
    """Monte Carlo per-dimension second moment and its standard error."""
    if sample_count < 10_000:
        raise ValueError(f"sample_count must be >= 10000, got {sample_count}")
    rng = substream(seed, 0)
    chunk = 200_000
    vals = []
    left = sample_count
    while left > 0:
        take = min(chunk, left)
        pts = lat.sample_voronoi(rng, take)
        vals.append((pts**2).sum(axis=1) / lat.dimension)
        left -= take
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


@dataclass(frozen=True)
class LatticeGeometry:
    """Sampled geometric summary of a lattice."""

    second_moment: float
    second_moment_stderr: float
    effective_radius: float
    covering_radius_lower: float
    covering_radius_upper: float
    normalized_second_moment: float
    sample_count: int


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def effective_radius(lat: Lattice) -> float:
    """Radius of the ball with the same volume as the Voronoi region."""
    return (lat.volume / unit_ball_volume(lat.dimension)) ** (1.0 / lat.dimension)


def covering_radius_bracket(lat: Lattice, samples: np.ndarray | None = None) -> tuple[float, float]:
    """A (lower, upper) bracket on the covering radius.

    Lower bound: deepest folded sample seen (any point's distance to the
    lattice is at most the covering radius).  Upper bound: exact Voronoi
    vertex enumeration for n <= 4, otherwise the nearest-plane bound
    half*sqrt(sum ||b*_i||^2) over an LLL-reduced basis.
    """
    lower = 0.0
    if samples is not None and len(samples):
        lower = float(np.sqrt((samples**2).sum(axis=1).max()))
    n = lat.dimension
    if n == 1:
        exact = abs(float(lat.generator[0, 0])) / 2.0
        return max(lower, 0.0), exact
    reduced, _ = lll_reduce(lat.generator)
    ortho = np.linalg.qr(reduced.T)[1]
    upper = 0.5 * math.sqrt(float((np.diag(ortho) ** 2).sum()))
    if n <= 4:
        exact = _covering_radius_by_vertices(lat, upper)
        if exact is not None:
            upper = exact
    return lower, upper


def _covering_radius_by_vertices(lat: Lattice, upper_hint: float) -> float | None:
    from scipy.spatial import Voronoi  # local import: optional heavy dependency path

    R, Q, U = lat._get_decoder()
    rad = 2.0 * upper_hint * 1.001
    try:
        W = enumerate_within(R, np.zeros(lat.dimension), rad * rad, cap=20000)
    except RuntimeError:
        return None
    pts = (W @ U) @ lat.generator
    order = np.argsort((pts**2).sum(axis=1))
    pts = pts[order]  # origin first
    if len(pts) < lat.dimension + 2:
        return None
    vor = Voronoi(pts)
    region = vor.regions[vor.point_region[0]]
    if not region or -1 in region:
        return None
    verts = vor.vertices[region]
    return float(np.sqrt((verts**2).sum(axis=1).max()))


def lattice_geometry(lat: Lattice, sample_count: int = 200_000, seed: int = 0) -> LatticeGeometry:
    """Monte Carlo geometry report: moments, radii, normalized second moment."""
    rng = substream(seed, 1)
    pts = lat.sample_voronoi(rng, sample_count)
    per_dim = (pts**2).sum(axis=1) / lat.dimension
    sm = float(per_dim.mean())
    se = float(per_dim.std(ddof=1) / math.sqrt(sample_count))
    lo, hi = covering_radius_bracket(lat, pts)
    nsm = sm / lat.volume ** (2.0 / lat.dimension)
    return LatticeGeometry(sm, se, effective_radius(lat), lo, hi, nsm, sample_count)


# ---------------------------------------------------------------------------
# Channel-coding figures of merit


def volume_to_noise_ratio(lat: Lattice, noise_variance: float) -> float:
    """Vol^(2/n) / (2 pi e sigma^2); reliable decoding needs a value above 1."""
    if noise_variance <= 0:
        raise ValueError(f"noise variance must be positive, got {noise_variance}")
    return lat.volume ** (2.0 / lat.dimension) / (2.0 * math.pi * math.e * noise_variance)


def poltyrev_exponent(mu: float) -> float:
    """Random-coding error exponent of unconstrained AWGN lattice decoding.

    Standard three-piece form, in nats:
        0                        for mu <= 1
        [(mu - 1) - ln mu] / 2   for 1 < mu <= 2
        ln(e mu / 4) / 2         for 2 < mu <= 4
        mu / 8                   for mu > 4
    Continuous, zero at and below 1, strictly increasing above 1.
    """
    if mu <= 0:
        raise ValueError(f"volume-to-noise ratio must be positive, got {mu}")
    if mu <= 1.0:
        return 0.0
    if mu <= 2.0:
        return 0.5 * ((mu - 1.0) - math.log(mu))
    if mu <= 4.0:
        return 0.5 * math.log(math.e * mu / 4.0)
    return mu / 8.0


# ---------------------------------------------------------------------------
# Presets


def integer_lattice(n: int) -> Lattice:
    """Z^n."""
    return Lattice(np.eye(n))


def hexagonal_lattice() -> Lattice:
    """A2 with unit minimum distance; basis (1,0), (1/2, sqrt(3)/2)."""
    return Lattice(np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]]), exact_nsm=_A2_NSM)


def checkerboard_lattice() -> Lattice:
    """D4: integer vectors with even coordinate sum."""
    return Lattice(
        np.array(
            [
                [1.0, -1.0, 0.0, 0.0],
                [0.0, 1.0, -1.0, 0.0],
                [0.0, 0.0, 1.0, -1.0],
                [0.0, 0.0, 1.0, 1.0],
            ]
        )
    )


def gosset_lattice() -> Lattice:
    """E8 in its standard even-coordinate-system basis."""
    rows = np.zeros((8, 8))
    rows[0, 0] = 2.0
    for i in range(1, 7):
        rows[i, i - 1] = -1.0
        rows[i, i] = 1.0
    rows[7, :] = 0.5
    return Lattice(rows)


def lattice_from_spec(spec: dict) -> Lattice:
    """Build a lattice from {'preset': name[, 'dimension': n]} or {'generator': rows}."""
    if "generator" in spec:
        return Lattice(np.array(spec["generator"], dtype=float))
    name = spec.get("preset")
    if name == "Zn":
        return integer_lattice(int(spec.get("dimension", 1)))
    if name == "A2":
        return hexagonal_lattice()
    if name == "D4":
        return checkerboard_lattice()
    if name == "E8":
        return gosset_lattice()
    raise ValueError(f"unknown lattice spec {spec!r}")
