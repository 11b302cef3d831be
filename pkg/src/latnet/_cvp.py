"""Exact closest-point machinery: LLL reduction, sphere enumeration, HNF.

The enumeration kernel is a Schnorr-Euchner depth-first search over an upper
triangular factor.  It runs in two passes: a minimum-distance pass and a
collection pass at radius d* + tie margin so exact ties can be broken
deterministically by the caller.  The kernel compiles with numba when
available; the pure-Python fallback executes the identical code object, so
results are bit-identical either way.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by every decode
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _enumerate_kernel(Rm, z, radius2, out_w, collect):
    """Enumerate integer w with ||z - Rm w||^2 within radius2.

    collect=False: shrinking-radius minimum search; writes the argmin into
    out_w[0] and returns 1 if anything was found (radius2 may be inf).
    The achieved squared distance is written into z-space by returning it
    via out_w is impossible under numba, so the caller re-evaluates it.

    collect=True: fixed-radius collection; fills out_w rows and returns the
    total count (which may exceed the buffer; caller must check).
    """
    n = Rm.shape[0]
    acc = np.zeros(n)  # acc[i] = cost contributed by levels > i
    part = np.zeros(n)  # part[i] = z_i - sum_{j>i} Rm[i,j] w_j
    w = np.zeros(n, np.int64)
    step = np.zeros(n, np.int64)
    best = radius2
    count = 0
    i = n - 1
    acc[i] = 0.0
    part[i] = z[i]
    t = part[i] / Rm[i, i]
    w[i] = int(np.ceil(t - 0.5))  # ties round down: lexicographically smaller
    step[i] = 1 if (t - w[i]) >= 0.0 else -1
    while True:
        resid = part[i] - Rm[i, i] * w[i]
        d = acc[i] + resid * resid
        if d <= best:
            if i == 0:
                if collect:
                    if count < out_w.shape[0]:
                        for j in range(n):
                            out_w[count, j] = w[j]
                    count += 1
                else:
                    if count == 0 or d < best:
                        for j in range(n):
                            out_w[0, j] = w[j]
                    best = d
                    count = 1
                w[0] += step[0]
                step[0] = -step[0] - (1 if step[0] > 0 else -1)
            else:
                acc[i - 1] = d
                i -= 1
                s = z[i]
                for j in range(i + 1, n):
                    s -= Rm[i, j] * w[j]
                part[i] = s
                t = s / Rm[i, i]
                w[i] = int(np.ceil(t - 0.5))
                step[i] = 1 if (t - w[i]) >= 0.0 else -1
        else:
            i += 1
            if i == n:
                return count
            w[i] += step[i]
            step[i] = -step[i] - (1 if step[i] > 0 else -1)


def enumerate_minimum(Rm: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (argmin w, squared distance) of min_w ||z - Rm w||^2."""
    out = np.zeros((1, Rm.shape[0]), np.int64)
    found = _enumerate_kernel(Rm, z, np.inf, out, False)
    if not found:  # pragma: no cover - inf radius always finds a leaf
        raise RuntimeError("enumeration found no lattice point")
    w = out[0].copy()
    resid = z - Rm @ w
    return w, float(resid @ resid)


def enumerate_within(Rm: np.ndarray, z: np.ndarray, radius2: float, cap: int = 8192) -> np.ndarray:
    """Return all integer w with ||z - Rm w||^2 <= radius2 (rows)."""
    cap_now = 64
    while True:
        out = np.zeros((cap_now, Rm.shape[0]), np.int64)
        count = _enumerate_kernel(Rm, z, radius2, out, True)
        if count <= cap_now:
            return out[:count].copy()
        if cap_now >= cap:
            raise RuntimeError(f"enumeration produced more than {cap} candidates")
        cap_now = min(cap, max(2 * cap_now, count))


def lll_reduce(basis: np.ndarray, delta: float = 0.75) -> tuple[np.ndarray, np.ndarray]:
    """LLL-reduce a row basis.  Returns (reduced, U) with reduced = U @ basis.

    U is integer unimodular; the reduction improves enumeration speed only
    and never changes the lattice.
    """
    B = np.array(basis, dtype=float)
    n = B.shape[0]
    U = np.eye(n, dtype=np.int64)

    def gram_schmidt():
        ortho = np.zeros_like(B)
        mu = np.zeros((n, n))
        norms = np.zeros(n)
        for i in range(n):
            ortho[i] = B[i]
            for j in range(i):
                mu[i, j] = (B[i] @ ortho[j]) / norms[j]
                ortho[i] -= mu[i, j] * ortho[j]
            norms[i] = ortho[i] @ ortho[i]
        return mu, norms

    mu, norms = gram_schmidt()
    k = 1
    guard = 0
    while k < n:
        guard += 1
        if guard > 100000:  # pragma: no cover - safety valve
            raise RuntimeError("LLL failed to terminate")
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                B[k] -= q * B[j]
                U[k] -= q * U[j]
                mu, norms = gram_schmidt()
        if norms[k] >= (delta - mu[k, k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            B[[k - 1, k]] = B[[k, k - 1]]
            U[[k - 1, k]] = U[[k, k - 1]]
            mu, norms = gram_schmidt()
            k = max(k - 1, 1)
    return B, U


def positive_qr(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (R, Q): rows^T = Q R with R upper triangular, positive diagonal."""
    q, r = np.linalg.qr(rows.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (signs[:, None] * r), (q * signs[None, :])


# ---------------------------------------------------------------------------
# Integer Hermite normal form and residue reduction (exact, python ints)


def row_hnf(mat: np.ndarray) -> np.ndarray:
    """Row-style HNF of an integer matrix spanning a full-rank row lattice.

    Returns an upper triangular basis H with positive diagonal and entries
    reduced above the diagonal; rows of H span the same lattice as rows of
    `mat`.  Exact integer arithmetic throughout.
    """
    rows = [[int(x) for x in row] for row in np.asarray(mat)]
    n = len(rows[0])
    basis: list[list[int]] = []
    work = list(rows)
    for col in range(n):
        # Reduce all work rows so at most one has a nonzero in `col`.
        while True:
            nz = [r for r in work if r[col] != 0]
            if len(nz) <= 1:
                break
            nz.sort(key=lambda r: abs(r[col]))
            pivot = nz[0]
            for r in nz[1:]:
                q = r[col] // pivot[col]
                for j in range(n):
                    r[j] -= q * pivot[j]
        nz = [r for r in work if r[col] != 0]
        if not nz:
            raise ValueError("matrix rows do not span a full-rank lattice")
        pivot = nz[0]
        if pivot[col] < 0:
            pivot = [-x for x in pivot]
        basis.append(list(pivot))
        work = [r for r in work if r[col] == 0]
    # Reduce entries above each diagonal.
    for i in range(n - 1, -1, -1):
        for above in range(i):
            q = basis[above][i] // basis[i][i]
            if q:
                for j in range(n):
                    basis[above][j] -= q * basis[i][j]
    return np.array(basis, dtype=np.int64)


def residue_mod_hnf(x: np.ndarray, hnf: np.ndarray) -> tuple[int, ...]:
    """Canonical residue of integer vector x modulo the row lattice of `hnf`.

    hnf must be upper triangular with positive diagonal (from `row_hnf`).
    The residue lies in the box prod_i [0, hnf[i,i]).
    """
    n = hnf.shape[0]
    r = [int(v) for v in x]
    for i in range(n):
        q = r[i] // int(hnf[i, i])
        if q:
            for j in range(i, n):
                r[j] -= q * int(hnf[i, j])
    return tuple(r)
