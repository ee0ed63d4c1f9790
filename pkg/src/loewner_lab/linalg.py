"""Dense complex linear algebra for small n: operator norm, minimum modulus, inversion.

Everything here is hand-rolled and deterministic: a closed form for 2x2
singular values, one-sided Jacobi for n <= 8, and partial-pivot elimination
for the inverse.  The minimum modulus mu(A) = min_{|v|=1} |Av| equals the
smallest singular value, and for invertible A also 1/|A^-1|; the test suite
checks both routes against each other and against an external SVD oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, SingularMatrixError

# sigma_min below this multiple of sigma_max is treated as singular
SINGULARITY_RATIO = 1e-10

_JACOBI_TOL = 1e-15
_MAX_SWEEPS = 60
MAX_N = 8


def as_matrix(a) -> np.ndarray:
    """Validate and return a finite square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise InputError("matrix has non-finite entries")
    return m


def _svals_1x1(a: np.ndarray) -> np.ndarray:
    return np.array([abs(a[0, 0])])


def _svals_2x2(a: np.ndarray) -> np.ndarray:
    # eigenvalues of A^H A, with the small one recovered from det for stability
    b11 = abs(a[0, 0]) ** 2 + abs(a[1, 0]) ** 2
    b22 = abs(a[0, 1]) ** 2 + abs(a[1, 1]) ** 2
    b12 = np.conj(a[0, 0]) * a[0, 1] + np.conj(a[1, 0]) * a[1, 1]
    tr = b11 + b22
    disc = np.hypot(b11 - b22, 2.0 * abs(b12))
    lam_max = 0.5 * (tr + disc)
    det_b = abs(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) ** 2
    lam_min = det_b / lam_max if lam_max > 0.0 else 0.0
    return np.array([np.sqrt(lam_max), np.sqrt(max(lam_min, 0.0))])


def _svals_jacobi(a: np.ndarray) -> np.ndarray:
    """One-sided Jacobi: rotate column pairs until mutually orthogonal."""
    w = a.astype(complex).copy()
    n = w.shape[0]
    if np.sqrt((np.abs(w) ** 2).sum()) == 0.0:
        return np.zeros(n)
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                u = w[:, i].copy()
                v = w[:, j].copy()
                g = np.vdot(u, v)  # u^H v
                nu = float(np.real(np.vdot(u, u)))
                nv = float(np.real(np.vdot(v, v)))
                # sqrt before multiplying so tiny column pairs cannot underflow
                # the Cauchy-Schwarz bound and produce an overflowing tau below
                denom = np.sqrt(nu) * np.sqrt(nv)
                if denom == 0.0 or abs(g) <= _JACOBI_TOL * denom:
                    continue
                rotated = True
                phase = g / abs(g)
                vt = v * np.conj(phase)  # now u^H vt = |g| is real
                tau = (nv - nu) / (2.0 * abs(g))
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau))
                cs = 1.0 / np.hypot(1.0, t)
                sn = cs * t
                w[:, i] = cs * u - sn * vt
                w[:, j] = sn * u + cs * vt
        if not rotated:
            break
    svals = np.sqrt(np.real(np.sum(np.conj(w) * w, axis=0)))
    svals.sort()
    return svals[::-1]


def singular_values(a) -> np.ndarray:
    """All singular values, descending."""
    m = as_matrix(a)
    n = m.shape[0]
    if n > MAX_N:
        raise InputError(f"n = {n} exceeds supported size {MAX_N}")
    if n == 1:
        return _svals_1x1(m)
    if n == 2:
        return _svals_2x2(m)
    return _svals_jacobi(m)


def operator_norm(a) -> float:
    """Spectral norm: the largest singular value."""
    return float(singular_values(a)[0])


def min_modulus(a) -> float:
    """mu(A) = min_{|v|=1} |Av|: the smallest singular value (0 iff singular)."""
    return float(singular_values(a)[-1])


def inverse(a) -> np.ndarray:
    """Invert by Gauss-Jordan with partial pivoting.

    Raises SingularMatrixError (carrying sigma_min) when
    sigma_min < SINGULARITY_RATIO * sigma_max.
    """
    m = as_matrix(a)
    sv = singular_values(m)
    s_max, s_min = float(sv[0]), float(sv[-1])
    if s_min < SINGULARITY_RATIO * s_max or s_max == 0.0:
        raise SingularMatrixError(
            f"matrix is numerically singular (sigma_min = {s_min:.3e}, sigma_max = {s_max:.3e})",
            sigma_min=s_min,
        )
    n = m.shape[0]
    aug = np.concatenate([m.copy(), np.eye(n, dtype=complex)], axis=1)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) == 0.0:
            raise SingularMatrixError("zero pivot during elimination", sigma_min=s_min)
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for row in range(n):
            if row != col and aug[row, col] != 0.0:
                aug[row] -= aug[row, col] * aug[col]
    return aug[:, n:]


def solve(a, b) -> np.ndarray:
    """Solve A x = b for a single small system (via the pivoted inverse)."""
    return inverse(a) @ np.asarray(b, dtype=complex)


# ---------------------------------------------------------------------------
# Batched helpers used in grid evaluation hot paths.  Stacked shape (m, n, n);
# n = 2 has vectorized closed forms, larger n falls back to a loop.
# ---------------------------------------------------------------------------


def solve_batch(mats: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve mats[i] x[i] = rhs[i] for stacked (m,n,n) and (m,n)."""
    mats = np.asarray(mats, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    n = mats.shape[-1]
    if n == 1:
        return rhs / mats[:, 0, 0][:, None]
    if n == 2:
        a = mats[:, 0, 0]
        b = mats[:, 0, 1]
        c = mats[:, 1, 0]
        d = mats[:, 1, 1]
        det = a * d - b * c
        if np.any(np.abs(det) == 0.0):
            raise SingularMatrixError("singular matrix in batched 2x2 solve")
        x0 = (d * rhs[:, 0] - b * rhs[:, 1]) / det
        x1 = (a * rhs[:, 1] - c * rhs[:, 0]) / det
        return np.stack([x0, x1], axis=1)
    out = np.empty_like(rhs)
    for i in range(mats.shape[0]):
        out[i] = inverse(mats[i]) @ rhs[i]
    return out


def min_modulus_batch(mats: np.ndarray) -> np.ndarray:
    """Smallest singular value of each stacked matrix."""
    mats = np.asarray(mats, dtype=complex)
    n = mats.shape[-1]
    if n == 1:
        return np.abs(mats[:, 0, 0])
    if n == 2:
        b11 = np.abs(mats[:, 0, 0]) ** 2 + np.abs(mats[:, 1, 0]) ** 2
        b22 = np.abs(mats[:, 0, 1]) ** 2 + np.abs(mats[:, 1, 1]) ** 2
        b12 = np.conj(mats[:, 0, 0]) * mats[:, 0, 1] + np.conj(mats[:, 1, 0]) * mats[:, 1, 1]
        tr = b11 + b22
        disc = np.hypot(b11 - b22, 2.0 * np.abs(b12))
        lam_max = 0.5 * (tr + disc)
        det_b = np.abs(mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            lam_min = np.where(lam_max > 0.0, det_b / lam_max, 0.0)
        return np.sqrt(np.maximum(lam_min, 0.0))
    return np.array([min_modulus(m) for m in mats])


def operator_norm_batch(mats: np.ndarray) -> np.ndarray:
    """Largest singular value of each stacked matrix."""
    mats = np.asarray(mats, dtype=complex)
    n = mats.shape[-1]
    if n == 1:
        return np.abs(mats[:, 0, 0])
    if n == 2:
        b11 = np.abs(mats[:, 0, 0]) ** 2 + np.abs(mats[:, 1, 0]) ** 2
        b22 = np.abs(mats[:, 0, 1]) ** 2 + np.abs(mats[:, 1, 1]) ** 2
        b12 = np.conj(mats[:, 0, 0]) * mats[:, 0, 1] + np.conj(mats[:, 1, 0]) * mats[:, 1, 1]
        tr = b11 + b22
        disc = np.hypot(b11 - b22, 2.0 * np.abs(b12))
        return np.sqrt(0.5 * (tr + disc))
    return np.array([operator_norm(m) for m in mats])
