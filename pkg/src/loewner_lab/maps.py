"""Holomorphic maps of the unit ball with batched evaluation.

The workhorse is PolyMap: each component is a finite sum of monomials
stored as {multi-index: coefficient}.  Polynomial maps carry exact
Jacobians and exact Taylor data, which keeps every catalog construction
(quadratic support-point maps, perturbation directions, close-to-identity
maps) free of numerical differentiation.

All maps evaluate on stacked points of shape (m, n) and return (m, n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError

SQRT3 = np.sqrt(3.0)
#: coefficient of the quadratic support-point map (z1 + a*z2^2, z2)
SUPPORT_COEFF = 1.5 * SQRT3  # 3*sqrt(3)/2


def as_points(z, n: int | None = None) -> tuple[np.ndarray, bool]:
    """Coerce to (m, n) complex; returns (array, was_single_point)."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 1:
        arr = arr[None, :]
        single = True
    elif arr.ndim == 2:
        single = False
    else:
        raise InputError(f"expected point or stack of points, got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise InputError(f"points have dimension {arr.shape[1]}, expected {n}")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise InputError("points contain non-finite coordinates")
    return arr, single


class Map:
    """Minimal protocol: callable on (m, n) points; optional exact `jac`."""

    n: int

    def __call__(self, z: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def has_jac(self) -> bool:
        return False


@dataclass(frozen=True)
class PolyMap(Map):
    """Polynomial map: components[j] maps multi-index tuples to coefficients."""

    components: tuple
    n: int

    @staticmethod
    def from_dicts(comps: Sequence[dict]) -> "PolyMap":
        n = len(comps)
        frozen = []
        for comp in comps:
            entries = []
            for idx, c in comp.items():
                idx = tuple(int(k) for k in idx)
                if len(idx) != n or any(k < 0 for k in idx):
                    raise InputError(f"bad multi-index {idx} for dimension {n}")
                entries.append((idx, complex(c)))
            entries.sort(key=lambda e: e[0])
            frozen.append(tuple(entries))
        return PolyMap(components=tuple(frozen), n=n)

    def __call__(self, z) -> np.ndarray:
        pts, single = as_points(z, self.n)
        out = np.zeros_like(pts)
        for j, entries in enumerate(self.components):
            acc = np.zeros(pts.shape[0], dtype=complex)
            for idx, c in entries:
                term = np.full(pts.shape[0], c, dtype=complex)
                for k, p in enumerate(idx):
                    if p:
                        term = term * pts[:, k] ** p
                acc += term
            out[:, j] = acc
        return out[0] if single else out

    def has_jac(self) -> bool:
        return True

    def jac(self, z) -> np.ndarray:
        """Exact Jacobian, stacked (m, n, n); d[j,k] = d f_j / d z_k."""
        pts, single = as_points(z, self.n)
        m = pts.shape[0]
        out = np.zeros((m, self.n, self.n), dtype=complex)
        for j, entries in enumerate(self.components):
            for idx, c in entries:
                for k, p in enumerate(idx):
                    if p == 0:
                        continue
                    term = np.full(m, c * p, dtype=complex)
                    for k2, p2 in enumerate(idx):
                        pw = p2 - 1 if k2 == k else p2
                        if pw:
                            term = term * pts[:, k2] ** pw
                    out[:, j, k] += term
        return out[0] if single else out

    def coefficient(self, multi_index: tuple, component: int) -> complex:
        """Exact Taylor coefficient (used as an oracle against quadrature)."""
        idx = tuple(int(k) for k in multi_index)
        for i, c in self.components[component]:
            if i == idx:
                return c
        return 0.0 + 0.0j

    def homogeneous_part(self, degree: int) -> "PolyMap":
        comps = []
        for entries in self.components:
            comps.append({idx: c for idx, c in entries if sum(idx) == degree})
        return PolyMap.from_dicts(comps)

    def max_degree(self) -> int:
        degs = [sum(idx) for entries in self.components for idx, _ in entries]
        return max(degs) if degs else 0

    def scale(self, factor: complex) -> "PolyMap":
        return PolyMap.from_dicts(
            [{idx: factor * c for idx, c in entries} for entries in self.components]
        )

    def add(self, other: "PolyMap") -> "PolyMap":
        comps = []
        for a, b in zip(self.components, other.components):
            d = dict(a)
            for idx, c in b:
                d[idx] = d.get(idx, 0.0) + c
            comps.append({k: v for k, v in d.items() if v != 0.0})
        return PolyMap.from_dicts(comps)

    def to_config(self) -> list:
        return [
            [[list(idx), [c.real, c.imag]] for idx, c in entries]
            for entries in self.components
        ]

    @staticmethod
    def from_config(data) -> "PolyMap":
        comps = []
        for entries in data:
            comp = {}
            for idx, c in entries:
                comp[tuple(idx)] = complex(c[0], c[1])
            comps.append(comp)
        return PolyMap.from_dicts(comps)


@dataclass(frozen=True)
class CallableMap(Map):
    """Wrap an arbitrary batched callable (no exact Jacobian)."""

    fn: Callable[[np.ndarray], np.ndarray]
    n: int
    label: str = "callable"

    def __call__(self, z) -> np.ndarray:
        pts, single = as_points(z, self.n)
        out = np.asarray(self.fn(pts), dtype=complex)
        return out[0] if single else out


@dataclass(frozen=True)
class TruncatedStarlikeMap(Map):
    """z -> N * F_inv(F(z) / N) with exact Jacobian via the chain rule."""

    F: Map
    F_inv: Map
    N: float

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.F.n

    def __call__(self, z) -> np.ndarray:
        pts, single = as_points(z, self.F.n)
        out = self.N * np.asarray(self.F_inv(self.F(pts) / self.N), dtype=complex)
        return out[0] if single else out

    def has_jac(self) -> bool:
        return self.F.has_jac() and self.F_inv.has_jac()

    def jac(self, z) -> np.ndarray:
        pts, single = as_points(z, self.F.n)
        inner = self.F(pts) / self.N
        j = np.matmul(self.F_inv.jac(inner), self.F.jac(pts))
        return j[0] if single else j


def identity_map(n: int) -> PolyMap:
    comps = []
    for j in range(n):
        idx = tuple(1 if k == j else 0 for k in range(n))
        comps.append({idx: 1.0})
    return PolyMap.from_dicts(comps)


def support_map(a: complex = SUPPORT_COEFF) -> PolyMap:
    """The quadratic map (z1 + a*z2^2, z2) on the ball of C^2."""
    return PolyMap.from_dicts([{(1, 0): 1.0, (0, 2): a}, {(0, 1): 1.0}])


def support_map_inverse(a: complex = SUPPORT_COEFF) -> PolyMap:
    """Global inverse (w1 - a*w2^2, w2) of the quadratic support map."""
    return PolyMap.from_dicts([{(1, 0): 1.0, (0, 2): -a}, {(0, 1): 1.0}])

