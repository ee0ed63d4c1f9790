"""Deterministic sampling grids for certification runs.

A SamplingPlan describes a reproducible cloud of points in the punctured
unit ball of C^n together with a time-sampling rule for intervals:

* a deterministic shell grid: radii x directions, where the directions come
  from a fixed low-discrepancy (Halton) sequence mapped onto the unit sphere
  of C^n (= S^{2n-1}) through Box-Muller;
* a seeded pseudo-random batch of interior points (PCG64, 64-bit seed);
* optional explicit extra points (e.g. witnesses close to the sphere);
* times: a fixed count of equispaced samples per interval, with the last
  sample pulled inside by a small probe offset and an extra probe just
  after the left endpoint.  Intervals are treated as [lo, hi): switch-type
  discontinuities sitting exactly at an endpoint are probed from inside.

Certificates quote the plan; they are evidence on this grid, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

DEFAULT_SEED = 2026

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _halton(index: int, base: int) -> float:
    out = 0.0
    f = 1.0
    i = index
    while i > 0:
        f /= base
        out += f * (i % base)
        i //= base
    return out


def sphere_directions(count: int, n: int) -> np.ndarray:
    """`count` unit vectors in C^n from the fixed Halton/Box-Muller map."""
    if n < 1 or 2 * n > len(_PRIMES):
        raise InputError(f"unsupported dimension n = {n}")
    dims = 2 * n
    u = np.array(
        [[_halton(k, _PRIMES[d]) for d in range(dims)] for k in range(1, count + 1)]
    )
    # Box-Muller on consecutive pairs; Halton never returns 0 for index >= 1
    g = np.empty_like(u)
    for d in range(0, dims, 2):
        r = np.sqrt(-2.0 * np.log(u[:, d]))
        g[:, d] = r * np.cos(2.0 * np.pi * u[:, d + 1])
        g[:, d + 1] = r * np.sin(2.0 * np.pi * u[:, d + 1])
    z = g[:, 0::2] + 1j * g[:, 1::2]
    norms = np.sqrt(np.sum(np.abs(z) ** 2, axis=1))
    return z / norms[:, None]


@dataclass(frozen=True)
class SamplingPlan:
    """Reproducible description of a point grid and its time sampling."""

    radii: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    directions: int = 64
    random_points: int = 256
    seed: int = DEFAULT_SEED
    times_per_interval: int = 33
    endpoint_probe: float = 1e-6
    extra_points: tuple = ()

    def points(self, n: int) -> np.ndarray:
        """All sample points in the punctured ball, shape (m, n)."""
        dirs = sphere_directions(self.directions, n)
        shell = np.concatenate([r * dirs for r in self.radii], axis=0) if self.radii else np.empty((0, n), complex)
        blocks = [shell]
        if self.random_points > 0:
            rng = np.random.Generator(np.random.PCG64(self.seed))
            raw = rng.standard_normal((self.random_points, 2 * n))
            z = raw[:, 0::2] + 1j * raw[:, 1::2]
            z /= np.sqrt(np.sum(np.abs(z) ** 2, axis=1))[:, None]
            radii = 0.1 + 0.8 * rng.random(self.random_points)
            blocks.append(z * radii[:, None])
        if self.extra_points:
            extra = np.asarray([list(p) for p in self.extra_points], dtype=complex)
            if extra.shape[1] != n:
                raise InputError(f"extra points have dimension {extra.shape[1]}, expected {n}")
            blocks.append(extra)
        pts = np.concatenate(blocks, axis=0)
        norms = np.sqrt(np.sum(np.abs(pts) ** 2, axis=1))
        if np.any(norms >= 1.0) or np.any(norms == 0.0):
            raise InputError("sampling plan produced points outside the punctured ball")
        return pts

    def times(self, t_lo: float, t_hi: float) -> np.ndarray:
        """Time samples for the interval [t_lo, t_hi), sorted ascending."""
        if not (t_lo < t_hi):
            raise InputError(f"empty time interval [{t_lo}, {t_hi})")
        if t_hi - t_lo <= 2 * self.endpoint_probe:
            return np.array([0.5 * (t_lo + t_hi)])
        ts = np.linspace(t_lo, t_hi, self.times_per_interval)
        ts[-1] = t_hi - self.endpoint_probe
        ts = np.append(ts, t_lo + self.endpoint_probe)
        return np.unique(ts)

    def time_pairs(self, t_lo: float, t_hi: float, count: int = 9):
        """Ordered pairs s < t from `count` equispaced times in [t_lo, t_hi)."""
        ts = np.linspace(t_lo, t_hi - self.endpoint_probe, count)
        return [(float(ts[i]), float(ts[j])) for i in range(count) for j in range(i + 1, count)]

    def describe(self) -> dict:
        return {
            "radii": list(self.radii),
            "directions": self.directions,
            "random_points": self.random_points,
            "seed": self.seed,
            "times_per_interval": self.times_per_interval,
            "endpoint_probe": self.endpoint_probe,
            "extra_points": [[[float(c.real), float(c.imag)] for c in map(complex, p)] for p in self.extra_points],
        }


def plan_from_config(cfg: dict, default_seed: int | None = None) -> SamplingPlan:
    """Build a plan from a config mapping; unknown keys are rejected."""
    allowed = {
        "radii", "directions", "random_points", "seed",
        "times_per_interval", "endpoint_probe", "extra_points",
    }
    unknown = set(cfg) - allowed
    if unknown:
        raise InputError(f"unknown grid option(s): {sorted(unknown)}")
    kwargs = {}
    if "radii" in cfg:
        kwargs["radii"] = tuple(float(r) for r in cfg["radii"])
    for key in ("directions", "random_points", "times_per_interval", "seed"):
        if key in cfg:
            kwargs[key] = int(cfg[key])
    if "endpoint_probe" in cfg:
        kwargs["endpoint_probe"] = float(cfg["endpoint_probe"])
    if "extra_points" in cfg:
        pts = []
        for p in cfg["extra_points"]:
            pts.append(tuple(complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c) for c in p))
        kwargs["extra_points"] = tuple(pts)
    if "seed" not in kwargs and default_seed is not None:
        kwargs["seed"] = int(default_seed)
    return SamplingPlan(**kwargs)


def norms(points: np.ndarray) -> np.ndarray:
    """Euclidean norms of a stack of points, shape (m,)."""
    return np.sqrt(np.sum(np.abs(points) ** 2, axis=-1))
