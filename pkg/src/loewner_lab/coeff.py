"""Taylor coefficients by circle quadrature, linear coefficient functionals,
perturbation directions, and the sharp reachability bound.

The central functional on maps of the ball of C^2 is

    L(f) = (1/2) d^2 f_1 / d z_2^2 (0),

i.e. the coefficient of z_2^2 in the first component.  The quadratic map
(z1 + a z2^2, z2) with a = 3 sqrt(3) / 2 maximizes Re L over normalized
chains' initial elements, and its starlike truncations realize the sharp
level-N bound

    |d^2 f_1 / d z_2^2 (0)|  <=  3 sqrt(3) (1 - 1/N)

for everything reachable onto the ball of radius N in time log N.  The
bound checker is a necessary-condition test only: a violation certifies
non-reachability, a pass asserts nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construct import perturbation_norms
from .errors import DomainError, NotFoundError
from .maps import Map, PolyMap, SQRT3

#: terms of the functional L(f) = coefficient of z2^2 in f_1 (n = 2)
L102_TERMS = (((0, 2), 0, 1.0 + 0.0j),)

DEFAULT_RADIUS = 0.5
DEFAULT_SAMPLES = 64
#: coefficient search depth for perturbation directions
MAX_SEARCH_DEGREE = 8
BOUND_TOL = 1e-9


def taylor_coefficient(
    map_fn: Map,
    multi_index,
    component: int,
    radius: float = DEFAULT_RADIUS,
    samples: int = DEFAULT_SAMPLES,
) -> complex:
    """Series coefficient of z^multi_index in the given component at 0.

    Iterated circle quadrature over the coordinates with positive index
    (the others are pinned to 0); exact for polynomials whose degree stays
    below the sample count per circle.
    """
    alpha = tuple(int(k) for k in multi_index)
    n = map_fn.n
    if len(alpha) != n or any(k < 0 for k in alpha):
        raise DomainError(f"bad multi-index {alpha} for dimension {n}")
    if not (0 <= component < n):
        raise DomainError(f"component {component} out of range for dimension {n}")
    if not (0.0 < radius < 1.0 / np.sqrt(n)):
        raise DomainError(
            f"extraction radius {radius} must lie in (0, 1/sqrt({n})) to keep the polytorus in the ball"
        )
    active = [k for k in range(n) if alpha[k] > 0]
    if not active:
        val = np.asarray(map_fn(np.zeros((1, n), dtype=complex)), dtype=complex)
        return complex(val[0, component])
    theta = 2.0 * np.pi * np.arange(samples) / samples
    grids = np.meshgrid(*([theta] * len(active)), indexing="ij")
    m_total = samples ** len(active)
    pts = np.zeros((m_total, n), dtype=complex)
    phase = np.zeros(m_total, dtype=complex)
    acc = np.zeros(m_total)
    for k, g in zip(active, grids):
        flat = g.reshape(-1)
        pts[:, k] = radius * np.exp(1j * flat)
        acc = acc + alpha[k] * flat
    phase = np.exp(-1j * acc)
    vals = np.asarray(map_fn(pts), dtype=complex)[:, component]
    total = np.sum(vals * phase) / m_total
    return complex(total / radius ** sum(alpha))


@dataclass(frozen=True)
class CoefficientReport:
    """One extracted coefficient with a radius-stability error estimate."""

    multi_index: tuple
    component: int
    value: complex
    extraction_radius: float
    estimated_error: float

    def to_dict(self) -> dict:
        return {
            "multi_index": list(self.multi_index),
            "component": self.component,
            "value": [self.value.real, self.value.imag],
            "extraction_radius": self.extraction_radius,
            "estimated_error": self.estimated_error,
        }


def coefficient_report(
    map_fn: Map, multi_index, component: int, radius: float = DEFAULT_RADIUS
) -> CoefficientReport:
    """Extract a coefficient and estimate its error from a radius change."""
    value = taylor_coefficient(map_fn, multi_index, component, radius=radius)
    check = taylor_coefficient(map_fn, multi_index, component, radius=0.6 * radius)
    return CoefficientReport(
        multi_index=tuple(int(k) for k in multi_index),
        component=component,
        value=value,
        extraction_radius=radius,
        estimated_error=abs(value - check),
    )


def functional_L102(map_fn: Map, radius: float = DEFAULT_RADIUS) -> complex:
    """L(f) = (1/2) d^2 f_1/d z_2^2 (0): the z_2^2 coefficient of f_1."""
    if map_fn.n != 2:
        raise DomainError("the coefficient functional is defined for maps of the ball in C^2")
    return taylor_coefficient(map_fn, (0, 2), 0, radius=radius)


def eval_functional(terms, f: Map, radius: float = DEFAULT_RADIUS) -> complex:
    """Evaluate a finite coefficient functional sum_i w_i * coeff_{idx_i}(f_{c_i}).

    PolyMap inputs use exact coefficient data; everything else goes through
    quadrature.
    """
    total = 0.0 + 0.0j
    for idx, comp, weight in terms:
        if isinstance(f, PolyMap):
            c = f.coefficient(tuple(idx), comp)
        else:
            c = taylor_coefficient(f, idx, comp, radius=radius)
        total += complex(weight) * c
    return total


def perturbation_direction(terms, f: PolyMap, max_degree: int = MAX_SEARCH_DEGREE, grid=None) -> PolyMap:
    """A polynomial direction h with Re L(h) > 0 and sup|h|, sup|dh| <= 1.

    Scans the homogeneous parts P_j of f (j >= 2, lowest first) for one
    with L(P_j) != 0, rotates it so the functional is real positive, and
    scales it down to the sampled norm bounds.
    """
    if not isinstance(f, PolyMap):
        raise DomainError("direction search needs explicit polynomial coefficient data")
    top = min(max_degree, f.max_degree())
    for j in range(2, top + 1):
        pj = f.homogeneous_part(j)
        lj = eval_functional(terms, pj)
        if abs(lj) <= 1e-14:
            continue
        rotated = pj.scale(np.conj(lj) / abs(lj))
        sup_h, sup_dh = perturbation_norms(rotated, grid)
        # normalize so the binding sup-norm sits at 1 (largest admissible pull)
        h = rotated.scale(1.0 / max(sup_h, sup_dh))
        return h
    raise NotFoundError(
        f"functional vanishes on every homogeneous part up to degree {top} "
        f"(search limit {max_degree})"
    )


@dataclass(frozen=True)
class BoundVerdict:
    """Comparison of a second-order coefficient against the level-N bound."""

    N: float
    coefficient_magnitude: float
    bound: float
    satisfied: bool
    margin: float

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "coefficient_magnitude": self.coefficient_magnitude,
            "bound": self.bound,
            "satisfied": self.satisfied,
            "margin": self.margin,
        }


def reachability_bound_check(map_fn: Map, N: float, radius: float = DEFAULT_RADIUS) -> BoundVerdict:
    """Necessary-condition check |d^2 f_1/d z_2^2 (0)| <= 3 sqrt(3) (1 - 1/N).

    A failed check certifies that the map is not reachable onto the ball of
    radius N in time log N; a pass never asserts membership.  margin is the
    signed excess (positive means violation).
    """
    if N <= 1.0:
        raise DomainError(f"level N = {N} must exceed 1")
    mag = 2.0 * abs(functional_L102(map_fn, radius=radius))
    bound = 3.0 * SQRT3 * (1.0 - 1.0 / N)
    return BoundVerdict(
        N=float(N),
        coefficient_magnitude=float(mag),
        bound=float(bound),
        satisfied=bool(mag <= bound + BOUND_TOL),
        margin=float(mag - bound),
    )
