"""Catalog of time-dependent holomorphic vector fields on the unit ball.

Every field G(z, t) here is normalized so that G(0, t) = 0 and dG_0 = -id,
and -G(., t) has positive real inner product against z on the punctured
ball (the class-M condition Re<h(z), z> > 0 with h = -G).  Such fields
drive the evolution ODE dphi/dt = G(phi, t) and the chain PDE
df_t/dt = -d(f_t)_z G(z, t).

Catalog kinds
-------------
* LinearRadialField        G(z) = -z.
* ComponentwiseField       G(z) = -(z_j p_j(z_j))_j, with p_j from a small
                           named family of positive-real-part disc slices.
* BlendedField             theta(t) G1 + (1 - theta(t)) G2 with G1 = -z and
                           theta the indicator of [t1, t2).
* SlitExampleField         the n = 2 field (-theta z1 - (1-theta)(z1 - z1^2), -z2),
                           squeezing inside [t1, t2) and boundary-degenerate
                           outside of it.
* EMatrixField             G = -[id - E(z,t)]^{-1} [id + E(z,t)] z for a
                           matrix generator with |E| <= c < 1.
* StarlikeField            G(z, t) = -[dF_z]^{-1} F(z) up to the switch time,
                           then -z (drives a starlike image onto a ball).
* PerturbedChainField      the field of a varied chain f_t + alpha(t) h.
* ReparamField             the field of a time-reparametrized chain.
* DilatedField             G(z, t) = (1/r) G_base(r z, t).
* CustomField              arbitrary batched callable.

The pointwise squeezing margin of a field at (z, t) is

    margin(z, t) = -Re<G(z, t), z> / |z|^2,

whose infimum over an interval and the ball is the candidate squeezing
ratio of the driven chain.  Class-M membership is checked by sampling the
margin on a SamplingPlan grid; the verdict is grid-relative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, TYPE_CHECKING

import numpy as np

from . import linalg
from .errors import DomainError, InputError
from .maps import Map, PolyMap, as_points
from .sampling import SamplingPlan, norms

if TYPE_CHECKING:  # pragma: no cover
    from .evolve import ChainHandle

MEMBERSHIP_TOL = 1e-9


# ---------------------------------------------------------------------------
# positive-real-part disc slices p: D -> C, p(0) = 1
# ---------------------------------------------------------------------------


def _slice_const(zeta: np.ndarray) -> np.ndarray:
    return np.ones_like(zeta)


def _slice_cayley(zeta: np.ndarray) -> np.ndarray:
    return (1.0 + zeta) / (1.0 - zeta)


def _slice_one_minus(zeta: np.ndarray) -> np.ndarray:
    return 1.0 - zeta


SLICES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "const": _slice_const,
    "cayley": _slice_cayley,
    "one-minus": _slice_one_minus,
}


def _indicator(t: float, t1: float, t2: float) -> float:
    """theta(t): 1 on [t1, t2), 0 elsewhere (measurable switch, no smoothing)."""
    return 1.0 if t1 <= t < t2 else 0.0


# ---------------------------------------------------------------------------
# field classes
# ---------------------------------------------------------------------------


class FieldSpec:
    """Abstract time-dependent vector field; immutable after construction."""

    kind: str = "abstract"
    n: int

    def value(self, points: np.ndarray, t: float) -> np.ndarray:
        """G evaluated on a stack of points, shape (m, n)."""
        raise NotImplementedError

    def switch_times(self, t_lo: float, t_hi: float) -> list[float]:
        """Known discontinuity times in (t_lo, t_hi); integrators break here."""
        return []

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, **self.params()}


@dataclass(frozen=True)
class LinearRadialField(FieldSpec):
    n: int = 2
    kind: str = "linear-radial"

    def value(self, points, t):
        return -np.asarray(points, dtype=complex)


@dataclass(frozen=True)
class ComponentwiseField(FieldSpec):
    """G(z) = -(z_1 p_1(z_1), ..., z_n p_n(z_n)) with Re p_j > 0 on the disc."""

    slices: tuple
    kind: str = "componentwise"

    @property
    def n(self) -> int:  # type: ignore[override]
        return len(self.slices)

    def __post_init__(self):
        for name in self.slices:
            if name not in SLICES:
                raise InputError(f"unknown slice function {name!r}; known: {sorted(SLICES)}")

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        out = np.empty_like(pts)
        for j, name in enumerate(self.slices):
            out[:, j] = -pts[:, j] * SLICES[name](pts[:, j])
        return out

    def params(self):
        return {"slices": list(self.slices)}


@dataclass(frozen=True)
class BlendedField(FieldSpec):
    """theta(t) * (-z) + (1 - theta(t)) * G2 with theta = indicator of [t1, t2)."""

    g2: ComponentwiseField
    t1: float
    t2: float
    kind: str = "blended"

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.g2.n

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        th = _indicator(t, self.t1, self.t2)
        if th == 1.0:
            return -pts
        if th == 0.0:
            return self.g2.value(pts, t)
        return th * (-pts) + (1.0 - th) * self.g2.value(pts, t)

    def switch_times(self, t_lo, t_hi):
        return [s for s in (self.t1, self.t2) if t_lo < s < t_hi]

    def params(self):
        return {"t1": self.t1, "t2": self.t2, "g2": self.g2.describe()}


@dataclass(frozen=True)
class SlitExampleField(FieldSpec):
    """n = 2: G(z, t) = (-theta z1 - (1 - theta)(z1 - z1^2), -z2).

    With theta the indicator of [t1, t2) the second summand acts like a
    radial slit map generator: the margin at z = (x, 0) degenerates to
    1 - x near the boundary whenever theta = 0, so the driven chain is
    squeezing in [t1, t2) and not squeezing outside.
    """

    t1: float
    t2: float
    n: int = 2
    kind: str = "slit"

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        out = np.empty_like(pts)
        th = _indicator(t, self.t1, self.t2)
        z1 = pts[:, 0]
        out[:, 0] = -th * z1 - (1.0 - th) * (z1 - z1 * z1)
        out[:, 1] = -pts[:, 1]
        return out

    def switch_times(self, t_lo, t_hi):
        return [s for s in (self.t1, self.t2) if t_lo < s < t_hi]

    def params(self):
        return {"t1": self.t1, "t2": self.t2}


@dataclass(frozen=True, eq=False)
class EMatrixField(FieldSpec):
    """G(z, t) = -[id - E(z, t)]^{-1} [id + E(z, t)] z with |E(z, t)| <= c < 1.

    The generator produces margins pinched between
    |z|^2 (1 -/+ c|z|) / (1 +/- c|z|); with E == 0 the field is -z.
    """

    e_fn: Callable[[np.ndarray, float], np.ndarray]
    n: int
    c_bound: float
    label: str = "e-matrix"
    kind: str = "e-matrix"

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        m = pts.shape[0]
        e = np.asarray(self.e_fn(pts, t), dtype=complex)
        eye = np.broadcast_to(np.eye(self.n, dtype=complex), (m, self.n, self.n))
        rhs = np.einsum("mij,mj->mi", eye + e, pts)
        return -linalg.solve_batch(eye - e, rhs)

    def params(self):
        return {"c_bound": self.c_bound, "label": self.label}


@dataclass(frozen=True, eq=False)
class StarlikeField(FieldSpec):
    """-[dF_z]^{-1} F(z) until t_switch, then -z.

    Driving field of the chain that evolves a starlike image F(B^n) onto
    the ball N * B^n in time t_switch = log N.
    """

    F: Map
    t_switch: float
    kind: str = "starlike"

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.F.n

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        if t >= self.t_switch:
            return -pts
        jac = self.F.jac(pts) if self.F.has_jac() else _cauchy_jac(self.F, pts)
        return -linalg.solve_batch(jac, np.asarray(self.F(pts), dtype=complex))

    def switch_times(self, t_lo, t_hi):
        return [self.t_switch] if t_lo < self.t_switch < t_hi else []

    def params(self):
        return {"t_switch": self.t_switch}


@dataclass(frozen=True, eq=False)
class PerturbedChainField(FieldSpec):
    """Field of the varied chain g_t = f_t + alpha(t) h.

    With alpha(t) = eps (1 - t/T) on [0, T) and 0 after,

        G(z, t) = -[d(f_t)_z + alpha(t) dh_z]^{-1} (df_t/dt (z) + alpha'(t) h(z)).
    """

    base: "ChainHandle"
    h: PolyMap
    eps: float
    T: float
    kind: str = "perturbed-chain"

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.base.n

    def alpha(self, t: float) -> float:
        return self.eps * (1.0 - t / self.T) if t < self.T else 0.0

    def alpha_prime(self, t: float) -> float:
        return -self.eps / self.T if t < self.T else 0.0

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        al = self.alpha(t)
        alp = self.alpha_prime(t)
        mats = self.base.jac(t, pts) + al * self.h.jac(pts)
        rhs = self.base.dtime(t, pts) + alp * self.h(pts)
        return -linalg.solve_batch(mats, rhs)

    def switch_times(self, t_lo, t_hi):
        base = self.base.field.switch_times(t_lo, t_hi) if self.base.field is not None else []
        extra = [self.T] if t_lo < self.T < t_hi else []
        return sorted(set(base + extra))

    def params(self):
        return {"eps": self.eps, "T": self.T, "h": self.h.to_config(), "base": self.base.label}


@dataclass(frozen=True, eq=False)
class ReparamField(FieldSpec):
    """Field of the reparametrized chain g_t(z) = f_{t - alpha(t)}(e^{alpha(t)} z):

        G_g(z, t) = e^{-alpha(t)} (1 - alpha'(t)) G(e^{alpha(t)} z, t - alpha(t)) - alpha'(t) z,

    where alpha is the piecewise-linear tent over (T1, T2) with slope -/+ A.
    """

    base_field: FieldSpec
    t1: float
    t2: float
    A: float
    kind: str = "reparam"

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.base_field.n

    @property
    def midpoint(self) -> float:
        return self.t1 + 0.5 * (self.t2 - self.t1)

    def alpha(self, t: float) -> float:
        if t <= self.t1 or t >= self.t2:
            return 0.0
        if t < self.midpoint:
            return -self.A * (t - self.t1)
        return self.A * (t - self.t2)

    def alpha_prime(self, t: float) -> float:
        if t <= self.t1 or t >= self.t2:
            return 0.0
        if t < self.midpoint:
            return -self.A
        return self.A

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        al = self.alpha(t)
        alp = self.alpha_prime(t)
        u = t - al
        scale = np.exp(al)
        g_base = self.base_field.value(scale * pts, u)
        return (1.0 - alp) / scale * g_base - alp * pts

    def switch_times(self, t_lo, t_hi):
        pts = {s for s in (self.t1, self.midpoint, self.t2) if t_lo < s < t_hi}
        # map base switch times sigma back through the monotone u = t - alpha(t)
        base = self.base_field.switch_times(0.0, max(t_hi + self.A * (self.t2 - self.t1), t_hi) + 1.0)
        for sigma in base:
            for cand in (
                sigma,
                (sigma + self.A * self.t1) / (1.0 + self.A),
                (sigma - self.A * self.t2) / (1.0 - self.A),
            ):
                if t_lo < cand < t_hi and abs((cand - self.alpha(cand)) - sigma) < 1e-12:
                    pts.add(cand)
        return sorted(pts)

    def params(self):
        return {"t1": self.t1, "t2": self.t2, "A": self.A, "base": self.base_field.describe()}


@dataclass(frozen=True, eq=False)
class DilatedField(FieldSpec):
    """G(z, t) = (1/r) G_base(r z, t): the field of (1/r) g_t(r z)."""

    base_field: FieldSpec
    r: float
    kind: str = "dilated"

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.base_field.n

    def value(self, points, t):
        pts = np.asarray(points, dtype=complex)
        return self.base_field.value(self.r * pts, t) / self.r

    def switch_times(self, t_lo, t_hi):
        return self.base_field.switch_times(t_lo, t_hi)

    def params(self):
        return {"r": self.r, "base": self.base_field.describe()}


@dataclass(frozen=True, eq=False)
class CustomField(FieldSpec):
    fn: Callable[[np.ndarray, float], np.ndarray]
    n: int
    label: str = "custom"
    breaks: tuple = ()
    kind: str = "custom"

    def value(self, points, t):
        return np.asarray(self.fn(np.asarray(points, dtype=complex), t), dtype=complex)

    def switch_times(self, t_lo, t_hi):
        return [s for s in self.breaks if t_lo < s < t_hi]

    def params(self):
        return {"label": self.label}


def _cauchy_jac(m: Map, pts: np.ndarray) -> np.ndarray:
    # local import: evolve owns the quadrature rule but imports this module
    from .evolve import jacobian_batch

    return jacobian_batch(m, pts)


# ---------------------------------------------------------------------------
# evaluation and sampled class-M membership
# ---------------------------------------------------------------------------


def eval_field(spec: FieldSpec, z, t: float):
    """G(z, t) with domain checks; z may be one point or a stack."""
    if t < 0.0:
        raise DomainError(f"time {t} is negative")
    pts, single = as_points(z, spec.n)
    r = norms(pts)
    if np.any(r >= 1.0):
        raise DomainError("point lies outside the open unit ball")
    vals = spec.value(pts, t)
    return vals[0] if single else vals


def squeeze_margins(spec: FieldSpec, points: np.ndarray, t: float) -> np.ndarray:
    """Pointwise margins -Re<G(z,t), z> / |z|^2 for a stack of points."""
    pts = np.asarray(points, dtype=complex)
    vals = spec.value(pts, t)
    num = -np.real(np.sum(vals * np.conj(pts), axis=1))
    return num / np.sum(np.abs(pts) ** 2, axis=1)


def local_squeeze_margin(spec: FieldSpec, z, t: float) -> float:
    """-Re<G(z,t), z>/|z|^2 at one point; its infimum is the candidate ratio."""
    pts, _ = as_points(z, spec.n)
    r = norms(pts)
    if np.any(r == 0.0):
        raise DomainError("margin undefined at the origin")
    if np.any(r >= 1.0):
        raise DomainError("point lies outside the open unit ball")
    return float(squeeze_margins(spec, pts, t)[0])


@dataclass(frozen=True)
class MembershipReport:
    """Grid evidence that -G(., t) stays in class M over an interval."""

    interval: tuple
    grid_size: int
    min_margin: float
    worst_point: tuple
    worst_time: float
    verdict: str
    tolerance: float = MEMBERSHIP_TOL

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "interval": [self.interval[0], self.interval[1]],
            "grid_size": self.grid_size,
            "min_margin": self.min_margin,
            "worst_point": [[c.real, c.imag] for c in self.worst_point],
            "worst_time": self.worst_time,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
        }


def check_class_M(
    spec: FieldSpec,
    interval: tuple,
    grid: SamplingPlan,
    tol: float = MEMBERSHIP_TOL,
    collect_samples: bool = False,
):
    """Sample the membership margin over grid x times.

    Pass iff the minimum margin is >= -tol; catalog fields are exact, so
    only rounding noise is forgiven.  Returns the report, plus the raw
    (t, z, margin) rows when collect_samples is set.
    """
    t_lo, t_hi = float(interval[0]), float(interval[1])
    pts = grid.points(spec.n)
    times = grid.times(t_lo, t_hi)
    worst = np.inf
    worst_z = pts[0]
    worst_t = times[0]
    rows = [] if collect_samples else None
    for t in times:
        try:
            margins = squeeze_margins(spec, pts, float(t))
        except Exception as exc:  # noqa: BLE001 - annotate and re-raise
            raise type(exc)(f"field evaluation failed at t={t}: {exc}") from exc
        k = int(np.argmin(margins))
        if margins[k] < worst:
            worst = float(margins[k])
            worst_z = pts[k]
            worst_t = float(t)
        if rows is not None:
            rows.extend((float(t), pts[i], float(margins[i])) for i in range(pts.shape[0]))
    verdict = "pass" if worst >= -tol else "fail"
    report = MembershipReport(
        interval=(t_lo, t_hi),
        grid_size=pts.shape[0] * len(times),
        min_margin=worst,
        worst_point=tuple(worst_z),
        worst_time=worst_t,
        verdict=verdict,
        tolerance=tol,
    )
    if collect_samples:
        return report, rows
    return report
