"""Evolution families, chain recovery, and holomorphic differentiation.

The transition maps phi_{s,t} of a chain driven by a vector field G solve

    d phi_{s,t} / dt (z) = G(phi_{s,t}(z), t),     phi_{s,s}(z) = z,

and contract the ball (|phi_{s,t}(z)| <= |z|, enforced at runtime with a
small tolerance).  The chain itself is recovered from the flow by

    f_s(z) = lim_{T -> oo} e^T phi_{s,T}(z),

evaluated at a doubling horizon schedule until two successive horizons
agree.  Jacobians of holomorphic maps are computed by circle quadrature of
Cauchy integrals, which is exact for polynomials of degree below the
sample count.

Integration is batched: a stack of initial points is advanced as one state
array, with the step controller driven by the worst point.  The driving
field is only measurable in time, so steps never straddle the switch times
a FieldSpec declares.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConsistencyError,
    DomainError,
    HorizonError,
    InputError,
    IntegrationError,
    UnsupportedChainError,
)
from .fields import FieldSpec, LinearRadialField
from .maps import as_points
from .sampling import norms

#: horizon offsets used when recovering a chain from its flow
HORIZON_OFFSETS = (5.0, 10.0, 20.0, 40.0)
#: default convergence tolerance for successive horizon doublings
HORIZON_CONV_TOL = 1e-6
#: slack factor applied to the family tolerance in ball-contraction checks
SCHWARZ_SLACK = 10.0

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_ERR = _B5 - _B4


@dataclass(frozen=True)
class EvolutionFamily:
    """A vector field plus integration accuracy targets."""

    spec: FieldSpec
    tol: float = 1e-9
    max_step: float = 0.05

    @property
    def n(self) -> int:
        return self.spec.n


def _rk_segment(fam: EvolutionFamily, t0: float, t1: float, y: np.ndarray) -> np.ndarray:
    """Advance the batched state from t0 to t1 (no interior switch times)."""
    if t1 <= t0:
        return y
    spec = fam.spec
    tol = fam.tol
    t = t0
    h = min(fam.max_step, t1 - t0)
    hmin = max(1e-13, 1e-13 * (t1 - t0))
    eps_end = 1e-14 * max(1.0, abs(t1))
    # Switch times are right-continuous, so a segment ending exactly at a
    # switch must see the left branch: clamp stage times just inside.
    t_clamp = t1 - 1e-12 * max(1.0, abs(t1))

    def rhs(state, tau):
        return spec.value(state, min(tau, t_clamp))

    k1 = rhs(y, t)
    while t1 - t > eps_end:
        h = min(h, t1 - t, fam.max_step)
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(rhs(yi, t + _C[i] * h))
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
        # ks[6] was evaluated at y5 already (FSAL property of the tableau)
        err_vec = h * sum(e * k for e, k in zip(_ERR, ks) if e != 0.0)
        err = float(np.max(np.sqrt(np.sum(np.abs(err_vec) ** 2, axis=-1))))
        if err <= tol * h:
            t = t + h
            y = y5
            k1 = ks[6]
            if np.max(np.sum(np.abs(y) ** 2, axis=-1)) > (1.0 + SCHWARZ_SLACK * tol) ** 2:
                raise ConsistencyError(f"trajectory left the unit ball near t = {t:.6g}")
            factor = 0.9 * (tol * h / err) ** 0.2 if err > 0.0 else 5.0
            h = h * min(5.0, max(0.2, factor))
        else:
            if h <= hmin:
                raise IntegrationError(
                    f"step size underflow at t = {t:.6g} (unresolved field discontinuity?)",
                    t=t,
                )
            h = max(hmin, h * min(0.9, max(0.1, 0.9 * (tol * h / err) ** 0.2)))
    return y


def _integrate_checkpoints(
    fam: EvolutionFamily, s: float, checkpoints: Sequence[float], y: np.ndarray
) -> list[np.ndarray]:
    """States at each checkpoint time (ascending, all >= s)."""
    cps = list(checkpoints)
    if any(c < s for c in cps) or any(cps[i] > cps[i + 1] for i in range(len(cps) - 1)):
        raise InputError("checkpoints must be ascending and >= s")
    out = []
    t_cur = s
    state = y
    for cp in cps:
        if cp > t_cur:
            breaks = fam.spec.switch_times(t_cur, cp)
            knots = [t_cur] + sorted(b for b in breaks if t_cur < b < cp) + [cp]
            for a, b in zip(knots[:-1], knots[1:]):
                state = _rk_segment(fam, a, b, state)
            t_cur = cp
        out.append(state.copy())
    return out


def integrate_evolution(fam: EvolutionFamily, s: float, t: float, z):
    """phi_{s,t}(z) by adaptive integration; z may be a point or a stack.

    Enforces 0 <= s <= t, |z| < 1, and the ball-contraction bound
    |phi_{s,t}(z)| <= |z| + slack.
    """
    if not (0.0 <= s <= t):
        raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
    pts, single = as_points(z, fam.n)
    r0 = norms(pts)
    if np.any(r0 >= 1.0):
        raise DomainError("initial point lies outside the open unit ball")
    if t == s:
        return pts[0] if single else pts
    out = _integrate_checkpoints(fam, s, [t], pts)[0]
    slack = SCHWARZ_SLACK * fam.tol
    if np.any(norms(out) > r0 + slack):
        worst = int(np.argmax(norms(out) - r0))
        raise ConsistencyError(
            f"contraction violated at sample {worst}: |phi| = {norms(out)[worst]:.12g} "
            f"> |z| = {r0[worst]:.12g} + {slack:.1e}"
        )
    return out[0] if single else out


@dataclass(frozen=True)
class RecoveredValue:
    """Chain value from the horizon schedule plus its convergence evidence."""

    value: np.ndarray
    achieved_diff: float
    horizon: float


def recover_chain(
    fam: EvolutionFamily, s: float, z, conv_tol: float = HORIZON_CONV_TOL
) -> RecoveredValue:
    """f_s(z) = e^T phi_{s,T}(z) at the first converged horizon.

    Convergence means two successive horizon doublings differ by less than
    conv_tol relative to max(1, value scale) in the worst point; otherwise
    a HorizonError reports the achieved difference.  The returned value is
    the later of the two agreeing horizons.
    """
    if s < 0.0:
        raise DomainError(f"need s >= 0, got {s}")
    pts, single = as_points(z, fam.n)
    if np.any(norms(pts) >= 1.0):
        raise DomainError("initial point lies outside the open unit ball")
    horizons = [s + off for off in HORIZON_OFFSETS]
    states = _integrate_checkpoints(fam, s, horizons, pts)
    prev = np.exp(horizons[0]) * states[0]
    diff = float("inf")
    for horizon, state in zip(horizons[1:], states[1:]):
        cur = np.exp(horizon) * state
        diff = float(np.max(np.sqrt(np.sum(np.abs(cur - prev) ** 2, axis=-1))))
        scale = max(1.0, float(np.max(np.sqrt(np.sum(np.abs(cur) ** 2, axis=-1)))))
        if diff < conv_tol * scale:
            value = cur[0] if single else cur
            return RecoveredValue(value=value, achieved_diff=diff, horizon=horizon)
        prev = cur
    raise HorizonError(
        f"no horizon convergence by T = {horizons[-1]:.3g} (last diff {diff:.3e})",
        achieved_diff=diff,
    )


def semigroup_defect(fam: EvolutionFamily, s: float, u: float, t: float, grid) -> float:
    """max over the grid of |phi_{s,t}(z) - phi_{u,t}(phi_{s,u}(z))|."""
    if not (s <= u <= t):
        raise DomainError(f"need s <= u <= t, got {s}, {u}, {t}")
    pts = grid.points(fam.n) if hasattr(grid, "points") else np.asarray(grid, dtype=complex)
    direct = integrate_evolution(fam, s, t, pts)
    via = integrate_evolution(fam, u, t, integrate_evolution(fam, s, u, pts))
    return float(np.max(np.sqrt(np.sum(np.abs(direct - via) ** 2, axis=-1))))


# ---------------------------------------------------------------------------
# Cauchy-integral differentiation
# ---------------------------------------------------------------------------


def jacobian_batch(map_fn, z: np.ndarray, radius=None, samples: int = 32) -> np.ndarray:
    """Jacobians d(map)_z for a stack of points, shape (m, n, n).

    Entry (j, k) is the circle quadrature
    (1 / samples) * sum_l map_j(z + r e^{i theta_l} e_k) e^{-i theta_l} / r,
    exact for polynomials of degree < samples.
    """
    pts, _ = as_points(z)
    m, n = pts.shape
    r0 = norms(pts)
    if np.any(r0 >= 1.0):
        raise DomainError("differentiation point lies outside the open unit ball")
    if radius is None:
        radii = np.minimum(0.1, 0.5 * (1.0 - r0))
    else:
        radii = np.full(m, float(radius))
        if np.any(r0 + radii >= 1.0):
            raise DomainError("circle radius pushes samples outside the unit ball")
    theta = 2.0 * np.pi * np.arange(samples) / samples
    phases = np.exp(1j * theta)
    inv_phases = np.exp(-1j * theta)
    jac = np.empty((m, n, n), dtype=complex)
    for k in range(n):
        cloud = np.repeat(pts[:, None, :], samples, axis=1).astype(complex)
        cloud[:, :, k] += radii[:, None] * phases[None, :]
        vals = np.asarray(map_fn(cloud.reshape(m * samples, n)), dtype=complex)
        vals = vals.reshape(m, samples, n)
        jac[:, :, k] = (vals * inv_phases[None, :, None]).mean(axis=1) / radii[:, None]
    return jac


def jacobian(map_fn, z, radius=None, samples: int = 32) -> np.ndarray:
    """Jacobian matrix at a single point (see jacobian_batch)."""
    pts, single = as_points(z)
    out = jacobian_batch(map_fn, pts, radius=radius, samples=samples)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# chain handles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeraumigConstants:
    """Interval [t_start, t_end) constants: Jacobian floor a, time-derivative
    cap b, squeezing ratio; source records whether they are analytic or the
    grid statistics of a certificate."""

    t_start: float
    t_end: float
    a: float
    b: float
    ratio: float
    source: str = "analytic"

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "a": self.a,
            "b": self.b,
            "ratio": self.ratio,
            "source": self.source,
        }


@dataclass(eq=False)
class ChainHandle:
    """An evaluable family t -> f_t with normalization metadata.

    eval/jac/dtime all act on stacks of points.  Field-driven handles
    evaluate through the canonical recovery of their driving field; the
    Jacobian defaults to Cauchy quadrature of eval, and the time
    derivative to -jac * G (the chain PDE) when a field is attached.
    """

    n: int
    origin: str
    label: str
    field: FieldSpec | None = None
    normal: bool = True
    family: EvolutionFamily | None = None
    geraumig: GeraumigConstants | None = None
    certificates: list = dataclass_field(default_factory=list)
    eval_fn: Callable | None = None
    jac_fn: Callable | None = None
    dtime_fn: Callable | None = None

    def eval(self, t: float, z) -> np.ndarray:
        pts, single = as_points(z, self.n)
        if self.eval_fn is not None:
            out = self.eval_fn(t, pts)
        elif self.family is not None:
            out = recover_chain(self.family, t, pts).value
        else:
            raise UnsupportedChainError(f"chain {self.label!r} has no evaluation rule")
        return out[0] if single else out

    def jac(self, t: float, z) -> np.ndarray:
        pts, single = as_points(z, self.n)
        if self.jac_fn is not None:
            out = self.jac_fn(t, pts)
        else:
            out = jacobian_batch(lambda w: self.eval(t, w), pts)
        return out[0] if single else out

    def dtime(self, t: float, z) -> np.ndarray:
        pts, single = as_points(z, self.n)
        if self.dtime_fn is not None:
            out = self.dtime_fn(t, pts)
        elif self.field is not None:
            g = self.field.value(pts, t)
            out = -np.einsum("mjk,mk->mj", self.jac(t, pts), g)
        else:
            raise UnsupportedChainError(
                f"chain {self.label!r} has neither a time-derivative rule nor a driving field"
            )
        return out[0] if single else out

    def evolution_family(self) -> EvolutionFamily:
        if self.family is not None:
            return self.family
        if self.field is not None:
            return EvolutionFamily(self.field)
        raise UnsupportedChainError(
            f"chain {self.label!r} carries no driving field; transition maps are unavailable"
        )

    def normalization_defect(self, times: Sequence[float]) -> float:
        """max over times of |f_t(0)| and |d(f_t)_0 - e^t id| (sampled check)."""
        worst = 0.0
        origin = np.zeros((1, self.n), dtype=complex)
        for t in times:
            v0 = self.eval(t, origin)
            worst = max(worst, float(np.max(np.abs(v0))))
            j0 = self.jac(t, origin)[0]
            worst = max(worst, float(np.max(np.abs(j0 - np.exp(t) * np.eye(self.n)))))
        return worst


def chain_from_field(
    spec: FieldSpec,
    tol: float = 1e-9,
    max_step: float = 0.03,
    label: str | None = None,
) -> ChainHandle:
    """Canonical chain of a driving field (evaluated via horizon recovery).

    The step cap is tighter than the family default: recovery integrates to
    horizon ~40 and multiplies by e^T, so accumulated truncation must stay
    below the 1e-8 normalization checks (error scales like max_step^5).
    """
    fam = EvolutionFamily(spec, tol=tol, max_step=max_step)
    return ChainHandle(
        n=spec.n,
        origin="field",
        label=label or f"canonical[{spec.kind}]",
        field=spec,
        family=fam,
        normal=True,
    )


def identity_chain(n: int = 2, geraumig_horizon: float | None = None) -> ChainHandle:
    """The scaling chain f_t = e^t z, with exact constants on [0, T) if asked.

    On [0, T): the Jacobian floor is 1, the time-derivative cap is e^T, and
    the squeezing ratio is 1, all exact.
    """
    spec = LinearRadialField(n)
    handle = ChainHandle(
        n=n,
        origin="closed-form",
        label="identity",
        field=spec,
        family=EvolutionFamily(spec),
        normal=True,
        eval_fn=lambda t, pts: np.exp(t) * pts,
        jac_fn=lambda t, pts: np.broadcast_to(
            np.exp(t) * np.eye(n, dtype=complex), (pts.shape[0], n, n)
        ).copy(),
        dtime_fn=lambda t, pts: np.exp(t) * pts,
    )
    if geraumig_horizon is not None:
        handle.geraumig = GeraumigConstants(
            t_start=0.0,
            t_end=float(geraumig_horizon),
            a=1.0,
            b=float(np.exp(geraumig_horizon)),
            ratio=1.0,
            source="analytic",
        )
    return handle
