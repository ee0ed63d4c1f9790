"""Chain constructors: reparametrization, variation, dilation, and the
starlike / close-to-identity / evolution-to-ball families.

Every constructor returns a new immutable ChainHandle whose eval / jac /
dtime are assembled analytically from the base chain, together with the
derived driving field, so certificates of the constructed chain never
need numerical inversion of the base maps.

Constructions
-------------
* reparametrize a squeezing chain with the tent time-change
      alpha(t) = -A (t - T1)  then  A (t - T2)  over (T1, T2),
      g_t(z) = f_{t - alpha(t)}(e^{alpha(t)} z),
  which coincides with f outside (T1, T2) and is geraumig strictly inside;
* vary a geraumig chain by a small polynomial direction,
      g_t = f_t + alpha(t) h,   alpha(t) = eps (1 - t/T) on [0, T),
  admissible for |eps| <= eps0 = min{a/2, a^3 T / (2 (a + b T))};
* dilate: f_t(z) = (1/r) g_t(r z), squeezing with ratio at least the
  one-variable slice bound (1 - r) / (1 + r);
* close-to-identity: f with |df - id| <= c < 1 embeds via
      f_t(z) = f(e^{-t} z) + (e^t - e^{-t}) z,
  driven by the matrix generator E(z, t) = e^{-2t} [id - df_{e^{-t} z}];
* starlike truncation F^N(z) = N F^{-1}(F(z) / N) and the chain
      f_t(z) = N F^{-1}(e^t F(z) / N)  for t <= log N,  e^t z after,
  which evolves the truncated image onto the ball N * B^n at time log N.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .certify import GeraumigCertificate, find_certificate
from .errors import (
    InputError,
    ParameterError,
    PreconditionError,
    UnsupportedChainError,
)
from .evolve import ChainHandle, EvolutionFamily, GeraumigConstants, jacobian_batch
from .fields import (
    DilatedField,
    EMatrixField,
    PerturbedChainField,
    ReparamField,
    StarlikeField,
)
from .maps import Map, PolyMap
from .sampling import SamplingPlan, norms

#: safety factor applied to raw grid sup-norm estimates
SUP_SAFETY = 1.0 + 1e-3
#: slack for the <= 1 normalization bounds (the canonical directions attain
#: sup |dh| = 1 exactly in the boundary limit)
NORM_TOL = 1e-9
#: default inverse-consistency tolerance for starlike inputs
INVERSE_TOL = 1e-10

_DEFAULT_GRID = SamplingPlan()


# ---------------------------------------------------------------------------
# reparametrization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReparamPlan:
    """Tent time-change over (T1, T2) with slope A in (0, a)."""

    t1: float
    t2: float
    A: float

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
        return -self.A if t < self.midpoint else self.A


def reparam_geraumig(
    chain: ChainHandle, t1: float, t2: float, A: float, force: bool = False
) -> ChainHandle:
    """g_t(z) = f_{t - alpha(t)}(e^{alpha(t)} z) for a squeezing chain.

    Requires an attached passing squeeze certificate covering [t1, t2) with
    ratio above A (force skips the certificate lookup, not the A < 1 sanity
    bound).  The result coincides with the input chain outside (t1, t2).
    """
    if not (0.0 <= t1 < t2) or not np.isfinite(t2):
        raise ParameterError(f"need 0 <= T1 < T2 < inf, got [{t1}, {t2})")
    cert = find_certificate(chain, t1, t2, kind="squeeze")
    if cert is None or not cert.passed:
        if not force:
            raise PreconditionError(
                f"chain {chain.label!r} has no passing squeeze certificate on [{t1}, {t2}); "
                "certify first or pass force=True"
            )
        ratio = 1.0
    else:
        ratio = cert.ratio_a
    if not (0.0 < A < ratio):
        raise ParameterError(f"slope A = {A} must lie in (0, squeezing ratio = {ratio:g})")
    if chain.field is None:
        raise UnsupportedChainError("reparametrization needs the chain's driving field")

    plan = ReparamPlan(t1=t1, t2=t2, A=A)
    base = chain

    def eval_fn(t, pts):
        al = plan.alpha(t)
        return base.eval(t - al, np.exp(al) * pts)

    def jac_fn(t, pts):
        al = plan.alpha(t)
        return np.exp(al) * base.jac(t - al, np.exp(al) * pts)

    def dtime_fn(t, pts):
        al = plan.alpha(t)
        alp = plan.alpha_prime(t)
        w = np.exp(al) * pts
        u = t - al
        out = (1.0 - alp) * base.dtime(u, w)
        if alp != 0.0:
            out = out + alp * np.einsum("mjk,mk->mj", base.jac(u, w), w)
        return out

    field = ReparamField(base_field=chain.field, t1=t1, t2=t2, A=A)
    return ChainHandle(
        n=chain.n,
        origin="constructed",
        label=f"reparam[{chain.label}; A={A:g} on ({t1:g},{t2:g})]",
        field=field,
        family=EvolutionFamily(field, tol=1e-9, max_step=0.03),
        normal=chain.normal,
        eval_fn=eval_fn,
        jac_fn=jac_fn,
        dtime_fn=dtime_fn,
    )


# ---------------------------------------------------------------------------
# variation
# ---------------------------------------------------------------------------


def sampled_injectivity(map_fn, grid: SamplingPlan | None = None,
                        pair_count: int = 10_000, seed: int | None = None) -> float:
    """Worst pairwise separation ratio min |f(z) - f(w)| / |z - w| over
    sampled point pairs.

    A strictly positive result means no collision was detected; univalence
    itself is not decidable by sampling and is never certified.
    """
    grid = grid or _DEFAULT_GRID
    pts = grid.points(map_fn.n if hasattr(map_fn, "n") else 2)
    vals = np.asarray(map_fn(pts), dtype=complex)
    m = pts.shape[0]
    rng = np.random.Generator(np.random.PCG64(grid.seed if seed is None else seed))
    i = rng.integers(0, m, size=pair_count)
    j = rng.integers(0, m, size=pair_count)
    keep = i != j
    i, j = i[keep], j[keep]
    dz = norms(pts[i] - pts[j])
    df = norms(vals[i] - vals[j])
    return float(np.min(df / dz))


def variation_epsilon0(a: float, b: float, T: float) -> float:
    """Admissible variation size: min{a/2, a^3 T / (2 (a + b T))}."""
    if not (0.0 < a <= 1.0):
        raise ParameterError(f"constant a = {a} must lie in (0, 1]")
    if b <= 0.0 or not np.isfinite(b):
        raise ParameterError(f"constant b = {b} must be positive and finite")
    if T <= 0.0 or not np.isfinite(T):
        raise ParameterError(f"horizon T = {T} must be positive and finite")
    return min(a / 2.0, a**3 * T / (2.0 * (a + b * T)))


def perturbation_norms(h: PolyMap, grid: SamplingPlan | None = None) -> tuple[float, float]:
    """Estimated sup|h| and sup|dh| over the ball.

    Uses the larger of the raw grid maximum times a small safety factor and
    the Schwarz-style boundary extrapolation (|h(z)|/|z|^2 and |dh_z|/|z|,
    valid because h vanishes to second order at 0).  Coordinate-axis probes
    are always included; they carry the extremal directions of the
    monomial catalog.
    """
    grid = grid or _DEFAULT_GRID
    pts = grid.points(h.n)
    axes = np.zeros((4 * h.n, h.n), dtype=complex)
    for k in range(h.n):
        for i, phase in enumerate((1.0, 1.0j, np.exp(0.25j * np.pi), np.exp(1.1j))):
            axes[4 * k + i, k] = 0.5 * phase
    pts = np.concatenate([pts, axes], axis=0)
    r = norms(pts)
    hv = np.asarray(h(pts), dtype=complex)
    hn = norms(hv)
    sup_h = max(float(np.max(hn)) * SUP_SAFETY, float(np.max(hn / r**2)))
    dh = h.jac(pts)
    dn = linalg.operator_norm_batch(dh)
    sup_dh = max(float(np.max(dn)) * SUP_SAFETY, float(np.max(dn / r)))
    return sup_h, sup_dh


def validate_perturbation(h: PolyMap, grid: SamplingPlan | None = None) -> tuple[float, float]:
    """Check h(0) = 0, dh_0 = 0, sup|h| <= 1, sup|dh| <= 1 (sampled)."""
    for j, entries in enumerate(h.components):
        for idx, coeff in entries:
            if sum(idx) < 2 and coeff != 0.0:
                raise PreconditionError(
                    f"perturbation has a degree-{sum(idx)} term in component {j}; "
                    "h must vanish to second order at 0"
                )
    sup_h, sup_dh = perturbation_norms(h, grid)
    if sup_h > 1.0 + NORM_TOL:
        raise PreconditionError(f"estimated sup|h| = {sup_h:.6g} exceeds 1")
    if sup_dh > 1.0 + NORM_TOL:
        raise PreconditionError(f"estimated sup|dh| = {sup_dh:.6g} exceeds 1")
    return sup_h, sup_dh


@dataclass(frozen=True)
class VariationPlan:
    """Validated inputs for a chain variation."""

    T: float
    a: float
    b: float
    eps0: float
    eps: float
    h: PolyMap

    def alpha(self, t: float) -> float:
        return self.eps * (1.0 - t / self.T) if t < self.T else 0.0

    def alpha_prime(self, t: float) -> float:
        return -self.eps / self.T if t < self.T else 0.0

    @staticmethod
    def build(
        chain: ChainHandle,
        h: PolyMap,
        eps: float,
        grid: SamplingPlan | None = None,
        constants: GeraumigConstants | None = None,
        force: bool = False,
    ) -> "VariationPlan":
        consts = constants or chain.geraumig
        if consts is None:
            cert = None
            for c in chain.certificates:
                if isinstance(c, GeraumigCertificate) and c.passed and c.interval[0] == 0.0:
                    cert = c
            if cert is not None:
                consts = cert.constants()
        if consts is None:
            raise PreconditionError(
                f"chain {chain.label!r} carries no geraumig constants on [0, T); "
                "certify_geraumig it (or attach analytic constants) first"
            )
        if consts.t_start != 0.0:
            raise PreconditionError(
                f"variation needs geraumig data on [0, T); got start {consts.t_start}"
            )
        a = min(consts.a, consts.ratio)
        eps0 = variation_epsilon0(a, consts.b, consts.t_end)
        if abs(eps) > eps0:
            if not force:
                raise ParameterError(
                    f"|eps| = {abs(eps):.6g} exceeds eps0 = {eps0:.6g}; nothing is guaranteed "
                    "beyond eps0 (pass force=True to explore anyway)"
                )
            warnings.warn(
                f"variation size |eps| = {abs(eps):.6g} exceeds the admissible "
                f"eps0 = {eps0:.6g}; the result is exploratory and unguaranteed",
                stacklevel=3,
            )
        validate_perturbation(h, grid)
        return VariationPlan(T=consts.t_end, a=a, b=consts.b, eps0=eps0, eps=eps, h=h)


def apply_variation(
    chain: ChainHandle,
    h: PolyMap,
    eps: float,
    grid: SamplingPlan | None = None,
    constants: GeraumigConstants | None = None,
    force: bool = False,
) -> tuple[ChainHandle, PerturbedChainField]:
    """The varied chain g_t = f_t + alpha(t) h and its driving field.

    alpha(t) = eps (1 - t/T) on [0, T) and 0 after, so g coincides with f
    from time T on and g_0 = f_0 + eps h.  Refused when |eps| exceeds the
    admissible eps0 unless force is set.
    """
    plan = VariationPlan.build(chain, h, eps, grid=grid, constants=constants, force=force)
    T = plan.T
    base = chain

    def eval_fn(t, pts):
        al = plan.alpha(t)
        out = base.eval(t, pts)
        return out + al * h(pts) if al != 0.0 else out

    def jac_fn(t, pts):
        al = plan.alpha(t)
        out = base.jac(t, pts)
        return out + al * h.jac(pts) if al != 0.0 else out

    def dtime_fn(t, pts):
        alp = plan.alpha_prime(t)
        out = base.dtime(t, pts)
        return out + alp * h(pts) if alp != 0.0 else out

    field = PerturbedChainField(base=base, h=h, eps=eps, T=T)
    varied = ChainHandle(
        n=chain.n,
        origin="constructed",
        label=f"varied[{chain.label}; eps={eps:g}]",
        field=field,
        family=EvolutionFamily(field, tol=1e-9, max_step=0.03),
        normal=chain.normal,
        eval_fn=eval_fn,
        jac_fn=jac_fn,
        dtime_fn=dtime_fn,
    )
    return varied, field


# ---------------------------------------------------------------------------
# dilation
# ---------------------------------------------------------------------------


def dilate_chain(chain: ChainHandle, r: float) -> ChainHandle:
    """f_t(z) = (1/r) g_t(r z); margins obey the slice bound (1-r)/(1+r)."""
    if not (0.0 < r < 1.0):
        raise ParameterError(f"dilation factor r = {r} must lie in (0, 1)")
    base = chain
    field = DilatedField(base_field=chain.field, r=r) if chain.field is not None else None
    return ChainHandle(
        n=chain.n,
        origin="constructed",
        label=f"dilated[{chain.label}; r={r:g}]",
        field=field,
        family=EvolutionFamily(field, tol=1e-9, max_step=0.03) if field is not None else None,
        normal=chain.normal,
        eval_fn=lambda t, pts: base.eval(t, r * pts) / r,
        jac_fn=lambda t, pts: base.jac(t, r * pts),
        dtime_fn=lambda t, pts: base.dtime(t, r * pts) / r,
    )


# ---------------------------------------------------------------------------
# close-to-identity chains
# ---------------------------------------------------------------------------


def chain_from_close_to_identity(
    f: Map, c: float, grid: SamplingPlan | None = None
) -> tuple[ChainHandle, EMatrixField]:
    """Embed f with |df - id| <= c < 1 into f_t(z) = f(e^{-t} z) + (e^t - e^{-t}) z.

    The sampled bound is checked on the grid first; the driving field is the
    matrix generator with E(z, t) = e^{-2t} [id - df_{e^{-t} z}].
    """
    if not (0.0 < c < 1.0):
        raise ParameterError(f"bound c = {c} must lie in (0, 1)")
    grid = grid or _DEFAULT_GRID
    pts = grid.points(f.n)
    n = f.n

    def df(w):
        return f.jac(w) if f.has_jac() else jacobian_batch(f, w)

    dev = linalg.operator_norm_batch(df(pts) - np.eye(n))
    k = int(np.argmax(dev))
    if dev[k] > c:
        raise PreconditionError(
            f"sampled |df - id| = {dev[k]:.6g} exceeds c = {c} at z = {pts[k]}"
        )

    def e_fn(w, t):
        m = w.shape[0]
        eye = np.broadcast_to(np.eye(n, dtype=complex), (m, n, n))
        return np.exp(-2.0 * t) * (eye - df(np.exp(-t) * w))

    field = EMatrixField(e_fn=e_fn, n=n, c_bound=c, label="close-to-identity")

    def eval_fn(t, w):
        return np.asarray(f(np.exp(-t) * w), dtype=complex) + (np.exp(t) - np.exp(-t)) * w

    def jac_fn(t, w):
        m = w.shape[0]
        eye = np.broadcast_to(np.eye(n, dtype=complex), (m, n, n))
        return np.exp(-t) * df(np.exp(-t) * w) + (np.exp(t) - np.exp(-t)) * eye

    def dtime_fn(t, w):
        inner = np.exp(-t) * w
        jv = np.einsum("mjk,mk->mj", df(inner), inner)
        return -jv + (np.exp(t) + np.exp(-t)) * w

    handle = ChainHandle(
        n=n,
        origin="constructed",
        label=f"close-to-identity[c={c:g}]",
        field=field,
        family=EvolutionFamily(field, tol=1e-9, max_step=0.03),
        normal=True,
        eval_fn=eval_fn,
        jac_fn=jac_fn,
        dtime_fn=dtime_fn,
    )
    return handle, field


# ---------------------------------------------------------------------------
# starlike truncation and evolution-to-ball chains
# ---------------------------------------------------------------------------


def _check_inverse(F: Map, F_inv: Map, grid: SamplingPlan, tol: float = INVERSE_TOL):
    pts = grid.points(F.n)
    dev = float(np.max(norms(np.asarray(F_inv(F(pts)), dtype=complex) - pts)))
    if dev > tol:
        raise InputError(f"F_inv o F deviates from the identity by {dev:.3e} on the grid")


def starlike_truncate(F: Map, F_inv: Map, N: float, grid: SamplingPlan | None = None) -> Map:
    """The truncation z -> N F^{-1}(F(z) / N) of a starlike map."""
    if N <= 1.0:
        raise ParameterError(f"truncation level N = {N} must exceed 1")
    from .maps import TruncatedStarlikeMap

    _check_inverse(F, F_inv, grid or _DEFAULT_GRID)
    return TruncatedStarlikeMap(F=F, F_inv=F_inv, N=float(N))


def evolution_to_ball_chain(
    F: Map, F_inv: Map, N: float, grid: SamplingPlan | None = None
) -> ChainHandle:
    """Chain with f_0 = F^N evolving onto N * B^n at time log N.

        f_t(z) = N F^{-1}(e^t F(z) / N)   for t in [0, log N],
        f_t(z) = e^t z                    for t >= log N.

    The starlike necessary condition Re<[dF_z]^{-1} F(z), z> > 0 is sampled
    on the grid and the construction refused when it fails.
    """
    if N <= 1.0:
        raise ParameterError(f"level N = {N} must exceed 1")
    grid = grid or _DEFAULT_GRID
    _check_inverse(F, F_inv, grid)
    n = F.n
    pts = grid.points(n)
    jF = F.jac(pts) if F.has_jac() else jacobian_batch(F, pts)
    v = linalg.solve_batch(jF, np.asarray(F(pts), dtype=complex))
    margins = np.real(np.sum(v * np.conj(pts), axis=1))
    k = int(np.argmin(margins))
    if margins[k] <= 0.0:
        raise PreconditionError(
            f"starlike sample check failed: Re<[dF]^-1 F, z> = {margins[k]:.3e} at z = {pts[k]}"
        )

    t_switch = float(np.log(N))
    field = StarlikeField(F=F, t_switch=t_switch)

    def eval_fn(t, w):
        if t >= t_switch:
            return np.exp(t) * w
        return N * np.asarray(F_inv(np.exp(t) * np.asarray(F(w), dtype=complex) / N), dtype=complex)

    def jac_fn(t, w):
        m = w.shape[0]
        if t >= t_switch:
            return np.broadcast_to(np.exp(t) * np.eye(n, dtype=complex), (m, n, n)).copy()
        inner = np.exp(t) * np.asarray(F(w), dtype=complex) / N
        ji = F_inv.jac(inner) if F_inv.has_jac() else jacobian_batch(F_inv, inner)
        jf = F.jac(w) if F.has_jac() else jacobian_batch(F, w)
        return np.exp(t) * np.matmul(ji, jf)

    def dtime_fn(t, w):
        if t >= t_switch:
            return np.exp(t) * w
        g = field.value(w, t)
        return -np.einsum("mjk,mk->mj", jac_fn(t, w), g)

    return ChainHandle(
        n=n,
        origin="constructed",
        label=f"evolve-to-ball[N={N:g}]",
        field=field,
        family=EvolutionFamily(field, tol=1e-9, max_step=0.03),
        normal=True,
        eval_fn=eval_fn,
        jac_fn=jac_fn,
        dtime_fn=dtime_fn,
    )
