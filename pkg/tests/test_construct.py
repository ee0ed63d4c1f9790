"""Chain constructors: reparametrization, variation, dilation, embeddings."""

import numpy as np
import pytest

from loewner_lab.certify import certify_geraumig, certify_squeezing
from loewner_lab.construct import (
    ReparamPlan,
    apply_variation,
    chain_from_close_to_identity,
    dilate_chain,
    evolution_to_ball_chain,
    reparam_geraumig,
    starlike_truncate,
    validate_perturbation,
    variation_epsilon0,
)
from loewner_lab.errors import InputError, ParameterError, PreconditionError
from loewner_lab.evolve import ChainHandle, chain_from_field, identity_chain
from loewner_lab.fields import (
    ComponentwiseField,
    LinearRadialField,
    SlitExampleField,
    check_class_M,
    squeeze_margins,
)
from loewner_lab.maps import PolyMap, SUPPORT_COEFF, identity_map, support_map, support_map_inverse
from loewner_lab.sampling import SamplingPlan

T1, T2 = 1.0, 2.0
PLAN = SamplingPlan(radii=(0.3, 0.6, 0.9), directions=16, random_points=32, seed=7)
TINY = SamplingPlan(radii=(0.4, 0.8), directions=6, random_points=6, seed=7, times_per_interval=4)

H_CANONICAL = PolyMap.from_dicts([{(0, 2): 0.5}, {}])  # h(z) = (z2^2 / 2, 0)


def phi_chain():
    """Chain with f_0 = the quadratic support map, driven by -z."""
    phi = support_map()

    def eval_fn(t, pts):
        return phi(np.exp(t) * pts)

    def jac_fn(t, pts):
        return np.exp(t) * phi.jac(np.exp(t) * pts)

    def dtime_fn(t, pts):
        w = np.exp(t) * pts
        return np.einsum("mjk,mk->mj", phi.jac(w), w)

    return ChainHandle(
        n=2, origin="closed-form", label="support-map-scaling",
        field=LinearRadialField(2), normal=False,
        eval_fn=eval_fn, jac_fn=jac_fn, dtime_fn=dtime_fn,
    )


class TestReparam:
    def test_alpha_tent_shape(self):
        plan = ReparamPlan(t1=T1, t2=T2, A=0.5)
        mid = T1 + 0.5 * (T2 - T1)
        assert plan.alpha(0.5) == 0.0
        assert plan.alpha(T2 + 1.0) == 0.0
        assert plan.alpha(mid) == pytest.approx(-(T2 - T1) / 4)
        assert plan.alpha(T1 + 0.1) == pytest.approx(-0.05)
        assert plan.alpha_prime(T1 + 0.1) == -0.5
        assert plan.alpha_prime(mid + 0.1) == 0.5

    def test_identity_chain_invariant(self):
        chain = identity_chain(2)
        certify_squeezing(chain, (T1, T2), PLAN)
        g = reparam_geraumig(chain, T1, T2, A=0.5)
        pts = PLAN.points(2)
        for t in (0.5, 1.2, 1.5, 1.8, 3.0):
            assert np.max(np.abs(g.eval(t, pts) - np.exp(t) * pts)) <= 1e-12

    def test_matches_base_outside_window(self):
        chain = chain_from_field(SlitExampleField(T1, T2))
        certify_squeezing(chain, (T1, T2), TINY)
        g = reparam_geraumig(chain, T1, T2, A=0.5)
        z = np.array([[0.4, 0.3], [0.2j, 0.5]])
        for t in (0.3, 0.9, 2.0, 2.7):
            assert np.array_equal(g.eval(t, z), chain.eval(t, z))
        # and g_0 = f_0
        assert np.array_equal(g.eval(0.0, z), chain.eval(0.0, z))

    def test_reparam_field_margin_inside(self):
        # margin of the reparametrized field is (1 - alpha') a(t) + alpha' >= A > 0
        # strictly inside the window when the base ratio is 1
        chain = chain_from_field(SlitExampleField(T1, T2))
        certify_squeezing(chain, (T1, T2), TINY)
        g = reparam_geraumig(chain, T1, T2, A=0.5)
        pts = TINY.points(2)
        for t in (1.2, 1.5, 1.8):
            assert np.min(squeeze_margins(g.field, pts, t)) >= 0.5 - 1e-9

    def test_normalization_of_reparam_chain(self):
        chain = chain_from_field(SlitExampleField(T1, T2))
        certify_squeezing(chain, (T1, T2), TINY)
        g = reparam_geraumig(chain, T1, T2, A=0.5)
        assert g.normalization_defect([1.2, 1.6]) <= 1e-8

    def test_geraumig_certificate_inside(self):
        chain = chain_from_field(SlitExampleField(T1, T2))
        certify_squeezing(chain, (T1, T2), TINY)
        g = reparam_geraumig(chain, T1, T2, A=0.5)
        inner = (T1 + 0.1 * (T2 - T1), T2 - 0.1 * (T2 - T1))
        cert = certify_geraumig(g, inner, TINY)
        assert cert.passed

    def test_requires_certificate(self):
        chain = chain_from_field(SlitExampleField(T1, T2))
        with pytest.raises(PreconditionError):
            reparam_geraumig(chain, T1, T2, A=0.5)
        # force skips the lookup
        g = reparam_geraumig(chain, T1, T2, A=0.5, force=True)
        assert g.n == 2

    def test_slope_must_be_below_ratio(self):
        chain = identity_chain(2)
        certify_squeezing(chain, (T1, T2), PLAN)
        with pytest.raises(ParameterError):
            reparam_geraumig(chain, T1, T2, A=1.0)
        with pytest.raises(ParameterError):
            reparam_geraumig(chain, T1, T2, A=0.0)


class TestVariationEpsilon0:
    def test_identity_chain_constants(self):
        got = variation_epsilon0(1.0, np.e, 1.0)
        assert got == pytest.approx(1.0 / (2.0 * (1.0 + np.e)), abs=1e-15)
        # 30-digit value of 1/(2(1+e)): 0.134470710684997560374420379089
        assert got == pytest.approx(0.134470710684997560, abs=1e-12)

    def test_vanishing_b_limit(self):
        assert variation_epsilon0(1.0, 1e-12, 1.0) == pytest.approx(0.5, abs=1e-9)

    def test_hand_arithmetic(self):
        assert variation_epsilon0(0.5, 1.0, 2.0) == pytest.approx(0.05, abs=1e-15)

    @pytest.mark.parametrize("a,b,T", [(0.0, 1.0, 1.0), (1.5, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, -1.0)])
    def test_bad_parameters(self, a, b, T):
        with pytest.raises(ParameterError):
            variation_epsilon0(a, b, T)


class TestPerturbationValidation:
    def test_canonical_direction_passes(self):
        sup_h, sup_dh = validate_perturbation(H_CANONICAL, PLAN)
        assert sup_h <= 0.51
        assert sup_dh <= 1.0 + 1e-9

    def test_oversized_direction_rejected(self):
        with pytest.raises(PreconditionError):
            validate_perturbation(PolyMap.from_dicts([{(0, 2): 1.0}, {}]), PLAN)

    def test_low_order_terms_rejected(self):
        with pytest.raises(PreconditionError):
            validate_perturbation(PolyMap.from_dicts([{(0, 1): 0.1}, {}]), PLAN)


class TestApplyVariation:
    def test_eps_zero_unchanged(self):
        chain = identity_chain(2, geraumig_horizon=1.0)
        varied, _ = apply_variation(chain, H_CANONICAL, 0.0, grid=PLAN)
        pts = PLAN.points(2)
        for t in (0.0, 0.5, 2.0):
            assert np.array_equal(varied.eval(t, pts), chain.eval(t, pts))

    def test_initial_element_shift(self):
        chain = identity_chain(2, geraumig_horizon=1.0)
        varied, _ = apply_variation(chain, H_CANONICAL, 0.1, grid=PLAN)
        z = np.array([[0.2, 0.4], [0.1j, 0.5]])
        want = np.stack([z[:, 0] + 0.05 * z[:, 1] ** 2, z[:, 1]], axis=1)
        assert np.max(np.abs(varied.eval(0.0, z) - want)) <= 1e-15

    def test_perturbed_field_class_m_at_eps_ladder(self):
        chain = identity_chain(2, geraumig_horizon=1.0)
        eps0 = variation_epsilon0(1.0, np.e, 1.0)
        for eps in (eps0 / 4, eps0 / 2, eps0, -eps0):
            _, field = apply_variation(chain, H_CANONICAL, eps, grid=PLAN)
            rep = check_class_M(field, (0.0, 2.0), PLAN)
            assert rep.passed
            assert rep.min_margin >= -1e-9

    def test_varied_chain_normalization(self):
        chain = identity_chain(2, geraumig_horizon=1.0)
        eps0 = variation_epsilon0(1.0, np.e, 1.0)
        varied, _ = apply_variation(chain, H_CANONICAL, eps0, grid=PLAN)
        assert varied.normalization_defect([0.0, 0.5, 0.9, 2.0]) <= 1e-8

    def test_matches_base_after_horizon(self):
        chain = identity_chain(2, geraumig_horizon=1.0)
        varied, _ = apply_variation(chain, H_CANONICAL, 0.1, grid=PLAN)
        pts = PLAN.points(2)
        for t in (1.0, 1.7, 4.0):
            assert np.array_equal(varied.eval(t, pts), chain.eval(t, pts))

    def test_midpoint_decomposition(self):
        # f_0 is the average of the two extreme variations
        chain = identity_chain(2, geraumig_horizon=1.0)
        eps0 = variation_epsilon0(1.0, np.e, 1.0)
        plus, _ = apply_variation(chain, H_CANONICAL, eps0, grid=PLAN)
        minus, _ = apply_variation(chain, H_CANONICAL, -eps0, grid=PLAN)
        z = PLAN.points(2)
        mid = 0.5 * (plus.eval(0.0, z) + minus.eval(0.0, z))
        assert np.max(np.abs(mid - chain.eval(0.0, z))) <= 1e-15

    def test_eps_beyond_eps0_refused_then_forced(self):
        chain = identity_chain(2, geraumig_horizon=1.0)
        eps0 = variation_epsilon0(1.0, np.e, 1.0)
        with pytest.raises(ParameterError):
            apply_variation(chain, H_CANONICAL, 1.5 * eps0, grid=PLAN)
        with pytest.warns(UserWarning, match="exploratory"):
            varied, _ = apply_variation(chain, H_CANONICAL, 1.5 * eps0, grid=PLAN, force=True)
        assert varied.n == 2

    def test_requires_geraumig_data(self):
        chain = identity_chain(2)  # no horizon, no constants
        with pytest.raises(PreconditionError):
            apply_variation(chain, H_CANONICAL, 0.01, grid=PLAN)

    def test_constants_from_certificate(self):
        chain = chain_from_field(SlitExampleField(0.0, 10.0))  # radial window covers [0, 1)
        certify_geraumig(chain, (0.0, 1.0), TINY)
        varied, field = apply_variation(chain, H_CANONICAL, 1e-3, grid=TINY)
        rep = check_class_M(field, (0.0, 1.5), TINY)
        assert rep.passed


class TestDilate:
    def test_identity_chain_fixed(self):
        chain = identity_chain(2)
        for r in (0.3, 0.7):
            d = dilate_chain(chain, r)
            pts = PLAN.points(2)
            assert np.max(np.abs(d.eval(1.0, pts) - np.e * pts)) <= 1e-13

    def test_support_map_truncation_via_dilation(self):
        # (1/r) Phi(r z) with r = 1 - 1/N reproduces the truncated coefficient
        N = 3.0
        r = 1.0 - 1.0 / N
        d = dilate_chain(phi_chain(), r)
        z = np.array([[0.3, 0.4], [0.1, 0.2j]])
        trunc = starlike_truncate(support_map(), support_map_inverse(), N)
        assert np.max(np.abs(d.eval(0.0, z) - trunc(z))) <= 1e-12

    def test_margin_bound_on_catalog_fields(self):
        # dilated field margin >= (1 - r)/(1 + r) - 1e-6 on the grid
        bases = [
            chain_from_field(SlitExampleField(10.0, 11.0)),  # theta = 0 on [0, 2)
            chain_from_field(ComponentwiseField(slices=("cayley", "cayley"))),
            identity_chain(2),
        ]
        pts = PLAN.points(2)
        for base in bases:
            for r in (0.3, 0.5, 0.7):
                d = dilate_chain(base, r)
                bound = (1 - r) / (1 + r)
                for t in (0.0, 1.0):
                    assert np.min(squeeze_margins(d.field, pts, t)) >= bound - 1e-6

    def test_squeeze_certificate_with_slice_ratio(self):
        base = chain_from_field(ComponentwiseField(slices=("cayley", "cayley")))
        d = dilate_chain(base, 0.5)
        cert = certify_squeezing(d, (0.0, 1.0), PLAN)
        assert cert.passed
        assert cert.ratio_a >= (1 - 0.5) / (1 + 0.5) - 1e-6

    def test_bad_factor(self):
        with pytest.raises(ParameterError):
            dilate_chain(identity_chain(2), 1.0)
        with pytest.raises(ParameterError):
            dilate_chain(identity_chain(2), 0.0)


class TestCloseToIdentity:
    def test_identity_gives_scaling_chain(self):
        handle, _ = chain_from_close_to_identity(identity_map(2), c=0.5, grid=PLAN)
        pts = PLAN.points(2)
        assert np.max(np.abs(handle.eval(1.0, pts) - np.e * pts)) <= 1e-13

    def test_quadratic_example_margin_bound(self):
        f = PolyMap.from_dicts([{(1, 0): 1.0, (2, 0): 0.3}, {(0, 1): 1.0}])
        handle, field = chain_from_close_to_identity(f, c=0.6, grid=PLAN)
        # |E| <= c on the grid across times
        pts = PLAN.points(2)
        for t in (0.0, 0.5, 2.0):
            from loewner_lab.linalg import operator_norm_batch

            assert np.max(operator_norm_batch(field.e_fn(pts, t))) <= 0.6 + 1e-12
        # margin lower bound at |z| = 0.5 from the two-sided pinch
        z = np.array([[0.5 / np.sqrt(2), 0.5 / np.sqrt(2)]])
        m = squeeze_margins(field, z, 0.0)[0] * 0.25
        assert m >= 0.25 * 0.7 / 1.3 - 1e-9
        assert m >= 0.134615 - 1e-4

    def test_two_sided_pinch_on_grid(self):
        f = PolyMap.from_dicts([{(1, 0): 1.0, (2, 0): 0.3}, {(0, 1): 1.0}])
        _, field = chain_from_close_to_identity(f, c=0.6, grid=PLAN)
        pts = PLAN.points(2)
        r = np.sqrt(np.sum(np.abs(pts) ** 2, axis=1))
        c = 0.6
        for t in (0.0, 1.0):
            re_h = squeeze_margins(field, pts, t) * r**2
            assert np.all(re_h >= r**2 * (1 - c * r) / (1 + c * r) - 1e-12)
            assert np.all(re_h <= r**2 * (1 + c * r) / (1 - c * r) + 1e-12)

    def test_chain_formula_and_normalization(self):
        f = PolyMap.from_dicts([{(1, 0): 1.0, (2, 0): 0.3}, {(0, 1): 1.0}])
        handle, _ = chain_from_close_to_identity(f, c=0.6, grid=PLAN)
        z = np.array([[0.4, 0.5]])
        t = 0.7
        want = f(np.exp(-t) * z) + (np.exp(t) - np.exp(-t)) * z
        assert np.max(np.abs(handle.eval(t, z) - want)) <= 1e-15
        assert handle.normalization_defect([0.0, 1.0]) <= 1e-10

    def test_far_from_identity_refused(self):
        f = PolyMap.from_dicts([{(1, 0): 1.0, (2, 0): 0.6}, {(0, 1): 1.0}])
        with pytest.raises(PreconditionError):
            chain_from_close_to_identity(f, c=0.6, grid=PLAN)


class TestStarlikeTruncate:
    def test_support_map_at_three(self):
        trunc = starlike_truncate(support_map(), support_map_inverse(), 3.0, grid=PLAN)
        z = np.array([[0.2, 0.5], [0.3j, 0.4]])
        want = np.stack([z[:, 0] + np.sqrt(3.0) * z[:, 1] ** 2, z[:, 1]], axis=1)
        assert np.max(np.abs(trunc(z) - want)) <= 1e-12

    def test_large_n_limit(self):
        trunc = starlike_truncate(support_map(), support_map_inverse(), 1e6, grid=PLAN)
        phi = support_map()
        pts = PLAN.points(2)
        assert np.max(np.abs(trunc(pts) - phi(pts))) <= 1e-5

    def test_identity_fixed(self):
        trunc = starlike_truncate(identity_map(2), identity_map(2), 7.0, grid=PLAN)
        pts = PLAN.points(2)
        assert np.max(np.abs(trunc(pts) - pts)) <= 1e-14

    def test_wrong_inverse_rejected(self):
        with pytest.raises(InputError):
            starlike_truncate(support_map(), identity_map(2), 3.0, grid=PLAN)


class TestEvolutionToBall:
    def test_identity_scaling(self):
        chain = evolution_to_ball_chain(identity_map(2), identity_map(2), 3.0, grid=PLAN)
        pts = PLAN.points(2)
        for t in (0.0, 0.5, np.log(3.0), 2.0):
            assert np.max(np.abs(chain.eval(t, pts) - np.exp(t) * pts)) <= 1e-13

    def test_support_map_endpoints(self):
        chain = evolution_to_ball_chain(support_map(), support_map_inverse(), 3.0, grid=PLAN)
        z = np.array([[0.2, 0.4], [0.1, 0.3j]])
        # at t = log N the image is the ball of radius N
        assert np.max(np.abs(chain.eval(np.log(3.0), z) - 3.0 * z)) <= 1e-12
        # at t = 0 the initial element is the truncation
        want = np.stack([z[:, 0] + np.sqrt(3.0) * z[:, 1] ** 2, z[:, 1]], axis=1)
        assert np.max(np.abs(chain.eval(0.0, z) - want)) <= 1e-12

    def test_normalization_and_subordination(self):
        chain = evolution_to_ball_chain(support_map(), support_map_inverse(), 3.0, grid=PLAN)
        assert chain.normalization_defect([0.0, 0.5, 1.0, 1.5]) <= 1e-10
        # image growth: |phi_{s,t}(z)| < 1 for s < t <= log N
        from loewner_lab.evolve import integrate_evolution

        fam = chain.evolution_family()
        pts = PLAN.points(2)
        for s, t in ((0.0, 0.5), (0.2, np.log(3.0)), (0.5, 2.0)):
            r = np.sqrt(np.sum(np.abs(integrate_evolution(fam, s, t, pts)) ** 2, axis=1))
            assert np.all(r < 1.0)

    def test_non_starlike_refused(self):
        from loewner_lab.maps import support_map as smap, support_map_inverse as sinv

        with pytest.raises(PreconditionError):
            evolution_to_ball_chain(smap(6.0), sinv(6.0), 3.0, grid=PLAN)

    def test_bad_level(self):
        with pytest.raises(ParameterError):
            evolution_to_ball_chain(identity_map(2), identity_map(2), 1.0, grid=PLAN)


class TestCrossModuleConsistency:
    def test_perturbed_field_canonical_recovery(self):
        # the varied chain solves the chain PDE for its perturbed field and
        # stays normal, so horizon recovery of that field at s = 0 must
        # reproduce the varied initial element
        from loewner_lab.evolve import EvolutionFamily, recover_chain

        chain = identity_chain(2, geraumig_horizon=1.0)
        eps0 = variation_epsilon0(1.0, np.e, 1.0)
        varied, field = apply_variation(chain, H_CANONICAL, eps0, grid=TINY)
        fam = EvolutionFamily(field, max_step=0.03)
        z = np.array([[0.3, 0.5], [0.2j, 0.4], [0.5, -0.3j]])
        rec = recover_chain(fam, 0.0, z)
        assert np.max(np.abs(rec.value - varied.eval(0.0, z))) <= 1e-8

    def test_evolution_to_ball_boundedness(self):
        # at t -> log N the chain image approaches the ball of radius N
        from loewner_lab.certify import boundedness_report, certify_squeezing

        N = 3.0
        chain = evolution_to_ball_chain(support_map(), support_map_inverse(), N, grid=PLAN)
        plan = SamplingPlan(radii=(0.5, 0.9), directions=8, random_points=8, seed=7,
                            times_per_interval=5)
        certify_squeezing(chain, (0.0, np.log(N)), plan)
        sup = boundedness_report(chain, (0.0, np.log(N)), plan)
        assert sup <= N
        assert sup >= 0.85 * N

    def test_certify_needs_driving_field_for_flow_leg(self):
        # chains without a driving field cannot realize f_t^{-1} o f_s
        from loewner_lab.certify import certify_squeezing
        from loewner_lab.errors import UnsupportedChainError

        bare = ChainHandle(
            n=2, origin="constructed", label="bare", field=None, normal=True,
            eval_fn=lambda t, pts: np.exp(t) * pts,
            jac_fn=lambda t, pts: np.broadcast_to(
                np.exp(t) * np.eye(2, dtype=complex), (pts.shape[0], 2, 2)
            ).copy(),
            dtime_fn=lambda t, pts: np.exp(t) * pts,
        )
        with pytest.raises(UnsupportedChainError):
            certify_squeezing(bare, (0.0, 1.0), TINY)

    def test_three_dimensional_catalog(self):
        # nothing in the pipeline is pinned to n = 2
        from loewner_lab.certify import certify_squeezing

        field = ComponentwiseField(slices=("cayley", "const", "one-minus"))
        chain = chain_from_field(field)
        plan = SamplingPlan(radii=(0.4, 0.8), directions=8, random_points=8, seed=5,
                            times_per_interval=3)
        # claim the slice-bound ratio: sparse direction grids on S^5 would
        # overstate the infimum and get vetoed by the flow leg
        bound = (1 - 0.5) / (1 + 0.5)
        cert = certify_squeezing(dilate_chain(chain, 0.5), (0.0, 1.0), plan, ratio_claim=bound)
        assert cert.passed
        assert cert.ratio_a >= bound - 1e-6


class TestSampledInjectivity:
    def test_varied_extremes_stay_injective_on_samples(self):
        from loewner_lab.construct import sampled_injectivity
        from loewner_lab.maps import CallableMap

        chain = identity_chain(2, geraumig_horizon=1.0)
        eps0 = variation_epsilon0(1.0, np.e, 1.0)
        for sign in (+1.0, -1.0):
            varied, _ = apply_variation(chain, H_CANONICAL, sign * eps0, grid=PLAN)
            g0 = CallableMap(fn=lambda w: varied.eval(0.0, w), n=2, label="g0")
            assert sampled_injectivity(g0, PLAN) > 0.5

    def test_collision_detected(self):
        from loewner_lab.construct import sampled_injectivity
        from loewner_lab.maps import CallableMap

        # z -> (z1^2, z2) identifies +/- z1; plant the colliding pair
        square = CallableMap(fn=lambda w: np.stack([w[:, 0] ** 2, w[:, 1]], axis=1),
                             n=2, label="squared-first-slot")
        plan = SamplingPlan(radii=(0.5,), directions=2, random_points=0,
                            extra_points=((0.4, 0.2), (-0.4, 0.2)))
        assert sampled_injectivity(square, plan) <= 1e-12
