"""Chernoff and independent-product fusion of filter states."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from possfuse.bernoulli import BernoulliPossState, ReductionConfig
from possfuse.fusion import (
    OMEGA_GRID,
    fuse_chernoff,
    fuse_independent,
    parse_omega_strategy,
    select_omega,
    selftest,
)
from possfuse.gaussmax import GaussianMaxMixture
from support import (
    gauss_value,
    mixture_box,
    mixture_value,
    product_values,
    random_mixture,
    refine_maximum,
)


def single_comp_state(q0, q1, mean, var):
    mix = GaussianMaxMixture([1.0], [list(np.atleast_1d(mean))], [np.atleast_2d(var)])
    return BernoulliPossState(q0, q1, mix)


def random_state(rng, dim=2, max_comps=3):
    w, m, P = random_mixture(rng, dim, max_comps)
    q1 = 1.0
    q0 = float(rng.uniform(0.2, 1.0))
    if rng.uniform() < 0.5:
        q0, q1 = 1.0, float(rng.uniform(0.2, 1.0))
    return BernoulliPossState(q0, q1, GaussianMaxMixture(w, m, P)), (w, m, P)


class TestEndpoints:
    def test_omega_zero_returns_first_verbatim(self):
        rng = np.random.default_rng(1)
        a, _ = random_state(rng)
        b, _ = random_state(rng)
        res = fuse_chernoff(a, b, 0.0)
        assert res.state is a
        assert res.normalizer == 1.0
        assert res.alpha == 1.0

    def test_omega_one_returns_second_verbatim(self):
        rng = np.random.default_rng(2)
        a, _ = random_state(rng)
        b, _ = random_state(rng)
        res = fuse_chernoff(a, b, 1.0)
        assert res.state is b

    def test_omega_out_of_range(self):
        rng = np.random.default_rng(3)
        a, _ = random_state(rng)
        with pytest.raises(ValueError):
            fuse_chernoff(a, a, -0.1)
        with pytest.raises(ValueError):
            fuse_chernoff(a, a, 1.01)


class TestIdempotence:
    @given(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_self_fusion_is_identity_pointwise(self, omega, seed):
        rng = np.random.default_rng(seed)
        a, triple = random_state(rng)
        res = fuse_chernoff(a, a, omega)
        lo, hi = mixture_box([triple])
        pts = np.column_stack(
            [rng.uniform(lo[k], hi[k], size=60) for k in range(2)]
        )
        got = res.state.spatial.values(pts)
        want = a.spatial.values(pts)
        np.testing.assert_allclose(got, want, atol=1e-9)
        assert res.state.q_absent == pytest.approx(a.q_absent, abs=1e-12)
        assert res.state.q_present == pytest.approx(a.q_present, abs=1e-12)

    def test_self_fusion_keeps_top_covariance(self):
        rng = np.random.default_rng(8)
        a, _ = random_state(rng)
        res = fuse_chernoff(a, a, 0.5)
        i = a.spatial.argmax_component()
        j = res.state.spatial.argmax_component()
        np.testing.assert_allclose(
            res.state.spatial.covariances[j], a.spatial.covariances[i], atol=1e-12
        )


class TestFrozenExamples:
    def test_chernoff_two_singles(self):
        a = single_comp_state(0.5, 1.0, 0.0, 1.0)
        b = single_comp_state(0.5, 1.0, 2.0, 1.0)
        res = fuse_chernoff(a, b, 0.5)
        # alpha = exp(-1/2); the presence cell absorbs it, absence is 0.5,
        # so after normalisation absence = 0.5 * exp(1/2).
        assert res.alpha == pytest.approx(0.6065306597126334, abs=1e-15)
        assert res.normalizer == pytest.approx(0.6065306597126334, abs=1e-15)
        assert res.state.q_present == 1.0
        assert res.state.q_absent == pytest.approx(0.8243606353500641, abs=1e-14)
        assert res.state.spatial.n_components == 1
        assert res.state.spatial.means[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert res.state.spatial.covariances[0, 0, 0] == pytest.approx(1.0, abs=1e-14)
        assert res.state.spatial.weights[0] == 1.0

    def test_independent_two_singles(self):
        a = single_comp_state(1.0, 1.0, 0.0, 1.0)
        b = single_comp_state(1.0, 1.0, 2.0, 1.0)
        res = fuse_independent(a, b)
        assert res.alpha == pytest.approx(0.36787944117144233, abs=1e-15)
        assert res.state.spatial.covariances[0, 0, 0] == pytest.approx(0.5, abs=1e-14)
        # absence cell: 1 * 1 = 1; presence: 1 * 1 * alpha; the max is 1
        assert res.state.q_absent == 1.0
        assert res.state.q_present == pytest.approx(0.36787944117144233, abs=1e-14)

    def test_independent_identical_halves_top_covariance(self):
        rng = np.random.default_rng(21)
        a, _ = random_state(rng)
        res = fuse_independent(a, a)
        i = a.spatial.argmax_component()
        j = res.state.spatial.argmax_component()
        np.testing.assert_allclose(
            res.state.spatial.covariances[j],
            a.spatial.covariances[i] / 2.0,
            atol=1e-12,
        )


class TestAgainstGridOracle:
    @given(st.sampled_from([0.3, 0.5, 0.7]), st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_chernoff_spatial_matches_product(self, omega, seed):
        rng = np.random.default_rng(seed)
        a, ta = random_state(rng, dim=1)
        b, tb = random_state(rng, dim=1)
        res = fuse_chernoff(a, b, omega)
        lo, hi = mixture_box([ta, tb])
        pts = np.linspace(lo[0], hi[0], 150)[:, None]
        direct = product_values(pts, ta, tb, 1.0 - omega, omega)
        got = res.state.spatial.values(pts) * res.alpha
        np.testing.assert_allclose(got, direct, atol=1e-9)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_independent_spatial_matches_product(self, seed):
        rng = np.random.default_rng(seed)
        a, ta = random_state(rng, dim=1)
        b, tb = random_state(rng, dim=1)
        res = fuse_independent(a, b)
        lo, hi = mixture_box([ta, tb])
        pts = np.linspace(lo[0], hi[0], 150)[:, None]
        direct = product_values(pts, ta, tb, 1.0, 1.0)
        got = res.state.spatial.values(pts) * res.alpha
        np.testing.assert_allclose(got, direct, atol=1e-9)

    def test_alpha_is_product_supremum(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            a, ta = random_state(rng, dim=1, max_comps=2)
            b, tb = random_state(rng, dim=1, max_comps=2)
            res = fuse_chernoff(a, b, 0.4)
            lo, hi = mixture_box([ta, tb])

            def f(x, ta=ta, tb=tb):
                return mixture_value(x, *ta) ** 0.6 * mixture_value(x, *tb) ** 0.4

            oracle = refine_maximum(f, lo, hi, iters=9, per_axis=201)
            assert res.alpha == pytest.approx(oracle, rel=1e-8)

    def test_existence_matches_direct_powers(self):
        rng = np.random.default_rng(29)
        for omega in (0.25, 0.5, 0.75):
            a, ta = random_state(rng, dim=1, max_comps=1)
            b, tb = random_state(rng, dim=1, max_comps=1)
            res = fuse_chernoff(a, b, omega)
            e1, e2 = 1.0 - omega, omega
            alpha = (
                ta[0][0] ** e1
                * tb[0][0] ** e2
                * gauss_value(
                    ta[1][0] - tb[1][0], [0.0], ta[2][0] / e1 + tb[2][0] / e2
                )
            )
            absent = a.q_absent**e1 * b.q_absent**e2
            present = a.q_present**e1 * b.q_present**e2 * alpha
            norm = max(absent, present)
            assert res.state.q_absent == pytest.approx(absent / norm, abs=1e-12)
            assert res.state.q_present == pytest.approx(present / norm, abs=1e-12)
            assert res.normalizer == pytest.approx(norm, rel=1e-12)


class TestConflictAndReduction:
    def test_total_conflict_raises(self):
        a = single_comp_state(1.0, 0.0, 0.0, 1.0)
        b = single_comp_state(0.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            fuse_chernoff(a, b, 0.5)

    def test_zero_presence_survives_when_consistent(self):
        a = single_comp_state(1.0, 0.0, 0.0, 1.0)
        b = single_comp_state(1.0, 0.5, 0.0, 1.0)
        res = fuse_chernoff(a, b, 0.5)
        assert res.state.q_absent == 1.0
        assert res.state.q_present == 0.0

    def test_reduction_is_applied(self):
        rng = np.random.default_rng(40)
        a, _ = random_state(rng, dim=2, max_comps=4)
        b, _ = random_state(rng, dim=2, max_comps=4)
        cfg = ReductionConfig(prune_ratio=0.0, merge_mahalanobis=0.0, max_components=2)
        res = fuse_chernoff(a, b, 0.5, reduction=cfg)
        assert res.state.spatial.n_components <= 2
        res2 = fuse_independent(a, b, reduction=cfg)
        assert res2.state.spatial.n_components <= 2

    def test_dimension_mismatch(self):
        a = single_comp_state(1.0, 1.0, 0.0, 1.0)
        rng = np.random.default_rng(41)
        b, _ = random_state(rng, dim=2)
        with pytest.raises(ValueError):
            fuse_independent(a, b)


class TestOmegaStrategy:
    def test_parse_forms(self):
        assert parse_omega_strategy(0.3) == ("fixed", 0.3)
        assert parse_omega_strategy("fixed(0.25)") == ("fixed", 0.25)
        assert parse_omega_strategy("min-trace") == ("min-trace", None)

    @pytest.mark.parametrize("bad", ["fixed(1.5)", "fixed(oops)", "maximal", 1.2, -0.1])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_omega_strategy(bad)

    def test_min_trace_prefers_tighter_source(self):
        # Coincident means with variances 1 and 4: every weight on the
        # tighter source minimises the fused trace, so the grid picks its
        # lowest omega for source-2 weight.
        a = single_comp_state(1.0, 1.0, 0.0, 1.0)
        b = single_comp_state(1.0, 1.0, 0.0, 4.0)
        assert select_omega(a, b, "min-trace") == min(OMEGA_GRID)
        assert select_omega(b, a, "min-trace") == max(OMEGA_GRID)

    def test_min_trace_tie_breaks_to_balanced(self):
        a = single_comp_state(1.0, 1.0, 0.0, 1.0)
        assert select_omega(a, a, "min-trace") == 0.5

    def test_fixed_strategy_passthrough(self):
        a = single_comp_state(1.0, 1.0, 0.0, 1.0)
        b = single_comp_state(1.0, 1.0, 0.0, 4.0)
        assert select_omega(a, b, "fixed(0.7)") == 0.7


class TestSelftest:
    def test_selftest_passes_quietly(self, capsys):
        assert selftest(n_pairs=3, seed=5, verbose=True)
        out = capsys.readouterr().out
        assert out.count("PASS") == 2
        assert "FAIL" not in out
