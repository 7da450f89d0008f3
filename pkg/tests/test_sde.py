import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kolmonet.affine import apply, check_affine, recover_affine
from kolmonet.sde import (
    BlackScholesModel,
    MomentBoundInputs,
    euler_maruyama,
    growth_L,
    moment_bound,
    mu,
    sample_solution_map,
    sample_solution_maps,
    sample_terminal_exact,
    sigma,
)


@st.composite
def models(draw, max_d=5):
    d = draw(st.integers(1, max_d))
    seed = draw(st.integers(0, 2**32 - 1))
    gen = np.random.default_rng(seed)
    return BlackScholesModel(gen.uniform(-0.5, 0.5, d), gen.uniform(-0.5, 0.5, d), gen.normal(size=(d, d)))


class TestModel:
    def test_rows_normalised(self, rng):
        m = BlackScholesModel(0.0, 0.2, rng.normal(size=(4, 4)))
        assert np.allclose(np.linalg.norm(m.B, axis=1), 1.0, atol=1e-15)

    def test_zero_row_rejected(self):
        with pytest.raises(ValueError, match="row 1"):
            BlackScholesModel(0.0, 0.2, [[1.0, 0.0], [0.0, 0.0]])

    def test_equicorrelated(self):
        m = BlackScholesModel.equicorrelated(3, 0.5)
        assert np.allclose(m.B @ m.B.T, 0.5 * np.eye(3) + 0.5, atol=1e-14)

    def test_equicorrelated_range(self):
        with pytest.raises(ValueError):
            BlackScholesModel.equicorrelated(3, -0.6)

    def test_from_correlation_checks(self):
        with pytest.raises(ValueError, match="symmetric"):
            BlackScholesModel.from_correlation([[1.0, 0.2], [0.3, 1.0]])
        with pytest.raises(ValueError, match="positive definite"):
            BlackScholesModel.from_correlation([[1.0, 2.0], [2.0, 1.0]])

    def test_alpha_length(self):
        with pytest.raises(ValueError, match="alpha"):
            BlackScholesModel([0.1, 0.2, 0.3], 0.2, np.eye(2))


class TestCoefficients:
    def test_zero_drift(self, rng):
        m = BlackScholesModel.independent(3, 0.0, 0.2)
        assert not mu(m, rng.normal(size=3)).any()

    def test_drift_product(self):
        m = BlackScholesModel.independent(2, [1.0, 2.0], 0.0)
        assert np.array_equal(mu(m, [3.0, 4.0]), [3.0, 8.0])

    def test_drift_affine(self, rng):
        m = BlackScholesModel(rng.normal(size=3), 0.1, rng.normal(size=(3, 3)))
        assert check_affine(lambda x: mu(m, x), 3)
        assert not mu(m, np.zeros(3)).any()

    def test_sigma_zero(self):
        m = BlackScholesModel.independent(2, 0.0, 0.3)
        assert not sigma(m, np.zeros(2)).any()

    def test_sigma_scalar(self):
        m = BlackScholesModel([0.0], [0.2], [[1.0]])
        assert sigma(m, [5.0]) == pytest.approx(np.array([[1.0]]))

    def test_sigma_affine(self, rng):
        m = BlackScholesModel(0.0, rng.uniform(size=3), rng.normal(size=(3, 3)))
        assert check_affine(lambda x: sigma(m, x), 3)

    def test_growth_L(self):
        assert growth_L(BlackScholesModel.independent(2)) == 0.0
        assert growth_L(BlackScholesModel.independent(1, 0.02, 0.2)) == pytest.approx(0.44)

    @given(models())
    def test_sigma_hs_bound(self, m):
        x = np.random.default_rng(0).normal(scale=3, size=(1000, m.d))
        hs = np.linalg.norm(sigma(m, x), axis=(1, 2))
        assert np.all(hs <= np.max(np.abs(m.beta)) * np.linalg.norm(x, axis=1) * (1 + 1e-12))

    @given(models())
    def test_linear_growth(self, m):
        x = np.random.default_rng(1).normal(scale=3, size=(1000, m.d))
        lhs = np.linalg.norm(mu(m, x), axis=1) + np.linalg.norm(sigma(m, x), axis=(1, 2))
        assert np.all(lhs <= growth_L(m) * (1 + np.linalg.norm(x, axis=1)) + 1e-12)


class TestExactSampling:
    def test_no_noise(self, rng):
        m = BlackScholesModel.independent(3, [0.1, -0.2, 0.0], 0.0)
        x = np.array([1.0, 2.0, 3.0])
        out = sample_terminal_exact(m, 2.0, x, rng.normal(size=3))
        assert np.allclose(out, x * np.exp(2.0 * m.alpha), rtol=1e-15)

    def test_identity(self, rng):
        m = BlackScholesModel.independent(2)
        assert np.array_equal(sample_terminal_exact(m, 1.0, [1.5, -2.0], rng.normal(size=2)), [1.5, -2.0])

    def test_batch_shape(self, rng):
        m = BlackScholesModel.independent(3, 0.0, 0.2)
        assert sample_terminal_exact(m, 1.0, np.ones(3), rng.normal(size=(7, 3))).shape == (7, 3)

    def test_martingale(self, rng):
        m = BlackScholesModel.independent(1, 0.0, 0.2)
        X = sample_terminal_exact(m, 1.0, [1.0], rng.standard_normal((1_000_000, 1)))[:, 0]
        se = X.std(ddof=1) / 1000
        assert abs(X.mean() - 1.0) <= 3 * se

    def test_bad_T(self):
        with pytest.raises(ValueError):
            sample_terminal_exact(BlackScholesModel.independent(1), 0.0, [1.0], [0.0])


class TestSolutionMap:
    def test_identity_map(self, rng):
        m = sample_solution_map(BlackScholesModel.independent(3), 1.0, rng.normal(size=3))
        assert np.array_equal(m.A, np.eye(3)) and not m.b.any()

    @given(models(), st.integers(0, 2**32 - 1))
    def test_matches_terminal_sampler(self, m, seed):
        z = np.random.default_rng(seed).normal(size=m.d)
        amap = sample_solution_map(m, 1.3, z)
        for j in range(m.d):
            e = np.eye(m.d)[j]
            assert np.allclose(apply(amap, e), sample_terminal_exact(m, 1.3, e, z), rtol=1e-14, atol=0)
        back = recover_affine(lambda x: sample_terminal_exact(m, 1.3, x, z), m.d)
        assert np.max(np.abs(back.A - amap.A)) <= 1e-12

    @given(models(), st.integers(0, 2**32 - 1), st.floats(-3, 3))
    def test_affine_identity(self, m, seed, lam):
        gen = np.random.default_rng(seed)
        amap = sample_solution_map(m, 0.8, gen.normal(size=m.d))
        x, y = gen.uniform(-2, 2, m.d), gen.uniform(-2, 2, m.d)
        lhs = apply(amap, lam * x + y) + lam * apply(amap, np.zeros(m.d))
        rhs = lam * apply(amap, x) + apply(amap, y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))

    def test_batch_matches_single(self, rng):
        m = BlackScholesModel.equicorrelated(3, 0.3, 0.05, 0.25)
        z = rng.normal(size=(4, 3))
        for amap, row in zip(sample_solution_maps(m, 1.0, z), z):
            assert np.allclose(amap.A, sample_solution_map(m, 1.0, row).A, rtol=1e-15, atol=0)

    def test_single_rejects_batch(self, rng):
        with pytest.raises(ValueError):
            sample_solution_map(BlackScholesModel.independent(2), 1.0, rng.normal(size=(2, 2)))


def _em(m, T, steps, x, z):
    return euler_maruyama(lambda s: mu(m, s), lambda s: sigma(m, s), T, steps, x, z)


class TestEuler:
    def test_trivial(self):
        m = BlackScholesModel.independent(2)
        assert np.array_equal(_em(m, 1.0, 1, [1.0, 2.0], np.zeros((1, 2))), [1.0, 2.0])

    def test_drift_error_shrinks(self):
        m = BlackScholesModel.independent(1, 0.5, 0.0)
        errs = [abs(_em(m, 1.0, s, [1.0], np.zeros((s, 1)))[0] - math.exp(0.5)) for s in (8, 64, 512)]
        assert errs[0] > errs[1] > errs[2]
        # first-order scheme: error ~ C / steps
        assert errs[2] * 512 == pytest.approx(errs[1] * 64, rel=0.05)

    def test_shape_check(self):
        with pytest.raises(ValueError, match="steps"):
            _em(BlackScholesModel.independent(1), 1.0, 4, [1.0], np.zeros((3, 1)))

    @pytest.mark.slow
    def test_distribution_matches_exact(self):
        m = BlackScholesModel.independent(1, 0.0, 0.2)
        gen = np.random.default_rng(2024)
        steps, chunk, total = 2048, 10_000, 1_000_000
        em = np.concatenate([
            np.maximum(_em(m, 1.0, steps, [1.0], gen.standard_normal((chunk, steps, 1)))[:, 0] - 1, 0)
            for _ in range(total // chunk)])
        exact = np.maximum(sample_terminal_exact(m, 1.0, [1.0], gen.standard_normal((total, 1)))[:, 0] - 1, 0)
        se = math.sqrt(em.var(ddof=1) / total + exact.var(ddof=1) / total)
        assert abs(em.mean() - exact.mean()) <= 3 * se


class TestMomentBound:
    def test_vanishing_constants(self):
        q = MomentBoundInputs(p=2, T=1, t=1, m1=0, m2=0, s1=0, s2=0, xi_norm=3.0)
        assert moment_bound(q) == pytest.approx(math.sqrt(2) * 3.0)

    @given(st.tuples(*[st.floats(0, 2)] * 6), st.floats(2, 6), st.sampled_from(range(8)), st.floats(0, 1))
    def test_monotone(self, vals, p, which, bump):
        m1, m2, s1, s2, xi, T = vals
        base = dict(p=p, T=T + 0.1, t=T / 2, m1=m1, m2=m2, s1=s1, s2=s2, xi_norm=xi)
        key = ["p", "T", "t", "m1", "m2", "s1", "s2", "xi_norm"][which]
        bumped = dict(base, **{key: base[key] + bump})
        if bumped["t"] > bumped["T"]:
            return
        assert moment_bound(MomentBoundInputs(**bumped)) >= moment_bound(MomentBoundInputs(**base)) * (1 - 1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            MomentBoundInputs(p=1.5, T=1, t=1, m1=0, m2=0, s1=0, s2=0, xi_norm=1)
        with pytest.raises(ValueError):
            MomentBoundInputs(p=2, T=1, t=2, m1=0, m2=0, s1=0, s2=0, xi_norm=1)

    @pytest.mark.parametrize("d", [1, 5])
    @pytest.mark.parametrize("p", [2.0, 4.0])
    def test_holds_for_gbm(self, d, p, rng):
        m = BlackScholesModel(rng.uniform(-0.3, 0.3, d), rng.uniform(0, 0.3, d), rng.normal(size=(d, d)))
        x0 = rng.uniform(0.5, 2, d)
        X = sample_terminal_exact(m, 1.0, x0, rng.standard_normal((200_000, d)))
        emp = np.mean(np.linalg.norm(X, axis=1) ** p) ** (1 / p)
        k = growth_L(m) / 2
        assert emp <= moment_bound(MomentBoundInputs(p, 1.0, 1.0, 0.0, k, 0.0, k, float(np.linalg.norm(x0))))
