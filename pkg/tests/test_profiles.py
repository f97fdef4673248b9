import math

import numpy as np
import pytest

from dilstruct.gh import gh_pointed
from dilstruct.metric import FiniteMetricSpace
from dilstruct.profiles import (
    curvdim_estimate,
    profile_distortion,
    sample_profile,
    sectional_curvature_from_profile,
)

EPS_LIST = [0.4, 0.2, 0.1, 0.05]


class TestSampleProfile:
    def test_includes_base_and_symmetric(self, euclid2):
        series = sample_profile(euclid2, np.zeros(2), 6, EPS_LIST, seed=3)
        np.testing.assert_allclose(series.sample[0], np.zeros(2))
        for e in EPS_LIST:
            m = series.rescaled[e]
            np.testing.assert_allclose(m, m.T)
            np.testing.assert_allclose(np.diag(m), 0.0, atol=1e-15)

    def test_euclidean_matches_tangent(self, euclid2):
        series = sample_profile(euclid2, np.zeros(2), 6, EPS_LIST, seed=3)
        for e in EPS_LIST:
            np.testing.assert_allclose(series.rescaled[e], series.tangent, atol=1e-12)

    def test_sample_inside_unit_tangent_ball(self, sphere):
        series = sample_profile(sphere, np.zeros(2), 8, EPS_LIST, seed=5)
        for p in series.sample[1:]:
            assert sphere.tangent_dist(np.zeros(2), np.zeros(2), p) <= 1.0 + 1e-12

    def test_too_few_points(self, euclid2):
        with pytest.raises(ValueError):
            sample_profile(euclid2, np.zeros(2), 3, EPS_LIST, seed=0)


class TestDistortion:
    def test_euclidean_zero(self, euclid2):
        series = sample_profile(euclid2, np.zeros(2), 6, EPS_LIST, seed=3)
        for e in EPS_LIST:
            assert profile_distortion(series, e) < 1e-12

    def test_heisenberg_conical_flat(self, heis):
        series = sample_profile(heis, np.zeros(3), 6, EPS_LIST, seed=3)
        for e in EPS_LIST:
            assert profile_distortion(series, e) < 1e-9

    def test_snowflake_flat(self, snowflake_half):
        series = sample_profile(snowflake_half, np.zeros(2), 6, EPS_LIST, seed=3)
        for e in EPS_LIST:
            assert profile_distortion(series, e) < 1e-9

    def test_sphere_orthonormal_coefficient(self, sphere):
        # two orthonormal log vectors: the quadratic distortion coefficient
        # is (1/6) * 1 / sqrt(2) at unit norms, so at scale 0.3 the rescaled
        # distance sits about 0.0106 below sqrt(2)
        u = np.array([math.tan(0.5), 0.0])
        v = np.array([0.0, math.tan(0.5)])
        eps = 0.3
        d_eps = sphere.dist(sphere.dil(np.zeros(2), eps, u), sphere.dil(np.zeros(2), eps, v)) / eps
        drop = math.sqrt(2) - d_eps
        assert drop == pytest.approx(eps**2 / (6 * math.sqrt(2)), rel=0.05)

    def test_dominates_pointed_gh(self, sphere):
        # restrict a profile to a cap-sized subsample for the cross-check
        series = sample_profile(sphere, np.zeros(2), 4, [0.4], seed=7)
        ids = ["x", "a", "b"]
        keep = [0, 1, 2]
        tangent_space = FiniteMetricSpace(ids=ids, dmat=series.tangent[np.ix_(keep, keep)])
        rescaled_space = FiniteMetricSpace(ids=ids, dmat=series.rescaled[0.4][np.ix_(keep, keep)])
        gh_val = gh_pointed(rescaled_space, "x", tangent_space, "x").value
        assert profile_distortion(series, 0.4) >= gh_val - 1e-12


class TestCurvdim:
    def test_heisenberg_flat_flag(self, heis):
        series = sample_profile(heis, np.zeros(3), 6, EPS_LIST, seed=3)
        est = curvdim_estimate(series)
        assert est.flat
        assert est.slope is None

    def test_snowflake_flat_flag(self, snowflake_half):
        series = sample_profile(snowflake_half, np.zeros(2), 6, EPS_LIST, seed=3)
        assert curvdim_estimate(series).flat

    def test_sphere_slope_two(self, sphere):
        series = sample_profile(sphere, np.zeros(2), 12, EPS_LIST, seed=11)
        est = curvdim_estimate(series)
        assert not est.flat
        assert 1.8 <= est.slope <= 2.2
        assert est.r2 > 0.99

    def test_sphere_curvature_recovery(self, sphere):
        series = sample_profile(sphere, np.zeros(2), 12, EPS_LIST, seed=11)
        est = curvdim_estimate(series)
        k = sectional_curvature_from_profile(series, est, sphere.meta["log3"])
        assert k == pytest.approx(1.0, rel=0.1)

    def test_ode_chart_curvature_recovery(self):
        # the generic integrate-and-shoot chart reproduces the closed-form
        # result, at shooting accuracy
        from dilstruct.spaces import construct_space

        S = construct_space("riemannian sphere")
        series = sample_profile(S, np.zeros(2), 6, [0.4, 0.2, 0.1], seed=11)
        est = curvdim_estimate(series)
        assert not est.flat
        assert 1.7 <= est.slope <= 2.3

        def log_g(x, p):
            R = S.meta["space"]
            w = R.log(x, p)
            g = R.metric(x)
            return np.linalg.cholesky(g).T @ w

        k = sectional_curvature_from_profile(series, est, log_g)
        assert k == pytest.approx(1.0, rel=0.2)

    def test_flat_profile_has_no_curvature(self, euclid2):
        series = sample_profile(euclid2, np.zeros(2), 6, EPS_LIST, seed=3)
        est = curvdim_estimate(series)
        with pytest.raises(ValueError):
            sectional_curvature_from_profile(series, est, lambda x, p: p - x)

    def test_non_monotone_distortions_low_r2(self, euclid2):
        # corrupt a flat profile with non-monotone noise: the slope fit
        # must flag itself through a poor r^2
        series = sample_profile(euclid2, np.zeros(2), 6, EPS_LIST, seed=3)
        rng = np.random.default_rng(0)
        for i, e in enumerate(EPS_LIST):
            bump = np.zeros_like(series.rescaled[e])
            bump[0, 1] = bump[1, 0] = (0.02, 0.001, 0.015, 0.002)[i]
            series.rescaled[e] = series.rescaled[e] + bump
        est = curvdim_estimate(series)
        assert not est.flat
        assert est.r2 is None or est.r2 < 0.9

    def test_csv_rows(self, sphere):
        series = sample_profile(sphere, np.zeros(2), 5, EPS_LIST, seed=2)
        rows = series.csv_rows()
        assert len(rows) == len(EPS_LIST)
        assert rows[0][0] == 0.4
