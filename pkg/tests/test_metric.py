import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilstruct.metric import (
    DegenerateCurveError,
    FiniteMetricSpace,
    MalformedInputError,
    OutOfDomainError,
    PolylineCurve,
    TrivialGroupoidView,
    groupoid_fiber_distance,
    metric_derivative,
    reparameterize_unit_speed,
    validate_metric,
    variation_length,
)


def euclid(a, b):
    return float(np.linalg.norm(np.asarray(b) - np.asarray(a)))


class TestValidateMetric:
    def test_triangle_violation_reported(self):
        d = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 3.0], [1.0, 3.0, 0.0]])
        rep = validate_metric(FiniteMetricSpace(ids=["1", "2", "3"], dmat=d))
        assert not rep.ok
        assert any(v.axiom == "triangle" for v in rep.violations)
        witnesses = {v.witness for v in rep.violations if v.axiom == "triangle"}
        assert ("2", "1", "3") in witnesses

    def test_genuine_metric_passes(self):
        d = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert validate_metric(FiniteMetricSpace(ids=["a", "b"], dmat=d)).ok

    def test_random_point_clouds_pass(self, rng):
        for _ in range(100):
            pts = rng.uniform(-1, 1, size=(rng.integers(3, 8), 2))
            assert validate_metric(FiniteMetricSpace.from_points(pts)).ok

    def test_malformed_inputs(self):
        with pytest.raises(MalformedInputError):
            validate_metric(FiniteMetricSpace(ids=["a", "b"], dmat=np.zeros((2, 3))))
        bad = np.array([[0.0, np.nan], [np.nan, 0.0]])
        with pytest.raises(MalformedInputError):
            validate_metric(FiniteMetricSpace(ids=["a", "b"], dmat=bad))

    def test_symmetry_and_diagonal_violations(self):
        d = np.array([[0.1, 1.0], [2.0, 0.0]])
        rep = validate_metric(FiniteMetricSpace(ids=["a", "b"], dmat=d))
        axioms = {v.axiom for v in rep.violations}
        assert {"diagonal", "symmetry"} <= axioms


class TestSerialization:
    def test_json_round_trip(self, rng):
        space = FiniteMetricSpace.from_points(rng.uniform(0, 1, (4, 2)))
        back = FiniteMetricSpace.from_json(space.to_json())
        assert back.ids == space.ids
        np.testing.assert_allclose(back.dmat, space.dmat)

    def test_csv_round_trip(self, rng):
        space = FiniteMetricSpace.from_points(rng.uniform(0, 1, (5, 3)))
        back = FiniteMetricSpace.from_csv(space.to_csv())
        assert back.ids == space.ids
        np.testing.assert_array_equal(back.dmat, space.dmat)  # repr round-trips exactly

    def test_polyline_csv_round_trip(self, rng):
        curve = PolylineCurve(knots=np.sort(rng.uniform(0, 1, 5)), samples=rng.uniform(-1, 1, (5, 3)))
        back = PolylineCurve.from_csv(curve.to_csv())
        np.testing.assert_array_equal(back.knots, curve.knots)
        np.testing.assert_array_equal(back.samples, curve.samples)


class TestVariation:
    def test_segment_any_partition(self):
        c = PolylineCurve(knots=[0, 0.3, 0.7, 1.0], samples=[[0, 0], [0.3, 0], [0.7, 0], [1, 0]])
        assert variation_length(c, euclid) == pytest.approx(1.0, abs=1e-15)

    def test_snowflake_segment(self):
        # four equal pieces under d^(1/2): 4 * (1/4)^(1/2) = 2
        snow = lambda a, b: euclid(a, b) ** 0.5
        c = PolylineCurve(
            knots=np.linspace(0, 1, 5), samples=np.linspace([0, 0], [1, 0], 5)
        )
        assert variation_length(c, snow) == pytest.approx(2.0, abs=1e-12)

    def test_circle_chord_sum(self):
        t = np.linspace(0.0, 2 * np.pi, 361)
        c = PolylineCurve(knots=t, samples=np.stack([np.cos(t), np.sin(t)], axis=1))
        assert variation_length(c, euclid) == pytest.approx(2 * np.pi, abs=1e-3)

    def test_refinement_monotone(self, rng):
        pts = rng.standard_normal((5, 2))
        coarse = PolylineCurve(knots=[0, 1, 2, 3, 4], samples=pts)
        # refine by inserting midpoints off the chords
        fine_pts, fine_knots = [], []
        for i in range(4):
            fine_pts += [pts[i], 0.5 * (pts[i] + pts[i + 1]) + [0.05, 0]]
            fine_knots += [i, i + 0.5]
        fine_pts.append(pts[4])
        fine_knots.append(4)
        fine = PolylineCurve(knots=fine_knots, samples=np.array(fine_pts))
        assert variation_length(fine, euclid) >= variation_length(coarse, euclid)

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_concatenation_superadditive(self, ys):
        pts = np.array([[i, y] for i, y in enumerate(ys)])
        c = PolylineCurve(knots=np.arange(len(pts)), samples=pts)
        k = len(pts) // 2
        left = PolylineCurve(knots=np.arange(k + 1), samples=pts[: k + 1])
        right = PolylineCurve(knots=np.arange(k, len(pts)), samples=pts[k:])
        total = variation_length(c, euclid)
        assert total == pytest.approx(
            variation_length(left, euclid) + variation_length(right, euclid), rel=1e-12
        )


class TestReparameterize:
    def test_cumulative_distance_knots(self):
        c = PolylineCurve(knots=[0, 0.5, 1.0], samples=[[0, 0], [0.9, 0], [1.0, 0]])
        out = reparameterize_unit_speed(c, euclid)
        np.testing.assert_allclose(out.knots, [0.0, 0.9, 1.0], atol=1e-15)

    def test_already_unit_speed(self):
        c = PolylineCurve(knots=[0.0, 0.9, 1.0], samples=[[0, 0], [0.9, 0], [1.0, 0]])
        out = reparameterize_unit_speed(c, euclid)
        np.testing.assert_allclose(out.knots, c.knots, atol=1e-15)

    def test_circle_equal_gaps(self):
        t = np.linspace(0, 2 * np.pi, 73)
        c = PolylineCurve(knots=t, samples=np.stack([np.cos(t), np.sin(t)], axis=1))
        out = reparameterize_unit_speed(c, euclid)
        gaps = np.diff(out.knots)
        np.testing.assert_allclose(gaps, gaps[0], rtol=1e-12)

    def test_zero_length_curve(self):
        c = PolylineCurve(knots=[0, 1], samples=[[1, 1], [1, 1]])
        with pytest.raises(DegenerateCurveError):
            reparameterize_unit_speed(c, euclid)

    def test_variation_invariant(self, rng):
        pts = rng.standard_normal((6, 2))
        c = PolylineCurve(knots=np.arange(6.0), samples=pts)
        out = reparameterize_unit_speed(c, euclid)
        assert variation_length(out, euclid) == pytest.approx(
            variation_length(c, euclid), rel=1e-12
        )


class TestMetricDerivative:
    steps = 2.0 ** -np.arange(3, 10)

    def test_constant_speed_line(self):
        t = np.linspace(0, 1, 11)
        c = PolylineCurve(knots=t, samples=np.stack([2 * t, 0 * t], axis=1))
        rep = metric_derivative(c, 0.5, self.steps, euclid)
        assert rep.limit == pytest.approx(2.0, abs=1e-12)

    def test_constant_curve(self):
        t = np.linspace(0, 1, 5)
        c = PolylineCurve(knots=t, samples=np.ones((5, 2)))
        rep = metric_derivative(c, 0.4, self.steps, euclid)
        assert rep.limit == pytest.approx(0.0, abs=1e-15)

    def test_circle_speed(self):
        t = np.linspace(-0.5, 0.5, 20001)
        c = PolylineCurve(knots=t, samples=np.stack([np.cos(t), np.sin(t)], axis=1))
        rep = metric_derivative(c, 0.0, 2.0 ** -np.arange(4, 11), euclid)
        assert rep.limit == pytest.approx(1.0, abs=1e-6)

    def test_boundary_rejected(self):
        t = np.linspace(0, 1, 5)
        c = PolylineCurve(knots=t, samples=np.stack([t, t], axis=1))
        with pytest.raises(OutOfDomainError):
            metric_derivative(c, 0.0, self.steps, euclid)

    def test_exact_on_linear_pieces(self, rng):
        pts = rng.standard_normal((4, 2))
        c = PolylineCurve(knots=[0, 1, 2, 3], samples=pts)
        t = 0.5  # interior to the first piece
        rep = metric_derivative(c, t, 2.0 ** -np.arange(3, 8), euclid)
        speed = euclid(pts[0], pts[1])
        values = rep.value_array()
        np.testing.assert_allclose(values, speed, atol=1e-12)


class TestTrivialGroupoid:
    def test_fiber_distance_is_base_distance(self):
        space = FiniteMetricSpace(
            ids=["x", "u", "v"],
            dmat=np.array([[0, 1.0, 1.2], [1.0, 0, 1.7], [1.2, 1.7, 0]]),
        )
        view = TrivialGroupoidView(base=space)
        assert groupoid_fiber_distance(view, "x", "u", "v") == 1.7
        assert groupoid_fiber_distance(view, "v", "u", "u") == 0.0

    def test_unknown_ids(self):
        space = FiniteMetricSpace(ids=["a"], dmat=np.zeros((1, 1)))
        view = TrivialGroupoidView(base=space)
        with pytest.raises(KeyError):
            groupoid_fiber_distance(view, "a", "a", "zz")

    def test_right_translation_isometry(self, rng):
        pts = rng.uniform(0, 1, (5, 2))
        space = FiniteMetricSpace.from_points(pts)
        view = TrivialGroupoidView(base=space)
        ids = space.ids
        for u_id in ids:
            # arrows out of the fiber over omega(u), translated by u=(u_id, x)
            x, y = ids[0], ids[1]
            g = (y, u_id)
            h = (x, u_id)
            u = (u_id, ids[2])
            d_before = view.norm(view.compose(g, view.inverse(h)))
            gt, ht = view.right_translate(g, u), view.right_translate(h, u)
            d_after = view.norm(view.compose(gt, view.inverse(ht)))
            assert d_after == d_before

    def test_groupoid_norm_axioms(self, rng):
        # the three norm axioms restated on pairs, for a genuine metric space
        pts = rng.uniform(0, 1, (4, 2))
        space = FiniteMetricSpace.from_points(pts)
        view = TrivialGroupoidView(base=space)
        for g in view.arrows():
            assert (view.norm(g) == 0) == (g[0] == g[1])
            assert view.norm(view.inverse(g)) == view.norm(g)
            for h in view.arrows():
                if g[1] == h[0]:
                    assert view.norm(view.compose(g, h)) <= view.norm(g) + view.norm(h) + 1e-12
