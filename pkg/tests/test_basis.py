"""Design construction: knots, hat functions, one-hot, streaming."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from numpy.testing import assert_allclose

from splinetree import (
    ConstantFeatureError,
    Feature,
    KnotVector,
    SurrogateDataset,
    build_spec,
    design_matrix,
    design_rows,
    gram_accumulate,
    onehot_row,
    quantile_knots,
    spline_row,
)
from splinetree.basis import UnseenCategoryWarning, onehot_rows


class TestQuantileKnots:
    def test_two_knots_are_min_max(self):
        kv = quantile_knots(np.arange(1.0, 101.0), 2)
        assert_allclose(kv.knots, [1.0, 100.0])

    def test_constant_feature_rejected(self):
        with pytest.raises(ConstantFeatureError):
            quantile_knots(np.full(50, 3.25), 5, feature="flat")

    def test_matches_reference_quantiles(self):
        values = np.arange(1.0, 101.0)
        kv = quantile_knots(values, 5)
        expected = np.quantile(values, [0, 0.25, 0.5, 0.75, 1.0], method="midpoint")
        assert_allclose(kv.knots, expected, rtol=1e-12)

    def test_duplicates_collapse(self):
        values = np.array([0.0] * 90 + [1.0] * 10)
        kv = quantile_knots(values, 10)
        assert kv.knots.size < 10
        assert kv.knots[0] == 0.0 and kv.knots[-1] == 1.0

    def test_endpoints_are_observed_extremes(self, rng):
        values = rng.normal(size=500)
        kv = quantile_knots(values, 15)
        assert kv.knots[0] == values.min() and kv.knots[-1] == values.max()


class TestSplineRow:
    def setup_method(self):
        self.kv = KnotVector("x", np.array([-1.0, -0.25, 0.5, 2.0]))

    def test_unit_vector_at_knots(self):
        for k, t in enumerate(self.kv.knots):
            row = spline_row(t, self.kv)
            expected = np.zeros(4)
            expected[k] = 1.0
            assert_allclose(row, expected, atol=1e-15)

    def test_midpoint_splits_evenly(self):
        mid = 0.5 * (self.kv.knots[1] + self.kv.knots[2])
        row = spline_row(mid, self.kv)
        assert_allclose(row, [0.0, 0.5, 0.5, 0.0])

    def test_clamped_extrapolation(self):
        low = spline_row(-7.0, self.kv)
        assert_allclose(low, spline_row(-1.0, self.kv))
        high = spline_row(9.0, self.kv)
        assert_allclose(high, spline_row(2.0, self.kv))

    def test_piecewise_linear_slope(self):
        # finite differences between knot midpoints recover the hat slope
        t = self.kv.knots
        for k in range(len(t) - 1):
            a, b = t[k], t[k + 1]
            x1, x2 = a + 0.25 * (b - a), a + 0.75 * (b - a)
            fd = (spline_row(x2, self.kv) - spline_row(x1, self.kv)) / (x2 - x1)
            assert fd[k + 1] == pytest.approx(1.0 / (b - a), rel=1e-6)
            assert fd[k] == pytest.approx(-1.0 / (b - a), rel=1e-6)

    def test_continuity_across_knots(self):
        for t in self.kv.knots[1:-1]:
            below = spline_row(t - 1e-9, self.kv)
            above = spline_row(t + 1e-9, self.kv)
            assert np.max(np.abs(below - above)) < 1e-7


@settings(max_examples=80, deadline=None)
@given(
    hst.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
    hst.integers(min_value=0, max_value=2**32 - 1),
)
def test_partition_of_unity(x, seed):
    rng = np.random.default_rng(seed)
    knots = np.unique(rng.uniform(-2, 2, size=rng.integers(2, 12)))
    if knots.size < 2:
        knots = np.array([-2.0, 2.0])
    kv = KnotVector("x", knots)
    assert spline_row(x, kv).sum() == pytest.approx(1.0, abs=1e-12)


class TestOnehot:
    LEVELS = ("a", "b", "c", "d")

    def test_reference_level_all_zero(self):
        assert_allclose(onehot_row("a", self.LEVELS), np.zeros(3))

    def test_second_level_indicator(self):
        assert_allclose(onehot_row("b", self.LEVELS), [1, 0, 0])

    def test_unseen_level_warns_and_zeroes(self):
        with pytest.warns(UnseenCategoryWarning):
            row = onehot_row("zzz", self.LEVELS)
        assert_allclose(row, np.zeros(3))

    def test_vectorized_matches_scalar(self):
        values = np.array(["c", "a", "d", "b"])
        rows = onehot_rows(values, self.LEVELS)
        for i, v in enumerate(values):
            assert_allclose(rows[i], onehot_row(v, self.LEVELS))


class TestBuildDesign:
    def make(self, rng, n=50):
        ds = SurrogateDataset(
            features=(Feature("x1", "continuous"), Feature("c1", "categorical")),
            columns={
                "x1": rng.uniform(0, 1, n),
                "c1": rng.choice(["u", "v", "w"], size=n),
            },
            response=rng.standard_normal(n),
        )
        return ds

    def test_width_arithmetic(self, rng):
        ds = self.make(rng)
        spec = build_spec(ds, num_knots=3)
        # intercept + 3 spline columns + 2 one-hot columns
        assert spec.total_columns == 6
        X = design_matrix(ds, spec)
        assert X.shape == (50, 6)
        assert_allclose(X[:, 0], 1.0)

    def test_rows_at_knot_points_are_unit(self, rng):
        ds = self.make(rng)
        spec = build_spec(ds, num_knots=3)
        kv = spec.knots["x1"]
        block = spec.block_for("x1")
        probe = SurrogateDataset(
            features=ds.features,
            columns={"x1": kv.knots.copy(), "c1": np.array(["u"] * len(kv))},
            response=np.zeros(len(kv)),
        )
        X = design_matrix(probe, spec)
        assert_allclose(X[:, block.columns], np.eye(len(kv)), atol=1e-15)

    def test_streamed_gram_equals_batch(self, rng):
        ds = self.make(rng, n=80)
        spec = build_spec(ds, num_knots=4)
        batch = design_matrix(ds, spec)
        streamed = np.vstack(list(design_rows(ds, spec)))
        g1 = gram_accumulate(batch, ds.response)
        g2 = gram_accumulate(streamed, ds.response)
        assert_allclose(g1.xtx, g2.xtx, rtol=1e-12, atol=1e-12)
        assert_allclose(g1.xty, g2.xty, rtol=1e-12, atol=1e-12)

    def test_deterministic_bit_identical(self, rng):
        ds = self.make(rng)
        spec = build_spec(ds, num_knots=4)
        a = design_matrix(ds, spec)
        b = design_matrix(ds, spec)
        assert (a == b).all()

    def test_constant_feature_excluded(self, rng):
        ds = SurrogateDataset(
            features=(Feature("x1", "continuous"), Feature("flat", "continuous")),
            columns={"x1": rng.uniform(0, 1, 30), "flat": np.full(30, 7.0)},
            response=rng.standard_normal(30),
        )
        spec = build_spec(ds, num_knots=3)
        assert spec.excluded == ("flat",)
        assert all(b.feature != "flat" for b in spec.blocks)

    def test_spline_block_collinearity_is_handled(self, rng):
        # partition of unity makes the block collinear with the intercept;
        # the lambda = 0 fit must still be defined
        from splinetree import fit_node

        ds = self.make(rng, n=100)
        spec = build_spec(ds, num_knots=5)
        X = design_matrix(ds, spec)
        model = fit_node(gram_accumulate(X, ds.response), 0.0)
        assert np.all(np.isfinite(model.coefficients))

    def test_linear_block(self, rng):
        ds = self.make(rng)
        spec = build_spec(ds, num_knots=3, linear=("x1",))
        block = spec.block_for("x1")
        assert block.kind == "linear" and block.width == 1
        X = design_matrix(ds, spec)
        assert_allclose(X[:, block.start], ds.columns["x1"])
