import math

import numpy as np
import pytest

from funcldp import simulate
from funcldp.estimator import (
    Dataset,
    EstimatorConfig,
    IdentityIndex,
    IntervalIndicator,
    LipschitzIndex,
    RegressionEstimate,
    delta,
    finite_n_log_mgf,
    z_n,
)
from funcldp.funcdata import (
    Curve,
    ExpDecayKernel,
    Grid,
    IntegralDifference,
    UniformKernel,
)

GRID = Grid(0.0, 1.0, 101)


def _cfg(h=0.5, phi=1.0, kernel=None):
    return EstimatorConfig(kernel or UniformKernel(), IntegralDifference(), h, phi)


def _const_dataset(values, y):
    pairs = [(Curve.constant(GRID, v), yi) for v, yi in zip(values, y)]
    return Dataset.from_pairs(pairs)


class TestIndexFunctions:
    def test_identity(self):
        idx = IdentityIndex()
        np.testing.assert_array_equal(idx(np.array([-1.0, 0.5])), [-1.0, 0.5])
        assert idx.sup_bound == math.inf

    def test_indicator_membership(self):
        idx = IntervalIndicator(((0.0, 1.0), (2.0, math.inf)))
        np.testing.assert_array_equal(
            idx(np.array([-0.5, 0.0, 0.7, 1.5, 3.0])), [0.0, 1.0, 1.0, 0.0, 1.0]
        )

    def test_indicator_validation(self):
        with pytest.raises(ValueError):
            IntervalIndicator(())
        with pytest.raises(ValueError):
            IntervalIndicator(((1.0, 1.0),))

    def test_lipschitz_needs_finite_bound(self):
        with pytest.raises(ValueError):
            LipschitzIndex(np.tanh, math.inf)


class TestDataset:
    def test_grid_consistency(self):
        other = Grid(0.0, 2.0, 101)
        pairs = [
            (Curve.constant(GRID, 0.0), 1.0),
            (Curve.constant(other, 0.0), 2.0),
        ]
        with pytest.raises(ValueError):
            Dataset.from_pairs(pairs)

    def test_nonempty(self):
        with pytest.raises(ValueError):
            Dataset.from_pairs([])

    def test_curve_accessor(self):
        data = _const_dataset([0.3], [1.0])
        np.testing.assert_allclose(data.curve(0).values, 0.3)


class TestDelta:
    def test_at_center(self):
        x = Curve.constant(GRID, 0.0)
        assert delta(x, x, _cfg()) == 1.0

    def test_at_bandwidth_edge(self):
        x = Curve.constant(GRID, 0.0)
        xi = Curve.constant(GRID, 0.5)  # distance exactly h
        assert delta(x, xi, _cfg(h=0.5)) == 1.0

    def test_outside_support(self):
        x = Curve.constant(GRID, 0.0)
        xi = Curve.constant(GRID, 1.0)  # distance 2h
        assert delta(x, xi, _cfg(h=0.5)) == 0.0

    def test_hard_zero_beats_kernel_value(self):
        # even kernels positive at 1 are zeroed beyond the support edge
        x = Curve.constant(GRID, 0.0)
        xi = Curve.constant(GRID, 0.6)
        assert delta(x, xi, _cfg(h=0.5, kernel=ExpDecayKernel())) == 0.0


class TestZn:
    def test_hand_case(self):
        # two in-range points, responses 1 and 3, phi = 1
        data = _const_dataset([0.1, -0.2], [1.0, 3.0])
        z = z_n(Curve.constant(GRID, 0.0), data, IdentityIndex(), _cfg(h=0.5, phi=1.0))
        assert z == RegressionEstimate(1.0, 2.0, 2.0, 2)

    def test_empty_neighborhood_convention(self):
        data = _const_dataset([2.0, -3.0], [1.0, 3.0])
        z = z_n(Curve.constant(GRID, 0.0), data, IdentityIndex(), _cfg(h=0.5))
        assert z == RegressionEstimate(0.0, 0.0, 0.0, 0)

    def test_indicator_estimate_in_unit_interval(self):
        rng = np.random.default_rng(5)
        data = _const_dataset(rng.uniform(-0.4, 0.4, 30), rng.normal(size=30))
        idx = IntervalIndicator(((0.0, math.inf),))
        z = z_n(Curve.constant(GRID, 0.0), data, idx, _cfg(h=0.5))
        assert 0.0 <= z.r_hat <= 1.0

    def test_kernel_scale_invariance(self):
        rng = np.random.default_rng(9)
        data = _const_dataset(rng.uniform(-0.6, 0.6, 40), rng.normal(size=40))
        x = Curve.constant(GRID, 0.0)
        base = z_n(x, data, IdentityIndex(), _cfg(h=0.5, kernel=ExpDecayKernel()))
        scaled = z_n(
            x, data, IdentityIndex(), _cfg(h=0.5, kernel=ExpDecayKernel(scale=3.0))
        )
        assert scaled.r_hat == pytest.approx(base.r_hat, abs=1e-14)
        assert scaled.r_n1 == pytest.approx(3.0 * base.r_n1, rel=1e-14)
        assert scaled.r_n2 == pytest.approx(3.0 * base.r_n2, rel=1e-14)

    def test_range_bound(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            n = int(rng.integers(3, 40))
            data = _const_dataset(rng.uniform(-1, 1, n), rng.normal(size=n))
            z = z_n(Curve.constant(GRID, 0.0), data, IdentityIndex(), _cfg(h=0.5))
            if z.active_count:
                active = np.abs(data.x_values[:, 0]) <= 0.5
                lo, hi = data.y[active].min(), data.y[active].max()
                assert lo - 1e-12 <= z.r_hat <= hi + 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(33)
        values, y = rng.uniform(-1, 1, 25), rng.normal(size=25)
        data = _const_dataset(values, y)
        perm = rng.permutation(25)
        shuffled = _const_dataset(values[perm], y[perm])
        x = Curve.constant(GRID, 0.0)
        a = z_n(x, data, IdentityIndex(), _cfg(h=0.4))
        b = z_n(x, shuffled, IdentityIndex(), _cfg(h=0.4))
        assert a.r_n1 == pytest.approx(b.r_n1, abs=1e-15)
        assert a.r_n2 == pytest.approx(b.r_n2, abs=1e-15)

    def test_consistency_under_shrinking_bandwidth(self):
        # median absolute estimation error drops from n=200 to n=2000
        model = simulate.default_model()
        x0 = Curve.constant(model.grid, 0.0)
        medians = []
        for n in (200, 2000):
            h, _ = simulate.bandwidth_schedule(n, 2.0, 1.5)
            cfg = EstimatorConfig(
                UniformKernel(), IntegralDifference(), h, model.small_ball_scale(h)
            )
            errors = []
            for seed in range(50):
                data = simulate.sample_dataset(model, n, seed)
                z = z_n(x0, data, IdentityIndex(), cfg)
                errors.append(abs(z.r_hat - 0.0))
            medians.append(float(np.median(errors)))
        assert medians[1] < medians[0]


class TestFiniteNLogMgf:
    def test_zero_tilt_is_zero(self):
        data = _const_dataset([0.1], [2.0])
        out = finite_n_log_mgf(
            Curve.constant(GRID, 0.0), lambda rng: data, IdentityIndex(),
            _cfg(h=0.5, phi=0.7), 0.0, 0.0, replicates=8, seed=0,
        )
        assert out.value == 0.0 and not out.overflow

    def test_degenerate_single_pair(self):
        # deterministic dataset: the estimate is (t1 + t2 y) K / phi
        data = _const_dataset([0.1], [2.0])
        cfg = _cfg(h=0.5, phi=0.7)
        out = finite_n_log_mgf(
            Curve.constant(GRID, 0.0), lambda rng: data, IdentityIndex(),
            cfg, 0.3, 0.2, replicates=4, seed=0,
        )
        assert out.value == pytest.approx((0.3 + 0.2 * 2.0) * 1.0 / 0.7, rel=1e-12)

    def test_overflow_flag(self):
        data = _const_dataset([0.1], [2.0])
        out = finite_n_log_mgf(
            Curve.constant(GRID, 0.0), lambda rng: data, IdentityIndex(),
            _cfg(h=0.5), math.inf, 0.0, replicates=2, seed=0,
        )
        assert out.overflow and out.value == math.inf

    def test_variable_size_rejected(self):
        sizes = iter([1, 2])

        def law(rng):
            k = next(sizes)
            return _const_dataset([0.0] * k, [0.0] * k)

        with pytest.raises(ValueError):
            finite_n_log_mgf(
                Curve.constant(GRID, 0.0), law, IdentityIndex(), _cfg(),
                0.1, 0.1, replicates=2, seed=0,
            )
