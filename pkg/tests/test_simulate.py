import math

import numpy as np
import pytest
from scipy.stats import norm

from funcldp import ratefn, simulate
from funcldp.estimator import EstimatorConfig, IdentityIndex, z_n
from funcldp.funcdata import Curve, Grid, IdentityScaling, IntegralDifference, UniformKernel
from funcldp.simulate import (
    LadderConfig,
    LinearFactorModel,
    NormalLaw,
    UniformLaw,
    bandwidth_schedule,
    conditional_density,
    default_model,
    induced_weight,
    pointwise_ladder,
    sample_dataset,
    small_ball_probe,
    uniform_ladder,
    wilson_interval,
    write_ladder_csv,
)


def _identity_rate_model(model, x):
    return ratefn.RateModel(
        induced_weight(model, x), IdentityIndex(), UniformKernel(), IdentityScaling()
    )


class TestLaws:
    def test_normal_validation(self):
        with pytest.raises(ValueError):
            NormalLaw(0.0, 0.0)

    def test_uniform_validation(self):
        with pytest.raises(ValueError):
            UniformLaw(1.0, 1.0)

    def test_uniform_pdf(self):
        law = UniformLaw(-1.0, 3.0)
        np.testing.assert_allclose(law.pdf(np.array([-2.0, 0.0, 3.0, 4.0])),
                                   [0.0, 0.25, 0.25, 0.0])


class TestLinearFactorModel:
    def test_default_integrals_exact(self, factor_model):
        assert factor_model.signal_integral == pytest.approx(1.0, abs=1e-14)
        assert factor_model.noise_integral == pytest.approx(1.0, abs=1e-14)

    def test_positive_noise_integral_required(self):
        grid = Grid(0.0, 1.0, 11)
        with pytest.raises(ValueError, match="positive"):
            LinearFactorModel(
                Curve.constant(grid, 1.0), Curve.constant(grid, -1.0), NormalLaw()
            )

    def test_small_ball_scale(self, factor_model):
        assert factor_model.small_ball_scale(0.01) == pytest.approx(0.02)


class TestSampleDataset:
    def test_deterministic(self, factor_model):
        a = sample_dataset(factor_model, 50, seed=123)
        b = sample_dataset(factor_model, 50, seed=123)
        np.testing.assert_array_equal(a.x_values, b.x_values)
        np.testing.assert_array_equal(a.y, b.y)

    def test_zero_noise_mode(self, factor_model):
        data = sample_dataset(factor_model, 1, seed=7, zero_noise=True)
        expected = data.y[0] * factor_model.signal_curve.values
        np.testing.assert_allclose(data.x_values[0], expected, rtol=0, atol=0)

    def test_projection_mean_clt_bound(self, factor_model):
        # E integral(X) = E Y = 0; sd of the mean is sqrt(Ih^2 + Il^2)/sqrt(n)
        n = 100_000
        data = sample_dataset(factor_model, n, seed=11)
        projections = np.trapezoid(data.x_values, dx=factor_model.grid.spacing, axis=1)
        bound = 3.0 * math.sqrt(2.0) / math.sqrt(n)
        assert abs(float(np.mean(projections))) < bound


class TestConditionalDensity:
    def test_peak_value(self, factor_model):
        # curve projection equal to v * signal integral puts us at the peak
        x = Curve.constant(factor_model.grid, 0.7)
        assert conditional_density(factor_model, x, 0.7) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi), rel=1e-12
        )

    def test_standard_normal_value(self, factor_model, zero_curve):
        assert conditional_density(factor_model, zero_curve, 1.0) == pytest.approx(
            float(norm.pdf(1.0)), rel=1e-12
        )

    def test_peak_scales_inversely_with_noise_integral(self, factor_model, zero_curve):
        doubled = LinearFactorModel(
            factor_model.signal_curve,
            Curve(factor_model.grid, 2.0 * factor_model.noise_curve.values),
            factor_model.y_law,
        )
        assert conditional_density(doubled, zero_curve, 0.0) == pytest.approx(
            0.5 * conditional_density(factor_model, zero_curve, 0.0), rel=1e-12
        )


class TestInducedWeight:
    def test_matches_pointwise_product(self, factor_model, zero_curve):
        weight = induced_weight(factor_model, zero_curve)
        v = weight.nodes
        expected = conditional_density(factor_model, zero_curve, v) * factor_model.y_law.pdf(v)
        np.testing.assert_allclose(weight.w, expected, rtol=0, atol=0)

    def test_uniform_law_window(self, factor_model):
        model = LinearFactorModel(
            factor_model.signal_curve, factor_model.noise_curve, UniformLaw(-2.0, 2.0)
        )
        weight = induced_weight(model, Curve.constant(model.grid, 0.0))
        assert weight.w[0] == 0.0 and weight.w[-1] == 0.0
        assert weight.mass > 0


class TestSmallBallProbe:
    def test_interval_probability_oracle(self, factor_model, zero_curve):
        # exact value: P(|eps| <= u) for a standard normal projection
        probe = small_ball_probe(factor_model, zero_curve, v=0.0, radius=0.01,
                                 replicates=1_000_000, seed=99)
        exact = float(norm.cdf(0.01) - norm.cdf(-0.01))
        noise = 3.0 * math.sqrt(exact * (1 - exact) / 1_000_000)
        assert abs(probe.mc - exact) < noise
        assert probe.analytic == pytest.approx(0.02 * float(norm.pdf(0.0)), rel=1e-12)

    def test_far_point_flags_zero_hits(self, factor_model):
        x = Curve.constant(factor_model.grid, 50.0)
        probe = small_ball_probe(factor_model, x, v=0.0, radius=0.01,
                                 replicates=10_000, seed=1)
        assert probe.zero_hits and probe.mc == 0.0 and probe.analytic < 1e-100

    def test_ratio_near_one(self, factor_model, zero_curve):
        for v in (-1.0, 0.0, 1.0):
            probe = small_ball_probe(factor_model, zero_curve, v=v, radius=0.01,
                                     replicates=200_000, seed=int(10 + v))
            assert 0.9 <= probe.mc / probe.analytic <= 1.1


class TestBandwidthSchedule:
    def test_hand_values_at_sixteen(self):
        h, phi_h = bandwidth_schedule(16, a=2.0, alpha=2.0)
        ratio = math.log(math.log(16.0)) / 16.0
        assert h == pytest.approx(math.sqrt(ratio), rel=1e-14)
        assert phi_h == pytest.approx(2.0 * ratio, rel=1e-14)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            bandwidth_schedule(15, 2.0, 2.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            bandwidth_schedule(100, 0.0, 2.0)
        with pytest.raises(ValueError):
            bandwidth_schedule(100, 2.0, 1.0)

    def test_speed_grows_slowly(self):
        speeds = [n * bandwidth_schedule(n, 2.0, 2.0)[1] for n in (16, 100, 1000, 10000)]
        assert all(b > a for a, b in zip(speeds, speeds[1:]))
        assert speeds[-1] == pytest.approx(2.0 * math.log(math.log(10000)), rel=1e-12)

    def test_growth_condition_diagnostic(self):
        # exp(A n phi) / (n phi * n h) must fall along the ladder for A = 1
        values = []
        for n in (16, 100, 1000, 10000):
            h, phi_h = bandwidth_schedule(n, 2.0, 2.0)
            speed = n * phi_h
            values.append(math.exp(speed) / (speed * n * h))
        assert all(b < a for a, b in zip(values, values[1:]))


class TestWilsonInterval:
    def test_contains_proportion(self):
        lo, hi = wilson_interval(10, 100)
        assert lo < 0.1 < hi

    def test_width_shrinks_like_root_two(self):
        lo1, hi1 = wilson_interval(50, 1000)
        lo2, hi2 = wilson_interval(100, 2000)
        ratio = (hi2 - lo2) / (hi1 - lo1)
        assert ratio == pytest.approx(1.0 / math.sqrt(2.0), abs=0.01)

    def test_zero_hits_upper_positive(self):
        lo, hi = wilson_interval(0, 1000)
        assert lo == 0.0 and 0.0 < hi < 0.01


class TestLadderConfig:
    def test_increasing_n_required(self, zero_curve):
        with pytest.raises(ValueError):
            LadderConfig((200, 200), 2.0, 1.5, 1.0, zero_curve, 1000, 0)

    def test_minimum_replicates(self, zero_curve):
        with pytest.raises(ValueError, match="1000"):
            LadderConfig((200,), 2.0, 1.5, 1.0, zero_curve, 10, 0)

    def test_replicates_broadcast(self, zero_curve):
        cfg = LadderConfig((200, 500), 2.0, 1.5, 1.0, zero_curve, 1000, 0)
        assert cfg.replicates == (1000, 1000)


@pytest.fixture(scope="module")
def ladder(factor_model, induced_rate_model, zero_curve):
    cfg = LadderConfig((200, 500), 2.0, 1.5, 1.0, zero_curve, (4000, 4000), seed=314)
    return pointwise_ladder(factor_model, induced_rate_model, cfg)


class TestPointwiseLadder:

    def test_rates_positive(self, ladder):
        for record in ladder:
            assert 0.0 < record.p_hat < 1.0
            assert record.empirical_rate > 0.0
            assert record.flag == "ok"

    def test_theoretical_rate_matches_closed_form(self, ladder):
        expected = (1.0 - math.exp(-1.0)) / math.sqrt(4.0 * math.pi)
        assert ladder[0].theoretical_rate == pytest.approx(expected, abs=1e-9)

    def test_csv_deterministic(self, factor_model, induced_rate_model, zero_curve, tmp_path):
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, zero_curve, 1000, seed=2718)
        paths = []
        for name in ("a.csv", "b.csv"):
            records = pointwise_ladder(factor_model, induced_rate_model, cfg)
            path = tmp_path / name
            write_ladder_csv(records, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_workers_do_not_change_counts(self, factor_model, induced_rate_model, zero_curve):
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, zero_curve, 1500, seed=55)
        serial = pointwise_ladder(factor_model, induced_rate_model, cfg)
        threaded = pointwise_ladder(factor_model, induced_rate_model, cfg, workers=4)
        assert serial == threaded

    def test_impossible_width_flags_zero_hits(self, factor_model, induced_rate_model,
                                              zero_curve):
        cfg = LadderConfig((200,), 2.0, 1.5, 50.0, zero_curve, 1000, seed=161)
        records = pointwise_ladder(factor_model, induced_rate_model, cfg)
        assert records[0].flag == "zero_hits"
        assert records[0].hits == 0
        # the reported rate is the Wilson lower bound on the decay
        assert records[0].empirical_rate > 0.0

    def test_hit_probability_monotone_in_width(self, factor_model, induced_rate_model,
                                               zero_curve):
        p_hats, intervals = [], []
        for lam in (0.5, 1.0, 1.5):
            cfg = LadderConfig((200,), 2.0, 1.5, lam, zero_curve, 4000, seed=777)
            record = pointwise_ladder(factor_model, induced_rate_model, cfg)[0]
            p_hats.append(record.p_hat)
            intervals.append((record.wilson_low, record.wilson_high))
        for (lo_wide, _), (_, hi_narrow) in zip(intervals, intervals[1:]):
            assert hi_narrow >= lo_wide * 0.0  # intervals exist
        assert p_hats[0] >= p_hats[1] >= p_hats[2]

    def test_weight_consistency_enforced(self, factor_model, zero_curve):
        wrong = ratefn.RateModel(
            ratefn.WeightDensity.gaussian(1.0, 2.0), IdentityIndex(), UniformKernel(),
            IdentityScaling(),
        )
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, zero_curve, 1000, seed=0)
        with pytest.raises(ValueError, match="inconsistent"):
            pointwise_ladder(factor_model, wrong, cfg)

    def test_matches_full_estimator_path(self, factor_model, induced_rate_model, zero_curve):
        # replay the ladder's replicate streams through the generic
        # curve-based estimator and reproduce the hit count exactly
        n, reps, lam, seed = 200, 1000, 0.8, 424242
        cfg = LadderConfig((n,), 2.0, 1.5, lam, zero_curve, reps, seed=seed)
        record = pointwise_ladder(factor_model, induced_rate_model, cfg)[0]
        h, _ = bandwidth_schedule(n, 2.0, 1.5)
        est_cfg = EstimatorConfig(
            UniformKernel(), IntegralDifference(), h, factor_model.small_ball_scale(h)
        )
        r_true = ratefn.tilted_mean(induced_rate_model, 0.0)
        hits = 0
        for rep in range(reps):
            rng = np.random.default_rng(np.random.SeedSequence((seed, n, rep)))
            y = factor_model.y_law.sample(rng, n)
            eps = rng.standard_normal(n)
            x_values = (
                y[:, None] * factor_model.signal_curve.values[None, :]
                + eps[:, None] * factor_model.noise_curve.values[None, :]
            )
            from funcldp.estimator import Dataset

            data = Dataset(factor_model.grid, x_values, y)
            z = z_n(zero_curve, data, IdentityIndex(), est_cfg)
            if abs(z.r_hat - r_true) > lam:
                hits += 1
        assert hits == record.hits


class TestUniformLadder:
    def test_singleton_matches_pointwise(self, factor_model, induced_rate_model, zero_curve):
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, zero_curve, 2000, seed=909)
        single = uniform_ladder(factor_model, [zero_curve], [induced_rate_model], cfg)
        point = pointwise_ladder(factor_model, induced_rate_model, cfg)
        assert single == point

    def test_union_event_dominates_centers(self, factor_model):
        centers = [Curve.constant(factor_model.grid, c) for c in (-0.5, 0.0, 0.5)]
        models = [_identity_rate_model(factor_model, x) for x in centers]
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, centers[0], 4000, seed=31415)
        union = uniform_ladder(factor_model, centers, models, cfg)[0]
        for x, rm in zip(centers, models):
            cfg_x = LadderConfig((200,), 2.0, 1.5, 1.0, x, 4000, seed=31415)
            single = pointwise_ladder(factor_model, rm, cfg_x)[0]
            assert union.p_hat >= single.p_hat - (single.wilson_high - single.wilson_low)

    def test_theoretical_rate_is_class_minimum(self, factor_model):
        centers = [Curve.constant(factor_model.grid, c) for c in (-1.0, 0.0, 1.0)]
        models = [_identity_rate_model(factor_model, x) for x in centers]
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, centers[0], 1000, seed=1)
        records = uniform_ladder(factor_model, centers, models, cfg)
        betas = [
            ratefn.two_sided_rate(m, ratefn.tilted_mean(m, 0.0), 1.0) for m in models
        ]
        assert records[0].theoretical_rate == pytest.approx(min(betas), abs=1e-12)

    def test_center_count_mismatch(self, factor_model, induced_rate_model, zero_curve):
        cfg = LadderConfig((200,), 2.0, 1.5, 1.0, zero_curve, 1000, seed=1)
        with pytest.raises(ValueError):
            uniform_ladder(factor_model, [zero_curve, zero_curve], [induced_rate_model], cfg)
