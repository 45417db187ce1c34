"""Early-stopped mirror descent: analytic flow, stopping guarantees, divergence."""

import numpy as np
import pytest

from offset_risk.estimators import DivergenceError, mirror_descent
from offset_risk.model import DiscreteDistribution, Sample, squared_loss

LOSS = squared_loss(1.0)


def scalar_instance():
    # Single observation x = 1, y = 0: R_n(w) = w^2 and the Euclidean flow
    # is w_t = exp(-2t) from w_0 = 1.
    dist = DiscreteDistribution(xs=[[1.0]], ys=[0.0], probs=[1.0], b=1.0)
    return dist, Sample(indices=[0])


def random_linear_instance(rng, positive=False):
    s = int(rng.integers(4, 16))
    d = int(rng.integers(2, 5))
    xs = rng.normal(size=(s, d))
    ys = rng.uniform(-1, 1, size=s)
    dist = DiscreteDistribution(xs=xs, ys=ys, probs=np.full(s, 1 / s), b=1.0)
    sample = Sample(indices=np.arange(s))
    if positive:
        w_star = rng.uniform(0.0, 0.8, size=d)
        w0 = rng.uniform(0.2, 1.0, size=d)
    else:
        w_star = rng.normal(scale=0.5, size=d)
        w0 = rng.normal(scale=0.5, size=d)
    return dist, sample, w_star, w0


class TestAnalyticExample:
    def test_trajectory_matches_exponential_decay(self):
        dist, sample = scalar_instance()
        step = 1e-3
        trace = mirror_descent(
            sample, dist, LOSS, w_star=[0.0], w0=[1.0], mirror_map="euclidean",
            epsilon=0.05, step=step,
        )
        ts = np.array([t for t, _ in trace.w_path])
        ws = np.array([w[0] for _, w in trace.w_path])
        assert np.all(np.abs(ws - np.exp(-2.0 * ts)) <= 5.0 * step)

    def test_gap_curve_and_stopping_time(self):
        dist, sample = scalar_instance()
        step, eps = 1e-4, 0.05
        trace = mirror_descent(
            sample, dist, LOSS, w_star=[0.0], w0=[1.0], epsilon=eps, step=step
        )
        ts = np.array([t for t, _ in trace.delta_path])
        deltas = np.array([v for _, v in trace.delta_path])
        # delta(t) = 2 exp(-4t) for the continuous flow.
        assert np.max(np.abs(deltas - 2.0 * np.exp(-4.0 * ts))) <= 50.0 * step
        expected_tstar = np.log(2.0 / eps) / 4.0
        assert trace.t_star == pytest.approx(expected_tstar, abs=20 * step)
        assert trace.bregman_initial == 0.5
        assert trace.t_star <= 1.0 / eps  # 2 D0 / eps

    def test_euler_excess_scales_with_step(self):
        dist, sample = scalar_instance()
        excesses = []
        for step in (2e-3, 1e-3, 5e-4):
            trace = mirror_descent(
                sample, dist, LOSS, w_star=[0.0], w0=[1.0], epsilon=0.01, step=step
            )
            excesses.append(trace.euler_excess)
        assert excesses[0] > excesses[1] > excesses[2]
        assert excesses[0] <= 8.0 * excesses[2] + 1e-12  # roughly linear in step

    def test_start_at_target(self):
        dist, sample = scalar_instance()
        trace = mirror_descent(
            sample, dist, LOSS, w_star=[0.0], w0=[0.0], epsilon=1e-3, step=1e-3
        )
        assert trace.t_star == 0.0
        assert trace.offset is not None and trace.offset.holds


class TestStoppingGuarantees:
    @pytest.mark.parametrize("mirror_map", ["euclidean", "negative_entropy"])
    def test_three_conditions_on_random_instances(self, mirror_map):
        rng = np.random.default_rng(42 if mirror_map == "euclidean" else 43)
        for _ in range(20):
            dist, sample, w_star, w0 = random_linear_instance(
                rng, positive=mirror_map == "negative_entropy"
            )
            step = 2e-4
            trace = mirror_descent(
                sample, dist, LOSS, w_star, w0, mirror_map=mirror_map,
                epsilon=0.05, step=step,
            )
            assert trace.t_star is not None
            slack_t = trace.euler_excess / trace.epsilon + step
            assert trace.t_star <= 2.0 * trace.bregman_initial / trace.epsilon + slack_t
            stop_div = trace.bregman_path[-1][1]
            assert stop_div <= trace.bregman_initial + trace.euler_excess + 1e-9
            assert trace.offset is not None
            assert trace.offset.gamma == 0.5 * LOSS.strong_convexity
            assert trace.offset.margin >= -1e-12

    def test_bregman_divergence_monotone_up_to_excess(self):
        rng = np.random.default_rng(7)
        dist, sample, w_star, w0 = random_linear_instance(rng)
        trace = mirror_descent(sample, dist, LOSS, w_star, w0, epsilon=0.02, step=1e-4)
        divs = np.array([v for _, v in trace.bregman_path])
        assert np.all(divs <= trace.bregman_initial + trace.euler_excess + 1e-9)

    def test_time_grid_strictly_increasing(self):
        rng = np.random.default_rng(8)
        dist, sample, w_star, w0 = random_linear_instance(rng)
        trace = mirror_descent(sample, dist, LOSS, w_star, w0, epsilon=0.05, step=1e-3)
        ts = np.array([t for t, _ in trace.w_path])
        assert np.all(np.diff(ts) > 0)


class TestValidationAndFailure:
    def test_entropy_requires_positive_start(self):
        dist, sample = scalar_instance()
        with pytest.raises(ValueError, match="positive w0"):
            mirror_descent(sample, dist, LOSS, [0.5], [0.0],
                           mirror_map="negative_entropy", epsilon=0.1, step=1e-3)
        with pytest.raises(ValueError, match="nonnegative w_star"):
            mirror_descent(sample, dist, LOSS, [-0.5], [1.0],
                           mirror_map="negative_entropy", epsilon=0.1, step=1e-3)

    def test_unknown_map_rejected(self):
        dist, sample = scalar_instance()
        with pytest.raises(ValueError, match="mirror map"):
            mirror_descent(sample, dist, LOSS, [0.0], [1.0], mirror_map="hyperbolic",
                           epsilon=0.1, step=1e-3)

    def test_divergence_attaches_trace(self):
        # Step far above the stability threshold of the scalar flow.
        dist, sample = scalar_instance()
        with pytest.raises(DivergenceError) as err:
            mirror_descent(sample, dist, LOSS, [0.0], [1.0], epsilon=1e-12, step=5.0)
        assert err.value.trace.w_path  # partial trajectory is recoverable

    def test_explicit_horizon_can_cut_run_short(self):
        dist, sample = scalar_instance()
        trace = mirror_descent(
            sample, dist, LOSS, [0.0], [1.0], epsilon=1e-6, step=1e-3, t_max=0.01
        )
        assert trace.t_star is None and trace.offset is None

    def test_step_and_epsilon_validation(self):
        dist, sample = scalar_instance()
        with pytest.raises(ValueError):
            mirror_descent(sample, dist, LOSS, [0.0], [1.0], epsilon=0.1, step=0.0)
        with pytest.raises(ValueError):
            mirror_descent(sample, dist, LOSS, [0.0], [1.0], epsilon=0.0, step=1e-3)
