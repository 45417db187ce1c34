"""Aggregation estimators: exact solves, feasibility, offset margins, duality."""

import numpy as np
import pytest

from offset_risk.estimators import check_offset, erm, midpoint, star
from offset_risk.instances import random_instance
from offset_risk.model import (
    DiscreteDistribution,
    Dictionary,
    PredictorWeights,
    Sample,
    custom_loss,
    draw_sample,
    squared_loss,
)
from offset_risk.risk import (
    bernstein_check,
    empirical_measure,
    empirical_risk,
    population_minimizer,
)

LOSS = squared_loss(1.0)


def noisy_constant_instance():
    # Two outputs +-0.5 at each of four feature points; rows are constants.
    s = 4
    xs = np.repeat(np.arange(s, dtype=float), 2)[:, None]
    ys = np.tile([0.5, -0.5], s)
    probs = np.full(2 * s, 1 / (2 * s))
    dist = DiscreteDistribution(xs=xs, ys=ys, probs=probs, b=1.0)
    rows = np.array([
        np.full(2 * s, 0.4),
        np.full(2 * s, -0.38),
        np.full(2 * s, 0.9),
    ])
    return dist, Dictionary(values=rows, b=1.0)


class TestErm:
    def test_single_row(self):
        dist, dictionary = random_instance(np.random.default_rng(0), max_m=1)
        sample = draw_sample(dist, 10, seed=1)
        assert erm(sample, dist, LOSS, dictionary) == 0

    def test_zero_risk_row_wins(self):
        dist = DiscreteDistribution(xs=[[0.0], [1.0]], ys=[0.2, -0.6],
                                    probs=[0.5, 0.5], b=1.0)
        dictionary = Dictionary(values=[[1.0, 1.0], [0.2, -0.6]], b=1.0)
        sample = Sample(indices=[0, 1, 1])
        assert erm(sample, dist, LOSS, dictionary) == 1

    def test_tie_goes_to_lowest_index(self):
        dist = DiscreteDistribution(xs=[[0.0]], ys=[0.0], probs=[1.0], b=1.0)
        dictionary = Dictionary(values=[[0.5], [-0.5]], b=1.0)
        assert erm(Sample(indices=[0, 0]), dist, LOSS, dictionary) == 0


class TestStar:
    def test_single_row_canonical_lambda(self):
        dist, dictionary = random_instance(np.random.default_rng(1), max_m=1)
        sample = draw_sample(dist, 8, seed=2)
        sol = star(sample, dist, LOSS, dictionary)
        assert sol.lam == 1.0 and sol.partner_index == sol.erm_index == 0
        base = empirical_risk(sample, dist, LOSS, dictionary,
                              PredictorWeights(weights=[1.0])).value
        assert sol.empirical_risk == pytest.approx(base, abs=1e-12)

    def test_closed_form_lambda_matches_fine_grid(self):
        rng = np.random.default_rng(3)
        lams = np.linspace(0.0, 1.0, 1_000_001)
        for trial in range(10):
            dist, dictionary = random_instance(rng, max_atoms=8, max_m=5)
            sample = draw_sample(dist, 12, seed=trial)
            sol = star(sample, dist, LOSS, dictionary)
            idx = sample.indices
            e_vals = dictionary.values[sol.erm_index, idx]
            p_vals = dictionary.values[sol.partner_index, idx]
            y = dist.ys[idx]
            grid_risks = np.mean(
                (lams[:, None] * e_vals + (1 - lams[:, None]) * p_vals - y) ** 2, axis=1
            )
            assert abs(sol.lam - lams[np.argmin(grid_risks)]) <= 2e-6
            assert sol.empirical_risk <= grid_risks.min() + 1e-12

    def test_never_worse_than_erm_or_any_row(self):
        rng = np.random.default_rng(4)
        for trial in range(25):
            dist, dictionary = random_instance(rng)
            sample = draw_sample(dist, int(rng.integers(2, 30)), seed=1000 + trial)
            sol = star(sample, dist, LOSS, dictionary)
            assert 0.0 <= sol.lam <= 1.0
            assert sol.weights.sparsity <= 2
            risks = [
                empirical_risk(sample, dist, LOSS, dictionary,
                               PredictorWeights(weights=np.eye(dictionary.m)[j])).value
                for j in range(dictionary.m)
            ]
            assert sol.empirical_risk <= min(risks) + 1e-12
            recomputed = empirical_risk(sample, dist, LOSS, dictionary, sol.weights).value
            assert sol.empirical_risk == pytest.approx(recomputed, abs=1e-12)

    def test_ternary_search_agrees_with_closed_form(self):
        # The same squared loss flagged as custom goes through the ternary
        # path; both routes must find the same mixture.
        slow = custom_loss(
            eval=LOSS.eval, grad=LOSS.grad, lipschitz=4.0, strong_convexity=2.0, b=1.0
        )
        rng = np.random.default_rng(5)
        for trial in range(5):
            dist, dictionary = random_instance(rng, max_m=4)
            sample = draw_sample(dist, 15, seed=trial)
            fast = star(sample, dist, LOSS, dictionary)
            slow_sol = star(sample, dist, slow, dictionary)
            # Equal-risk ties (e.g. lam = 1 against any partner) may resolve
            # to different indices across the two search paths; the achieved
            # risk is the contract.
            assert slow_sol.empirical_risk == pytest.approx(fast.empirical_risk, abs=1e-10)
            if slow_sol.partner_index == fast.partner_index:
                assert slow_sol.lam == pytest.approx(fast.lam, abs=1e-7)

    def test_star_offset_condition_versus_every_row(self):
        # The two-step mixture satisfies the margin inequality with
        # coefficient 1/18 against every dictionary row, deterministically.
        rng = np.random.default_rng(6)
        for trial in range(100):
            dist, dictionary = random_instance(rng)
            sample = draw_sample(dist, int(rng.integers(2, 50)), seed=2000 + trial)
            sol = star(sample, dist, LOSS, dictionary)
            for g in range(dictionary.m):
                report = check_offset(
                    sample, dist, LOSS, dictionary, sol.weights, g,
                    gamma=1.0 / 18.0, epsilon=0.0,
                )
                assert report.margin >= -1e-10


class TestMidpoint:
    def test_single_row(self):
        dist, dictionary = random_instance(np.random.default_rng(7), max_m=1)
        sample = draw_sample(dist, 6, seed=3)
        sol = midpoint(sample, dist, LOSS, dictionary, delta=0.1)
        assert sol.partner_index == sol.erm_index == 0
        assert sol.weights.weights[0] == 1.0

    def test_erm_always_admissible_and_never_worse(self):
        rng = np.random.default_rng(8)
        for trial in range(25):
            dist, dictionary = random_instance(rng)
            sample = draw_sample(dist, int(rng.integers(2, 30)), seed=3000 + trial)
            sol = midpoint(sample, dist, LOSS, dictionary, delta=0.05)
            assert sol.erm_index in sol.almost_minimizer_set
            erm_w = PredictorWeights(weights=np.eye(dictionary.m)[sol.erm_index])
            erm_risk = empirical_risk(sample, dist, LOSS, dictionary, erm_w).value
            mid_risk = empirical_risk(sample, dist, LOSS, dictionary, sol.weights).value
            assert mid_risk <= erm_risk + 1e-12
            if sol.partner_index != sol.erm_index:
                w = sol.weights.weights
                assert sorted(w[w != 0]) == [0.5, 0.5]

    def test_partner_is_population_minimizer_on_designed_instance(self):
        dist, dictionary = noisy_constant_instance()
        gstar = population_minimizer(dist, LOSS, dictionary).gstar_index
        assert gstar == 1
        found = False
        for seed in range(40):
            sample = draw_sample(dist, 60, seed=seed)
            if erm(sample, dist, LOSS, dictionary) != 0:
                continue
            found = True
            sol = midpoint(sample, dist, LOSS, dictionary, delta=0.1)
            assert gstar in sol.almost_minimizer_set
            # Brute force over admissible midpoints confirms the argmin.
            idx = sample.indices
            y = dist.ys[idx]
            e_vals = dictionary.values[sol.erm_index, idx]
            best = min(
                sol.almost_minimizer_set,
                key=lambda g: np.mean((0.5 * (e_vals + dictionary.values[g, idx]) - y) ** 2),
            )
            assert sol.partner_index == best == gstar
        assert found

    def test_probabilistic_offset_condition_with_frozen_constant(self):
        # The halfway-point estimator satisfies, with probability 1 - delta
        # over samples, the offset inequality against the best row with
        # coefficient c/64 and tolerance C * L^2/c * log(2m/delta)/n. The
        # constant C = 0.02 was fitted once on 4000 calibration replicates
        # (observed maximum 0.0095) and is frozen here.
        frozen_c = 0.02
        delta = 0.1
        gamma_off = LOSS.strong_convexity / 64.0
        failures = 0
        trials = 500
        rng_master = np.random.default_rng(777)
        for _ in range(trials):
            dist, dictionary = random_instance(rng_master, max_atoms=12, max_m=10)
            n = int(rng_master.integers(5, 60))
            sample = draw_sample(dist, n, seed=int(rng_master.integers(2**31)))
            sol = midpoint(sample, dist, LOSS, dictionary, delta=delta, c1=4.0)
            gstar = population_minimizer(dist, LOSS, dictionary).gstar_index
            eps = (
                frozen_c
                * LOSS.lipschitz**2
                / LOSS.strong_convexity
                * np.log(2 * dictionary.m / delta)
                / n
            )
            rep = check_offset(sample, dist, LOSS, dictionary, sol.weights, gstar,
                               gamma_off, eps)
            failures += 0 if rep.holds else 1
        allowed = delta + 3.0 * np.sqrt(delta * (1 - delta) / trials)
        assert failures / trials <= allowed

    def test_delta_validation(self):
        dist, dictionary = random_instance(np.random.default_rng(9))
        sample = draw_sample(dist, 5, seed=0)
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                midpoint(sample, dist, LOSS, dictionary, delta=bad)
        with pytest.raises(ValueError):
            midpoint(sample, dist, LOSS, dictionary, delta=0.1, c1=0.0)


class TestCheckOffset:
    def test_predictor_equal_to_reference(self):
        dist, dictionary = random_instance(np.random.default_rng(10), max_m=3)
        sample = draw_sample(dist, 9, seed=4)
        w = PredictorWeights(weights=np.eye(dictionary.m)[0])
        report = check_offset(sample, dist, LOSS, dictionary, w, 0, gamma=0.5)
        assert report.lhs == 0.0 and report.quadratic == 0.0
        assert report.holds and report.margin == 0.0

    def test_erm_lhs_nonpositive_against_all_rows(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            dist, dictionary = random_instance(rng)
            sample = draw_sample(dist, 14, seed=4000 + trial)
            e = erm(sample, dist, LOSS, dictionary)
            w = PredictorWeights(weights=np.eye(dictionary.m)[e])
            for g in range(dictionary.m):
                report = check_offset(sample, dist, LOSS, dictionary, w, g, gamma=1e-9)
                assert report.lhs <= 1e-12

    def test_gamma_validation(self):
        dist, dictionary = random_instance(np.random.default_rng(12))
        sample = draw_sample(dist, 5, seed=0)
        w = PredictorWeights(weights=np.eye(dictionary.m)[0])
        with pytest.raises(ValueError):
            check_offset(sample, dist, LOSS, dictionary, w, 0, gamma=0.0)


class TestOffsetBernsteinDuality:
    def test_margins_match_through_empirical_measure(self):
        # Checking the offset inequality for the empirical minimizer against
        # row g is the same computation as the Bernstein margin of g under
        # the empirical measure, scaled by gamma.
        rng = np.random.default_rng(13)
        for trial in range(50):
            dist, dictionary = random_instance(rng)
            sample = draw_sample(dist, int(rng.integers(3, 30)), seed=5000 + trial)
            gamma = float(rng.uniform(0.05, 2.0))
            e = erm(sample, dist, LOSS, dictionary)
            pn = empirical_measure(sample, dist)
            bern = bernstein_check(
                pn, LOSS, dictionary.values, dictionary.values[e], gamma
            )
            w = PredictorWeights(weights=np.eye(dictionary.m)[e])
            for g in range(dictionary.m):
                off = check_offset(sample, dist, LOSS, dictionary, w, g, gamma)
                assert off.margin == pytest.approx(gamma * bern.margins[g], abs=1e-12)
            # With gamma = 1 the two margins are literally the same numbers.
            bern_unit = bernstein_check(
                pn, LOSS, dictionary.values, dictionary.values[e], 1.0
            )
            for g in range(dictionary.m):
                off = check_offset(sample, dist, LOSS, dictionary, w, g, 1.0)
                assert off.margin == pytest.approx(bern_unit.margins[g], abs=1e-12)
