"""Shifted multiplier process: exact suprema, self-localization, MGF/tails."""

import numpy as np
import pytest

from offset_risk.complexity import FiniteClassSpec
from offset_risk.concentration import (
    MultiplierSetup,
    mgf_verify,
    multiplier_sup,
    self_localization_check,
    simulate_sup_draws,
    tail_verify,
)
from offset_risk.instances import random_multiplier_setup
from offset_risk.model import DiscreteDistribution


def make_setup(zeta, probs, base, gamma):
    zeta = np.asarray(zeta, dtype=float)
    joint = DiscreteDistribution(
        xs=np.arange(zeta.size, dtype=float)[:, None],
        ys=zeta,
        probs=probs,
        b=float(max(1.0, np.max(np.abs(zeta)))),
    )
    return MultiplierSetup(joint=joint, class_spec=FiniteClassSpec(base=base), gamma=gamma)


class TestMultiplierSup:
    def test_zero_class(self):
        setup = make_setup([1.0, -1.0], [0.5, 0.5], np.zeros((1, 2)), gamma=0.7)
        res = multiplier_sup(setup, [0, 1, 1])
        assert res.value == 0.0

    def test_zero_multipliers(self):
        rng = np.random.default_rng(0)
        setup = make_setup([0.0, 0.0], [0.5, 0.5], rng.uniform(-1, 1, (3, 2)), gamma=0.5)
        res = multiplier_sup(setup, [0, 1, 0])
        assert res.value == 0.0 and res.argmax_lam == 0.0

    def test_matches_dense_lambda_grid(self):
        rng = np.random.default_rng(1)
        lams = np.linspace(0, 1, 100_001)
        for _ in range(10):
            s = int(rng.integers(2, 5))
            base = rng.uniform(-1, 1, size=(int(rng.integers(1, 3)), s))
            setup = make_setup(
                rng.uniform(-1, 1, s), np.full(s, 1 / s), base, float(rng.uniform(0.2, 1.5))
            )
            idx = rng.integers(0, s, size=int(rng.integers(1, 4)))
            res = multiplier_sup(setup, idx)
            n = idx.size
            mean_cross = (base * setup.zeta) @ setup.joint.probs
            mean_sq = (base**2) @ setup.joint.probs
            grid_best = -np.inf
            for j in range(base.shape[0]):
                a = base[j, idx] @ setup.zeta[idx] - n * mean_cross[j]
                bq = setup.gamma * (n * mean_sq[j] + np.sum(base[j, idx] ** 2))
                grid_best = max(grid_best, np.max(lams * a - lams**2 * bq))
            assert res.value == pytest.approx(grid_best, abs=1e-6)
            assert res.value >= grid_best - 1e-12

    def test_eta_computed_from_data(self):
        base = np.array([[0.5, -0.25]])
        setup = make_setup([1.5, -0.5], [0.5, 0.5], base, gamma=0.4)
        assert setup.kappa == 0.5
        assert setup.multiplier_bound == 1.5
        assert setup.eta == pytest.approx(8 * (1.5**2 / 0.4 + 0.4 * 0.25), rel=1e-12)

    def test_eta_grows_when_gamma_shrinks_in_multiplier_dominant_regime(self):
        base = np.array([[0.1, -0.1]])
        s1 = make_setup([2.0, -2.0], [0.5, 0.5], base, gamma=0.5)
        s2 = make_setup([2.0, -2.0], [0.5, 0.5], base, gamma=0.25)
        assert s2.eta > s1.eta
        assert s2.eta == pytest.approx(2 * s1.eta, rel=0.01)

    def test_zero_probability_atoms_ignored_for_bounds(self):
        base = np.array([[0.5, 9.0]])
        zeta = np.array([1.0, 9.0])
        joint = DiscreteDistribution(
            xs=[[0.0], [1.0]], ys=zeta, probs=[1.0, 0.0], b=9.0
        )
        setup = MultiplierSetup(joint=joint, class_spec=FiniteClassSpec(base=base), gamma=1.0)
        assert setup.kappa == 0.5 and setup.multiplier_bound == 1.0


class TestSelfLocalization:
    def test_zero_class_margin_zero(self):
        setup = make_setup([1.0, -1.0], [0.5, 0.5], np.zeros((1, 2)), gamma=1.0)
        holds, margin = self_localization_check(setup, [0, 1])
        assert holds and margin == 0.0

    def test_holds_on_random_setups(self):
        rng = np.random.default_rng(2)
        for trial in range(300):
            setup = random_multiplier_setup(rng)
            n = int(rng.integers(1, 12))
            idx = rng.integers(0, setup.joint.size, size=n)
            holds, margin = self_localization_check(setup, idx)
            assert holds and margin >= -1e-10

    def test_interior_maximizer_binds_exactly(self):
        # When the overall maximizer's scaling is interior, the quadratic
        # mass at the maximizer equals the supremum itself, so the margin
        # vanishes: lam* = A/(2B) gives lam*^2 B = A^2/(4B) = U.
        rng = np.random.default_rng(3)
        seen_interior = 0
        for trial in range(200):
            setup = random_multiplier_setup(rng)
            idx = rng.integers(0, setup.joint.size, size=int(rng.integers(2, 10)))
            res = multiplier_sup(setup, idx)
            if 0.0 < res.argmax_lam < 1.0:
                seen_interior += 1
                assert res.quad_at_max == pytest.approx(res.value, rel=1e-10, abs=1e-12)
        assert seen_interior > 20

    def test_shrinking_the_base_never_increases_the_supremum(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            setup = random_multiplier_setup(rng)
            idx = rng.integers(0, setup.joint.size, size=6)
            shrink = float(rng.uniform(0.1, 1.0))
            shrunk = MultiplierSetup(
                joint=setup.joint,
                class_spec=FiniteClassSpec(base=shrink * setup.class_spec.base),
                gamma=setup.gamma,
            )
            assert multiplier_sup(shrunk, idx).value <= multiplier_sup(setup, idx).value + 1e-12


class TestSimulation:
    def test_replicates_deterministic_and_batch_invariant(self):
        rng = np.random.default_rng(5)
        setup = random_multiplier_setup(rng)
        a, qa = simulate_sup_draws(setup, n=7, replicates=50, seed=9)
        b, qb = simulate_sup_draws(setup, n=7, replicates=50, seed=9)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(qa, qb)
        # The first 20 replicates of a longer run coincide with a shorter run.
        c, _ = simulate_sup_draws(setup, n=7, replicates=20, seed=9)
        np.testing.assert_array_equal(a[:20], c)

    def test_sup_draws_nonnegative(self):
        rng = np.random.default_rng(6)
        setup = random_multiplier_setup(rng)
        sups, _ = simulate_sup_draws(setup, n=5, replicates=200, seed=1)
        assert np.all(sups >= 0.0)


class TestMgfVerify:
    def test_zero_class_no_violations(self):
        setup = make_setup([1.0, -1.0], [0.5, 0.5], np.zeros((1, 2)), gamma=0.5)
        report = mgf_verify(setup, n=4, replicates=1000, seed=0, bootstrap_resamples=50)
        np.testing.assert_allclose(report.log_mgf, 0.0, atol=1e-12)
        assert np.all(report.bound >= 0.0)
        assert report.violations == ()
        assert report.self_localization_failures == 0

    def test_two_point_law_matches_exact_mgf(self):
        # Singleton class, n = 1, two atoms: U takes one of two enumerable
        # values, so the exact centered log-MGF is available in closed form.
        base = np.array([[0.8, -0.6]])
        probs = np.array([0.3, 0.7])
        setup = make_setup([1.2, -0.4], probs, base, gamma=0.9)
        values = []
        mean_cross = float((base[0] * setup.zeta) @ probs)
        mean_sq = float((base[0] ** 2) @ probs)
        for atom in (0, 1):
            a = base[0, atom] * setup.zeta[atom] - mean_cross
            bq = setup.gamma * (mean_sq + base[0, atom] ** 2)
            lam = np.clip(a / (2 * bq), 0.0, 1.0)
            values.append(lam * a - lam**2 * bq)
        values = np.array(values)
        exact_mean = float(values @ probs)
        report = mgf_verify(setup, n=1, replicates=40_000, seed=3,
                            bootstrap_resamples=300)
        assert report.mean_sup == pytest.approx(exact_mean, abs=4 * report.mean_sup_se)
        exact_log_mgf = np.array(
            [
                np.log(probs @ np.exp(lam * (values - exact_mean)))
                for lam in report.lambda_grid
            ]
        )
        assert np.all(exact_log_mgf <= report.bound + 1e-12)
        inside = (report.log_mgf_ci_lower - 0.05 <= exact_log_mgf) & (
            exact_log_mgf <= report.log_mgf_ci_upper + 0.05
        )
        assert np.all(inside)
        assert report.violations == ()

    def test_no_violations_on_random_setups(self):
        rng = np.random.default_rng(7)
        for trial in range(3):
            setup = random_multiplier_setup(rng)
            report = mgf_verify(setup, n=6, replicates=4000, seed=50 + trial,
                                bootstrap_resamples=200)
            assert report.violations == ()
            assert report.self_localization_failures == 0

    def test_empirical_log_mgf_convex_in_lambda(self):
        rng = np.random.default_rng(8)
        setup = random_multiplier_setup(rng)
        report = mgf_verify(setup, n=5, replicates=2000, seed=11,
                            bootstrap_resamples=50)
        second_diff = np.diff(report.log_mgf, n=2)
        assert np.all(second_diff >= -1e-10)

    def test_lambda_grid_validation(self):
        rng = np.random.default_rng(9)
        setup = random_multiplier_setup(rng)
        with pytest.raises(ValueError, match="lambda"):
            mgf_verify(setup, n=4, replicates=1000,
                       lambda_points=np.array([1.5 / setup.eta]), seed=0)
        with pytest.raises(ValueError, match="replicates"):
            mgf_verify(setup, n=4, replicates=10, seed=0)


class TestTailVerify:
    def test_delta_one_threshold_trivial(self):
        rng = np.random.default_rng(10)
        setup = random_multiplier_setup(rng)
        report = tail_verify(setup, n=5, replicates=500, delta_grid=np.array([1.0]), seed=0)
        assert report.holds and report.exceed_freq[0] <= 1.0

    def test_zero_class_never_exceeds(self):
        setup = make_setup([1.0, -1.0], [0.5, 0.5], np.zeros((1, 2)), gamma=0.5)
        report = tail_verify(setup, n=4, replicates=500,
                             delta_grid=np.array([0.1, 0.01]), seed=0)
        np.testing.assert_array_equal(report.exceed_freq, 0.0)

    def test_random_setups_within_allowance(self):
        rng = np.random.default_rng(11)
        for trial in range(3):
            setup = random_multiplier_setup(rng)
            report = tail_verify(setup, n=6, replicates=20_000,
                                 delta_grid=np.array([0.1, 0.01]), seed=trial)
            assert report.holds
