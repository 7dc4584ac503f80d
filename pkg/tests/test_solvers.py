import json

import numpy as np
import pytest

from cfpower.metrics import SinrCoefficients, sinr
from cfpower.solvers import (
    AscentConfig,
    _ascend,
    brute_force,
    feasibility_fixed_point,
    maxmin_upper_bound,
    objective,
    solve_maxmin,
    solve_weighted,
)

from conftest import random_coeffs


def symmetric_coeffs(K=2, rho=10.0):
    """Statistically identical users: every SINR formula is permutation symmetric."""
    u = np.full((K, K), 0.3) + 0.7 * np.eye(K)
    return SinrCoefficients(a=np.full(K, 4.0), d=np.zeros((K, K)), u=u, n=np.full(K, 2.0), rho=rho)


def single_user():
    return SinrCoefficients(a=np.array([4.0]), d=np.zeros((1, 1)), u=np.array([[0.5]]),
                            n=np.array([2.0]), rho=3.0)


class TestFixedPoint:
    def test_zero_target(self):
        res = feasibility_fixed_point(random_coeffs(3, 6, 0), 0.0)
        assert res.feasible and np.all(res.eta == 0)

    def test_above_single_user_bound(self):
        c = random_coeffs(3, 6, 0)
        assert not feasibility_fixed_point(c, 1.01 * maxmin_upper_bound(c)).feasible

    @pytest.mark.parametrize("seed", range(5))
    def test_feasible_below_optimum(self, seed):
        c = random_coeffs(3, 8, seed)
        t_star = solve_maxmin(c).objective_value
        res = feasibility_fixed_point(c, 0.9 * t_star)
        assert res.feasible and np.all(res.eta <= 1)
        assert np.all(sinr(c, res.eta) >= 0.9 * t_star * (1 - 1e-9))

    @pytest.mark.parametrize("seed", range(5))
    def test_iterates_non_decreasing(self, seed):
        c = random_coeffs(4, 8, seed)
        trace = []
        feasibility_fixed_point(c, 0.5 * solve_maxmin(c).objective_value, trace=trace)
        steps = np.diff(np.array(trace), axis=0)
        assert np.all(steps >= -1e-15)

    def test_direct_solve_fallback(self):
        c = random_coeffs(4, 8, 1)
        t = 0.999 * solve_maxmin(c).objective_value
        res = feasibility_fixed_point(c, t, max_iter=2)
        assert res.feasible and res.status == "direct"
        assert np.all(sinr(c, res.eta) >= t * (1 - 1e-9))


class TestMaxMin:
    def test_single_user(self):
        c = single_user()
        r = solve_maxmin(c)
        np.testing.assert_array_equal(r.eta, [1.0])
        assert r.objective_value == pytest.approx(3 * 4 / (3 * 0.5 + 2))

    def test_symmetric_pair(self):
        r = solve_maxmin(symmetric_coeffs())
        np.testing.assert_allclose(r.eta, [1.0, 1.0], atol=1e-6)
        s = sinr(symmetric_coeffs(), r.eta)
        assert s[0] == pytest.approx(s[1])

    @pytest.mark.parametrize("seed", range(5))
    def test_vs_grid(self, seed):
        c = random_coeffs(2, 5, seed)
        grid = brute_force(c, "maxmin", 0.01)
        r = solve_maxmin(c)
        assert r.objective_value >= grid.objective_value - 1e-3

    @pytest.mark.parametrize("seed", range(5))
    def test_bracket_and_box(self, seed):
        c = random_coeffs(8, 20, seed)
        r = solve_maxmin(c, tol=1e-4)
        assert np.all((r.eta >= 0) & (r.eta <= 1))
        assert r.info["t_hi"] - r.info["t_lo"] <= 1e-4 * r.info["t_hi"]
        assert r.objective_value >= r.info["t_lo"] * (1 - 1e-9)
        assert r.objective_value == pytest.approx(sinr(c, r.eta).min(), rel=1e-12)

    def test_rejects_nonfinite(self):
        c = symmetric_coeffs()
        bad = SinrCoefficients(c.a, c.d, c.u * np.nan, c.n, c.rho)
        with pytest.raises(ValueError):
            solve_maxmin(bad)


class TestWeighted:
    @pytest.mark.parametrize("kind", ["sum_rate", "product"])
    def test_single_user_full_power(self, kind):
        np.testing.assert_allclose(solve_weighted(single_user(), kind).eta, [1.0])

    @pytest.mark.parametrize("kind", ["sum_rate", "product"])
    @pytest.mark.parametrize("seed", range(5))
    def test_vs_grid(self, kind, seed):
        c = random_coeffs(2, 5, seed)
        grid = brute_force(c, kind, 0.01)
        r = solve_weighted(c, kind)
        assert r.objective_value >= grid.objective_value - 0.01 * abs(grid.objective_value)

    @pytest.mark.parametrize("kind", ["sum_rate", "product"])
    def test_symmetric_equal_power(self, kind):
        r = solve_weighted(symmetric_coeffs(3), kind)
        np.testing.assert_allclose(r.eta, r.eta[0], atol=1e-6)

    @pytest.mark.parametrize("kind", ["sum_rate", "product"])
    @pytest.mark.parametrize("seed", range(3))
    def test_monotone_ascent(self, kind, seed):
        c = random_coeffs(6, 15, seed)
        lo = 1e-6 if kind == "product" else 0.0
        start = np.random.default_rng(seed).uniform(lo, 1, 6)
        *_, history = _ascend(c, start, kind, lo, AscentConfig())
        assert np.all(np.diff(history) >= 0)

    @pytest.mark.parametrize("kind", ["sum_rate", "product"])
    def test_report_consistency(self, kind):
        c = random_coeffs(5, 12, 4)
        r = solve_weighted(c, kind)
        assert np.all((r.eta >= 0) & (r.eta <= 1))
        assert r.objective_value == pytest.approx(float(objective(c, r.eta, kind)), rel=1e-9)
        assert r.info["kkt_residual"] < 1e-3
        doc = json.loads(json.dumps(r.to_dict()))
        assert doc["method"] == f"pga-{kind}"

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            solve_weighted(single_user(), "maxmin")


class TestBruteForce:
    @pytest.mark.parametrize("kind", ["maxmin", "sum_rate", "product"])
    def test_single_user(self, kind):
        np.testing.assert_allclose(brute_force(single_user(), kind, 0.1).eta, [1.0])

    def test_symmetric_maxmin(self):
        np.testing.assert_allclose(brute_force(symmetric_coeffs(), "maxmin", 0.05).eta, [1.0, 1.0])

    @pytest.mark.parametrize("kind", ["maxmin", "sum_rate", "product"])
    def test_self_consistent(self, kind):
        c = random_coeffs(2, 5, 1)
        r = brute_force(c, kind, 0.02)
        assert r.objective_value == pytest.approx(float(objective(c, r.eta, kind)), rel=1e-12)

    def test_ties_lexicographic(self):
        # noise-free, no cross interference: SINR_k = 1 exactly for every eta_k > 0,
        # so every grid point of the product objective ties at ln 1 = 0
        c = SinrCoefficients(a=np.ones(2), d=np.zeros((2, 2)), u=np.eye(2), n=np.zeros(2), rho=1.0)
        r = brute_force(c, "product", 0.25, floor=1e-3)
        np.testing.assert_array_equal(r.eta, [1e-3, 1e-3])
        assert r.objective_value == 0.0

    def test_refuses_large_k(self):
        with pytest.raises(ValueError, match="refused"):
            brute_force(random_coeffs(5, 6, 0), "maxmin", 0.5)
