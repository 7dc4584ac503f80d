import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfpower.params import ParamsError, SystemParams, load_params, normalized_snr
from cfpower.scenario import (
    Scenario,
    assign_pilots,
    channel_stats,
    estimation_stats,
    generate_scenario,
    path_loss_db,
    wrap_distance,
)

DEFAULT = SystemParams()


class TestWrapDistance:
    def test_wraps_shorter_than_direct(self):
        assert wrap_distance((0, 0), (0.9, 0), 1.0) == pytest.approx(0.1)

    def test_maximal_distance(self):
        assert wrap_distance((0, 0), (0.5, 0.5), 1.0) == pytest.approx(0.70711, abs=1e-5)

    def test_identity(self):
        assert wrap_distance((0.3, 0.7), (0.3, 0.7), 1.0) == 0.0

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.floats(0, 0.999), st.floats(0, 0.999)), min_size=3, max_size=3))
    def test_metric_axioms(self, pts):
        p, q, r = pts
        d = lambda a, b: wrap_distance(a, b, 1.0)
        assert d(p, q) == pytest.approx(d(q, p))
        assert d(p, r) <= d(p, q) + d(q, r) + 1e-12
        assert d(p, q) <= 1 / math.sqrt(2) + 1e-12


class TestPathLoss:
    def test_far_slope(self):
        assert path_loss_db(1.0, DEFAULT) == pytest.approx(-140.7)

    def test_near_constant(self):
        assert path_loss_db(0.005, DEFAULT) == pytest.approx(-81.18455, abs=1e-5)
        assert path_loss_db(0.0, DEFAULT) == path_loss_db(0.01, DEFAULT)

    def test_continuous_at_d1(self):
        d1 = DEFAULT.pathloss.d1
        left = path_loss_db(d1, DEFAULT)
        right = path_loss_db(d1 * (1 + 1e-12), DEFAULT)
        assert left == pytest.approx(right, abs=1e-9)
        # both branches reduce to -L - 35 log10(d1)
        assert left == pytest.approx(-140.7 - 35 * math.log10(0.05), abs=1e-12)

    def test_continuous_at_d0(self):
        d0 = DEFAULT.pathloss.d0
        assert path_loss_db(d0, DEFAULT) == pytest.approx(path_loss_db(d0 * (1 + 1e-12), DEFAULT), abs=1e-9)

    def test_non_increasing(self):
        d = np.linspace(1e-4, 1.0, 5000)
        assert np.all(np.diff(path_loss_db(d, DEFAULT)) <= 1e-12)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            path_loss_db(-0.1, DEFAULT)


class TestPilots:
    def test_orthogonal_identity(self):
        np.testing.assert_array_equal(assign_pilots(8, 20, "orthogonal", 0), np.eye(8))
        np.testing.assert_array_equal(assign_pilots(20, 20, "orthogonal", 0), np.eye(20))

    def test_forced_reuse(self):
        np.testing.assert_array_equal(assign_pilots(2, 1, "random", 3), np.ones((2, 2)))

    def test_orthogonal_needs_enough_pilots(self):
        with pytest.raises(ParamsError):
            assign_pilots(5, 4, "orthogonal", 0)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_mode_structure(self, seed):
        x = assign_pilots(12, 5, "random", seed)
        np.testing.assert_array_equal(x, x.T)
        np.testing.assert_array_equal(np.diag(x), 1.0)
        assert set(np.unique(x)) <= {0.0, 1.0}


class TestParams:
    def test_default_snr(self):
        # 100 mW over kT0 * 20 MHz * 9 dB noise figure, about 112 dB
        assert 10 * math.log10(DEFAULT.rho) == pytest.approx(111.97, abs=0.01)
        assert DEFAULT.rho == normalized_snr(100.0)

    @pytest.mark.parametrize("bad, name", [
        (dict(tau_c=20), "tau_c > tau_p"),
        (dict(num_ues=21), "K <= tau_p"),
        (dict(rho=-1.0), "rho > 0"),
        (dict(pilot_mode="bogus"), "pilot_mode"),
    ])
    def test_invalid_params_name_invariant(self, bad, name):
        with pytest.raises(ParamsError, match=name):
            SystemParams(**bad)

    def test_load_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"system": {"num_ues": 4, "num_aps": 10, "sigma_sh": 0,
                                               "pathloss": {"d0": 0.01, "d1": 0.05, "L_const": 140.7}}}))
        p = load_params(path)
        assert (p.K, p.L, p.sigma_sh) == (4, 10, 0)
        assert p.rho == DEFAULT.rho

    def test_unknown_key(self):
        with pytest.raises(ParamsError, match="unknown"):
            SystemParams.from_dict({"nope": 1})


class TestGenerateScenario:
    def test_deterministic(self):
        a, b = generate_scenario(DEFAULT, 7), generate_scenario(DEFAULT, 7)
        for f in ("ap_positions", "ue_positions", "beta", "pilot_index"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_seeds_differ(self):
        assert not np.array_equal(generate_scenario(DEFAULT, 1).beta, generate_scenario(DEFAULT, 2).beta)

    def test_no_shadowing_is_pure_pathloss(self):
        p = DEFAULT.replace(sigma_sh=0.0)
        s = generate_scenario(p, 1)
        from cfpower.scenario import wrap_distances
        expected = 10 ** (path_loss_db(wrap_distances(s.ue_positions, s.ap_positions, 1.0), p) / 10)
        np.testing.assert_array_equal(s.beta, expected)
        assert np.all(s.beta <= 10 ** (-81.18455006504027 / 10) * (1 + 1e-12))

    def test_shadowing_does_not_move_positions(self):
        a = generate_scenario(DEFAULT, 5)
        b = generate_scenario(DEFAULT.replace(sigma_sh=0.0), 5)
        np.testing.assert_array_equal(a.ue_positions, b.ue_positions)

    def test_shape_and_range(self):
        s = generate_scenario(DEFAULT, 1)
        assert s.beta.shape == (8, 20)
        assert np.all(np.isfinite(s.beta)) and np.all(s.beta > 0)
        assert np.all((s.ue_positions >= 0) & (s.ue_positions < 1))
        np.testing.assert_array_equal(s.pilot_xcorr, np.eye(8))

    def test_json_roundtrip(self):
        s = generate_scenario(DEFAULT.replace(pilot_mode="random", tau_p=4), 3)
        back = Scenario.from_json(s.to_json())
        np.testing.assert_allclose(back.beta, s.beta, rtol=1e-13)
        np.testing.assert_array_equal(back.pilot_index, s.pilot_index)
        assert back.seed == 3


class TestChannelStats:
    def test_scalar_case(self):
        p = SystemParams(num_ues=1, num_aps=1, tau_p=1, tau_c=10, rho_p=1.0)
        s = Scenario(np.zeros((1, 2)), np.zeros((1, 2)), np.ones((1, 1)), np.zeros(1, int), 0)
        cs = channel_stats(s, p)
        assert cs.c[0, 0] == pytest.approx(0.5)
        assert cs.gamma[0, 0] == pytest.approx(0.5)

    def test_perfect_estimation_limit(self):
        beta = np.array([[1e-3, 2e-4], [5e-5, 1e-2]])
        _, gamma = estimation_stats(beta, np.eye(2), 20, 1e14)
        np.testing.assert_allclose(gamma, beta, rtol=1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_gamma_bounds_and_identity(self, seed):
        p = DEFAULT.replace(pilot_mode="random", tau_p=5)
        s = generate_scenario(p, seed)
        cs = channel_stats(s, p)
        assert np.all(cs.gamma > 0) and np.all(cs.gamma <= s.beta)
        np.testing.assert_array_equal(cs.gamma, math.sqrt(p.tau_p * p.rho_p) * s.beta * cs.c)

    @pytest.mark.parametrize("seed", range(5))
    def test_gamma_increases_with_pilot_snr(self, seed):
        s = generate_scenario(DEFAULT, seed)
        g1 = channel_stats(s, DEFAULT.replace(rho_p=1e8)).gamma
        g2 = channel_stats(s, DEFAULT.replace(rho_p=2e8)).gamma
        assert np.all(g2 > g1)
