import json
import math

import numpy as np
import pytest

import widelimit as wl

X = np.array([[0.3, -1.1], [0.9, 0.4], [-0.5, 0.2]])


def arccos_relu(k11, k12, k22):
    # Independent oracle: E[relu(u) relu(v)] in closed form.
    s = math.sqrt(k11 * k22)
    t = math.acos(max(-1.0, min(1.0, k12 / s)))
    return s * (math.sin(t) + (math.pi - t) * math.cos(t)) / (2 * math.pi)


def test_gamma_p():
    assert wl.gamma_p(2.0) == pytest.approx((math.sqrt(2) + 1) ** 0.5, rel=1e-14)


def test_pair_moment_relu_matches_arccos():
    assert wl.pair_moment("relu", 1.3, 0.4, 0.8) == pytest.approx(arccos_relu(1.3, 0.4, 0.8), rel=1e-12)
    assert wl.pair_moment("relu", 1.3, 0.4, 0.8, nodes=128) == pytest.approx(arccos_relu(1.3, 0.4, 0.8), rel=1e-4)


def test_nngp_kernels_relu_recursion():
    ks = wl.nngp_kernels("relu", 3, X)
    assert len(ks) == 3
    k1 = X @ X.T + 1.0
    np.testing.assert_allclose(ks[0], k1, atol=1e-12)
    k2 = np.array([[arccos_relu(k1[i, i], k1[i, j], k1[j, j]) for j in range(3)] for i in range(3)]) + 1.0
    np.testing.assert_allclose(ks[1], k2, atol=1e-12)
    for k in ks:
        np.testing.assert_array_equal(k, k.T)
        assert np.linalg.eigvalsh(k).min() > 0


def test_sampler_covariance_near_kernel():
    widths = [256, 1]
    draws = wl.sample_outputs("relu", widths, X, 20000, seed=3)
    assert draws.shape == (20000, 3)
    k = wl.nngp_kernels("relu", 2, X)[-1]
    cov = draws.T @ draws / draws.shape[0]
    np.testing.assert_allclose(cov, k, atol=0.1 * np.abs(k).max())


def test_sampling_is_thread_invariant():
    a = wl.sample_outputs("tanh", [8, 1], X, 50, seed=9, threads=1)
    b = wl.sample_outputs("tanh", [8, 1], X, 50, seed=9, threads=4)
    np.testing.assert_array_equal(a, b)


def test_w2_gaussian_commuting_case():
    c1 = np.diag([1.0, 4.0])
    c2 = np.diag([9.0, 1.0])
    m = np.zeros(2)
    assert wl.w2_gaussian(m, c1, m, c2) == pytest.approx(math.sqrt(4.0 + 1.0), rel=1e-12)
    assert wl.w2_gaussian(m, c1, m, c2) == wl.w2_gaussian(m, c2, m, c1)


def test_empirical_wp_one_dimension_is_sorted_matching():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(50, 1)), rng.normal(size=(50, 1))
    expected = np.sqrt(np.mean((np.sort(a[:, 0]) - np.sort(b[:, 0])) ** 2))
    assert wl.empirical_wp(a, b, 2.0) == pytest.approx(expected, rel=1e-12)


def test_run_bound_experiment(tmp_path):
    wl.run_experiment({"experiment": "bound", "p_values": [1.5, 2.0]}, tmp_path)
    lines = (tmp_path / "result.csv").read_text().splitlines()
    assert lines[0].startswith("# widelimit-v1 experiment=bound")
    assert lines[1] == "quantity,p,value"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary


def test_config_errors_raise(tmp_path):
    with pytest.raises(wl.ConfigError):
        wl.run_experiment({"experiment": "bogus"}, tmp_path)
    with pytest.raises(wl.Error):
        wl.w2_gaussian(np.zeros(2), np.eye(2), np.zeros(3), np.eye(3))
