import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from net_sentinel.aggregator import aggregate
from net_sentinel.detectors import (
    CalibratedDetector, Standardizer, calibrate, detect, fit_ae, fit_detector, fit_lof, fit_ocsvm, load_detector,
    save_detector, score_ae, score_lof, score_ocsvm,
)
from net_sentinel.errors import WidthMismatch
from oracles import brute_lof, qp_enumerate, rbf


class TestLof:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle(self, seed):
        g = np.random.default_rng(seed)
        k = int(g.choice([3, 5, 10]))
        n = int(g.integers(k + 1, 40))
        train = g.normal(size=(n, 3))
        q = np.vstack([g.normal(size=(5, 3)), train[:3]])
        m = fit_lof(train, k)
        np.testing.assert_allclose(score_lof(m, q), brute_lof(train, q, k), rtol=0, atol=1e-9)

    def test_training_point_in_uniform_grid(self):
        grid = np.array([[i, j] for i in range(6) for j in range(6)], dtype=float)
        m = fit_lof(grid, 4)
        assert score_lof(m, grid[14:15])[0] == pytest.approx(brute_lof(grid, grid[14:15], 4)[0], abs=1e-9)
        assert score_lof(m, grid[14:15])[0] == pytest.approx(1.0, abs=0.1)

    def test_far_point(self, rng):
        cluster = rng.normal(scale=0.1, size=(40, 2))
        m = fit_lof(cluster, 5)
        s = score_lof(m, [[5.0, 5.0]])[0]
        assert s > 2 and s == pytest.approx(brute_lof(cluster, np.array([[5.0, 5.0]]), 5)[0], abs=1e-9 * s)

    def test_identical_points(self):
        x = np.ones((10, 3))
        assert score_lof(fit_lof(x, 3), np.ones((1, 3)))[0] == 1.0

    def test_needs_enough_points(self):
        with pytest.raises(ValueError):
            fit_lof(np.zeros((3, 2)), 3)
        with pytest.raises(ValueError):
            fit_lof(np.zeros((3, 2)), 0)

    def test_fit_detector_too_few_rows(self):
        with pytest.raises(ValueError):
            fit_detector(np.zeros((2, 3)), "lof")


def _ocsvm_set(seed, n, d=2):
    return np.random.default_rng(seed).normal(size=(n, d))


class TestOcsvm:
    @pytest.mark.parametrize("seed", range(5))
    def test_nu_property(self, seed):
        x = _ocsvm_set(seed, 60)
        m = fit_ocsvm(x, nu=0.2)
        assert np.mean(score_ocsvm(m, x) > 0) <= 0.2 + 0.05

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_qp_oracle(self, seed):
        x = _ocsvm_set(100 + seed, 8)
        m = fit_ocsvm(x, nu=0.3, gamma=0.5)
        alpha, rho = qp_enumerate(rbf(x, 0.5), 1.0 / (0.3 * 8))
        np.testing.assert_allclose(m.full_alpha, alpha, atol=1e-4)
        assert m.rho == pytest.approx(rho, abs=1e-4)

    def test_kkt(self):
        x = _ocsvm_set(7, 50)
        m = fit_ocsvm(x, nu=0.1, gamma=0.3)
        a, C = m.full_alpha, 1.0 / (0.1 * 50)
        assert a.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(a >= 0) and np.all(a <= C + 1e-12)
        g = rbf(x, 0.3) @ a
        assert np.all(g[a <= 1e-12] >= m.rho - 1e-4)
        assert np.all(g[a >= C - 1e-12] <= m.rho + 1e-4)
        free = (a > 1e-12) & (a < C - 1e-12)
        assert np.all(np.abs(g[free] - m.rho) <= 1e-4)

    def test_duplicated_set_same_decision(self):
        x = _ocsvm_set(3, 30)
        q = _ocsvm_set(4, 10)
        a = score_ocsvm(fit_ocsvm(x, nu=0.2), q)
        b = score_ocsvm(fit_ocsvm(np.vstack([x, x]), nu=0.2), q)
        np.testing.assert_allclose(a, b, atol=1e-6)

    @pytest.mark.parametrize("nu", [0.0, 1.5])
    def test_bad_nu(self, nu):
        with pytest.raises(ValueError):
            fit_ocsvm(np.zeros((4, 2)), nu=nu)


class TestAe:
    def _data(self, rng, n=120):
        z = rng.normal(size=(n, 2))
        return np.hstack([z, z @ rng.normal(size=(2, 4)), np.full((n, 1), 3.0)])

    def test_loss_decreases_and_scores_nonnegative(self, rng):
        x = self._data(rng)
        m = fit_ae(x, bottleneck=2, epochs=60, seed=1, lr=1e-2)
        assert m.history[-1] < m.history[0]
        assert np.all(score_ae(m, np.vstack([x, rng.normal(size=(20, 7)) * 10])) >= 0)

    def test_order_invariance(self, rng):
        x = self._data(rng, 60)
        perm = rng.permutation(len(x))
        a = fit_ae(x, bottleneck=2, epochs=10, seed=3)
        b = fit_ae(x[perm], bottleneck=2, epochs=10, seed=3)
        np.testing.assert_array_equal(score_ae(a, x), score_ae(b, x))

    def test_constant_channel(self, rng):
        x = self._data(rng)
        m = fit_ae(x, bottleneck=2, epochs=150, seed=0, lr=1e-2)
        assert m.standardizer.scale[-1] == 1.0
        xs = m.standardizer(x)
        import torch
        with torch.no_grad():
            rec = m.net(torch.as_tensor(xs)).numpy()
        assert np.mean((rec[:, -1] - xs[:, -1]) ** 2) < 1e-2

    def test_bottleneck_must_shrink(self, rng):
        with pytest.raises(ValueError):
            fit_ae(rng.normal(size=(10, 4)), bottleneck=4)


class TestCalibrate:
    def test_percentile(self):
        assert calibrate(np.arange(1, 101), 0.10) == 90.0

    def test_all_equal(self):
        s = np.full(50, 2.5)
        t = calibrate(s, 0.1)
        assert t == 2.5 and np.mean(s > t) == 0.0

    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=300),
           st.floats(0.001, 0.499))
    def test_realised_fpr_bounded(self, scores, f):
        t = calibrate(scores, f)
        assert np.mean(np.asarray(scores) > t) <= f

    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=200),
           st.floats(0.001, 0.499), st.floats(0.001, 0.499))
    def test_monotone(self, scores, f1, f2):
        lo, hi = sorted((f1, f2))
        assert calibrate(scores, lo) >= calibrate(scores, hi)

    @pytest.mark.parametrize("f", [0.0, 0.5, 0.7])
    def test_bad_target(self, f):
        with pytest.raises(ValueError):
            calibrate([1.0, 2.0], f)


def _features(rng, n_nodes=5, d=4):
    nodes = [f"10.0.0.{i}" for i in range(1, n_nodes + 1)]
    keys = [(nodes[i], nodes[i + 1]) for i in range(n_nodes - 1)]
    return aggregate(keys, rng.normal(size=(len(keys), d)), nodes, d)


class TestDetect:
    @pytest.mark.parametrize("kind", ["lof", "ocsvm", "ae"])
    def test_levels_and_calibration(self, rng, kind):
        x = rng.normal(size=(80, 4))
        params = {"epochs": 20, "bottleneck": 2} if kind == "ae" else {}
        det = fit_detector(x, kind, "node", target_fpr=0.1, **params)
        cal = x[60:]
        assert np.mean(det.score(cal) > det.threshold) <= 0.1
        v = detect(det, _features(rng))
        assert len(v) == 5 and {e.entity for e in v} == {f"10.0.0.{i}" for i in range(1, 6)}

    def test_global_one_verdict(self, rng):
        det = fit_detector(rng.normal(size=(40, 4)), "lof", "global", target_fpr=0.1, k_neighbors=5)
        assert len(detect(det, _features(rng))) == 1

    def test_strict_exceedance(self, rng):
        x = rng.normal(size=(40, 4))
        det = fit_detector(x, "lof", "global", target_fpr=0.1, k_neighbors=5)
        f = _features(rng)
        det.threshold = float(det.score(f.global_feature)[0])
        assert not detect(det, f)[0].anomalous

    def test_width_mismatch(self, rng):
        det = fit_detector(rng.normal(size=(40, 3)), "lof", "edge", target_fpr=0.1, k_neighbors=5)
        with pytest.raises(WidthMismatch):
            detect(det, _features(rng, d=4))

    def test_level_mismatch(self, rng):
        det = fit_detector(rng.normal(size=(40, 4)), "lof", "edge", target_fpr=0.1, k_neighbors=5)
        with pytest.raises(ValueError):
            detect(det, _features(rng), "node")

    @pytest.mark.parametrize("kind", ["lof", "ocsvm", "ae"])
    def test_persistence_round_trip(self, tmp_path, rng, kind):
        x = rng.normal(size=(60, 4))
        params = {"epochs": 5, "bottleneck": 2} if kind == "ae" else {}
        det = fit_detector(x, kind, "edge", target_fpr=0.1, **params)
        path = tmp_path / f"{kind}.nsck"
        save_detector(path, det, {"schema_hash": "abc"})
        back = load_detector(path)
        assert back.threshold == det.threshold and back.meta["schema_hash"] == "abc"
        q = rng.normal(size=(10, 4))
        np.testing.assert_array_equal(back.score(q), det.score(q))


def test_standardizer_constant_channel():
    s = Standardizer.fit(np.array([[1.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_array_equal(s(np.array([[2.0, 5.0]])), [[0.0, 0.0]])
