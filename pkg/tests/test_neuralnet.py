from __future__ import annotations

import numpy as np
import pytest

from sentinel import neuralnet as nn
from sentinel.neuralnet import Adam, LossConfig, NonFiniteLoss, Parameters, contrastive_loss, grad_check, huber


class TestHuber:
    def test_quadratic_branch(self):
        assert huber(0.5, 1.0) == pytest.approx(0.125)

    def test_branch_boundary_continuity(self):
        assert huber(1.0, 1.0) == pytest.approx(0.5)
        assert huber(1.0 - 1e-12, 1.0) == pytest.approx(0.5, abs=1e-9)
        assert huber(1.0 + 1e-12, 1.0) == pytest.approx(0.5, abs=1e-9)

    def test_linear_branch(self):
        assert huber(2.0, 1.0) == pytest.approx(1.5)

    def test_even(self):
        for a in np.linspace(-3, 3, 25):
            assert huber(a, 1.0) == pytest.approx(huber(-a, 1.0))

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            huber(1.0, 0.0)


class TestContrastiveLoss:
    def test_perfect_positive(self):
        assert contrastive_loss(0.0, 0) == 0.0

    def test_perfect_negative(self):
        assert contrastive_loss(2.0, 1, LossConfig(target_separation=2.0)) == 0.0

    def test_halfway_negative(self):
        assert contrastive_loss(1.0, 1, LossConfig(delta=1.0, target_separation=2.0)) == pytest.approx(0.5)

    def test_monotonicity(self):
        cfg = LossConfig()
        ds = np.linspace(0, 2, 41)
        pos = [contrastive_loss(d, 0, cfg) for d in ds]
        neg = [contrastive_loss(d, 1, cfg) for d in ds]
        assert all(a <= b + 1e-12 for a, b in zip(pos, pos[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(neg, neg[1:]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LossConfig(delta=-1)
        with pytest.raises(ValueError):
            LossConfig(target_separation=2.5)
        with pytest.raises(ValueError):
            LossConfig(phi=1.0)


def _linear_loss(params: Parameters, batch) -> nn.Tensor:
    X, y = batch
    pred = nn.reshape(nn.constant(X) @ params["w"] + params["b"], (X.shape[0],))
    return nn.mean(nn.huber_loss(pred + nn.constant(-y), 1.0))


class TestTrainStep:
    def test_zero_gradient_batch_leaves_params_unchanged(self):
        params = Parameters({"w": np.array([[0.3], [0.2]]), "b": np.array([0.1])})
        before = params.as_arrays()
        opt = Adam(params)
        X = np.zeros((4, 2))
        y = np.full(4, 0.1)  # pred - y = 0 everywhere -> flat loss
        _, loss = nn.train_step(params, (X, y), opt, _linear_loss)
        assert loss == pytest.approx(0.0)
        for name, arr in params.as_arrays().items():
            np.testing.assert_array_equal(arr, before[name])

    def test_identical_inputs_positive_pair_loss_zero(self):
        params = Parameters({"w": np.array([[0.5], [-0.25]]), "b": np.array([0.0])})
        z = np.random.default_rng(0).normal(size=(1, 2))
        emb_a = nn.constant(z) @ params["w"]
        emb_b = nn.constant(z) @ params["w"]
        d = nn.rowwise_distance(emb_a, emb_b)
        loss = nn.mean(nn.huber_loss(d, 1.0))
        assert float(loss.data) == pytest.approx(0.0, abs=1e-5)

    def test_loss_decreases_on_separable_toy(self):
        rng = np.random.default_rng(3)
        X = np.concatenate([rng.normal(-2, 0.3, size=(30, 2)), rng.normal(2, 0.3, size=(30, 2))])
        y = np.concatenate([np.full(30, -1.0), np.full(30, 1.0)])
        params = Parameters({"w": nn.glorot_uniform(rng, (2, 1)), "b": np.zeros(1)})
        opt = Adam(params, lr=5e-2)
        _, first = nn.train_step(params, (X, y), opt, _linear_loss)
        last = first
        for _ in range(99):
            _, last = nn.train_step(params, (X, y), opt, _linear_loss)
        assert last < first

    def test_non_finite_loss_raises(self):
        params = Parameters({"w": np.array([[1.0]]), "b": np.zeros(1)})
        opt = Adam(params)
        X = np.array([[np.inf]])
        with pytest.raises(NonFiniteLoss):
            nn.train_step(params, (X, np.zeros(1)), opt, _linear_loss)

    def test_seeded_trajectory_is_bitwise_identical(self):
        def run():
            rng = np.random.default_rng(11)
            params = Parameters({"w": nn.glorot_uniform(rng, (3, 1)), "b": np.zeros(1)})
            opt = Adam(params, lr=1e-2)
            for _ in range(25):
                X = rng.normal(size=(8, 3))
                y = rng.normal(size=8)
                nn.train_step(params, (X, y), opt, _linear_loss)
            return params.as_arrays()

        a, b = run(), run()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])


class TestGradCheck:
    def test_linear_model_quadratic_branch(self):
        rng = np.random.default_rng(5)
        params = Parameters({"w": nn.glorot_uniform(rng, (4, 1)), "b": np.zeros(1)})
        X = rng.normal(size=(16, 4)) * 0.1
        y = rng.normal(size=16) * 0.05  # residuals stay inside the quadratic branch
        err = grad_check(params, (X, y), _linear_loss, epsilon=1e-6)
        assert err <= 1e-6

    def test_constant_output_model(self):
        params = Parameters({"w": np.zeros((2, 1)), "b": np.zeros(1)})

        def const_loss(p, batch):
            return nn.mean(nn.huber_loss(nn.constant(np.zeros(3)), 1.0))

        err = grad_check(params, None, const_loss, epsilon=1e-5)
        assert err == 0.0

    def test_epsilon_bounds(self):
        params = Parameters({"w": np.zeros((1, 1)), "b": np.zeros(1)})
        with pytest.raises(ValueError):
            grad_check(params, (np.zeros((1, 1)), np.zeros(1)), _linear_loss, epsilon=1e-2)


class TestOps:
    """Each autodiff op against central finite differences."""

    @staticmethod
    def _check(build, arrays, tol=3e-7):
        params = Parameters(arrays)
        err = grad_check(params, None, lambda p, _b: build(p), epsilon=1e-6, num_coords=60)
        assert err <= tol, err

    def test_matmul_add_tanh(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(5, 3))
        self._check(
            lambda p: nn.mean(nn.tanh(nn.constant(x) @ p["w"] + p["b"])),
            {"w": rng.normal(size=(3, 4)) * 0.5, "b": rng.normal(size=4) * 0.1},
        )

    def test_leaky_relu_multiply(self):
        rng = np.random.default_rng(1)
        self._check(
            lambda p: nn.mean(nn.leaky_relu(p["a"] * p["b"])),
            {"a": rng.normal(size=(4, 3)) + 0.3, "b": rng.normal(size=(4, 3)) + 0.2},
        )

    def test_gather_segment_sum(self):
        rng = np.random.default_rng(2)
        idx = np.array([0, 2, 2, 1, 0])
        seg = np.array([0, 0, 1, 1, 2])
        self._check(
            lambda p: nn.mean(nn.segment_sum(nn.gather_rows(p["h"], idx), seg, 3)),
            {"h": rng.normal(size=(3, 4))},
        )

    def test_segment_softmax(self):
        rng = np.random.default_rng(3)
        seg = np.array([0, 0, 0, 1, 1])
        weights = rng.normal(size=(5, 2))
        self._check(
            lambda p: nn.mean(nn.segment_softmax(p["s"], seg, 2) * nn.constant(weights)),
            {"s": rng.normal(size=(5, 2))},
        )

    def test_l2_normalize_and_distance(self):
        rng = np.random.default_rng(4)
        self._check(
            lambda p: nn.mean(nn.rowwise_distance(nn.l2_normalize_rows(p["a"]), nn.l2_normalize_rows(p["b"]))),
            {"a": rng.normal(size=(4, 5)), "b": rng.normal(size=(4, 5))},
            tol=1e-6,
        )

    def test_concat_reshape_sum_last(self):
        rng = np.random.default_rng(5)
        self._check(
            lambda p: nn.mean(nn.sum_last(nn.reshape(nn.concat([p["a"], p["b"]], axis=0), (2, 2, 3)))),
            {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(2, 3))},
        )

    def test_bce_with_logits(self):
        rng = np.random.default_rng(6)
        t = np.array([0.0, 1.0, 1.0, 0.0])
        self._check(
            lambda p: nn.mean(nn.bce_with_logits(nn.reshape(p["z"], (4,)), t)),
            {"z": rng.normal(size=(4, 1))},
        )

    def test_segment_softmax_handles_empty_segment(self):
        s = nn.constant(np.array([[0.5], [1.0]]))
        out = nn.segment_softmax(s, np.array([0, 0]), 3)
        np.testing.assert_allclose(out.data[:, 0].sum(), 1.0)
        assert np.all(np.isfinite(out.data))


class TestParameters:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        params = Parameters({"layer.w": rng.normal(size=(3, 4)), "layer.b": rng.normal(size=4)})
        params.save(str(tmp_path / "m"))
        again = Parameters.load(str(tmp_path / "m"))
        assert again.names() == params.names()
        for name in params.names():
            np.testing.assert_allclose(again[name].data, params[name].data, atol=1e-7)  # float32 round trip

    def test_blob_is_float32_little_endian(self, tmp_path):
        params = Parameters({"w": np.array([1.0, -2.5])})
        params.save(str(tmp_path / "m"))
        raw = (tmp_path / "m" / "params.bin").read_bytes()
        assert len(raw) == 8
        np.testing.assert_array_equal(np.frombuffer(raw, dtype="<f4"), np.array([1.0, -2.5], dtype="<f4"))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Parameters({"w": np.array([np.nan])})
