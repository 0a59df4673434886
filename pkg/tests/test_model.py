import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from srngate import model
from srngate.errors import ConfigError, DimensionError, FormatError, NumericalError
from srngate.model import LossKind, OutputActivation


def tiny_params(seed=0, n_in=2, n_hid=3, n_out=2,
                activation=OutputActivation.LINEAR, scale=0.5):
    rng = np.random.default_rng(seed)
    return model.SrnParams(
        w_in=rng.standard_normal((n_in, n_hid)) * scale,
        w_rec=rng.standard_normal((n_hid, n_hid)) * scale,
        w_out=rng.standard_normal((n_hid, n_out)) * scale,
        b=rng.standard_normal(n_hid) * scale,
        output_activation=activation,
    )


class TestInitGaussian:
    def test_same_seed_bit_identical(self):
        p1 = model.init_gaussian(3, 5, 2, sigma=0.01, seed=42)
        p2 = model.init_gaussian(3, 5, 2, sigma=0.01, seed=42)
        for a, b in [(p1.w_in, p2.w_in), (p1.w_rec, p2.w_rec),
                     (p1.w_out, p2.w_out), (p1.b, p2.b)]:
            assert a.tobytes() == b.tobytes()

    def test_different_seed_differs(self):
        p1 = model.init_gaussian(3, 5, 2, sigma=0.01, seed=1)
        p2 = model.init_gaussian(3, 5, 2, sigma=0.01, seed=2)
        assert not np.array_equal(p1.w_rec, p2.w_rec)

    def test_sample_statistics(self):
        # entry std is sigma * sqrt(n_hid); mean stays near zero
        sigma = 0.01
        n_hid = 80
        p = model.init_gaussian(40, n_hid, 40, sigma=sigma, seed=7)
        entries = np.concatenate([p.w_in.ravel(), p.w_rec.ravel(), p.w_out.ravel()])
        assert entries.size >= 10_000
        std = sigma * np.sqrt(n_hid)
        assert abs(entries.std() - std) < 0.05 * std
        assert abs(entries.mean()) < 3 * std / 100

    def test_biases_start_zero(self):
        p = model.init_gaussian(3, 5, 2, sigma=0.01, seed=0)
        npt.assert_array_equal(p.b, np.zeros(5))

    def test_bad_args(self):
        with pytest.raises(ConfigError):
            model.init_gaussian(0, 5, 2, sigma=0.01, seed=0)
        with pytest.raises(ConfigError):
            model.init_gaussian(3, 5, 2, sigma=0.0, seed=0)


class TestForward:
    def test_zero_network_linear(self):
        p = model.SrnParams(np.zeros((2, 3)), np.zeros((3, 3)), np.zeros((3, 2)),
                            np.zeros(3), OutputActivation.LINEAR)
        tr = model.forward(p, np.zeros((4, 2)))
        npt.assert_array_equal(tr.a, np.zeros((4, 3)))
        npt.assert_array_equal(tr.z, np.zeros((4, 3)))
        npt.assert_array_equal(tr.y, np.zeros(2))

    def test_zero_network_softmax_uniform(self):
        p = model.SrnParams(np.zeros((2, 3)), np.zeros((3, 3)), np.zeros((3, 4)),
                            np.zeros(3), OutputActivation.SOFTMAX)
        tr = model.forward(p, np.zeros((4, 2)))
        npt.assert_allclose(tr.y, [0.25, 0.25, 0.25, 0.25], rtol=0, atol=0)

    def test_matches_scalar_hand_computation(self):
        # 2 hidden units, T = 3, every number recomputed with plain floats
        w_in = np.array([[0.3, -0.2]])
        w_rec = np.array([[0.5, 0.1], [-0.4, 0.2]])
        w_out = np.array([[0.7], [-0.6]])
        b = np.array([0.05, -0.05])
        p = model.SrnParams(w_in, w_rec, w_out, b, OutputActivation.LINEAR)
        seq = np.array([[1.0], [-0.5], [2.0]])

        z_prev = [0.0, 0.0]
        a_ref, z_ref = [], []
        for k in range(3):
            a_k = [
                seq[k, 0] * 0.3 + z_prev[0] * 0.5 + z_prev[1] * (-0.4) + 0.05,
                seq[k, 0] * (-0.2) + z_prev[0] * 0.1 + z_prev[1] * 0.2 - 0.05,
            ]
            z_prev = [math.tanh(a_k[0]), math.tanh(a_k[1])]
            a_ref.append(a_k)
            z_ref.append(z_prev)
        y_ref = z_prev[0] * 0.7 + z_prev[1] * (-0.6)

        tr = model.forward(p, seq)
        npt.assert_allclose(tr.a, a_ref, rtol=1e-15)
        npt.assert_allclose(tr.z, z_ref, rtol=1e-15)
        npt.assert_allclose(tr.y, [y_ref], rtol=1e-14)

    def test_deterministic(self):
        p = tiny_params(3)
        seq = np.random.default_rng(4).standard_normal((6, 2))
        t1 = model.forward(p, seq)
        t2 = model.forward(p, seq)
        assert t1.a.tobytes() == t2.a.tobytes()
        assert t1.y.tobytes() == t2.y.tobytes()

    def test_fprime_identity(self):
        p = tiny_params(5)
        tr = model.forward(p, np.random.default_rng(6).standard_normal((5, 2)))
        npt.assert_array_equal(tr.fprime, 1.0 - tr.z * tr.z)
        assert np.all(tr.fprime > 0) and np.all(tr.fprime <= 1)
        assert np.all(np.abs(tr.z) < 1)

    def test_softmax_normalized(self):
        p = tiny_params(7, n_out=5, activation=OutputActivation.SOFTMAX, scale=2.0)
        tr = model.forward(p, np.random.default_rng(8).standard_normal((6, 2)))
        assert abs(tr.y.sum() - 1.0) < 1e-12
        assert np.all(tr.y > 0)

    def test_batch_matches_single(self):
        p = tiny_params(9)
        batch = np.random.default_rng(10).standard_normal((4, 6, 2))
        bt = model.forward_batch(p, batch)
        for i in range(4):
            st = model.forward(p, batch[i])
            npt.assert_allclose(bt.a[i], st.a, rtol=1e-13, atol=1e-15)
            npt.assert_allclose(bt.y[i], st.y, rtol=1e-13, atol=1e-15)

    def test_shape_errors(self):
        p = tiny_params(11)
        with pytest.raises(DimensionError):
            model.forward(p, np.zeros((4, 3)))
        with pytest.raises(DimensionError):
            model.forward(p, np.zeros((4, 2)), z0=np.zeros(2))

    def test_nonfinite_reports_step(self):
        p = tiny_params(12)
        seq = np.zeros((5, 2))
        seq[2, 0] = np.inf
        with pytest.raises(NumericalError, match="step 3"):
            model.forward(p, seq)


class TestOutputLoss:
    def _trace_with_ypre(self, y_pre, activation):
        y = model._softmax(y_pre) if activation is OutputActivation.SOFTMAX else y_pre
        n = y_pre.shape[0]
        return model.ForwardTrace(
            inputs=np.zeros((1, 1)), z0=np.zeros(1), a=np.zeros((1, 1)),
            z=np.zeros((1, 1)), fprime=np.ones((1, 1)), y=y,
            output_activation=activation,
        )

    def test_exact_hit_mse(self):
        tr = self._trace_with_ypre(np.array([0.4, -0.2]), OutputActivation.LINEAR)
        res = model.output_loss(tr, np.array([0.4, -0.2]), LossKind.MSE, tolerance=0.04)
        assert res.loss == 0.0
        npt.assert_array_equal(res.output_delta, np.zeros(2))
        assert res.correct

    def test_uniform_softmax_cross_entropy(self):
        tr = self._trace_with_ypre(np.zeros(4), OutputActivation.SOFTMAX)
        res = model.output_loss(tr, 2, LossKind.CROSS_ENTROPY)
        assert abs(res.loss - math.log(4.0)) < 1e-12

    def test_mse_delta_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        y_pre = rng.standard_normal(5)
        t = rng.standard_normal(5)
        res = model.output_loss(self._trace_with_ypre(y_pre, OutputActivation.LINEAR),
                                t, LossKind.MSE)
        eps = 1e-6
        for i in range(5):
            up, dn = y_pre.copy(), y_pre.copy()
            up[i] += eps
            dn[i] -= eps
            lu = model.output_loss(self._trace_with_ypre(up, OutputActivation.LINEAR),
                                   t, LossKind.MSE).loss
            ld = model.output_loss(self._trace_with_ypre(dn, OutputActivation.LINEAR),
                                   t, LossKind.MSE).loss
            fd = (lu - ld) / (2 * eps)
            npt.assert_allclose(res.output_delta[i], fd, rtol=1e-6, atol=1e-9)

    def test_cross_entropy_delta_matches_finite_differences(self):
        rng = np.random.default_rng(14)
        y_pre = rng.standard_normal(4)
        cls = 1
        res = model.output_loss(self._trace_with_ypre(y_pre, OutputActivation.SOFTMAX),
                                cls, LossKind.CROSS_ENTROPY)
        eps = 1e-6
        for i in range(4):
            up, dn = y_pre.copy(), y_pre.copy()
            up[i] += eps
            dn[i] -= eps
            lu = model.output_loss(self._trace_with_ypre(up, OutputActivation.SOFTMAX),
                                   cls, LossKind.CROSS_ENTROPY).loss
            ld = model.output_loss(self._trace_with_ypre(dn, OutputActivation.SOFTMAX),
                                   cls, LossKind.CROSS_ENTROPY).loss
            fd = (lu - ld) / (2 * eps)
            npt.assert_allclose(res.output_delta[i], fd, rtol=1e-6, atol=1e-9)

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            y_pre = rng.standard_normal(3)
            t = rng.standard_normal(3)
            assert model.output_loss(self._trace_with_ypre(y_pre, OutputActivation.LINEAR),
                                     t, LossKind.MSE).loss >= 0
            assert model.output_loss(self._trace_with_ypre(y_pre, OutputActivation.SOFTMAX),
                                     0, LossKind.CROSS_ENTROPY).loss >= 0

    def test_pairing_mismatch_fatal(self):
        tr = self._trace_with_ypre(np.zeros(3), OutputActivation.LINEAR)
        with pytest.raises(ConfigError):
            model.output_loss(tr, 0, LossKind.CROSS_ENTROPY)
        tr = self._trace_with_ypre(np.zeros(3), OutputActivation.SOFTMAX)
        with pytest.raises(ConfigError):
            model.output_loss(tr, np.zeros(3), LossKind.MSE)

    def test_loss_batch_matches_single(self):
        p = tiny_params(16, n_out=3, activation=OutputActivation.SOFTMAX)
        batch = np.random.default_rng(17).standard_normal((5, 4, 2))
        targets = np.array([0, 2, 1, 1, 0])
        bt = model.forward_batch(p, batch)
        losses, deltas, correct = model.loss_batch(bt, targets, LossKind.CROSS_ENTROPY)
        for i in range(5):
            st = model.forward(p, batch[i])
            res = model.output_loss(st, targets[i], LossKind.CROSS_ENTROPY)
            npt.assert_allclose(losses[i], res.loss, rtol=1e-12)
            npt.assert_allclose(deltas[i], res.output_delta, rtol=1e-12, atol=1e-15)
            assert correct[i] == res.correct


class TestSerialization:
    def test_round_trip_bit_exact(self):
        for seed in range(5):
            p = tiny_params(seed, n_in=3, n_hid=4, n_out=2,
                            activation=OutputActivation.SOFTMAX if seed % 2 else
                            OutputActivation.LINEAR)
            q = model.deserialize(model.serialize(p, seed=seed))
            assert q.output_activation == p.output_activation
            for a, b in [(p.w_in, q.w_in), (p.w_rec, q.w_rec),
                         (p.w_out, q.w_out), (p.b, q.b)]:
                assert a.tobytes() == b.tobytes()

    def test_document_is_self_describing(self):
        p = tiny_params(0)
        doc = json.loads(model.serialize(p, seed=9).decode())
        assert doc["format"] == model.MODEL_FORMAT
        assert doc["n_in"] == 2 and doc["n_hid"] == 3 and doc["n_out"] == 2
        assert doc["seed"] == 9

    def test_malformed_input(self):
        with pytest.raises(FormatError):
            model.deserialize(b"not json at all {")
        with pytest.raises(FormatError):
            model.deserialize(b'{"format": "something-else"}')
        doc = json.loads(model.serialize(tiny_params(0)).decode())
        del doc["w_rec"]
        with pytest.raises(FormatError):
            model.deserialize(json.dumps(doc).encode())

    def test_save_load_file(self, tmp_path):
        p = tiny_params(21)
        path = tmp_path / "model.json"
        model.save_model(path, p, seed=21)
        q = model.load_model(path)
        assert q.w_rec.tobytes() == p.w_rec.tobytes()
