"""Dueling network math, gradients, Adam, checkpoints, and backend parity."""

import subprocess
import sys

import numpy as np
import pytest

from hemslab.errors import CheckpointFormatError, UnsupportedVersionError
from hemslab.neural import backend_name, compiled_kernels, numpy_kernels
from hemslab.neural.network import (
    AdamState,
    DuelingNetwork,
    forward,
    init_network,
    load_checkpoint,
    optimizer_step,
    q_values,
    save_checkpoint,
    sync_target,
    td_loss_and_gradients,
)


def tiny_net(seed=3, input_dim=3, h1=8, h2=8, n_actions=4):
    return init_network(input_dim, n_actions, h1, h2, seed=seed)


def batch_for(net, n, seed=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n, net.input_dim))
    actions = rng.integers(0, net.n_actions, size=n)
    targets = rng.normal(0.0, 1.0, size=n)
    return X, actions, targets


class TestInit:
    def test_shapes_and_zero_biases(self):
        net = init_network(18, 16, 128, 128, seed=0)
        shapes = [p.shape for p in net.params]
        assert shapes == [(18, 128), (128,), (128, 128), (128,),
                          (128, 1), (1,), (128, 16), (16,)]
        for p in net.params[1::2]:
            assert np.all(p == 0.0)

    def test_fan_in_bounds(self):
        net = init_network(100, 4, 64, 32, seed=1)
        W1, _, W2, _, Wv, _, Wa, _ = net.params
        assert np.max(np.abs(W1)) <= 0.1
        assert np.max(np.abs(W2)) <= 1.0 / 8.0
        assert np.max(np.abs(Wa)) <= 1.0 / np.sqrt(32.0)

    def test_seed_reproducible(self):
        a = init_network(6, 4, 8, 8, seed=42)
        b = init_network(6, 4, 8, 8, seed=42)
        for pa, pb in zip(a.params, b.params):
            np.testing.assert_array_equal(pa, pb)

    def test_bad_sizes(self):
        with pytest.raises(ValueError):
            init_network(0, 4)


class TestForward:
    def test_dueling_identity(self):
        # sum over actions of (Q - V) must vanish for every state
        net = tiny_net()
        X, _, _ = batch_for(net, 32)
        q, v, a = forward(net, X)
        assert q.shape == (32, net.n_actions)
        np.testing.assert_allclose((q - v).sum(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(q, v + a - a.mean(axis=1, keepdims=True),
                                   atol=1e-12)

    def test_advantage_shift_invariance(self):
        # adding a constant to every advantage leaves Q untouched
        net = tiny_net()
        X, _, _ = batch_for(net, 8)
        q1, _, _ = forward(net, X)
        shifted = [p.copy() for p in net.params]
        shifted[7] = shifted[7] + 3.7
        net2 = DuelingNetwork(net.input_dim, net.hidden1, net.hidden2,
                              net.n_actions, tuple(shifted))
        q2, v2, _ = forward(net2, X)
        np.testing.assert_allclose(q1, q2, atol=1e-12)

    def test_hand_built_example(self):
        # V = 3, A = [1, -1]  ->  Q = [4, 2]
        params = (
            np.zeros((1, 1)), np.ones(1),          # h1 = relu(0 + 1) = 1
            np.ones((1, 1)), np.zeros(1),          # h2 = 1
            np.array([[3.0]]), np.zeros(1),        # V = 3
            np.zeros((1, 2)), np.array([1.0, -1.0]),
        )
        net = DuelingNetwork(1, 1, 1, 2, params)
        q, v, a = forward(net, np.zeros((1, 1)))
        np.testing.assert_allclose(v, [[3.0]], atol=0)
        np.testing.assert_allclose(q, [[4.0, 2.0]], atol=0)

    def test_single_observation_helper(self):
        net = tiny_net()
        obs = np.linspace(0.0, 1.0, net.input_dim)
        q = q_values(net, obs)
        q_batch, _, _ = forward(net, obs.reshape(1, -1))
        np.testing.assert_array_equal(q, q_batch[0])

    def test_wrong_width_rejected(self):
        net = tiny_net()
        with pytest.raises(ValueError, match="observations of size"):
            forward(net, np.zeros((2, net.input_dim + 1)))


def relu_kink_safe(net, X, margin=1e-4):
    """True when no pre-activation sits within `margin` of the ReLU kink,
    where finite differences of the exact subgradient would disagree."""
    W1, b1, W2, b2 = net.params[:4]
    z1 = X @ W1 + b1
    z2 = np.maximum(z1, 0.0) @ W2 + b2
    return min(np.abs(z1).min(), np.abs(z2).min()) > margin


class TestGradients:
    def test_loss_value_matches_definition(self):
        net = tiny_net()
        X, actions, targets = batch_for(net, 16)
        loss, _ = td_loss_and_gradients(net, X, actions, targets)
        q, _, _ = forward(net, X)
        err = q[np.arange(16), actions] - targets
        assert loss == pytest.approx(float(np.mean(err ** 2)), rel=1e-12)

    def test_gradients_match_finite_differences(self):
        net = tiny_net(seed=3)
        X, actions, targets = batch_for(net, 16, seed=5)
        assert relu_kink_safe(net, X)
        _, grads = td_loss_and_gradients(net, X, actions, targets)

        eps = 1e-6
        rng = np.random.default_rng(7)
        for pi, (p, g) in enumerate(zip(net.params, grads)):
            flat = p.reshape(-1)
            for idx in rng.choice(flat.size, size=min(6, flat.size), replace=False):
                orig = flat[idx]
                flat[idx] = orig + eps
                lp, _ = td_loss_and_gradients(net, X, actions, targets)
                flat[idx] = orig - eps
                lm, _ = td_loss_and_gradients(net, X, actions, targets)
                flat[idx] = orig
                fd = (lp - lm) / (2 * eps)
                an = g.reshape(-1)[idx]
                assert an == pytest.approx(fd, rel=1e-5, abs=1e-8), \
                    f"param {pi} index {idx}: analytic {an} vs fd {fd}"

    def test_advantage_grad_couples_through_mean(self):
        # only action 0 is selected, yet every advantage column receives
        # gradient through the subtracted mean
        net = tiny_net()
        X, _, targets = batch_for(net, 8)
        actions = np.zeros(8, dtype=int)
        _, grads = td_loss_and_gradients(net, X, actions, targets)
        g_ba = grads[7]
        assert np.all(g_ba[1:] != 0.0)
        assert abs(g_ba.sum()) < 1e-12

    def test_batch_length_mismatch(self):
        net = tiny_net()
        X, actions, targets = batch_for(net, 8)
        with pytest.raises(ValueError):
            td_loss_and_gradients(net, X, actions[:-1], targets)

    def test_action_bounds_checked(self):
        net = tiny_net()
        X, actions, targets = batch_for(net, 8)
        actions[3] = net.n_actions
        with pytest.raises(ValueError):
            td_loss_and_gradients(net, X, actions, targets)


class TestAdam:
    def test_matches_reference_updates(self):
        net = tiny_net(seed=9)
        opt = AdamState.for_network(net, lr=1e-3)
        ref = [p.copy() for p in net.params]
        m = [np.zeros_like(p) for p in ref]
        v = [np.zeros_like(p) for p in ref]
        X, actions, targets = batch_for(net, 16, seed=11)
        for step in range(1, 4):
            _, grads = td_loss_and_gradients(net, X, actions, targets)
            optimizer_step(net, opt, grads)
            for i, g in enumerate(grads):
                m[i] = 0.9 * m[i] + 0.1 * g
                v[i] = 0.999 * v[i] + 0.001 * g * g
                mhat = m[i] / (1 - 0.9 ** step)
                vhat = v[i] / (1 - 0.999 ** step)
                ref[i] = ref[i] - 1e-3 * mhat / (np.sqrt(vhat) + 1e-8)
            for p, r in zip(net.params, ref):
                np.testing.assert_allclose(p, r, atol=1e-14)
        assert opt.step == 3

    def test_sync_target(self):
        net = tiny_net()
        target = init_network(net.input_dim, net.n_actions, net.hidden1,
                              net.hidden2, seed=99)
        sync_target(net, target)
        for p, t in zip(net.params, target.params):
            np.testing.assert_array_equal(p, t)
            assert p is not t

    def test_sync_rejects_mismatched_architecture(self):
        with pytest.raises(ValueError, match="architecture"):
            sync_target(tiny_net(), init_network(3, 4, 8, 16, seed=0))


class TestCheckpoints:
    def trained_pair(self):
        net = tiny_net(seed=21)
        opt = AdamState.for_network(net, lr=2e-3)
        X, actions, targets = batch_for(net, 16, seed=22)
        for _ in range(5):
            _, grads = td_loss_and_gradients(net, X, actions, targets)
            optimizer_step(net, opt, grads)
        return net, opt

    def test_roundtrip_bit_exact(self, tmp_path):
        net, opt = self.trained_pair()
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net, opt)
        net2, opt2 = load_checkpoint(path)
        assert net2.architecture == net.architecture
        assert (opt2.step, opt2.lr, opt2.beta1, opt2.beta2, opt2.eps) == \
            (opt.step, opt.lr, opt.beta1, opt.beta2, opt.eps)
        for a, b in zip(net.params + opt.m + opt.v,
                        net2.params + opt2.m + opt2.v):
            np.testing.assert_array_equal(a, b)

    def test_save_is_deterministic(self, tmp_path):
        net, opt = self.trained_pair()
        save_checkpoint(tmp_path / "a.ckpt", net, opt)
        save_checkpoint(tmp_path / "b.ckpt", net, opt)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_bad_magic(self, tmp_path):
        net, opt = self.trained_pair()
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net, opt)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTACKPT"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointFormatError, match="magic"):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        net, opt = self.trained_pair()
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net, opt)
        raw = bytearray(path.read_bytes())
        raw[8:12] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVersionError):
            load_checkpoint(path)

    def test_truncated_payload(self, tmp_path):
        net, opt = self.trained_pair()
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net, opt)
        raw = path.read_bytes()
        path.write_bytes(raw[:len(raw) - 16])
        with pytest.raises(CheckpointFormatError, match="bytes"):
            load_checkpoint(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "net.ckpt"
        path.write_bytes(b"HEMS")
        with pytest.raises(CheckpointFormatError, match="truncated"):
            load_checkpoint(path)


class TestBackends:
    def test_active_backend_is_known(self):
        assert backend_name() in ("cython", "python")

    @pytest.mark.skipif(compiled_kernels() is None,
                        reason="compiled kernels not built")
    def test_backends_agree(self):
        ck = compiled_kernels()
        nk = numpy_kernels()
        net = tiny_net(seed=13, input_dim=18, h1=32, h2=32, n_actions=16)
        X, actions, targets = batch_for(net, 64, seed=14)

        qc, vc, ac = ck.forward(*net.params, X)
        qn, vn, an = nk.forward(*net.params, X)
        np.testing.assert_allclose(qc, qn, atol=1e-10)
        np.testing.assert_allclose(vc, vn, atol=1e-10)
        np.testing.assert_allclose(ac, an, atol=1e-10)

        lc, gc = ck.loss_and_grads(*net.params, X, actions, targets)
        ln, gn = nk.loss_and_grads(*net.params, X, actions, targets)
        assert lc == pytest.approx(ln, rel=1e-10)
        for a, b in zip(gc, gn):
            np.testing.assert_allclose(a, b, atol=1e-10)

        pa = [p.copy() for p in net.params]
        pb = [p.copy() for p in net.params]
        ma = [np.zeros_like(p) for p in pa]
        va = [np.zeros_like(p) for p in pa]
        mb = [np.zeros_like(p) for p in pb]
        vb = [np.zeros_like(p) for p in pb]
        ck.adam_step(pa, gc, ma, va, 1, 1e-3, 0.9, 0.999, 1e-8)
        nk.adam_step(pb, gn, mb, vb, 1, 1e-3, 0.9, 0.999, 1e-8)
        for a, b in zip(pa, pb):
            np.testing.assert_allclose(a, b, atol=1e-10)

    @pytest.mark.skipif(compiled_kernels() is None,
                        reason="compiled kernels not built")
    def test_backend_env_override(self):
        code = ("import hemslab.neural as n; print(n.backend_name())")
        for requested, expect in (("python", "python"), ("cython", "cython"),
                                  ("auto", "cython")):
            out = subprocess.run(
                [sys.executable, "-c", code],
                capture_output=True, text=True,
                env={"PATH": "/usr/bin:/bin", "HEMSLAB_BACKEND": requested},
            )
            assert out.returncode == 0, out.stderr
            assert out.stdout.strip() == expect

    def test_backend_env_rejects_unknown(self):
        code = "import hemslab.neural"
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True, text=True,
            env={"PATH": "/usr/bin:/bin", "HEMSLAB_BACKEND": "fortran"},
        )
        assert out.returncode != 0
        assert "HEMSLAB_BACKEND" in out.stderr
