import numpy as np
import pytest

from frictionlab.network import (
    AdamState,
    Mlp,
    NonFiniteGradientError,
    TrainableScalars,
    adam_step,
    forward,
    forward_with_tangent,
    init_network,
    input_jacobian,
    load_model,
    model_bytes,
    save_model,
)

RNG = np.random.default_rng(3)


class TestInit:
    def test_deterministic_per_seed(self):
        a = init_network([3, 16, 1], seed=5)
        b = init_network([3, 16, 1], seed=5)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)
        c = init_network([3, 16, 1], seed=6)
        assert not np.array_equal(a.weights[0], c.weights[0])

    def test_he_scaling_and_zero_biases(self):
        net = init_network([128, 128, 1], seed=0)
        std = net.weights[0].std()
        assert std == pytest.approx(np.sqrt(2.0 / 128), rel=0.1)
        for b in net.biases:
            np.testing.assert_array_equal(b, 0.0)

    def test_needs_two_layers(self):
        with pytest.raises(ValueError):
            init_network([4], seed=0)


class TestForward:
    def test_identity_single_layer(self):
        net = Mlp([np.eye(3)], [np.zeros(3)])
        x = RNG.normal(size=3)
        np.testing.assert_array_equal(forward(net, x), x)

    def test_relu_cutoff(self):
        # one hidden unit w=1, b=-1: input 0.5 gives dead unit, output = bias
        net = Mlp(
            [np.array([[1.0]]), np.array([[2.0]])],
            [np.array([-1.0]), np.array([0.7])],
        )
        assert forward(net, np.array([0.5]))[0] == pytest.approx(0.7)

    def test_matches_manual_composition(self):
        net = init_network([3, 4, 2], seed=1)
        x = RNG.normal(size=3)
        h = np.maximum(x @ net.weights[0] + net.biases[0], 0)
        y = h @ net.weights[1] + net.biases[1]
        np.testing.assert_allclose(forward(net, x), y, atol=1e-15)

    def test_batch_and_single_agree(self):
        net = init_network([2, 8, 1], seed=2)
        xs = RNG.normal(size=(5, 2))
        batch = forward(net, xs)
        for i in range(5):
            np.testing.assert_allclose(forward(net, xs[i]), batch[i])

    def test_dimension_mismatch(self):
        net = init_network([3, 4, 1], seed=0)
        with pytest.raises(ValueError):
            forward(net, np.ones(2))


class TestInputJacobian:
    def test_single_linear_layer_is_weight_matrix(self):
        w = RNG.normal(size=(3, 2))
        net = Mlp([w], [np.zeros(2)])
        np.testing.assert_array_equal(input_jacobian(net, np.ones(3)), w.T)

    def test_finite_difference_agreement(self):
        net = init_network([3, 16, 16, 1], seed=4)
        x = RNG.normal(size=3)
        jac = input_jacobian(net, x)
        h = 1e-7
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd = (forward(net, x + e) - forward(net, x - e)) / (2 * h)
            assert jac[0, j] == pytest.approx(fd[0], rel=1e-5, abs=1e-9)

    def test_constant_within_linear_region(self):
        net = init_network([2, 8, 1], seed=5)
        x = RNG.normal(size=2) + 1.0
        j1 = input_jacobian(net, x)
        j2 = input_jacobian(net, x * (1 + 1e-9))  # same activation pattern
        np.testing.assert_array_equal(j1, j2)

    def test_tangent_is_jacobian_vector_product(self):
        net = init_network([3, 12, 1], seed=6)
        x = RNG.normal(size=3)
        xdot = RNG.normal(size=3)
        jac = input_jacobian(net, x)
        y, ydot = forward_with_tangent(net, x, xdot)
        assert ydot[0] == pytest.approx(float(jac @ xdot), abs=1e-12)
        np.testing.assert_allclose(y, forward(net, x))


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = {"w": np.array([1.0, 2.0])}
        state = AdamState()
        adam_step(p, {"w": np.zeros(2)}, state, lr=0.1)
        np.testing.assert_array_equal(p["w"], [1.0, 2.0])
        assert state.step == 1

    def test_first_step_magnitude_is_lr(self):
        p = {"w": np.array([1.0])}
        adam_step(p, {"w": np.array([123.0])}, AdamState(), lr=0.01)
        # bias-corrected first step moves by ~lr against the gradient sign
        assert p["w"][0] == pytest.approx(1.0 - 0.01, rel=1e-6)

    def test_two_steps_match_hand_computation(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        g1, g2 = 2.0, -1.0
        # reference sequence computed directly from the update equations
        m = (1 - b1) * g1
        v = (1 - b2) * g1 * g1
        x = 1.0 - lr * (m / (1 - b1)) / (np.sqrt(v / (1 - b2)) + eps)
        m = b1 * m + (1 - b1) * g2
        v = b2 * v + (1 - b2) * g2 * g2
        x = x - lr * (m / (1 - b1**2)) / (np.sqrt(v / (1 - b2**2)) + eps)

        p = {"w": np.array([1.0])}
        state = AdamState()
        adam_step(p, {"w": np.array([g1])}, state, lr)
        adam_step(p, {"w": np.array([g2])}, state, lr)
        assert p["w"][0] == pytest.approx(x, rel=1e-12)

    def test_non_finite_gradient_names_parameter(self):
        with pytest.raises(NonFiniteGradientError, match="w7"):
            adam_step({"w7": np.ones(2)}, {"w7": np.array([1.0, np.nan])}, AdamState(), 0.1)


class TestScalars:
    def test_log_space_round_trip(self):
        s = TrainableScalars.from_natural({"sigma0": 1e4, "mu_c": 0.2})
        nat = s.natural()
        assert nat["sigma0"] == pytest.approx(1e4)
        assert nat["mu_c"] == pytest.approx(0.2)

    def test_params_are_prefixed(self):
        s = TrainableScalars.from_natural({"v_s": 0.01})
        assert set(s.params()) == {"log_v_s"}


class TestSerialization:
    def test_round_trip(self, tmp_path):
        net = init_network([3, 8, 1], seed=9)
        meta = {"variant": "bb1", "note": 1.5}
        extra = {"norm_mean": np.array([0.1, 0.2, 0.3])}
        path = tmp_path / "model.npz"
        save_model(path, net, meta, extra)
        net2, meta2, extra2 = load_model(path)
        assert meta2["variant"] == "bb1" and meta2["note"] == 1.5
        for w, w2 in zip(net.weights, net2.weights):
            np.testing.assert_array_equal(w, w2)
        np.testing.assert_array_equal(extra2["norm_mean"], extra["norm_mean"])

    def test_bytes_deterministic(self):
        net = init_network([2, 4, 1], seed=1)
        b1 = model_bytes(net, {"variant": "bb1"})
        b2 = model_bytes(net, {"variant": "bb1"})
        assert b1 == b2
