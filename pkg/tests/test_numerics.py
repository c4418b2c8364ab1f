import numpy as np
import pytest
from hypothesis import given, strategies as st

from dccf.checkpoint import load_tensors, save_tensors
from dccf.numerics import (AdamState, DivergenceError, EmbeddingTable, GradCheckReport,
                           MlpParams, adam_step, grad_check, mlp_backward, mlp_forward,
                           sigmoid, softplus)


class TestSigmoid:
    def test_zero(self):
        assert sigmoid(0.0) == 0.5

    @given(st.floats(-500, 500))
    def test_reflection_identity(self, x):
        assert sigmoid(-x) == pytest.approx(1.0 - sigmoid(x), abs=1e-15)

    def test_extreme_arguments_do_not_overflow(self):
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(-1000.0) == 0.0

    @given(st.floats(-30, 30))
    def test_matches_log_sum_exp_form(self, x):
        # exp(-logaddexp(0, -x)) is the log-domain evaluation
        assert sigmoid(x) == pytest.approx(np.exp(-np.logaddexp(0.0, -x)), rel=1e-12)

    def test_vector_input(self):
        out = sigmoid(np.array([0.0, 1000.0, -1000.0]))
        assert out.shape == (3,)
        assert np.all((out >= 0) & (out <= 1))


class TestMlpForward:
    def test_zero_weights_give_zero_output(self):
        rng = np.random.default_rng(0)
        params = MlpParams.create((4, 3, 2), rng)
        for w in params.weights:
            w[:] = 0.0
        out, _ = mlp_forward(params, rng.normal(size=4))
        assert np.all(out == 0.0)

    def test_single_layer_passes_nonnegative_input_through(self):
        w = np.zeros((4, 3))
        w[:3, :] = np.arange(9).reshape(3, 3)
        params = MlpParams(weights=[w], use_bias=True)
        x = np.array([0.5, 1.0, 2.0])
        out, _ = mlp_forward(params, x)
        assert np.allclose(out, x @ w[:3], atol=0)

    def test_matches_straight_line_reimplementation(self):
        rng = np.random.default_rng(42)
        params = MlpParams.create((5, 7, 3), rng)
        x = rng.normal(size=(11, 5))
        out, _ = mlp_forward(params, x)
        # independent oracle: the same arithmetic written out longhand
        w0, w1 = params.weights
        h = np.maximum(np.hstack([x, np.ones((11, 1))]) @ w0, 0.0)
        expected = np.maximum(np.hstack([h, np.ones((11, 1))]) @ w1, 0.0)
        assert np.allclose(out, expected, atol=1e-12)

    def test_final_activation_off_allows_negative_output(self):
        rng = np.random.default_rng(3)
        params = MlpParams.create((4, 6, 2), rng, final_activation=False)
        outs = [mlp_forward(params, rng.normal(size=4))[0] for _ in range(50)]
        assert np.min(outs) < 0

    def test_shape_mismatch_raises(self):
        params = MlpParams.create((4, 2), np.random.default_rng(0))
        with pytest.raises(ValueError):
            mlp_forward(params, np.zeros(5))


class TestMlpBackward:
    def test_zero_output_grad_gives_zero_grads(self):
        rng = np.random.default_rng(1)
        params = MlpParams.create((3, 4, 2), rng)
        _, cache = mlp_forward(params, rng.normal(size=(6, 3)))
        w_grads, gin = mlp_backward(params, cache, np.zeros((6, 2)))
        assert all(np.all(g == 0.0) for g in w_grads)
        assert np.all(gin == 0.0)

    def test_finite_difference_check(self):
        rng = np.random.default_rng(7)
        params = MlpParams.create((4, 5, 3), rng)
        x = rng.normal(size=(2, 4))
        target = rng.normal(size=(2, 3))

        def loss_of(weights):
            h = x
            for w in weights:  # final activation on: relu after every layer
                h = np.maximum(np.hstack([h, np.ones((h.shape[0], 1))]) @ w, 0.0)
            return 0.5 * float(((h - target) ** 2).sum())

        out, cache = mlp_forward(params, x)
        w_grads, _ = mlp_backward(params, cache, out - target)
        step = 1e-5
        worst = 0.0
        for li, w in enumerate(params.weights):
            flat = w.reshape(-1)
            gflat = w_grads[li].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = loss_of(params.weights)
                flat[i] = orig - step
                down = loss_of(params.weights)
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                denom = max(abs(numeric), abs(gflat[i]), 1e-6)
                worst = max(worst, abs(numeric - gflat[i]) / denom)
        assert worst < 1e-4

    def test_dead_relu_unit_gets_zero_gradient(self):
        # drive one hidden unit's pre-activation negative for every input
        rng = np.random.default_rng(5)
        params = MlpParams.create((3, 2, 1), rng)
        params.weights[0][:, 0] = 0.0
        params.weights[0][-1, 0] = -5.0  # bias forces unit 0 dead
        x = rng.normal(size=(4, 3))
        out, cache = mlp_forward(params, x)
        w_grads, _ = mlp_backward(params, cache, np.ones((4, 1)))
        assert np.all(w_grads[0][:, 0] == 0.0)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        params = MlpParams.create((4, 6, 2), rng)
        x = rng.normal(size=4)
        out, cache = mlp_forward(params, x)
        _, gin = mlp_backward(params, cache, np.ones(2))
        step = 1e-6
        for i in range(4):
            probe = x.copy()
            probe[i] += step
            up = mlp_forward(params, probe)[0].sum()
            probe[i] -= 2 * step
            down = mlp_forward(params, probe)[0].sum()
            assert gin[i] == pytest.approx((up - down) / (2 * step), abs=1e-6)


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        state = AdamState.for_params(params, lr=0.1)
        adam_step(state, params, {"w": np.zeros(3)})
        assert np.allclose(params["w"], [1.0, -2.0, 3.0])

    def test_constant_gradient_step_magnitude_approaches_lr(self):
        # closed form: with g constant, m-hat = g, v-hat = g^2, step -> lr*sign(g)
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params, lr=0.01)
        g = {"w": np.array([3.7])}
        for _ in range(50):
            before = params["w"].copy()
            adam_step(state, params, g)
        delta = abs(float(params["w"] - before))
        assert delta == pytest.approx(0.01, rel=1e-6)

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(11)
            params = {"w": rng.normal(size=(4, 3))}
            state = AdamState.for_params(params, lr=0.05)
            for _ in range(20):
                adam_step(state, params, {"w": rng.normal(size=(4, 3))})
            return params["w"]

        a, b = run(), run()
        assert np.array_equal(a, b)

    def test_non_finite_gradient_raises(self):
        params = {"w": np.zeros(2)}
        state = AdamState.for_params(params, lr=0.1)
        with pytest.raises(DivergenceError):
            adam_step(state, params, {"w": np.array([1.0, np.nan])})


class TestGradCheck:
    def test_quadratic_loss_is_exact(self):
        rng = np.random.default_rng(2)
        params = {"p": rng.normal(size=(3, 2))}

        def loss(ps):
            return float((ps["p"] ** 2).sum())

        # central differences are exact for quadratics; step 1e-4 keeps the
        # float64 rounding term (~eps/step) below the 1e-10 bound
        report = grad_check(loss, params, {"p": 2.0 * params["p"]},
                            tolerance=1e-10, step=1e-4)
        assert isinstance(report, GradCheckReport)
        assert report.passed
        assert report.max_rel_error < 1e-10

    def test_wrong_gradient_fails(self):
        params = {"p": np.array([1.0, 2.0])}

        def loss(ps):
            return float((ps["p"] ** 2).sum())

        report = grad_check(loss, params, {"p": 3.0 * params["p"]}, tolerance=1e-4)
        assert not report.passed


class TestEmbeddingTable:
    def test_seeded_init_is_reproducible(self):
        a = EmbeddingTable(5, 3, np.random.default_rng(1))
        b = EmbeddingTable(5, 3, np.random.default_rng(1))
        assert np.array_equal(a.values, b.values)
        assert (a.rows, a.dim) == (5, 3)

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingTable(0, 3, np.random.default_rng(0))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        tensors = {
            "a/matrix": rng.normal(size=(3, 4)),
            "b": rng.normal(size=7),
            "scalar": np.array(2.5),
        }
        path = tmp_path / "t.ckpt"
        save_tensors(path, tensors)
        loaded = load_tensors(path)
        assert set(loaded) == set(tensors)
        for name in tensors:
            assert np.array_equal(loaded[name], np.asarray(tensors[name]))

    def test_byte_determinism(self, tmp_path):
        tensors = {"x": np.arange(6, dtype=np.float64).reshape(2, 3), "y": np.array(1.0)}
        save_tensors(tmp_path / "a.ckpt", tensors)
        save_tensors(tmp_path / "b.ckpt", dict(reversed(list(tensors.items()))))
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a container")
        with pytest.raises(ValueError):
            load_tensors(path)


def test_softplus_matches_negative_log_sigmoid():
    for t in (-20.0, -1.0, 0.0, 1.0, 30.0):
        assert softplus(-t) == pytest.approx(-np.log(sigmoid(t)), rel=1e-12)
