import math

import numpy as np
import pytest

from tunneldetect.network import (
    DEFAULT_HYPERPARAMS,
    Hyperparams,
    ModelParams,
    backward,
    backward_batch,
    bce_loss,
    expected_shapes,
    forward,
    forward_batch,
    init_params,
)
from tunneldetect.tokenizer import encode_domain

from oracles import (
    GRADCHECK_CASES,
    KINK_CLEARANCE,
    gradcheck_inputs,
    gradient_relative_error,
    naive_forward,
    numeric_gradients,
    relu_kink_clearance,
)


class TestHyperparams:
    def test_reference_configuration(self):
        hp = DEFAULT_HYPERPARAMS
        assert (hp.nf, hp.ks, hp.sl, hp.d, hp.l, hp.hn) == (1024, 4, 1, 100, 45, 256)
        assert hp.conv_out_len == 42
        assert hp.flat_width == 43008

    def test_single_window(self):
        assert Hyperparams(nf=2, ks=4, sl=1, d=3, l=4, hn=2).conv_out_len == 1

    def test_flat_width_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            l = int(rng.integers(2, 64))
            ks = int(rng.integers(1, l + 1))
            sl = int(rng.integers(1, 4))
            hp = Hyperparams(nf=int(rng.integers(1, 16)), ks=ks, sl=sl, d=2, l=l, hn=2)
            assert hp.conv_out_len == (l - ks) // sl + 1
            assert hp.conv_out_len >= 1
            assert hp.flat_width == hp.conv_out_len * hp.nf

    def test_validation(self):
        with pytest.raises(ValueError):
            Hyperparams(nf=0, ks=1, sl=1, d=1, l=1, hn=1)
        with pytest.raises(ValueError):
            Hyperparams(nf=1, ks=5, sl=1, d=1, l=4, hn=1)


class TestInitParams:
    def test_deterministic(self, tiny_hp):
        a = init_params(tiny_hp, seed=7)
        b = init_params(tiny_hp, seed=7)
        for (name, arr_a), (_, arr_b) in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(arr_a, arr_b, err_msg=name)

    def test_biases_zero(self, tiny_model):
        assert not tiny_model.conv_b.any()
        assert not tiny_model.dense1_b.any()
        assert not tiny_model.dense2_b.any()

    def test_embedding_bound(self, tiny_model):
        assert np.abs(tiny_model.embedding).max() <= 0.05

    def test_shapes(self, tiny_hp, tiny_model):
        for name, arr in tiny_model.arrays():
            assert arr.shape == expected_shapes(tiny_hp)[name]

    def test_seeds_differ(self, tiny_hp):
        a = init_params(tiny_hp, seed=1)
        b = init_params(tiny_hp, seed=2)
        assert np.abs(a.conv_w - b.conv_w).max() > 0


class TestForward:
    def test_zero_weights_give_half(self, tiny_hp, tiny_model):
        zero = ModelParams.zeros_like(tiny_model)
        x = encode_domain("abcdef.com", tiny_hp.l)
        assert forward(zero, tiny_hp, x) == 0.5

    def test_matches_naive_reference(self, tiny_hp):
        rng = np.random.default_rng(10)
        for seed in range(5):
            params = init_params(tiny_hp, seed)
            # break symmetry of zero biases
            params.conv_b[:] = rng.normal(0, 0.3, size=params.conv_b.shape)
            params.dense1_b[:] = rng.normal(0, 0.3, size=params.dense1_b.shape)
            x = rng.integers(0, 45, size=tiny_hp.l)
            got = forward(params, tiny_hp, x)
            want = naive_forward(params, tiny_hp, x)
            assert got == pytest.approx(want, rel=1e-12)

    def test_deterministic_bitwise(self, tiny_hp, tiny_model):
        x = encode_domain("payload123.example.com", tiny_hp.l)
        assert forward(tiny_model, tiny_hp, x) == forward(tiny_model, tiny_hp, x)

    def test_probability_in_open_interval(self, tiny_hp):
        rng = np.random.default_rng(11)
        for scale in (1.0, 50.0, 5000.0):
            params = init_params(tiny_hp, 3)
            params.dense2_w[:] = rng.normal(0, scale, size=params.dense2_w.shape)
            params.dense2_b[:] = rng.normal(0, scale)
            x = rng.integers(0, 45, size=(20, tiny_hp.l))
            p = forward_batch(params, tiny_hp, x)
            assert np.all(p > 0.0)
            assert np.all(p < 1.0)

    def test_length_mismatch_raises(self, tiny_hp, tiny_model):
        with pytest.raises(ValueError, match="length"):
            forward(tiny_model, tiny_hp, np.zeros(tiny_hp.l + 1, dtype=np.int64))

    def test_batch_matches_single(self, tiny_hp, tiny_model):
        rng = np.random.default_rng(12)
        x = rng.integers(0, 45, size=(8, tiny_hp.l))
        batch_p = forward_batch(tiny_model, tiny_hp, x)
        for i in range(8):
            assert batch_p[i] == forward(tiny_model, tiny_hp, x[i])


class TestBceLoss:
    def test_half_prediction(self):
        assert bce_loss(0.5, 1) == pytest.approx(math.log(2), rel=1e-12)

    def test_near_perfect(self):
        assert bce_loss(1 - 1e-7, 1) == pytest.approx(1e-7, rel=1e-3)

    def test_confident_wrong(self):
        assert bce_loss(0.9, 0) == pytest.approx(-math.log(0.1), rel=1e-12)

    def test_clamped_at_extremes(self):
        assert math.isfinite(bce_loss(0.0, 1))
        assert math.isfinite(bce_loss(1.0, 0))


class TestBackward:
    def test_unreferenced_embedding_row_gets_zero_gradient(self, tiny_hp):
        params = init_params(tiny_hp, 2)
        x = np.full(tiny_hp.l, 2, dtype=np.int64)  # only index 2 used
        grads, _ = backward(params, tiny_hp, [(x, 1)])
        assert not grads.embedding[7].any()
        assert grads.embedding[2].any()

    def test_duplicate_batch_equals_single(self, tiny_hp):
        params = init_params(tiny_hp, 3)
        x = encode_domain("abc123.example.com", tiny_hp.l)
        g1, l1 = backward(params, tiny_hp, [(x, 1)])
        g2, l2 = backward(params, tiny_hp, [(x, 1), (x, 1)])
        assert l1 == pytest.approx(l2, rel=1e-12)
        for (name, a), (_, b) in zip(g1.arrays(), g2.arrays()):
            np.testing.assert_allclose(a, b, rtol=1e-12, err_msg=name)

    def test_empty_batch_raises(self, tiny_hp, tiny_model):
        with pytest.raises(ValueError, match="nonempty"):
            backward(tiny_model, tiny_hp, [])

    def test_gradient_shapes_match_params(self, tiny_hp, tiny_model):
        x = encode_domain("test.org", tiny_hp.l)
        grads, _ = backward(tiny_model, tiny_hp, [(x, 0)])
        for (name, g), (_, p) in zip(grads.arrays(), tiny_model.arrays()):
            assert g.shape == p.shape, name

    def test_relu_sparsity_in_conv_kernels(self, tiny_hp):
        # a filter whose activations are all clamped to zero cannot move
        params = init_params(tiny_hp, 4)
        params.conv_b[0] = -1e6
        x = np.arange(tiny_hp.l, dtype=np.int64) % 45
        grads, _ = backward(params, tiny_hp, [(x, 1)])
        assert not grads.conv_w[:, :, 0].any()
        assert grads.conv_b[0] == 0.0

    def test_finite_differences_single_case(self):
        hp, batch_size, seed = GRADCHECK_CASES[0]
        params = init_params(hp, seed)
        x, y = gradcheck_inputs(hp, batch_size, seed)
        assert relu_kink_clearance(params, hp, x) > KINK_CLEARANCE
        analytic, _ = backward_batch(params, hp, x, y)
        numeric = numeric_gradients(params, hp, x, y)
        assert gradient_relative_error(analytic, numeric) < 1e-4

    def test_loss_matches_mean_bce(self, tiny_hp, tiny_model):
        xs = [encode_domain(n, tiny_hp.l) for n in ("aaa.com", "zzz999.net")]
        probs = [forward(tiny_model, tiny_hp, x) for x in xs]
        _, loss = backward(tiny_model, tiny_hp, [(xs[0], 0), (xs[1], 1)])
        want = (bce_loss(probs[0], 0) + bce_loss(probs[1], 1)) / 2
        assert loss == pytest.approx(want, rel=1e-12)


def test_model_scalar_count_matches_expected_shapes(tiny_hp, tiny_model):
    want = sum(int(np.prod(s)) for s in expected_shapes(tiny_hp).values())
    assert tiny_model.num_scalars() == want
