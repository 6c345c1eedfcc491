import numpy as np
import pytest

from noft.attention import AttentionParams, sinkhorn_attention
from noft.bottleneck import FilterMap, compress, info_loss, lambda_of
from noft.errors import ConfigError, ParameterError, ShapeError
from noft.model import (
    AdamMoments,
    NoftModel,
    TrainConfig,
    adam_step,
    apply,
    backward,
    forward,
    init_model,
    total_loss,
    train,
)
from noft.tensor import RngState, gaussian_sample, mse, standardize
from noft.verify import grad_check, model_loss_probe

SHAPE = (2, 4, 4)


def zero_attention_model(shape, logit, restandardize=True):
    model = init_model(shape, seed=0, restandardize=restandardize)
    model.attention = AttentionParams.zeros(shape[0])
    model.filter = FilterMap(np.full(shape, float(logit)))
    return model


def sample_pair(shape, seed):
    rng = RngState(seed)
    return gaussian_sample(shape, rng), gaussian_sample(shape, rng)


class TestForward:
    def test_identity_path_with_full_keep_filter(self):
        # zero attention and lambda pinned high: output is close to the
        # standardized source; exact when the blend coefficient is 1
        n_orig, n_div = sample_pair(SHAPE, 1)
        model = zero_attention_model(SHAPE, logit=40.0)
        out, tape = forward(model, n_orig, n_div)

        r = standardize(n_orig.astype(np.float64))
        exact = standardize(compress(r, n_div.astype(np.float64), np.ones(SHAPE)))
        np.testing.assert_allclose(out, exact, atol=5e-3)
        np.testing.assert_allclose(tape.r, r, atol=1e-12)

    def test_full_leak_path_recovers_diversity_noise(self):
        n_orig, n_div = sample_pair(SHAPE, 2)
        model = zero_attention_model(SHAPE, logit=-40.0, restandardize=False)
        out, _ = forward(model, n_orig, n_div)
        np.testing.assert_allclose(out, n_div.astype(np.float64), atol=2e-3)

    def test_matches_stagewise_composition(self):
        n_orig, n_div = sample_pair(SHAPE, 3)
        model = init_model(SHAPE, seed=3)
        model.attention = AttentionParams(
            wq=0.4 * RngState(30).normal((2, 2), dtype=np.float64),
            wk=0.4 * RngState(31).normal((2, 2), dtype=np.float64),
            wv=0.4 * RngState(32).normal((2, 2), dtype=np.float64),
            bq=np.zeros(2), bk=np.zeros(2), bv=np.zeros(2),
        )
        model.filter = FilterMap(0.7 * RngState(33).normal(SHAPE, dtype=np.float64))
        out, _ = forward(model, n_orig, n_div)

        x = n_orig.astype(np.float64)
        y_att, _ = sinkhorn_attention(x, model.attention, model.n_iters)
        r = standardize(x + y_att)
        lam = lambda_of(model.filter)
        z = compress(r, n_div.astype(np.float64), lam)
        np.testing.assert_allclose(out, standardize(z), atol=1e-6)

    def test_shape_mismatch(self):
        model = init_model(SHAPE, seed=0)
        with pytest.raises(ShapeError):
            forward(model, np.zeros((2, 5, 5), dtype=np.float32), np.zeros((2, 5, 5), dtype=np.float32))


class TestTotalLoss:
    def test_beta_zero_is_pure_reconstruction(self):
        n_orig, n_div = sample_pair(SHAPE, 4)
        model = init_model(SHAPE, seed=4)
        loss, l_noise, l_info = total_loss(model, n_orig, n_div, beta=0.0)
        assert loss == l_noise
        assert l_info > 0.0

    def test_full_leak_endpoint_losses(self):
        n_orig, n_div = sample_pair(SHAPE, 5)
        model = zero_attention_model(SHAPE, logit=-40.0, restandardize=False)
        loss, l_noise, l_info = total_loss(model, n_orig, n_div, beta=1.0)
        assert abs(l_noise - mse(n_div, n_orig)) < 1e-3
        assert l_info < 1e-6

    def test_decomposition_recomputed_independently(self):
        n_orig, n_div = sample_pair(SHAPE, 6)
        model = init_model(SHAPE, seed=6)
        beta = 0.37
        loss, l_noise, l_info = total_loss(model, n_orig, n_div, beta)
        out, tape = forward(model, n_orig, n_div)
        assert abs(loss - (beta * info_loss(tape.lam, tape.r) + mse(out, n_orig.astype(np.float64)))) < 1e-12
        assert loss == beta * l_info + l_noise


class TestBackward:
    def test_full_finite_difference_match(self):
        probe, point, analytic = model_loss_probe(shape=SHAPE, n_iters=3, beta=0.1, seed=0)
        report = grad_check(probe, point, analytic, h=1e-3, tol=1e-4)
        assert report.passed, f"max rel err {report.max_rel_error} at {report.worst}"

    def test_gradients_deterministic(self):
        n_orig, n_div = sample_pair(SHAPE, 7)
        model = init_model(SHAPE, seed=7)
        _, tape1 = forward(model, n_orig, n_div)
        _, tape2 = forward(model, n_orig, n_div)
        g1 = backward(model, tape1, beta=0.1)
        g2 = backward(model, tape2, beta=0.1)
        for key in g1:
            assert g1[key].tobytes() == g2[key].tobytes()

    def test_beta_zero_filter_gradient_is_blend_only(self):
        # with beta 0 the only pressure on the filter is reconstruction
        n_orig, n_div = sample_pair(SHAPE, 8)
        model = init_model(SHAPE, seed=8)
        _, tape = forward(model, n_orig, n_div)
        grads = backward(model, tape, beta=0.0)
        assert np.any(grads["filter_logits"] != 0.0)


class TestAdamStep:
    def test_zero_gradient_keeps_parameters(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        grads = {"w": np.zeros(3)}
        moments = AdamMoments.zeros(params)
        config = TrainConfig(steps=1)
        new_params, _ = adam_step(params, grads, moments, config, step_index=1)
        np.testing.assert_array_equal(new_params["w"], params["w"])

    def test_first_step_moves_by_learning_rate(self):
        # bias correction makes the first update magnitude ~ lr exactly
        params = {"w": np.array([0.0])}
        grads = {"w": np.array([1.0])}
        config = TrainConfig(learning_rate=2e-3, steps=1)
        new_params, _ = adam_step(params, grads, AdamMoments.zeros(params), config, 1)
        assert abs(abs(float(new_params["w"][0])) - 2e-3) < 1e-7

    def test_deterministic(self):
        params = {"w": np.array([0.5, 0.25])}
        grads = {"w": np.array([0.1, -0.2])}
        config = TrainConfig(steps=1)
        a, _ = adam_step(params, grads, AdamMoments.zeros(params), config, 1)
        b, _ = adam_step(params, grads, AdamMoments.zeros(params), config, 1)
        assert a["w"].tobytes() == b["w"].tobytes()

    def test_bad_step_index(self):
        params = {"w": np.zeros(1)}
        with pytest.raises(ParameterError):
            adam_step(params, params, AdamMoments.zeros(params), TrainConfig(), 0)

    def test_gradient_shape_mismatch(self):
        params = {"w": np.zeros(2)}
        grads = {"w": np.zeros(3)}
        with pytest.raises(ShapeError):
            adam_step(params, grads, AdamMoments.zeros(params), TrainConfig(), 1)


class TestTrain:
    def test_single_step_single_record(self):
        report = train(TrainConfig(steps=1, seed=0), shape=SHAPE)
        assert report.steps == 1
        assert report.loss.shape == (1,)

    def test_instance_mode_requires_fixed_source(self):
        with pytest.raises(ConfigError):
            train(TrainConfig(steps=1, mode="instance"), shape=SHAPE)

    def test_generic_mode_rejects_fixed_source(self):
        n_orig, _ = sample_pair(SHAPE, 9)
        with pytest.raises(ConfigError):
            train(TrainConfig(steps=1, mode="generic"), shape=SHAPE, n_orig_fixed=n_orig)

    def test_bitwise_deterministic_loss_sequences(self):
        config = TrainConfig(steps=30, seed=123)
        a = train(config, shape=SHAPE)
        b = train(config, shape=SHAPE)
        assert a.loss.tobytes() == b.loss.tobytes()
        assert a.mean_lambda.tobytes() == b.mean_lambda.tobytes()

    def test_loss_decomposition_at_every_step(self):
        config = TrainConfig(steps=25, seed=5, beta=0.3)
        report = train(config, shape=SHAPE)
        np.testing.assert_allclose(
            report.loss, 0.3 * report.l_info + report.l_noise, atol=1e-9
        )

    def test_loss_trend_downward_quickly(self):
        report = train(TrainConfig(steps=400, seed=2, beta=0.01), shape=(4, 8, 8))
        assert report.loss[-50:].mean() < report.loss[:50].mean()

    def test_instance_mode_with_fixed_divergence_is_deterministic(self):
        n_orig, _ = sample_pair(SHAPE, 10)
        config = TrainConfig(steps=20, seed=11, mode="instance")
        a = train(config, n_orig_fixed=n_orig)
        b = train(config, n_orig_fixed=n_orig)
        assert a.loss.tobytes() == b.loss.tobytes()


class TestLambdaDynamics:
    def test_no_compression_pressure_lets_lambda_rise(self):
        for seed in (0, 1, 2):
            report = train(TrainConfig(steps=2000, seed=seed, beta=0.0), shape=(4, 16, 16))
            assert report.mean_lambda[-1] >= report.mean_lambda[0]

    def test_strong_compression_drives_lambda_low(self):
        for seed in (0, 1, 2):
            report = train(TrainConfig(steps=2000, seed=seed, beta=10.0), shape=(4, 16, 16))
            assert report.mean_lambda[-1] < 0.5

    def test_content_correlation_decreases_with_beta(self):
        shape = (4, 16, 16)
        n_orig = gaussian_sample(shape, RngState(42))
        n_div = gaussian_sample(shape, RngState(43))
        correlations = []
        for beta in (0.01, 0.1, 1.0):
            config = TrainConfig(steps=2000, seed=0, beta=beta, mode="instance")
            report = train(config, n_orig_fixed=n_orig)
            out, _ = forward(report.model, n_orig, n_div)
            corr = np.corrcoef(out.reshape(-1), n_orig.astype(np.float64).reshape(-1))[0, 1]
            correlations.append(corr)
        assert correlations[0] > correlations[1] > correlations[2]


class TestApply:
    def test_deterministic_for_equal_seeds(self):
        n_orig, _ = sample_pair(SHAPE, 12)
        model = init_model(SHAPE, seed=12)
        a = apply(model, n_orig, div_seed=5)
        b = apply(model, n_orig, div_seed=5)
        assert a.dtype == np.float32
        assert a.tobytes() == b.tobytes()

    def test_different_seeds_inject_diversity(self):
        n_orig, _ = sample_pair(SHAPE, 13)
        model = init_model(SHAPE, seed=13)   # lambda starts at 0.5 < 1
        a = apply(model, n_orig, div_seed=1)
        b = apply(model, n_orig, div_seed=2)
        assert mse(a, b) > 0.0

    def test_output_restandardized(self):
        n_orig, _ = sample_pair((4, 16, 16), 14)
        model = init_model((4, 16, 16), seed=14)
        out = apply(model, n_orig, div_seed=3)
        assert -0.02 < float(out.mean()) < 0.02
        assert 0.98 < float(out.std()) < 1.02


class TestNoftModelValidation:
    def test_filter_shape_must_match(self):
        with pytest.raises(ShapeError):
            NoftModel(
                attention=AttentionParams.zeros(2),
                filter=FilterMap(np.zeros((2, 3, 3))),
                shape=(2, 4, 4),
            )

    def test_channel_count_must_match(self):
        with pytest.raises(ShapeError):
            NoftModel(
                attention=AttentionParams.zeros(3),
                filter=FilterMap(np.zeros((2, 4, 4))),
                shape=(2, 4, 4),
            )

    def test_parameter_count(self):
        model = init_model((4, 64, 64), seed=0)
        assert model.parameter_count == 3 * (16 + 4) + 4 * 64 * 64


class TestTrainConfigValidation:
    def test_negative_beta(self):
        with pytest.raises(ConfigError):
            TrainConfig(beta=-0.1)

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            TrainConfig(mode="both")

    def test_bad_batch(self):
        with pytest.raises(ConfigError):
            TrainConfig(batch=2)

    def test_div_policy_defaults(self):
        assert TrainConfig(mode="generic").resolved_div_policy() == "resample_each_step"
        assert TrainConfig(mode="instance").resolved_div_policy() == "fixed"
        assert TrainConfig(mode="instance", div_policy="resample_each_step").resolved_div_policy() == "resample_each_step"
