import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg
from scipy.stats import multivariate_normal

from rawfront import ivector as iv
from rawfront.dsp import Waveform
from rawfront.errors import AllSilentError, DegenerateVectorError, ValidationError
from rawfront.ivector import (
    IVectorModel,
    baum_welch_stats,
    energy_vad,
    extract_ivector,
    stack_context,
    tile_ivector,
    toy_model,
    ubm_posteriors,
    unit_norm,
)

from conftest import noise


def small_model(seed=0, c=4, d=3, r=2):
    return toy_model(seed, num_components=c, feat_dim=d, input_dim=d, ivector_dim=r)


def dense_oracle(x, model):
    """Posterior mean via explicit per-frame densities and a full supervector solve."""
    c, d = model.ubm_means.shape
    like = np.column_stack(
        [
            model.ubm_weights[k] * multivariate_normal(model.ubm_means[k], np.diag(model.ubm_variances[k])).pdf(x)
            for k in range(c)
        ]
    )
    like = like.reshape(len(x), c)
    gamma = like / like.sum(axis=1, keepdims=True)
    n = gamma.sum(axis=0)
    f = np.concatenate([gamma[:, k] @ x - n[k] * model.ubm_means[k] for k in range(c)])
    big_n = np.diag(np.repeat(n, d))
    sigma_inv = np.diag(1.0 / model.ubm_variances.reshape(-1))
    t = model.T_matrix
    a = np.eye(t.shape[1]) + t.T @ sigma_inv @ big_n @ t
    return np.linalg.solve(a, t.T @ sigma_inv @ f)


class TestPosteriorMean:
    def test_zero_stats_is_degenerate(self):
        # features sitting on the only mean give F = 0
        one = IVectorModel([1.0], [[0.0]], [[1.0]], [[1.0]], [[1.0]])
        with pytest.raises(DegenerateVectorError):
            extract_ivector(np.zeros((5, 1)), one)

    def test_scalar_case(self):
        # C=D=R=1, T=1, sigma=1: w = t*f / (1 + t^2 n) = 2/(1+1) = 1
        one = IVectorModel([1.0], [[0.0]], [[1.0]], [[1.0]], [[1.0]])
        w = extract_ivector(np.array([[2.0]]), one, normalize=False)
        assert w.values[0] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_dense_oracle(self, seed):
        model = small_model(seed)
        x = np.random.default_rng(seed).normal(size=(40, 3))
        got = extract_ivector(x, model, normalize=False).values
        want = dense_oracle(x, model)
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-12)

    def test_jitter_warning(self, monkeypatch):
        model = small_model()
        real = linalg.cho_factor
        calls = []

        def flaky(a, *args, **kwargs):
            calls.append(1)
            if len(calls) == 1:
                raise linalg.LinAlgError("not positive definite")
            return real(a, *args, **kwargs)

        monkeypatch.setattr(iv.linalg, "cho_factor", flaky)
        x = np.random.default_rng(0).normal(size=(10, 3))
        with pytest.warns(RuntimeWarning, match="jitter"):
            extract_ivector(x, model)


class TestStatsProperties:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), t=st.integers(1, 50))
    def test_posteriors_and_counts(self, seed, t):
        model = small_model(seed % 100)
        x = np.random.default_rng(seed).normal(scale=3.0, size=(t, 3))
        gamma = ubm_posteriors(x, model)
        np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-12)
        n, _ = baum_welch_stats(x, model)
        assert np.all(n >= 0)
        assert n.sum() == pytest.approx(t, abs=1e-9)

    def test_far_outliers_stay_finite(self):
        model = small_model()
        gamma = ubm_posteriors(np.full((2, 3), 1e4), model)
        assert np.all(np.isfinite(gamma))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_frame_order_invariance(self, seed):
        model = small_model()
        r = np.random.default_rng(seed)
        x = r.normal(size=(30, 3))
        a = extract_ivector(x, model).values
        b = extract_ivector(x[r.permutation(30)], model).values
        np.testing.assert_allclose(a, b, atol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**31), t=st.integers(1, 40))
    def test_unit_norm(self, seed, t):
        x = np.random.default_rng(seed).normal(size=(t, 3))
        v = extract_ivector(x, small_model(seed % 7)).values
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_unit_norm_rejects_zero(self):
        with pytest.raises(DegenerateVectorError):
            unit_norm(np.zeros(4))


class TestVad:
    def test_silence_then_tone(self):
        samples = np.zeros(16000)
        samples[8000:] = np.sin(np.arange(8000) * 0.3)
        mask = energy_vad(Waveform(samples))
        assert mask.size == 100
        assert not mask[:50].any() and mask[50:].all()

    def test_all_silent(self):
        with pytest.raises(AllSilentError) as info:
            energy_vad(Waveform(np.zeros(1600)))
        assert info.value.mask.shape == (10,) and not info.value.mask.any()

    def test_quiet_frames_dropped(self):
        samples = np.full(3200, 1.0)
        samples[:1600] *= 1e-3  # 60 dB down
        mask = energy_vad(Waveform(samples), threshold_db=40)
        assert mask.tolist() == [False] * 10 + [True] * 10

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValidationError):
            energy_vad(noise(0.1), threshold_db=0)


class TestContext:
    def test_shape_and_edges(self):
        x = np.arange(5, dtype=float)[:, None]
        s = stack_context(x, 9)
        assert s.shape == (5, 9)
        assert s[0].tolist() == [0, 0, 0, 0, 0, 1, 2, 3, 4]
        assert s[4].tolist() == [0, 1, 2, 3, 4, 4, 4, 4, 4]

    def test_single_frame(self):
        s = stack_context(np.array([[1.0, 2.0]]), 9)
        assert s.shape == (1, 18)
        assert s.reshape(9, 2).tolist() == [[1.0, 2.0]] * 9

    def test_even_context_rejected(self):
        with pytest.raises(ValidationError):
            stack_context(np.zeros((3, 2)), 4)


class TestModel:
    def test_archive_round_trip(self):
        model = toy_model(3)
        back = IVectorModel.from_archive(model.to_archive())
        np.testing.assert_allclose(back.T_matrix, model.T_matrix, rtol=1e-6)
        assert back.ubm_weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_bad_weights(self):
        with pytest.raises(ValidationError):
            IVectorModel([0.5, 0.6], np.zeros((2, 1)), np.ones((2, 1)), np.zeros((2, 1)), np.ones((1, 1)))

    def test_tile(self):
        fm = tile_ivector(iv.IVector(np.arange(200.0)), 94)
        assert fm.values.shape == (94, 200)
        assert np.all(fm.values == fm.values[0])

    def test_full_pipeline(self):
        model = toy_model(0)
        a = iv.utterance_ivector(noise(1.0, seed=1), model, "utt")
        b = iv.utterance_ivector(noise(1.0, seed=1), model, "utt")
        assert a.dim == 200 and a.utterance_id == "utt"
        assert np.linalg.norm(a.values) == pytest.approx(1.0)
        assert a.values.tobytes() == b.values.tobytes()

    def test_fit_lda_separates(self):
        r = np.random.default_rng(0)
        labels = np.repeat([0, 1], 200)
        x = r.normal(size=(400, 5))
        x[labels == 1, 2] += 4.0
        proj = iv.fit_lda(x, labels, 1)
        assert proj.shape == (5, 1)
        direction = proj[:, 0] / np.linalg.norm(proj[:, 0])
        assert abs(direction[2]) > 0.95
