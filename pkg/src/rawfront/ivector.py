"""Per-utterance i-vectors from a trained (loaded) total-variability model.

Pipeline: energy VAD on the waveform, drop silent frames, Gammatone
features, +-4 frame context, LDA to 60 dims, Baum-Welch statistics against
the UBM, posterior mean of the latent factor, unit length.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .dsp import FeatureMatrix, Waveform
from .errors import AllSilentError, DegenerateVectorError, InputTooShortError, ValidationError
from .gammatone import GammatoneExtractor
from .io import WeightArchive

SOLVE_JITTER = 1e-8


@dataclass(frozen=True)
class IVectorModel:
    """UBM with diagonal covariances, total-variability matrix, and LDA.

    ``T_matrix`` rows are ordered component-major: row ``c * D + d``.
    ``lda`` maps stacked features (row vectors) to ``D`` dims: ``x @ lda``.
    """

    ubm_weights: np.ndarray
    ubm_means: np.ndarray
    ubm_variances: np.ndarray
    T_matrix: np.ndarray
    lda: np.ndarray

    def __post_init__(self):
        fields = {}
        for name in ("ubm_weights", "ubm_means", "ubm_variances", "T_matrix", "lda"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            fields[name] = arr
            object.__setattr__(self, name, arr)
        w, m, v, t, lda = (fields[k] for k in ("ubm_weights", "ubm_means", "ubm_variances", "T_matrix", "lda"))
        if w.ndim != 1 or m.ndim != 2 or m.shape[0] != w.size:
            raise ValidationError(f"UBM weights {w.shape} and means {m.shape} disagree")
        if v.shape != m.shape:
            raise ValidationError(f"UBM variances {v.shape} must match means {m.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValidationError("UBM weights must be a probability vector")
        if np.any(v <= 0):
            raise ValidationError("UBM variances must be positive")
        if t.ndim != 2 or t.shape[0] != m.size:
            raise ValidationError(f"T matrix must have C*D = {m.size} rows, got shape {t.shape}")
        if lda.ndim != 2 or lda.shape[1] != m.shape[1]:
            raise ValidationError(f"LDA must project to D = {m.shape[1]} dims, got shape {lda.shape}")

    @property
    def num_components(self) -> int:
        return self.ubm_means.shape[0]

    @property
    def feat_dim(self) -> int:
        return self.ubm_means.shape[1]

    @property
    def ivector_dim(self) -> int:
        return self.T_matrix.shape[1]

    def to_archive(self) -> WeightArchive:
        return WeightArchive(
            [
                ("ivec.ubm.weights", self.ubm_weights),
                ("ivec.ubm.means", self.ubm_means),
                ("ivec.ubm.vars", self.ubm_variances),
                ("ivec.T", self.T_matrix),
                ("ivec.lda", self.lda),
            ]
        )

    @classmethod
    def from_archive(cls, archive) -> "IVectorModel":
        weights = np.asarray(archive["ivec.ubm.weights"], dtype=np.float64)
        # float32 storage loses the exact unit sum
        weights = weights / weights.sum()
        return cls(
            weights,
            archive["ivec.ubm.means"],
            archive["ivec.ubm.vars"],
            archive["ivec.T"],
            archive["ivec.lda"],
        )


@dataclass(frozen=True)
class IVector:
    values: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.size


def energy_vad(w: Waveform, frame_shift: int = 160, threshold_db: float = 40.0) -> np.ndarray:
    """Speech mask over non-overlapping frames of ``frame_shift`` samples.

    A frame is speech when its log energy is above ``max - threshold_db``.
    Raises AllSilentError (carrying the all-false mask) when nothing is.
    """
    if frame_shift < 1:
        raise ValidationError("frame_shift must be >= 1")
    if threshold_db <= 0:
        raise ValidationError("threshold_db must be positive")
    if w.num_samples < frame_shift:
        raise InputTooShortError(f"VAD needs at least {frame_shift} samples, got {w.num_samples}")
    n = w.num_samples // frame_shift
    frames = w.samples[: n * frame_shift].reshape(n, frame_shift)
    energy = np.sum(frames**2, axis=1)
    if not np.any(energy > 0):
        raise AllSilentError("utterance is entirely silent", np.zeros(n, dtype=bool))
    with np.errstate(divide="ignore"):
        log_energy = 10.0 * np.log10(energy)
    return log_energy > log_energy.max() - threshold_db


def drop_silence(w: Waveform, mask: np.ndarray, frame_shift: int = 160) -> Waveform:
    """Concatenate the samples of speech frames; samples past the last full frame go."""
    mask = np.asarray(mask, dtype=bool)
    n = mask.size
    frames = w.samples[: n * frame_shift].reshape(n, frame_shift)
    kept = frames[mask].reshape(-1)
    if kept.size == 0:
        raise AllSilentError("no speech frames to keep", mask)
    return Waveform(kept, w.sample_rate)


def stack_context(feats: np.ndarray, context: int = 9) -> np.ndarray:
    """Append +-(context//2) neighbouring frames to each frame, clamping at the edges."""
    if context < 1 or context % 2 == 0:
        raise ValidationError(f"context must be a positive odd number, got {context}")
    x = np.asarray(feats, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError("features must be a non-empty T x D matrix")
    half = context // 2
    t = np.arange(x.shape[0])
    idx = np.clip(t[:, None] + np.arange(-half, half + 1)[None, :], 0, x.shape[0] - 1)
    return x[idx].reshape(x.shape[0], context * x.shape[1])


def apply_lda(feats: np.ndarray, lda: np.ndarray) -> np.ndarray:
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape[1] != lda.shape[0]:
        raise ValidationError(f"LDA expects {lda.shape[0]}-dim input, got {feats.shape[1]}")
    return feats @ lda


def ubm_posteriors(feats: np.ndarray, model: IVectorModel) -> np.ndarray:
    """Frame-level component posteriors, T x C, each row summing to one."""
    x = np.asarray(feats, dtype=np.float64)
    means, var = model.ubm_means, model.ubm_variances
    inv_var = 1.0 / var
    # log N(x; m_c, diag(v_c)) expanded so it is one matmul per term
    log_det = np.sum(np.log(2.0 * np.pi * var), axis=1)
    quad = (x**2) @ inv_var.T - 2.0 * x @ (means * inv_var).T + np.sum(means**2 * inv_var, axis=1)
    log_like = -0.5 * (log_det + quad)
    with np.errstate(divide="ignore"):
        log_joint = log_like + np.log(model.ubm_weights)
    return np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))


def baum_welch_stats(feats: np.ndarray, model: IVectorModel) -> tuple[np.ndarray, np.ndarray]:
    """Zeroth-order ``N`` (C,) and centered first-order ``F`` (C, D) statistics."""
    x = np.asarray(feats, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != model.feat_dim:
        raise ValidationError(f"features must be T x {model.feat_dim} with T >= 1, got shape {x.shape}")
    gamma = ubm_posteriors(x, model)
    n = gamma.sum(axis=0)
    f = gamma.T @ x - n[:, None] * model.ubm_means
    return n, f


def ivector_posterior_mean(n: np.ndarray, f: np.ndarray, model: IVectorModel) -> np.ndarray:
    """(I + T' S^-1 N T)^-1 T' S^-1 F for given statistics."""
    c, d = model.ubm_means.shape
    r = model.ivector_dim
    t = model.T_matrix.reshape(c, d, r)
    inv_var = 1.0 / model.ubm_variances
    weighted = t * inv_var[:, :, None]  # S^-1 T per component
    precision = np.eye(r) + np.einsum("c,cdr,cds->rs", n, weighted, t)
    rhs = np.einsum("cdr,cd->r", weighted, f)
    try:
        factor = linalg.cho_factor(precision)
    except linalg.LinAlgError:
        warnings.warn(
            f"i-vector precision matrix is not numerically positive definite; adding {SOLVE_JITTER:g} jitter",
            RuntimeWarning,
            stacklevel=2,
        )
        factor = linalg.cho_factor(precision + SOLVE_JITTER * np.trace(precision) / r * np.eye(r))
    return linalg.cho_solve(factor, rhs)


def unit_norm(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateVectorError("cannot normalize a zero i-vector to unit length")
    return v / norm


def extract_ivector(
    feats: np.ndarray, model: IVectorModel, utterance_id: str = "", normalize: bool = True
) -> IVector:
    """i-vector from post-LDA, speech-only features (T x D)."""
    n, f = baum_welch_stats(feats, model)
    w = ivector_posterior_mean(n, f, model)
    return IVector(unit_norm(w) if normalize else w, utterance_id)


def tile_ivector(iv: IVector, num_frames: int, frame_shift_samples: int = 160) -> FeatureMatrix:
    """Repeat the utterance's i-vector once per frame."""
    if num_frames < 1:
        raise ValidationError("num_frames must be >= 1")
    return FeatureMatrix(np.tile(iv.values, (num_frames, 1)), frame_shift_samples)


def ivector_features(
    w: Waveform,
    model: IVectorModel,
    extractor: GammatoneExtractor | None = None,
    context: int = 9,
    vad_threshold_db: float = 40.0,
) -> np.ndarray:
    """Speech-only, context-stacked, LDA-projected Gammatone features of ``w``."""
    extractor = extractor or GammatoneExtractor()
    shift = extractor.cfg.window_shift
    mask = energy_vad(w, shift, vad_threshold_db)
    speech = drop_silence(w, mask, shift)
    gt = extractor(speech).values
    return apply_lda(stack_context(gt, context), model.lda)


def utterance_ivector(
    w: Waveform,
    model: IVectorModel,
    utterance_id: str = "",
    extractor: GammatoneExtractor | None = None,
    context: int = 9,
    vad_threshold_db: float = 40.0,
) -> IVector:
    feats = ivector_features(w, model, extractor, context, vad_threshold_db)
    return extract_ivector(feats, model, utterance_id)


def toy_model(
    seed: int = 0,
    num_components: int = 16,
    feat_dim: int = 60,
    input_dim: int = 50 * 9,
    ivector_dim: int = 200,
) -> IVectorModel:
    """Small deterministic random model so the pipeline runs without trained assets."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.full(num_components, 2.0))
    means = rng.normal(0.0, 1.0, size=(num_components, feat_dim))
    variances = rng.uniform(0.5, 2.0, size=(num_components, feat_dim))
    t_matrix = rng.normal(0.0, 0.1, size=(num_components * feat_dim, ivector_dim))
    lda = np.linalg.qr(rng.normal(size=(input_dim, feat_dim)))[0]
    return IVectorModel(weights, means, variances, t_matrix, lda)


def fit_lda(feats: np.ndarray, labels: np.ndarray, out_dim: int, reg: float = 1e-6) -> np.ndarray:
    """Fisher LDA projection (input_dim x out_dim) from labelled frames.

    A test and toy-data helper; production LDA matrices are trained elsewhere
    and loaded with the model.
    """
    x = np.asarray(feats, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if out_dim > x.shape[1]:
        raise ValidationError("out_dim cannot exceed the input dimension")
    mu = x.mean(axis=0)
    within = np.zeros((x.shape[1], x.shape[1]))
    between = np.zeros_like(within)
    for c in classes:
        xc = x[labels == c]
        mc = xc.mean(axis=0)
        within += (xc - mc).T @ (xc - mc)
        between += len(xc) * np.outer(mc - mu, mc - mu)
    within += reg * np.trace(within) / x.shape[1] * np.eye(x.shape[1])
    _, vecs = linalg.eigh(between, within)
    return vecs[:, ::-1][:, :out_dim]
