"""Class-dependent feature selection and KL-divergence extraction.

The pipeline for one class pair (x, y): per-class mean profiles, the
component-wise profile ratio and its mean, two scaled thresholds, the
selected-index mask, masked probability normalization, and finally KL
divergences of each masked sample against the masked class profiles.
"""

from __future__ import annotations

import numpy as np

from .model import CdfConfig, ClassProfile, PairContext, PairFeatureSet


def class_sum(samples) -> np.ndarray:
    """Component-wise sum over a class's sample vectors."""
    if len(samples) == 0:
        raise ValueError("class_sum needs at least one sample")
    mat = np.asarray(samples, dtype=float)
    if mat.ndim != 2:
        raise ValueError("samples must share a common length")
    return np.sum(mat, axis=0)


def class_mean(sum_vec, cardinality: int) -> np.ndarray:
    """Per-component mean profile: the class sum divided by its cardinality."""
    if cardinality < 1:
        raise ValueError("cardinality must be >= 1")
    return np.asarray(sum_vec, dtype=float) / cardinality


def pair_ratios(t_x, t_y, eps: float) -> np.ndarray:
    """Smoothed component-wise ratio of two class profiles."""
    t_x = np.asarray(t_x, dtype=float)
    t_y = np.asarray(t_y, dtype=float)
    if t_x.shape != t_y.shape:
        raise ValueError("profiles differ in length")
    if np.any(t_x < 0) or np.any(t_y < 0):
        raise ValueError("profile components must be >= 0")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    return (t_x + eps) / (t_y + eps)


def pair_mean(ratios) -> float:
    """Arithmetic mean of the ratio vector."""
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("pair_mean of an empty vector")
    return float(np.mean(ratios))


def thresholds(mu_xy: float, mu_yx: float, cfg: CdfConfig) -> tuple[float, float]:
    """Scale the two ratio means by (b, b_prime) into selection thresholds."""
    return cfg.b * mu_xy, cfg.b_prime * mu_yx


def select_indices(
    t_x,
    t_y,
    tau: float,
    tau_prime: float,
    mode: str = "ratio",
    eps: float = 1e-9,
) -> tuple[np.ndarray, bool]:
    """Indices retained for a class pair, plus a fallback flag.

    ratio mode keeps index i when either smoothed profile ratio exceeds its
    threshold; literal mode compares the raw profile values against both
    thresholds. An empty selection falls back to the single index with the
    largest |t_x - t_y| (lowest index on ties) and sets the flag.
    """
    t_x = np.asarray(t_x, dtype=float)
    t_y = np.asarray(t_y, dtype=float)
    if t_x.shape != t_y.shape:
        raise ValueError("profiles differ in length")
    if mode == "ratio":
        r_xy = (t_x + eps) / (t_y + eps)
        r_yx = (t_y + eps) / (t_x + eps)
        keep = (r_xy > tau) | (r_yx > tau_prime)
    elif mode == "literal":
        keep = (t_x > tau) | (t_x > tau_prime) | (t_y > tau) | (t_y > tau_prime)
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    idx = np.flatnonzero(keep)
    if idx.size:
        return idx.astype(np.int64), False
    return np.asarray([int(np.argmax(np.abs(t_x - t_y)))], dtype=np.int64), True


def restrict_normalize(sample, mask) -> tuple[np.ndarray, bool]:
    """Keep the masked components and normalize them to a probability vector.

    A zero restriction yields the uniform distribution over the mask with the
    degeneracy flag set.
    """
    sample = np.asarray(sample, dtype=float)
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("mask must be non-empty")
    if np.any(mask < 0) or np.any(mask >= sample.shape[0]):
        raise ValueError("mask index out of range")
    part = sample[mask]
    total = float(np.sum(part))
    if total > 0:
        return part / total, False
    return np.full(mask.size, 1.0 / mask.size), True


def kl_divergence(p, q, eps: float = 1e-9) -> float:
    """KL divergence sum(p * ln(p / (q + eps))) with 0 * ln(0/.) = 0.

    The denominator smoothing alone would push the p == q case a hair below
    zero (about -n*eps), so the result is clamped at 0 to keep the divergence
    non-negative.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distributions differ in length: {p.size} vs {q.size}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0):
            raise ValueError(f"{name} has negative components")
        if abs(float(np.sum(v)) - 1.0) > 1e-9:
            raise ValueError(f"{name} is not normalized (sum {float(np.sum(v))!r})")
    pos = p > 0
    return max(0.0, float(np.sum(p[pos] * np.log(p[pos] / (q[pos] + eps)))))


def _kl_terms(p: np.ndarray, ref: np.ndarray, eps: float) -> np.ndarray:
    terms = np.zeros_like(p)
    pos = p > 0
    terms[pos] = p[pos] * np.log(p[pos] / (ref[pos] + eps))
    return terms


def sample_feature(sample, mask, ref_x, ref_y, feature_mode: str, eps: float) -> np.ndarray:
    """Feature vector for one raw sample under a pair's mask and references."""
    p, _ = restrict_normalize(sample, mask)
    if feature_mode == "dual_kl":
        return np.asarray(
            [kl_divergence(p, ref_x, eps), kl_divergence(p, ref_y, eps)]
        )
    if feature_mode == "scalar_kl":
        return np.asarray([kl_divergence(p, ref_x, eps)])
    if feature_mode == "elementwise_kl":
        return _kl_terms(p, ref_x, eps)
    raise ValueError(f"unknown feature_mode {feature_mode!r}")


def build_pair_context(
    profile_x: ClassProfile, profile_y: ClassProfile, cfg: CdfConfig
) -> PairContext:
    """Ratios, thresholds, mask and masked references for one class pair."""
    b, b_prime = cfg.multipliers(profile_x.class_id, profile_y.class_id)
    ratios = pair_ratios(profile_x.mean_vec, profile_y.mean_vec, cfg.smoothing_eps)
    ratios_rev = pair_ratios(profile_y.mean_vec, profile_x.mean_vec, cfg.smoothing_eps)
    mu_xy = pair_mean(ratios)
    mu_yx = pair_mean(ratios_rev)
    tau = b * mu_xy
    tau_prime = b_prime * mu_yx
    mask, fallback = select_indices(
        profile_x.mean_vec,
        profile_y.mean_vec,
        tau,
        tau_prime,
        mode=cfg.selection_mode,
        eps=cfg.smoothing_eps,
    )
    ref_x, _ = restrict_normalize(profile_x.mean_vec, mask)
    ref_y, _ = restrict_normalize(profile_y.mean_vec, mask)
    return PairContext(
        class_x=profile_x.class_id,
        class_y=profile_y.class_id,
        ratios=ratios,
        mu_xy=mu_xy,
        mu_yx=mu_yx,
        tau=tau,
        tau_prime=tau_prime,
        mask=mask,
        selection_mode=cfg.selection_mode,
        smoothing_eps=cfg.smoothing_eps,
        b=b,
        b_prime=b_prime,
        fallback=fallback,
        ref_x=ref_x,
        ref_y=ref_y,
    )


def extract_pair_features(
    samples_x,
    samples_y,
    ctx: PairContext,
    profile_x: ClassProfile,
    profile_y: ClassProfile,
    cfg: CdfConfig,
) -> PairFeatureSet:
    """KL features and +/-1 labels for the two classes of a pair."""
    if (profile_x.class_id, profile_y.class_id) != (ctx.class_x, ctx.class_y):
        raise ValueError("profiles do not match the pair context")
    ref_x, _ = restrict_normalize(profile_x.mean_vec, ctx.mask)
    ref_y, _ = restrict_normalize(profile_y.mean_vec, ctx.mask)
    eps = cfg.smoothing_eps
    rows = [
        sample_feature(s, ctx.mask, ref_x, ref_y, cfg.feature_mode, eps)
        for s in samples_x
    ]
    rows += [
        sample_feature(s, ctx.mask, ref_x, ref_y, cfg.feature_mode, eps)
        for s in samples_y
    ]
    labels = np.concatenate(
        [np.ones(len(samples_x), dtype=np.int64), -np.ones(len(samples_y), dtype=np.int64)]
    )
    return PairFeatureSet(
        features=np.asarray(rows, dtype=float),
        labels=labels,
        feature_mode=cfg.feature_mode,
    )
