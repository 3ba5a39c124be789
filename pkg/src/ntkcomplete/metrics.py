"""Evaluation metrics: matrix agreement scores, image quality, and the
corrected repeated cross-validation test statistic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ShapeError


def _check_same_shape(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return pred, truth


def pearson_r_paper(pred, truth) -> float:
    """Uncentered cosine of the vectorized matrices.

    Note this is not the classical centered Pearson correlation; the name
    keeps the two from being confused.
    """
    pred, truth = _check_same_shape(pred, truth)
    a, b = pred.ravel(), truth.ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm input")
    return float(a @ b / (na * nb))


def mean_r2(pred, truth) -> float:
    """Column-averaged 1 - SSE/SST against the column-mean baseline."""
    pred, truth = _check_same_shape(pred, truth)
    baseline = truth.mean(axis=0, keepdims=True)
    sst = ((truth - baseline) ** 2).sum(axis=0)
    flat = np.where(sst == 0.0)[0]
    if flat.size:
        raise ValueError(f"truth column {int(flat[0])} is constant (zero variance)")
    sse = ((pred - truth) ** 2).sum(axis=0)
    return float(np.mean(1.0 - sse / sst))


def mean_cosine(pred, truth) -> float:
    """Mean over columns of the columnwise cosine similarity."""
    pred, truth = _check_same_shape(pred, truth)
    np_ = np.linalg.norm(pred, axis=0)
    nt = np.linalg.norm(truth, axis=0)
    bad = np.where((np_ == 0.0) | (nt == 0.0))[0]
    if bad.size:
        raise ValueError(f"column {int(bad[0])} has zero norm")
    return float(np.mean((pred * truth).sum(axis=0) / (np_ * nt)))


@dataclass(frozen=True)
class FoldDifferences:
    """Per-fold metric differences from r rounds of k-fold cross validation."""

    d: np.ndarray               # (k, r)
    n1: int                     # training-set size
    n2: int                     # test-set size

    def __post_init__(self) -> None:
        if self.d.size < 2:
            raise ValueError("need at least two fold differences")
        if self.n1 <= 0 or self.n2 <= 0:
            raise ValueError("fold sizes must be positive")


def corrected_t(fd: FoldDifferences, sqrt_denominator: bool = False) -> tuple[float, int]:
    """Corrected repeated k-fold CV statistic and its degrees of freedom.

    The denominator is (1/(kr) + n2/n1) * variance, as printed in the
    source derivation; the conventional variant with a square root around
    that term is available via sqrt_denominator.  Returns (t, kr - 1).
    """
    diffs = fd.d.ravel()
    variance = float(np.var(diffs, ddof=1))
    if variance == 0.0:
        raise ValueError("fold differences have zero variance")
    kr = diffs.size
    denom = (1.0 / kr + fd.n2 / fd.n1) * variance
    if sqrt_denominator:
        denom = math.sqrt(denom)
    return float(diffs.mean() / denom), kr - 1


def psnr(pred, truth) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]; identical
    images give math.inf."""
    pred, truth = _check_same_shape(pred, truth)
    mse = float(np.mean((pred - truth) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def ssim(pred, truth, data_range: float = 1.0) -> float:
    """Structural similarity for grayscale images in [0, 1].

    Gaussian window 11x11 with sigma 1.5, population covariances, border
    cropped by the window radius before averaging.
    """
    pred, truth = _check_same_shape(pred, truth)
    if pred.ndim != 2:
        raise ShapeError(f"ssim expects 2-d grayscale images, got {pred.shape}")
    if min(pred.shape) < SSIM_WINDOW:
        raise ShapeError(
            f"image {pred.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    radius = (SSIM_WINDOW - 1) // 2
    truncate = radius / SSIM_SIGMA

    def smooth(x):
        return gaussian_filter(x, sigma=SSIM_SIGMA, truncate=truncate, mode="reflect")

    mu_p, mu_t = smooth(pred), smooth(truth)
    var_p = smooth(pred * pred) - mu_p * mu_p
    var_t = smooth(truth * truth) - mu_t * mu_t
    cov = smooth(pred * truth) - mu_p * mu_t
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    score = ((2 * mu_p * mu_t + c1) * (2 * cov + c2)) / \
            ((mu_p ** 2 + mu_t ** 2 + c1) * (var_p + var_t + c2))
    return float(score[radius:-radius, radius:-radius].mean())
