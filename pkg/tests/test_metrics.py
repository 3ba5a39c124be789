import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from ntkcomplete.errors import ShapeError
from ntkcomplete.metrics import (FoldDifferences, corrected_t, mean_cosine,
                                 mean_r2, pearson_r_paper, psnr, ssim)


def test_pearson_trivial_cases(rng):
    a = rng.standard_normal((5, 4))
    assert pearson_r_paper(a, a) == pytest.approx(1.0, abs=1e-12)
    assert pearson_r_paper(a, -a) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_brute_force(rng):
    pred = rng.standard_normal((10, 10))
    truth = rng.standard_normal((10, 10))
    num = den_a = den_b = 0.0
    for i in range(10):
        for j in range(10):
            num += pred[i, j] * truth[i, j]
            den_a += pred[i, j] ** 2
            den_b += truth[i, j] ** 2
    expected = num / math.sqrt(den_a * den_b)
    assert pearson_r_paper(pred, truth) == pytest.approx(expected, abs=1e-12)


def test_pearson_is_uncentered():
    # constant shift changes the value, unlike classical pearson
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert pearson_r_paper(a + 10, a) != pytest.approx(
        pearson_r_paper(a, a), abs=1e-3)


def test_pearson_zero_norm_error():
    with pytest.raises(ValueError, match="zero"):
        pearson_r_paper(np.zeros((2, 2)), np.ones((2, 2)))


def test_mean_r2_cases(rng):
    truth = rng.standard_normal((8, 5))
    assert mean_r2(truth, truth) == pytest.approx(1.0, abs=1e-12)
    baseline = np.tile(truth.mean(axis=0), (8, 1))
    assert mean_r2(baseline, truth) == pytest.approx(0.0, abs=1e-12)


def test_mean_r2_brute_force(rng):
    pred = rng.standard_normal((6, 3))
    truth = rng.standard_normal((6, 3))
    total = 0.0
    for j in range(3):
        mean = truth[:, j].mean()
        sse = ((pred[:, j] - truth[:, j]) ** 2).sum()
        sst = ((truth[:, j] - mean) ** 2).sum()
        total += 1 - sse / sst
    assert mean_r2(pred, truth) == pytest.approx(total / 3, abs=1e-12)


def test_mean_r2_constant_column_error():
    truth = np.ones((4, 2))
    truth[:, 0] = [1, 2, 3, 4]
    with pytest.raises(ValueError, match="column 1"):
        mean_r2(truth, truth)


def test_mean_cosine_cases(rng):
    truth = rng.standard_normal((7, 4))
    assert mean_cosine(truth, truth) == pytest.approx(1.0, abs=1e-12)
    assert mean_cosine(-truth, truth) == pytest.approx(-1.0, abs=1e-12)
    pred = rng.standard_normal((7, 4))
    total = sum(
        float(pred[:, j] @ truth[:, j]
              / (np.linalg.norm(pred[:, j]) * np.linalg.norm(truth[:, j])))
        for j in range(4))
    assert mean_cosine(pred, truth) == pytest.approx(total / 4, abs=1e-12)


def test_scale_invariance_of_cosine_metrics(rng):
    pred = rng.standard_normal((6, 6))
    truth = rng.standard_normal((6, 6))
    for gamma in (0.1, 3.0, 250.0):
        assert pearson_r_paper(gamma * pred, truth) == pytest.approx(
            pearson_r_paper(pred, truth), abs=1e-12)
        assert mean_cosine(gamma * pred, truth) == pytest.approx(
            mean_cosine(pred, truth), abs=1e-12)


# ---------------------------------------------------------------------------
# corrected cross-validation statistic


def test_corrected_t_hand_computation():
    d = np.array([[0.1, 0.2], [0.3, 0.2], [0.1, 0.3]])  # k=3 folds, r=2 rounds
    fd = FoldDifferences(d, n1=900, n2=100)
    t, dof = corrected_t(fd)
    kr = 6
    mean = d.mean()
    var = d.ravel().var(ddof=1)
    expected = mean / ((1 / kr + 100 / 900) * var)
    assert t == pytest.approx(expected, abs=1e-12)
    assert dof == 5


def test_corrected_t_sqrt_variant():
    d = np.array([[0.1, 0.2], [0.3, 0.2], [0.1, 0.3]])
    fd = FoldDifferences(d, n1=900, n2=100)
    t_plain, _ = corrected_t(fd)
    t_sqrt, _ = corrected_t(fd, sqrt_denominator=True)
    var = d.ravel().var(ddof=1)
    denom = (1 / 6 + 1 / 9) * var
    assert t_sqrt == pytest.approx(t_plain * denom / math.sqrt(denom), abs=1e-12)


def test_corrected_t_sign_equivariance(rng):
    d = rng.standard_normal((5, 4))
    fd_pos = FoldDifferences(d, n1=90, n2=10)
    fd_neg = FoldDifferences(-d, n1=90, n2=10)
    assert corrected_t(fd_pos)[0] == pytest.approx(-corrected_t(fd_neg)[0],
                                                   abs=1e-12)


def test_corrected_t_permutation_invariance(rng):
    d = rng.standard_normal((6, 3))
    base, _ = corrected_t(FoldDifferences(d, n1=90, n2=10))
    shuffled = rng.permutation(d.ravel()).reshape(3, 6)
    permuted, _ = corrected_t(FoldDifferences(shuffled, n1=90, n2=10))
    assert permuted == pytest.approx(base, abs=1e-12)


def test_corrected_t_zero_variance_error():
    with pytest.raises(ValueError, match="variance"):
        corrected_t(FoldDifferences(np.full((3, 2), 0.5), n1=9, n2=1))


# ---------------------------------------------------------------------------
# image metrics


def test_psnr_trivial():
    img = np.random.default_rng(0).uniform(size=(8, 8))
    assert psnr(img, img) == math.inf
    assert psnr(np.zeros((4, 4)), np.ones((4, 4))) == pytest.approx(0.0, abs=1e-12)


def test_psnr_brute_force(rng):
    pred = rng.uniform(size=(6, 7))
    truth = rng.uniform(size=(6, 7))
    mse = float(np.mean((pred - truth) ** 2))
    assert psnr(pred, truth) == pytest.approx(10 * math.log10(1 / mse), abs=1e-12)


def test_psnr_monotone_in_noise(rng):
    truth = rng.uniform(0.2, 0.8, size=(16, 16))
    values = []
    for amp in (0.01, 0.05, 0.1):
        noisy = truth + amp * np.sign(rng.standard_normal((16, 16)))
        values.append(psnr(noisy, truth))
    assert values[0] > values[1] > values[2]


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros((2, 2)), np.zeros((3, 3)))


def test_ssim_identical_and_constant():
    img = np.random.default_rng(1).uniform(size=(16, 16))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)
    const = np.full((16, 16), 0.4)
    assert ssim(const, const.copy()) == pytest.approx(1.0, abs=1e-12)


def test_ssim_matches_reference_implementation(rng):
    a = rng.uniform(size=(32, 32))
    b = np.clip(a + rng.normal(0, 0.15, size=(32, 32)), 0, 1)
    reference = structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
                                      use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(reference, abs=1e-10)


def test_ssim_checkerboard_vs_inverse_reference():
    board = (np.indices((16, 16)).sum(axis=0) % 2).astype(float)
    reference = structural_similarity(board, 1 - board, gaussian_weights=True,
                                      sigma=1.5, use_sample_covariance=False,
                                      data_range=1.0)
    assert ssim(board, 1 - board) == pytest.approx(reference, abs=1e-10)
    assert ssim(board, 1 - board) < 0  # anticorrelated structure


def test_ssim_window_guard():
    small = np.zeros((8, 8))
    with pytest.raises(ShapeError, match="window"):
        ssim(small, small)
