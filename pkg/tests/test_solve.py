import numpy as np
import pytest

from ntkcomplete.activations import Activation, kappa
from ntkcomplete.errors import SingularKernelError, SolverDivergenceError
from ntkcomplete.solve import (SolveOptions, SolveReport, direct_solve,
                               iterative_solve, predict)

RELU = Activation.relu()


def ntk_test_system(n, p, seed, r=2):
    rng = np.random.default_rng(seed)
    priors = rng.standard_normal((p, n))
    priors /= np.linalg.norm(priors, axis=0, keepdims=True)
    kernel = np.asarray(kappa(RELU, 1, np.clip(priors.T @ priors, -1, 1)))
    rhs = rng.standard_normal((n, r))
    return kernel, rhs


def test_identity_kernel_returns_rhs(rng):
    rhs = rng.standard_normal((6, 2))
    assert np.allclose(direct_solve(np.eye(6), rhs), rhs, atol=1e-12)


def test_worked_example_prediction():
    # hand-assembled 5x5 block system and its kernel column at the missing
    # upper-left coordinate
    k0 = 1 / np.pi
    kernel = np.array([
        [2.0, k0, 0, 0, 0],
        [k0, 2.0, 0, 0, 0],
        [0, 0, 2.0, k0, 0],
        [0, 0, k0, 2.0, 0],
        [0, 0, 0, 0, 2.0],
    ])
    y = np.array([0.5, 0.3, 0.1, 0.2, 0.4])
    cross = np.array([k0, k0, 0, 0, 0])
    alpha = direct_solve(kernel, y)
    value = predict(alpha, cross[:, None])[0]
    assert value == pytest.approx(y @ np.linalg.solve(kernel, cross), abs=1e-12)
    assert value == pytest.approx((0.5 + 0.3) / (2 * np.pi - 1 + 2), abs=1e-12)


def test_trace_scaled_ridge_residual(rng):
    kernel, rhs = ntk_test_system(100, 40, seed=0)
    opts = SolveOptions(ridge="trace_scaled", ridge_value=4e-5)
    alpha = direct_solve(kernel, rhs, opts)
    lam = 4e-5 * np.trace(kernel) / 100
    resid = np.linalg.norm((kernel + lam * np.eye(100)) @ alpha - rhs)
    assert resid <= 1e-8 * np.linalg.norm(rhs)


def test_direct_residual_well_conditioned(rng):
    kernel, rhs = ntk_test_system(200, 80, seed=1)
    assert np.linalg.cond(kernel) < 1e6
    alpha = direct_solve(kernel, rhs)
    resid = np.linalg.norm(kernel @ alpha - rhs)
    assert resid <= 1e-8 * np.linalg.norm(rhs)


def test_direct_cap_enforced():
    with pytest.raises(ValueError, match="cap"):
        direct_solve(np.eye(10), np.ones(10), SolveOptions(direct_cap=5))


def test_singular_error_suggests_ridge():
    kernel = np.ones((3, 3))
    with pytest.raises(SingularKernelError, match="trace_scaled"):
        direct_solve(kernel, np.ones(3))


def test_iterative_matches_direct():
    kernel, rhs = ntk_test_system(1000, 100, seed=2)
    direct = direct_solve(kernel, rhs)
    pred_direct = predict(direct, kernel)
    report = SolveReport()
    alpha = iterative_solve(kernel, rhs, SolveOptions(mode="iterative"), report)
    pred_iter = predict(alpha, kernel)
    rel = np.linalg.norm(pred_iter - pred_direct) / np.linalg.norm(pred_direct)
    assert rel <= 1e-4
    assert report.epochs_run == 50


def test_iterative_zero_epochs():
    kernel, rhs = ntk_test_system(50, 20, seed=3)
    alpha = iterative_solve(kernel, rhs, SolveOptions(epochs=0))
    assert np.array_equal(alpha, np.zeros_like(rhs))


def test_iterative_monotone_residuals():
    kernel, rhs = ntk_test_system(400, 60, seed=4)
    report = SolveReport()
    iterative_solve(kernel, rhs, SolveOptions(epochs=40), report)
    residuals = report.epoch_residuals
    assert all(residuals[t + 1] <= residuals[t] * (1 + 1e-12)
               for t in range(len(residuals) - 1))


def test_iterative_operator_handle():
    kernel, rhs = ntk_test_system(200, 50, seed=5)
    opts = SolveOptions(epochs=60, subsample=200)
    via_matrix = iterative_solve(kernel, rhs, opts)
    via_handle = iterative_solve(lambda x: kernel @ x, rhs, opts)
    assert np.allclose(via_matrix, via_handle, atol=1e-10)


def test_iterative_divergence_detected():
    # a matrix with a negative eigenvalue makes richardson blow up
    kernel = np.diag([1.0, -50.0])
    rhs = np.array([[1.0], [1.0]])
    with pytest.raises(SolverDivergenceError, match="scale"):
        iterative_solve(kernel, rhs, SolveOptions(epochs=200, subsample=2,
                                                  preconditioner_rank=1))


def test_ridgeless_scale_invariance_direct():
    kernel, rhs = ntk_test_system(120, 60, seed=6)
    cross = kernel[:, :30]
    base = predict(direct_solve(kernel, rhs), cross)
    for scale in (0.5, 2.0, 7.5):
        opts = SolveOptions(kernel_scale=scale)
        scaled = predict(direct_solve(kernel, rhs, opts), cross, opts)
        assert np.allclose(scaled, base, atol=1e-10)


def test_ridgeless_scale_invariance_iterative():
    kernel, rhs = ntk_test_system(500, 80, seed=7)
    cross = kernel[:, :100]
    preds = {}
    for scale in (1.0, 0.5):
        opts = SolveOptions(mode="iterative", kernel_scale=scale, epochs=60)
        preds[scale] = predict(iterative_solve(kernel, rhs, opts), cross, opts)
    rel = np.linalg.norm(preds[0.5] - preds[1.0]) / np.linalg.norm(preds[1.0])
    assert rel <= 1e-6


def test_predict_shapes():
    with pytest.raises(ValueError):
        predict(np.ones((4, 1)), np.ones((5, 2)))
    single = predict(np.ones(3), np.ones((3, 1)))
    assert single.shape == (1,)
    assert single[0] == pytest.approx(3.0)


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(mode="magic")
    with pytest.raises(ValueError):
        SolveOptions(ridge="sometimes")
    with pytest.raises(ValueError):
        SolveOptions(kernel_scale=0.0)
    with pytest.raises(ValueError):
        SolveOptions(ridge="trace_scaled", ridge_value=-1.0)


def test_report_text():
    kernel, rhs = ntk_test_system(50, 30, seed=8)
    report = SolveReport()
    direct_solve(kernel, rhs, report=report)
    text = report.as_text()
    assert "direct" in text and "50" in text
