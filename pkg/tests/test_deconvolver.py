import logging

import numpy as np
import pytest

from vsrkit import BlurKernel, Frame, bicubic_resize, sk_forward
from vsrkit.deconvolver import DeconvolveResult, SolverConfig, deconvolve, normal_operator_apply
from vsrkit.errors import ConfigError
from vsrkit.kernel_estimator import gaussian_kernel
from vsrkit.metrics import psnr

DENSE_TOL = 1e-5


def dense_conv_matrix(h: int, w: int, taps: np.ndarray) -> np.ndarray:
    """Row-by-row assembly of the replicate-boundary correlation matrix."""
    k = taps.shape[0]
    r = k // 2
    mat = np.zeros((h * w, h * w))
    for y in range(h):
        for x in range(w):
            row = y * w + x
            for dy in range(k):
                for dx in range(k):
                    sy = min(max(y + dy - r, 0), h - 1)
                    sx = min(max(x + dx - r, 0), w - 1)
                    mat[row, sy * w + sx] += taps[dy, dx]
    return mat


def dense_decimate_matrix(h: int, w: int, s: int) -> np.ndarray:
    rows = []
    for y in range(0, h, s):
        for x in range(0, w, s):
            e = np.zeros(h * w)
            e[y * w + x] = 1.0
            rows.append(e)
    return np.array(rows)


def dense_grad_h(h: int, w: int) -> np.ndarray:
    mat = np.zeros((h * w, h * w))
    for y in range(h):
        for x in range(w - 1):
            row = y * w + x
            mat[row, y * w + x + 1] += 1.0
            mat[row, y * w + x] -= 1.0
    return mat


def dense_grad_v(h: int, w: int) -> np.ndarray:
    mat = np.zeros((h * w, h * w))
    for y in range(h - 1):
        for x in range(w):
            row = y * w + x
            mat[row, (y + 1) * w + x] += 1.0
            mat[row, y * w + x] -= 1.0
    return mat


def dense_normal_matrix(h: int, w: int, taps: np.ndarray, s: int, gamma: float) -> np.ndarray:
    K = dense_conv_matrix(h, w, taps)
    S = dense_decimate_matrix(h, w, s)
    Dh = dense_grad_h(h, w)
    Dv = dense_grad_v(h, w)
    return K.T @ S.T @ S @ K + gamma * (Dv.T @ Dv + Dh.T @ Dh)


def random_kernel(rng, k=5) -> BlurKernel:
    t = rng.random((k, k))
    return BlurKernel(t / t.sum())


class TestNormalOperator:
    def test_identity_configuration(self, rng):
        x = Frame(rng.random((6, 6, 1)))
        out = normal_operator_apply(x, BlurKernel.delta(3), 1, 0.0)
        np.testing.assert_allclose(out.data, x.data, atol=1e-14)

    def test_gradient_terms_vanish_on_constants(self, rng):
        x = Frame(np.full((8, 8, 1), 0.5))
        k = random_kernel(rng)
        with_reg = normal_operator_apply(x, k, 2, 0.02)
        without = normal_operator_apply(x, k, 2, 0.0)
        np.testing.assert_allclose(with_reg.data, without.data, atol=1e-13)

    @pytest.mark.parametrize("h,w,s,gamma", [(8, 8, 2, 0.02), (12, 12, 2, 0.002), (9, 12, 3, 0.2)])
    def test_matches_dense_assembly(self, rng, h, w, s, gamma):
        k = random_kernel(rng)
        A = dense_normal_matrix(h, w, k.taps, s, gamma)
        x = rng.random((h, w, 1))
        got = normal_operator_apply(Frame(x), k, s, gamma).data.ravel()
        np.testing.assert_allclose(got, A @ x.ravel(), atol=1e-12)

    def test_symmetric(self, rng):
        k = random_kernel(rng)
        for _ in range(10):
            x = Frame(rng.standard_normal((8, 8, 1)))
            y = Frame(rng.standard_normal((8, 8, 1)))
            ax = normal_operator_apply(x, k, 2, 0.02)
            ay = normal_operator_apply(y, k, 2, 0.02)
            lhs = float(np.sum(ax.data * y.data))
            rhs = float(np.sum(x.data * ay.data))
            denom = max(np.linalg.norm(ax.data) * np.linalg.norm(y.data), 1e-300)
            assert abs(lhs - rhs) / denom <= 1e-10

    def test_positive_definite_dense(self, rng):
        k = random_kernel(rng)
        A = dense_normal_matrix(8, 8, k.taps, 2, 0.02)
        eigs = np.linalg.eigvalsh(A)
        assert eigs.min() > 0.0

    def test_psd_probes(self, rng):
        k = random_kernel(rng)
        for _ in range(10):
            x = Frame(rng.standard_normal((8, 8, 1)))
            ax = normal_operator_apply(x, k, 2, 0.0)
            assert float(np.sum(ax.data * x.data)) >= -1e-12


class TestDeconvolve:
    def test_constant_exact(self):
        lr = Frame(np.full((6, 6, 3), 0.42))
        res = deconvolve(lr, BlurKernel.delta(3), 1, SolverConfig())
        np.testing.assert_allclose(res.frame.data, 0.42, atol=1e-7)

    def test_s1_matches_dense_solve(self, rng):
        gamma = 0.02
        lr = rng.random((8, 8, 1))
        A = dense_normal_matrix(8, 8, BlurKernel.delta(3).taps, 1, gamma)
        want = np.linalg.solve(A, lr.ravel())
        res = deconvolve(
            Frame(lr), BlurKernel.delta(3), 1, SolverConfig(gamma=gamma, cg_tolerance=1e-12, cg_max_iters=200)
        )
        rel = np.linalg.norm(res.frame.data.ravel() - want) / np.linalg.norm(want)
        assert rel <= DENSE_TOL

    @pytest.mark.parametrize("s", [1, 2])
    @pytest.mark.parametrize("gamma", [0.002, 0.02, 0.2])
    def test_matches_dense_solve_grid(self, rng, s, gamma):
        h = w = 12
        k = random_kernel(rng)
        lr = rng.random((h // s, w // s, 1))
        A = dense_normal_matrix(h, w, k.taps, s, gamma)
        K = dense_conv_matrix(h, w, k.taps)
        S = dense_decimate_matrix(h, w, s)
        want = np.linalg.solve(A, K.T @ S.T @ lr.ravel())
        res = deconvolve(
            Frame(lr), k, s, SolverConfig(gamma=gamma, cg_tolerance=1e-12, cg_max_iters=h * w)
        )
        rel = np.linalg.norm(res.frame.data.ravel() - want) / np.linalg.norm(want)
        assert rel <= DENSE_TOL

    def test_cg_error_decreases_in_a_norm(self, rng):
        # run CG step counts 1..n and check the error energy shrinks monotonically
        h = w = 8
        gamma = 0.02
        k = random_kernel(rng)
        lr = rng.random((h // 2, w // 2, 1))
        A = dense_normal_matrix(h, w, k.taps, 2, gamma)
        K = dense_conv_matrix(h, w, k.taps)
        S = dense_decimate_matrix(h, w, 2)
        x_star = np.linalg.solve(A, K.T @ S.T @ lr.ravel())
        prev = np.inf
        for iters in range(1, 20):
            res = deconvolve(Frame(lr), k, 2, SolverConfig(gamma=gamma, cg_tolerance=1e-16, cg_max_iters=iters))
            e = res.frame.data.ravel() - x_star
            energy = float(e @ A @ e)
            assert energy <= prev + 1e-12
            prev = energy

    def test_reaches_tolerance(self, rng):
        k = random_kernel(rng)
        lr = Frame(rng.random((8, 8, 3)))
        cfg = SolverConfig(cg_tolerance=1e-8, cg_max_iters=400)
        res = deconvolve(lr, k, 2, cfg)
        assert all(r <= 1e-8 for r in res.residuals)
        assert res.converged

    def test_gamma_zero_sets_warning_flag(self, rng, caplog):
        k = random_kernel(rng)
        lr = Frame(rng.random((4, 4, 1)))
        with caplog.at_level(logging.WARNING, logger="vsrkit.deconvolver"):
            res = deconvolve(lr, k, 2, SolverConfig(gamma=0.0, cg_max_iters=10))
        assert res.singular_warning
        assert any("rank-deficient" in m for m in caplog.messages)

    def test_gamma_zero_s1_no_warning(self, rng):
        res = deconvolve(Frame(rng.random((4, 4, 1))), BlurKernel.delta(3), 1,
                         SolverConfig(gamma=0.0, cg_max_iters=50))
        assert not res.singular_warning

    def test_sharper_than_bicubic(self):
        from helpers import textured_frame

        true_k = gaussian_kernel(15, 1.2)
        for seed in range(2):
            hr = textured_frame(seed, h=64, w=64)
            lr = sk_forward(hr, true_k, 4)
            res = deconvolve(lr, true_k, 4, SolverConfig())
            dec = Frame(np.clip(res.frame.data, 0.0, 1.0))
            assert psnr(dec, hr) > psnr(bicubic_resize(lr, 4), hr)

    def test_result_not_clamped(self, rng):
        # a high-contrast LR drives the unregularized data fit out of range
        lr = np.zeros((8, 8, 1))
        lr[::2, ::2] = 1.0
        res = deconvolve(Frame(lr), gaussian_kernel(5, 1.0), 2, SolverConfig(gamma=0.001))
        assert res.frame.data.max() > 1.0 or res.frame.data.min() < 0.0

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SolverConfig(gamma=-0.1)
        with pytest.raises(ConfigError):
            SolverConfig(cg_max_iters=0)

    def test_warm_start_same_solution(self, rng):
        k = random_kernel(rng)
        lr = Frame(rng.random((6, 6, 1)))
        cold = deconvolve(lr, k, 2, SolverConfig(cg_tolerance=1e-11, cg_max_iters=500))
        warm = deconvolve(lr, k, 2, SolverConfig(cg_tolerance=1e-11, cg_max_iters=500, warm_start=True))
        np.testing.assert_allclose(cold.frame.data, warm.frame.data, atol=1e-8)
        assert isinstance(cold, DeconvolveResult)
