"""Haar transform against a dense matrix oracle, plus denoising behavior."""

import numpy as np
import pytest

from stackcast import (
    ConfigurationError,
    DenoiseConfig,
    DwtDecomposition,
    StructureError,
    WaveletDenoiser,
    denoise,
    dwt_forward,
    dwt_inverse,
)
from stackcast.wavelet import max_levels

SQRT2 = np.sqrt(2.0)


def haar_matrix(n):
    """Full orthonormal Haar matrix for power-of-two n (recursive build).

    Rows are ordered coarsest first: H @ x stacks the deepest
    approximation, then detail bands coarsest to finest.
    """
    if n == 1:
        return np.array([[1.0]])
    half = haar_matrix(n // 2)
    low = np.kron(half, [1.0, 1.0]) / SQRT2
    high = np.kron(np.eye(n // 2), [1.0, -1.0]) / SQRT2
    return np.vstack([low, high])


def level_reference(x):
    """One analysis level by explicit matrices, padding by repetition."""
    x = np.asarray(x, dtype=float)
    if x.size % 2:
        pad = np.zeros((x.size + 1, x.size))
        pad[np.arange(x.size), np.arange(x.size)] = 1.0
        pad[-1, -1] = 1.0
        x = pad @ x
    m = x.size // 2
    low = np.zeros((m, x.size))
    high = np.zeros((m, x.size))
    for k in range(m):
        low[k, 2 * k] = low[k, 2 * k + 1] = 1.0 / SQRT2
        high[k, 2 * k], high[k, 2 * k + 1] = 1.0 / SQRT2, -1.0 / SQRT2
    return low @ x, high @ x


def reference_forward(x, levels):
    """Independent multilevel transform; returns (approx, details, energy)
    where energy tracks the padded input at every stage."""
    current = np.asarray(x, dtype=float)
    details = []
    energy = 0.0
    for _ in range(levels):
        if current.size % 2:
            current = np.append(current, current[-1])
        energy += 0.0  # padding accounted in the final coefficient identity
        s, d = level_reference(current)
        details.append(d)
        current = s
    return current, details


class TestForward:
    def test_constant_signal(self):
        d = dwt_forward(np.ones(4), 1)
        np.testing.assert_allclose(d.approx, [SQRT2, SQRT2])
        np.testing.assert_allclose(d.details[0], [0.0, 0.0])

    def test_pure_difference(self):
        d = dwt_forward(np.array([1.0, -1.0]), 1)
        np.testing.assert_allclose(d.approx, [0.0])
        np.testing.assert_allclose(d.details[0], [SQRT2])

    def test_matches_dense_haar_matrix(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=16)
        d = dwt_forward(x, 4)
        coeffs = haar_matrix(16) @ x
        mine = np.concatenate([d.approx] + d.details[::-1])
        np.testing.assert_allclose(mine, coeffs, atol=1e-12)

    def test_matches_levelwise_reference_with_padding(self):
        rng = np.random.default_rng(4)
        for n in (5, 11, 23, 37, 50):
            x = rng.normal(size=n)
            levels = max_levels(n)
            d = dwt_forward(x, levels)
            approx_ref, details_ref = reference_forward(x, levels)
            np.testing.assert_allclose(d.approx, approx_ref, atol=1e-12)
            for mine, ref in zip(d.details, details_ref):
                np.testing.assert_allclose(mine, ref, atol=1e-12)

    def test_depth_limit(self):
        with pytest.raises(ConfigurationError):
            dwt_forward(np.arange(8.0), 4)

    def test_energy_preservation_even_stages(self):
        rng = np.random.default_rng(5)
        for n in (8, 16, 32, 64):
            x = rng.normal(size=n)
            d = dwt_forward(x, int(np.log2(n)))
            assert abs(d.coefficient_energy() - np.sum(x * x)) < 1e-9 * np.sum(x * x)

    def test_linearity(self):
        rng = np.random.default_rng(6)
        x, y = rng.normal(size=24), rng.normal(size=24)
        a, b = 2.5, -1.25
        dxy = dwt_forward(a * x + b * y, 3)
        dx = dwt_forward(x, 3)
        dy = dwt_forward(y, 3)
        np.testing.assert_allclose(dxy.approx, a * dx.approx + b * dy.approx, atol=1e-10)
        for k in range(3):
            np.testing.assert_allclose(
                dxy.details[k], a * dx.details[k] + b * dy.details[k], atol=1e-10
            )


class TestInverse:
    def test_round_trip_reference_vector(self):
        x = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0])
        assert np.max(np.abs(dwt_inverse(dwt_forward(x, 3)) - x)) < 1e-12

    def test_inverse_of_constant_decomposition(self):
        d = DwtDecomposition(
            approx=np.array([SQRT2, SQRT2]),
            details=[np.array([0.0, 0.0])],
            levels=1,
            original_length=4,
        )
        np.testing.assert_allclose(dwt_inverse(d), np.ones(4))

    def test_round_trip_odd_length(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=37)
        assert np.max(np.abs(dwt_inverse(dwt_forward(x, 5)) - x)) < 1e-10

    def test_round_trip_all_lengths_and_depths(self):
        rng = np.random.default_rng(8)
        for n in range(4, 65):
            x = rng.normal(size=n)
            for levels in range(1, max_levels(n) + 1):
                recon = dwt_inverse(dwt_forward(x, levels))
                assert np.max(np.abs(recon - x)) < 1e-10, (n, levels)

    def test_inconsistent_lengths_rejected(self):
        with pytest.raises(StructureError):
            DwtDecomposition(
                approx=np.zeros(3),
                details=[np.zeros(2)],
                levels=1,
                original_length=4,
            )


class TestDenoise:
    def test_constant_is_fixed_point(self):
        x = np.full(32, 7.0)
        np.testing.assert_allclose(denoise(x, DenoiseConfig()), x)

    def test_hard_mode_zero_threshold_identity(self):
        # more than half the finest details are exactly zero, so the MAD
        # noise estimate is zero and hard thresholding keeps everything
        x = np.array([1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 5.0, 9.0])
        out = denoise(x, DenoiseConfig(threshold_mode="hard"))
        np.testing.assert_allclose(out, x, atol=1e-12)

    def test_denoising_reduces_error_on_noisy_sine(self):
        rng = np.random.default_rng(9)
        t = np.arange(128)
        clean = np.sin(2 * np.pi * t / 32.0)
        noisy = clean + rng.normal(0.0, 0.5, 128)
        smoothed = denoise(noisy, DenoiseConfig())
        rmse = lambda a, b: np.sqrt(np.mean((a - b) ** 2))
        assert rmse(smoothed, clean) < rmse(noisy, clean)

    def test_output_length_matches_input(self):
        rng = np.random.default_rng(10)
        for n in (5, 17, 33, 100):
            assert denoise(rng.normal(size=n), DenoiseConfig()).size == n

    def test_soft_mode_shift_equivariance(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=48)
        shifted = denoise(x + 100.0, DenoiseConfig())
        np.testing.assert_allclose(shifted, denoise(x, DenoiseConfig()) + 100.0, atol=1e-9)

    def test_too_short_errors(self):
        from stackcast import SizeError

        with pytest.raises(SizeError):
            denoise(np.array([1.0, 2.0, 3.0]), DenoiseConfig())


class TestWaveletDenoiser:
    def test_transform_reuses_fitted_thresholds(self):
        rng = np.random.default_rng(12)
        train = rng.normal(size=(64, 3)) + 10.0
        test = rng.normal(size=(32, 3)) + 10.0
        est = WaveletDenoiser().fit(train)
        np.testing.assert_allclose(
            est.transform(train)[:, 0],
            denoise(train[:, 0], DenoiseConfig(), threshold=float(est.thresholds_[0])),
        )
        out = est.transform(test)
        assert out.shape == test.shape

    def test_get_params_roundtrip(self):
        est = WaveletDenoiser(levels=3, threshold_mode="hard")
        assert est.get_params() == {"levels": 3, "threshold_mode": "hard"}
