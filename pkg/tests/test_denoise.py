import numpy as np
import pytest

from iqabench.denoise import (
    DenoiseParams,
    GroupSpectrum,
    bm3d_ht,
    bm3d_sweep_detailed,
    dct_matrix,
    denoise_sweep,
    group_forward,
    group_inverse,
    hadamard_matrix,
    hard_threshold,
    _grid,
)
from iqabench.images import NoiseSpec, add_awgn
from iqabench.metrics import psnr

FLT_SIGMA = np.sqrt(200.0)
PAPER_LAMBDAS = [1.6, 2.0, 2.4, 2.8]


def make_piecewise(rng, size=64):
    """Two-region flat image with a random split and random levels."""
    img = np.full((size, size), float(rng.integers(40, 90)))
    split = int(rng.integers(size // 4, 3 * size // 4))
    img[:, split:] = float(rng.integers(150, 210))
    return img


def test_dct_matrix_orthonormal():
    m = dct_matrix(8)
    assert np.allclose(m @ m.T, np.eye(8), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_hadamard_orthonormal_involution(n):
    h = hadamard_matrix(n)
    assert np.allclose(h @ h.T, np.eye(n), atol=1e-12)
    assert np.array_equal(h, h.T)


def test_hadamard_requires_power_of_two():
    with pytest.raises(ValueError):
        hadamard_matrix(6)


@pytest.mark.parametrize("size", [1, 2, 4, 8, 16])
def test_group_transform_energy_roundtrip(rng, size):
    pixels = rng.normal(0, 50, size=(size, 8, 8))
    spectrum = group_forward(pixels)
    energy_in = float(np.sum(pixels * pixels))
    energy_out = float(np.sum(spectrum.coefficients**2))
    assert energy_out == pytest.approx(energy_in, rel=1e-6)
    back = group_inverse(spectrum)
    assert np.allclose(back, pixels, atol=1e-6 * max(1.0, np.abs(pixels).max()))


def test_hard_threshold_zero_is_identity(rng):
    coeff = rng.normal(0, 10, size=(4, 8, 8))
    coeff[rng.random(coeff.shape) < 0.3] = 0.0
    spectrum = GroupSpectrum(coeff.copy(), 4)
    out, retained = hard_threshold(spectrum, 0.0)
    assert np.array_equal(out.coefficients, coeff)
    assert retained == np.count_nonzero(coeff)


def test_hard_threshold_total_kill_keeps_dc():
    coeff = np.zeros((2, 8, 8))
    coeff[0, 0, 0] = 7.0
    coeff[1, 3, 4] = 5.0
    out, retained = hard_threshold(GroupSpectrum(coeff, 2), 100.0)
    assert retained == 1
    assert out.coefficients[0, 0, 0] == 7.0
    assert np.count_nonzero(out.coefficients) == 1


def test_hard_threshold_masks_are_nested(rng):
    coeff = rng.normal(0, 10, size=(8, 8, 8))
    spectrum = GroupSpectrum(coeff, 8)
    low, _ = hard_threshold(spectrum, 3.0)
    high, _ = hard_threshold(spectrum, 9.0)
    surviving_high = high.coefficients != 0
    surviving_low = low.coefficients != 0
    assert np.all(surviving_low[surviving_high])  # high-threshold set is a subset


def test_hard_threshold_hand_case():
    # coefficients [5, -2, 0.5, 9] along the group axis; DC = 5
    coeff = np.array([5.0, -2.0, 0.5, 9.0]).reshape(4, 1, 1)
    out, retained = hard_threshold(GroupSpectrum(coeff, 4), 2.0)
    assert out.coefficients.ravel().tolist() == [5.0, 0.0, 0.0, 9.0]
    assert retained == 2


def test_grid_includes_forced_last_position():
    assert _grid(64, 8, 3).tolist() == list(range(0, 57, 3)) + [56]
    assert _grid(16, 8, 3).tolist() == [0, 3, 6, 8]
    assert _grid(8, 8, 3).tolist() == [0]


def test_constant_image_unchanged(rng):
    img = np.full((32, 32), 131.0)
    for lam in (1.6, 2.8):
        out = bm3d_ht(img, DenoiseParams(sigma=FLT_SIGMA, lam=lam))
        assert np.allclose(out, img, atol=1e-6)


def test_denoising_improves_psnr(rng):
    ref = make_piecewise(rng)
    noisy = add_awgn(ref, NoiseSpec(200.0, seed=11, clip=False))
    noisy_psnr = psnr(ref, noisy).value
    out = bm3d_ht(noisy, DenoiseParams(sigma=FLT_SIGMA, lam=2.8))
    assert psnr(ref, out).value > noisy_psnr


def test_retained_counts_monotone_in_lambda(rng):
    ref = make_piecewise(rng)
    noisy = add_awgn(ref, NoiseSpec(200.0, seed=5, clip=False))
    params = DenoiseParams(sigma=FLT_SIGMA, lam=1.6)
    results = bm3d_sweep_detailed(noisy, params, PAPER_LAMBDAS)
    totals = [r.retained_total for r in results]
    assert totals == sorted(totals, reverse=True)


def test_sweep_singleton_equals_single_call(rng):
    ref = make_piecewise(rng)
    noisy = add_awgn(ref, NoiseSpec(200.0, seed=21, clip=False))
    single = bm3d_ht(noisy, DenoiseParams(sigma=FLT_SIGMA, lam=2.0))
    swept = denoise_sweep(noisy, FLT_SIGMA, [2.0])
    assert len(swept) == 1
    assert np.array_equal(single, swept[0])


def test_sweep_duplicate_lambdas_bit_identical(rng):
    ref = make_piecewise(rng, size=32)
    noisy = add_awgn(ref, NoiseSpec(200.0, seed=8, clip=False))
    a, b = denoise_sweep(noisy, FLT_SIGMA, [2.0, 2.0])
    assert np.array_equal(a, b)


def test_sweep_preserves_order(rng):
    ref = make_piecewise(rng, size=32)
    noisy = add_awgn(ref, NoiseSpec(200.0, seed=8, clip=False))
    swept = denoise_sweep(noisy, FLT_SIGMA, PAPER_LAMBDAS)
    assert len(swept) == 4
    by_one = [bm3d_ht(noisy, DenoiseParams(sigma=FLT_SIGMA, lam=lam)) for lam in PAPER_LAMBDAS]
    for got, want in zip(swept, by_one):
        assert np.array_equal(got, want)


def test_determinism_across_calls(rng):
    ref = make_piecewise(rng, size=48)
    noisy = add_awgn(ref, NoiseSpec(200.0, seed=13, clip=False))
    params = DenoiseParams(sigma=FLT_SIGMA, lam=2.4)
    assert np.array_equal(bm3d_ht(noisy, params), bm3d_ht(noisy, params))


def test_empty_lambdas_rejected(rng):
    noisy = make_piecewise(rng, size=32)
    with pytest.raises(ValueError, match="lambda"):
        denoise_sweep(noisy, FLT_SIGMA, [])


def test_image_smaller_than_block_rejected():
    with pytest.raises(ValueError, match="block"):
        bm3d_ht(np.zeros((4, 4)), DenoiseParams(sigma=FLT_SIGMA, lam=2.0))


def test_params_validation():
    with pytest.raises(ValueError):
        DenoiseParams(sigma=0.0, lam=2.0)
    with pytest.raises(ValueError):
        DenoiseParams(sigma=1.0, lam=-2.0)
    with pytest.raises(ValueError):
        DenoiseParams(sigma=1.0, lam=2.0, window=4)
    with pytest.raises(ValueError):
        DenoiseParams(sigma=1.0, lam=2.0, max_group=12)
