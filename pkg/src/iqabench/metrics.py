"""Full-reference quality metrics.

All five metrics report higher-is-better values: the PSNR family in dB
(+inf for a perfect match), SSIM in [-1, 1], and the two dissimilarity-map
metrics in [-255^2, 0] with 0 best.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockmatch import BlockSpec, dissimilarity_map
from .images import as_gray
from .stats import ConstantInputError, srocc

__all__ = [
    "CalibrationError",
    "DsiParams",
    "METRIC_NAMES",
    "MetricValue",
    "calibrate_dsi_factor",
    "dsi",
    "dsi_from_maps",
    "msddm",
    "msddm_from_maps",
    "psnr",
    "ssim",
    "wpsnr",
]

METRIC_NAMES = ("psnr", "wpsnr", "ssim", "msddm", "dsi")

PEAK = 255.0


class CalibrationError(ValueError):
    """Raised when the correcting-factor sweep has no defined optimum."""


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    higher_is_better: bool = True


@dataclass(frozen=True)
class DsiParams:
    """Masking-corrected dissimilarity index parameters."""

    correcting_factor: float = 4.5
    spec: BlockSpec = BlockSpec()

    def __post_init__(self):
        if not self.correcting_factor > 0:
            raise ValueError(f"correcting_factor must be > 0, got {self.correcting_factor}")


def _check_dims(ref, dist, *more):
    shapes = [ref.shape, dist.shape] + [m.shape for m in more]
    if len(set(shapes)) != 1:
        raise ValueError(f"image dimensions differ: {shapes}")


def psnr(ref, dist) -> MetricValue:
    """Peak signal-to-noise ratio in dB; +inf when the images are identical."""
    ref = as_gray(ref)
    dist = as_gray(dist)
    _check_dims(ref, dist)
    err = dist - ref
    mse = float(np.mean(err * err))
    value = np.inf if mse == 0.0 else 10.0 * np.log10(PEAK * PEAK / mse)
    return MetricValue("psnr", float(value))


def wpsnr(ref, dist, noisy, weight: float = 6.0) -> MetricValue:
    """PSNR over a weighted MSE.

    Pixels whose filtering error exceeds their original noise error
    (strictly) get the larger weight; the weighted MSE normalizes by the
    weight sum, so wPSNR equals PSNR when no pixel triggers.
    """
    ref = as_gray(ref)
    dist = as_gray(dist)
    noisy = as_gray(noisy)
    _check_dims(ref, dist, noisy)
    if not weight > 0:
        raise ValueError(f"weight must be positive, got {weight}")
    err2 = (dist - ref) ** 2
    noise2 = (noisy - ref) ** 2
    weights = np.where(err2 > noise2, float(weight), 1.0)
    wmse = float(np.sum(weights * err2) / np.sum(weights))
    value = np.inf if wmse == 0.0 else 10.0 * np.log10(PEAK * PEAK / wmse)
    return MetricValue("wpsnr", float(value))


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = (0.01 * PEAK) ** 2
_SSIM_C2 = (0.03 * PEAK) ** 2


def _ssim_kernel() -> np.ndarray:
    k = np.arange(_SSIM_WINDOW) - (_SSIM_WINDOW - 1) / 2.0
    g = np.exp(-(k * k) / (2.0 * _SSIM_SIGMA * _SSIM_SIGMA))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Separable Gaussian, valid region only (direct summation, no FFT).
    x = np.lib.stride_tricks.sliding_window_view(x, g.size, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(x, g.size, axis=1) @ g


def ssim(ref, dist) -> MetricValue:
    """Mean local structural similarity, standard configuration.

    11x11 Gaussian window (sigma 1.5), C1=(0.01*255)^2, C2=(0.03*255)^2,
    valid-region filtering.
    """
    ref = as_gray(ref)
    dist = as_gray(dist)
    _check_dims(ref, dist)
    if min(ref.shape) < _SSIM_WINDOW:
        raise ValueError(f"image {ref.shape} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window")
    g = _ssim_kernel()
    mu_x = _filter_valid(ref, g)
    mu_y = _filter_valid(dist, g)
    var_x = _filter_valid(ref * ref, g) - mu_x * mu_x
    var_y = _filter_valid(dist * dist, g) - mu_y * mu_y
    cov = _filter_valid(ref * dist, g) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return MetricValue("ssim", float(np.mean(num / den)))


def msddm_from_maps(map_ref: np.ndarray, map_dist: np.ndarray) -> float:
    delta = np.sqrt(map_ref) - np.sqrt(map_dist)
    return -float(np.mean(delta * delta)) + 0.0


def dsi_from_maps(map_ref: np.ndarray, map_dist: np.ndarray, correcting_factor: float) -> float:
    root_dist = np.sqrt(map_dist)
    excess = np.abs(np.sqrt(map_ref) - root_dist) - root_dist / correcting_factor
    np.maximum(excess, 0.0, out=excess)
    return -float(np.mean(excess * excess)) + 0.0


def msddm(ref, dist, spec: BlockSpec = BlockSpec()) -> MetricValue:
    """Mean squared difference of the two images' dissimilarity-map roots (negated)."""
    ref = as_gray(ref)
    dist = as_gray(dist)
    _check_dims(ref, dist)
    value = msddm_from_maps(dissimilarity_map(ref, spec), dissimilarity_map(dist, spec))
    return MetricValue("msddm", value)


def dsi(ref, dist, params: DsiParams = DsiParams()) -> MetricValue:
    """Dissimilarity index: map difference after a masking allowance.

    Each pixel's map difference is reduced by root-dissimilarity of the
    distorted image divided by the correcting factor before squaring, so
    distortions hidden in unpredictable texture cost less.
    """
    ref = as_gray(ref)
    dist = as_gray(dist)
    _check_dims(ref, dist)
    value = dsi_from_maps(
        dissimilarity_map(ref, params.spec),
        dissimilarity_map(dist, params.spec),
        params.correcting_factor,
    )
    return MetricValue("dsi", value)


def sweep_grid(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0 or hi < lo:
        raise ValueError(f"bad grid ({lo}, {hi}, {step})")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(count)]


def calibrate_dsi_factor(
    pairs,
    grid: tuple[float, float, float] = (1.0, 10.0, 0.1),
    spec: BlockSpec = BlockSpec(),
    return_curve: bool = False,
):
    """Grid-search the correcting factor maximizing SROCC against MOS.

    pairs is a list of (ref, dist, mos) triples. Dissimilarity maps are
    computed once per pair and reused across the whole sweep. Ties pick
    the smallest factor. With return_curve, also returns the
    [(factor, srocc-or-None)] sweep.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 (ref, dist, mos) pairs, got {len(pairs)}")
    mos = [float(p[2]) for p in pairs]
    if all(m == mos[0] for m in mos):
        raise CalibrationError("MOS values are all equal; ranking carries no signal")
    factors = sweep_grid(*grid)
    maps = [(dissimilarity_map(as_gray(r), spec), dissimilarity_map(as_gray(d), spec))
            for r, d, _ in pairs]

    best_factor = None
    best_rho = -np.inf
    curve = []
    for c in factors:
        values = [dsi_from_maps(mr, md, c) for mr, md in maps]
        try:
            rho = srocc(values, mos)
        except ConstantInputError:
            curve.append((c, None))
            continue
        curve.append((c, rho))
        if rho > best_rho:
            best_rho = rho
            best_factor = c
    if best_factor is None:
        raise CalibrationError("every grid point produced a constant DSI vector")
    return (best_factor, curve) if return_curve else best_factor
