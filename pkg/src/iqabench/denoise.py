"""Collaborative hard-threshold denoiser.

Similar blocks are grouped by mean-squared mismatch, taken to a separable
3D transform domain (2D DCT per block, orthonormal Walsh-Hadamard across
the group), hard-thresholded at lambda * sigma, inverted, and aggregated
with weight 1 / retained-coefficient count. Only this first (hard
threshold) stage is modeled; the threshold multiplier lambda is the
sweepable smoothing control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .blockmatch import largest_pow2_le
from .images import as_gray

__all__ = [
    "DenoiseParams",
    "DenoiseResult",
    "GroupSpectrum",
    "bm3d_ht",
    "bm3d_sweep_detailed",
    "denoise_sweep",
    "hard_threshold",
]

_CHUNK = 2048  # groups per aggregation batch (bounds peak memory)


@dataclass(frozen=True)
class DenoiseParams:
    """Filter configuration; lam scales sigma into the hard threshold."""

    sigma: float
    lam: float
    block: int = 8
    step: int = 3
    window: int = 39
    max_group: int = 16
    match_tau: float = 2500.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        for name in ("block", "step", "window", "max_group"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.window < self.block:
            raise ValueError(f"window {self.window} smaller than block {self.block}")
        if self.max_group & (self.max_group - 1):
            raise ValueError(f"max_group must be a power of two, got {self.max_group}")
        if self.match_tau < 0:
            raise ValueError("match_tau must be >= 0")


@dataclass(frozen=True)
class GroupSpectrum:
    """3D-transform coefficients of one block group, (group_size, block, block)."""

    coefficients: np.ndarray
    group_size: int

    def __post_init__(self):
        if self.coefficients.shape[0] != self.group_size:
            raise ValueError("group_size does not match coefficient array")
        if self.group_size & (self.group_size - 1):
            raise ValueError(f"group_size must be a power of two, got {self.group_size}")


@dataclass(frozen=True)
class DenoiseResult:
    image: np.ndarray
    lam: float
    retained_total: int


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis as an n x n matrix (rows are basis vectors)."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * x + 1) * k / (2.0 * n)) * np.sqrt(2.0 / n)
    mat[0, :] = np.sqrt(1.0 / n)
    return mat


def hadamard_matrix(n: int) -> np.ndarray:
    """Orthonormal Walsh-Hadamard matrix (natural order); n a power of two."""
    if n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / np.sqrt(n)


def group_forward(pixels: np.ndarray) -> GroupSpectrum:
    """Separable 3D transform of stacked blocks (g, b, b): DCT then group WHT."""
    g, b, _ = pixels.shape
    dct = dct_matrix(b)
    spec = dct @ pixels @ dct.T
    spec = np.tensordot(hadamard_matrix(g), spec, axes=(1, 0))
    return GroupSpectrum(coefficients=spec, group_size=g)


def group_inverse(spectrum: GroupSpectrum) -> np.ndarray:
    coeff = spectrum.coefficients
    dct = dct_matrix(coeff.shape[1])
    pixels = np.tensordot(hadamard_matrix(spectrum.group_size), coeff, axes=(1, 0))
    return dct.T @ pixels @ dct


def hard_threshold(spectrum: GroupSpectrum, t: float) -> tuple[GroupSpectrum, int]:
    """Zero all coefficients with |value| <= t; the DC coefficient always survives.

    Returns the thresholded spectrum and the count of nonzero
    coefficients remaining.
    """
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    coeff = spectrum.coefficients
    mask = np.abs(coeff) > t
    mask[0, 0, 0] = True
    kept = coeff * mask
    return GroupSpectrum(coefficients=kept, group_size=spectrum.group_size), int(
        np.count_nonzero(kept)
    )


def _grid(length: int, block: int, step: int) -> np.ndarray:
    positions = list(range(0, length - block + 1, step))
    if positions[-1] != length - block:
        positions.append(length - block)
    return np.asarray(positions, dtype=np.int64)


def _build_groups(img: np.ndarray, params: DenoiseParams):
    """Lambda-independent grouping: member pixel positions per reference block."""
    h, w = img.shape
    rows = _grid(h, params.block, params.step)
    cols = _grid(w, params.block, params.step)
    hw = (params.window - 1) // 2
    members, counts = kernels.match_all(
        img, rows, cols, params.block, hw, params.match_tau, params.max_group
    )
    sizes = np.array([largest_pow2_le(int(c)) for c in counts], dtype=np.int64)
    member_rows = rows[members // cols.size]
    member_cols = cols[members % cols.size]
    return member_rows, member_cols, sizes


def _filter_with_groups(img, member_rows, member_cols, sizes, params, lam):
    h, w = img.shape
    b = params.block
    t = float(lam) * float(params.sigma)
    dct = dct_matrix(b)
    off_r = np.arange(b)[:, None]
    off_c = np.arange(b)[None, :]
    flat_off = (off_r * w + off_c).ravel()

    acc = np.zeros(h * w)
    wacc = np.zeros(h * w)
    retained_total = 0
    for size in np.unique(sizes):
        size = int(size)
        sel = np.flatnonzero(sizes == size)
        wht = hadamard_matrix(size)
        for start in range(0, sel.size, _CHUNK):
            chunk = sel[start : start + _CHUNK]
            rr = member_rows[chunk, :size]
            cc = member_cols[chunk, :size]
            pixels = img[rr[:, :, None, None] + off_r, cc[:, :, None, None] + off_c]
            spec = dct @ pixels @ dct.T
            spec = np.einsum("st,gtuv->gsuv", wht, spec)
            mask = np.abs(spec) > t
            mask[:, 0, 0, 0] = True
            spec *= mask
            retained = np.count_nonzero(spec, axis=(1, 2, 3))
            retained_total += int(retained.sum())
            spec = np.einsum("st,gtuv->gsuv", wht, spec)
            filtered = dct.T @ spec @ dct
            weight = 1.0 / np.maximum(1, retained).astype(np.float64)
            base = (rr * w + cc)[:, :, None] + flat_off
            np.add.at(acc, base.ravel(), (filtered.reshape(chunk.size, size, -1)
                                          * weight[:, None, None]).ravel())
            np.add.at(wacc, base.ravel(), np.broadcast_to(
                weight[:, None, None], (chunk.size, size, b * b)).ravel())
    covered = wacc > 0
    out = img.ravel().copy()
    out[covered] = acc[covered] / wacc[covered]
    return out.reshape(h, w), retained_total


def bm3d_sweep_detailed(noisy, params: DenoiseParams, lambdas) -> list[DenoiseResult]:
    """One filtered image per lambda; grouping computed once and shared."""
    noisy = as_gray(noisy)
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise ValueError("need at least one lambda")
    if min(noisy.shape) < params.block:
        raise ValueError(f"image {noisy.shape} smaller than block {params.block}")
    member_rows, member_cols, sizes = _build_groups(noisy, params)
    results = []
    for lam in lambdas:
        if not lam > 0:
            raise ValueError(f"lambda must be > 0, got {lam}")
        image, retained = _filter_with_groups(noisy, member_rows, member_cols, sizes, params, lam)
        results.append(DenoiseResult(image=image, lam=lam, retained_total=retained))
    return results


def bm3d_ht(noisy, params: DenoiseParams) -> np.ndarray:
    """Hard-threshold collaborative filter at the configured lambda."""
    return bm3d_sweep_detailed(noisy, params, [params.lam])[0].image


def denoise_sweep(noisy, sigma: float, lambdas) -> list[np.ndarray]:
    """Filter at several thresholds, reusing the (lambda-independent) grouping."""
    params = DenoiseParams(sigma=float(sigma), lam=float(lambdas[0]) if len(lambdas) else 1.0)
    return [r.image for r in bm3d_sweep_detailed(noisy, params, lambdas)]
