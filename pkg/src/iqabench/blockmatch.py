"""Patch-comparison engine: self-similarity maps and grouped nearest-patch search.

The per-pixel dissimilarity map is the shared primitive under the map-based
quality metrics; grouped matching feeds the collaborative denoiser.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .images import as_gray, save_image

__all__ = [
    "BlockSpec",
    "MatchGroup",
    "block_msd",
    "dissimilarity_map",
    "dump_map_pgm",
    "group_match",
    "largest_pow2_le",
    "window_matches",
]


@dataclass(frozen=True)
class BlockSpec:
    """Block size and search-window size (both odd, in pixels)."""

    block_size: int = 5
    search_size: int = 19

    def __post_init__(self):
        if self.block_size < 1 or self.block_size % 2 == 0:
            raise ValueError(f"block_size must be odd and >= 1, got {self.block_size}")
        if self.search_size < self.block_size or self.search_size % 2 == 0:
            raise ValueError(
                f"search_size must be odd and >= block_size, got {self.search_size}"
            )


@dataclass(frozen=True)
class MatchGroup:
    """Sorted best matches for one reference block.

    The reference block itself is always the first member (mismatch 0);
    mismatches are non-decreasing.
    """

    reference_position: tuple[int, int]
    members: list = field(default_factory=list)  # [(position, mismatch)] ascending

    def positions(self) -> list[tuple[int, int]]:
        return [pos for pos, _ in self.members]


def largest_pow2_le(n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1 << (n.bit_length() - 1)


def block_msd(img, center_a, center_b, size: int) -> float:
    """Mean squared difference between two size x size blocks.

    Centers may lie outside the image; edge replication makes every
    center valid.
    """
    img = as_gray(img)
    if size < 1 or size % 2 == 0:
        raise ValueError(f"block size must be odd and >= 1, got {size}")
    half = (size - 1) // 2
    h, w = img.shape
    ra, ca = int(center_a[0]), int(center_a[1])
    rb, cb = int(center_b[0]), int(center_b[1])
    overflow = max(
        0,
        -(min(ra, rb) - half),
        max(ra, rb) + half - (h - 1),
        -(min(ca, cb) - half),
        max(ca, cb) + half - (w - 1),
    )
    pad = half + overflow
    padded = np.pad(img, pad, mode="edge")
    block_a = padded[ra + pad - half : ra + pad + half + 1, ca + pad - half : ca + pad + half + 1]
    block_b = padded[rb + pad - half : rb + pad + half + 1, cb + pad - half : cb + pad + half + 1]
    diff = block_a - block_b
    return float(np.sum(diff * diff) / (size * size))


def dissimilarity_map(img, spec: BlockSpec = BlockSpec()) -> np.ndarray:
    """Per-pixel minimum block mismatch against the surrounding search window.

    For every pixel, the block centered there is compared with every
    other block center in the search window (zero displacement excluded);
    the map holds the minimum mean squared difference. Edge replication
    keeps the map defined at all height x width pixels.
    """
    img = as_gray(img)
    height, width = img.shape
    bhalf = (spec.block_size - 1) // 2
    shalf = (spec.search_size - 1) // 2
    padded = np.pad(img, bhalf + shalf, mode="edge")
    ssd = kernels.min_block_ssd_map(padded, height, width, bhalf, shalf)
    return ssd / float(spec.block_size * spec.block_size)


def _step_grid(length: int, block: int, step: int) -> np.ndarray:
    """Top-left block positions: every `step` pixels plus a forced last position."""
    if length < block:
        raise ValueError(f"extent {length} smaller than block {block}")
    positions = list(range(0, length - block + 1, step))
    if positions[-1] != length - block:
        positions.append(length - block)
    return np.asarray(positions, dtype=np.int64)


def window_matches(img, ref_pos, block: int, window: int, step: int, tau: float):
    """All step-grid candidates within the window with mismatch <= tau.

    Returns [(position, mismatch)] with the reference first, then the
    rest sorted ascending by mismatch (row-major position on ties).
    No size truncation is applied.
    """
    img = as_gray(img)
    h, w = img.shape
    rows = _step_grid(h, block, step)
    cols = _step_grid(w, block, step)
    rr, cc = int(ref_pos[0]), int(ref_pos[1])
    if rr not in rows or cc not in cols:
        raise ValueError(f"reference position {ref_pos} is not on the step grid")
    hw = (window - 1) // 2
    ref_block = img[rr : rr + block, cc : cc + block]
    matches = []
    for r in rows[(rows >= rr - hw) & (rows <= rr + hw)]:
        for c in cols[(cols >= cc - hw) & (cols <= cc + hw)]:
            if r == rr and c == cc:
                continue
            diff = img[r : r + block, c : c + block] - ref_block
            msd = float(np.sum(diff * diff) / (block * block))
            if msd <= tau:
                matches.append(((int(r), int(c)), msd))
    matches.sort(key=lambda m: m[1])  # stable: row-major enumeration breaks ties
    return [((rr, cc), 0.0)] + matches


def group_match(
    img,
    ref_pos,
    block: int,
    window: int,
    step: int,
    max_members: int,
    tau: float,
) -> MatchGroup:
    """Best-matching group for one reference block.

    Keeps window candidates with mismatch <= tau, sorted ascending, and
    truncates to the largest power of two <= min(count, max_members).
    """
    if max_members < 1:
        raise ValueError("max_members must be >= 1")
    kept = window_matches(img, ref_pos, block, window, step, tau)
    size = largest_pow2_le(min(len(kept), max_members))
    return MatchGroup(reference_position=(int(ref_pos[0]), int(ref_pos[1])), members=kept[:size])


def dump_map_pgm(dmap: np.ndarray, path: str) -> None:
    """Debug dump: affine-rescale a map to [0, 255] and save as PGM."""
    dmap = np.asarray(dmap, dtype=np.float64)
    lo, hi = float(dmap.min()), float(dmap.max())
    scaled = np.zeros_like(dmap) if hi == lo else (dmap - lo) * (255.0 / (hi - lo))
    save_image(scaled, path)
