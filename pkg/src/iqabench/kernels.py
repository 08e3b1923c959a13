"""Hot inner loops: numba-compiled kernels with a pure-numpy fallback.

Backend selection is controlled by the IQABENCH_NUMBA environment variable,
read once at import:

  * unset / "auto"  - use numba when importable, numpy otherwise
  * "1" / "on"      - require numba, fail loudly if missing
  * "0" / "off"     - force the pure-numpy path

Both backends implement the same algorithms with the same summation
structure; on integer-valued images (the 8-bit file pipeline) every
intermediate sum is an exact float64 integer, so the two paths return
bit-identical results.

Run benchmarks/bench_backends.py to compare them on realistic sizes.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["NUMBA_ENABLED", "backend_name", "match_all", "min_block_ssd_map"]


def _resolve_backend() -> bool:
    flag = os.environ.get("IQABENCH_NUMBA", "auto").strip().lower()
    if flag in ("0", "off", "false", "numpy"):
        return False
    if flag in ("1", "on", "true", "numba", "require"):
        import numba  # noqa: F401  (fail loudly if unavailable)

        return True
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _resolve_backend()


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# Minimum block-SSD map (the per-pixel self-similarity search)
# ---------------------------------------------------------------------------


def _min_block_ssd_map_numpy(padded, height, width, bhalf, shalf):
    size = 2 * bhalf + 1
    eh = height + 2 * bhalf
    ew = width + 2 * bhalf
    out = np.full((height, width), np.inf)
    integral = np.zeros((eh + 1, ew + 1))
    for dk in range(-shalf, shalf + 1):
        for dl in range(-shalf, shalf + 1):
            if dk == 0 and dl == 0:
                continue
            base = padded[shalf : shalf + eh, shalf : shalf + ew]
            shifted = padded[shalf + dk : shalf + dk + eh, shalf + dl : shalf + dl + ew]
            sq = base - shifted
            sq *= sq
            integral[1:, 1:] = sq.cumsum(axis=0).cumsum(axis=1)
            ssd = (
                integral[size:, size:]
                - integral[:-size, size:]
                - integral[size:, :-size]
                + integral[:-size, :-size]
            )
            np.minimum(out, ssd, out=out)
    return out


def _min_block_ssd_map_numba_py(padded, height, width, bhalf, shalf):
    # Same displacement sweep as the numpy path, with reused buffers.
    size = 2 * bhalf + 1
    eh = height + 2 * bhalf
    ew = width + 2 * bhalf
    out = np.full((height, width), np.inf)
    integral = np.zeros((eh + 1, ew + 1))
    for dk in range(-shalf, shalf + 1):
        for dl in range(-shalf, shalf + 1):
            if dk == 0 and dl == 0:
                continue
            for y in range(eh):
                rowsum = 0.0
                for x in range(ew):
                    diff = padded[shalf + y, shalf + x] - padded[shalf + y + dk, shalf + x + dl]
                    rowsum += diff * diff
                    integral[y + 1, x + 1] = integral[y, x + 1] + rowsum
            for i in range(height):
                for j in range(width):
                    ssd = (
                        integral[i + size, j + size]
                        - integral[i, j + size]
                        - integral[i + size, j]
                        + integral[i, j]
                    )
                    if ssd < out[i, j]:
                        out[i, j] = ssd
    return out


def min_block_ssd_map(padded: np.ndarray, height: int, width: int, bhalf: int, shalf: int) -> np.ndarray:
    """Per-pixel minimum block SSD over all nonzero displacements.

    `padded` is the source image edge-padded by bhalf + shalf on every
    side. Returns the (height, width) map of raw SSD sums (not yet
    divided by the block area).
    """
    return _min_block_ssd_map_impl(padded, height, width, bhalf, shalf)


# ---------------------------------------------------------------------------
# Grid block matching (grouping for the collaborative filter)
# ---------------------------------------------------------------------------


def _match_all_numpy(img, rows, cols, block, hw, tau, cap):
    nr, nc = rows.size, cols.size
    total = nr * nc
    area = float(block * block)
    windows = np.lib.stride_tricks.sliding_window_view(img, (block, block))
    stack = windows[np.ix_(rows, cols)].reshape(nr, nc, block * block)

    members = np.full((total, cap), -1, dtype=np.int64)
    counts = np.zeros(total, dtype=np.int64)
    row_lo = np.searchsorted(rows, rows - hw, side="left")
    row_hi = np.searchsorted(rows, rows + hw, side="right")
    col_lo = np.searchsorted(cols, cols - hw, side="left")
    col_hi = np.searchsorted(cols, cols + hw, side="right")

    for ri in range(nr):
        rl, rh = row_lo[ri], row_hi[ri]
        for ci in range(nc):
            cl, ch = col_lo[ci], col_hi[ci]
            cand = stack[rl:rh, cl:ch].reshape(-1, block * block)
            diff = cand - stack[ri, ci]
            msd = np.einsum("ij,ij->i", diff, diff) / area
            # flat grid indices of the window candidates, row-major
            grid_r = np.arange(rl, rh)
            grid_c = np.arange(cl, ch)
            flat = (grid_r[:, None] * nc + grid_c[None, :]).ravel()
            self_flat = ri * nc + ci
            keep = (msd <= tau) & (flat != self_flat)
            kept_msd = msd[keep]
            kept_flat = flat[keep]
            order = np.argsort(kept_msd, kind="stable")[: cap - 1]
            g = self_flat
            members[g, 0] = self_flat
            n = order.size
            members[g, 1 : 1 + n] = kept_flat[order]
            counts[g] = 1 + n
    return members, counts


def _match_all_numba_py(img, rows, cols, block, hw, tau, cap):
    nr, nc = rows.size, cols.size
    total = nr * nc
    area = float(block * block)
    members = np.full((total, cap), -1, dtype=np.int64)
    counts = np.zeros(total, dtype=np.int64)
    buf_d = np.empty(max(cap - 1, 1))
    buf_i = np.empty(max(cap - 1, 1), dtype=np.int64)

    for ri in range(nr):
        rl = 0
        while rows[rl] < rows[ri] - hw:
            rl += 1
        rh = nr
        while rows[rh - 1] > rows[ri] + hw:
            rh -= 1
        for ci in range(nc):
            cl = 0
            while cols[cl] < cols[ci] - hw:
                cl += 1
            ch = nc
            while cols[ch - 1] > cols[ci] + hw:
                ch -= 1
            g = ri * nc + ci
            m = 0
            for rj in range(rl, rh):
                for cj in range(cl, ch):
                    if rj == ri and cj == ci:
                        continue
                    ssd = 0.0
                    r0, c0 = rows[ri], cols[ci]
                    r1, c1 = rows[rj], cols[cj]
                    for u in range(block):
                        for v in range(block):
                            diff = img[r0 + u, c0 + v] - img[r1 + u, c1 + v]
                            ssd += diff * diff
                    msd = ssd / area
                    if msd > tau:
                        continue
                    flat = rj * nc + cj
                    if m < cap - 1:
                        pos = m
                        while pos > 0 and buf_d[pos - 1] > msd:
                            buf_d[pos] = buf_d[pos - 1]
                            buf_i[pos] = buf_i[pos - 1]
                            pos -= 1
                        buf_d[pos] = msd
                        buf_i[pos] = flat
                        m += 1
                    elif cap > 1 and msd < buf_d[cap - 2]:
                        pos = cap - 2
                        while pos > 0 and buf_d[pos - 1] > msd:
                            buf_d[pos] = buf_d[pos - 1]
                            buf_i[pos] = buf_i[pos - 1]
                            pos -= 1
                        buf_d[pos] = msd
                        buf_i[pos] = flat
            members[g, 0] = g
            for k in range(m):
                members[g, 1 + k] = buf_i[k]
            counts[g] = 1 + m
    return members, counts


def match_all(
    img: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    block: int,
    hw: int,
    tau: float,
    cap: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Match every grid block against its window neighbours.

    rows/cols are sorted top-left grid coordinates. For each reference
    grid cell g the result row holds g itself first, then the window
    candidates with mean-squared mismatch <= tau sorted ascending
    (row-major order on ties), truncated to `cap` entries total.
    Returns (members, counts) with -1 padding.
    """
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    img = np.ascontiguousarray(img, dtype=np.float64)
    return _match_all_impl(img, rows, cols, int(block), int(hw), float(tau), int(cap))


# ---------------------------------------------------------------------------
# Backend wiring
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit

    _min_block_ssd_map_impl = njit(cache=True)(_min_block_ssd_map_numba_py)
    _match_all_impl = njit(cache=True)(_match_all_numba_py)
else:
    _min_block_ssd_map_impl = _min_block_ssd_map_numpy
    _match_all_impl = _match_all_numpy


def warmup() -> None:
    """Trigger kernel compilation on tiny inputs (no-op for numpy)."""
    tiny = np.arange(64, dtype=np.float64).reshape(8, 8)
    padded = np.pad(tiny, 2, mode="edge")
    min_block_ssd_map(padded, 8, 8, 1, 1)
    grid = np.array([0, 3, 5], dtype=np.int64)
    match_all(tiny, grid, grid, 3, 9, 1e9, 4)
