"""Grayscale image container, PGM/PNG file I/O, and seeded Gaussian degradation.

Images are plain 2D float64 numpy arrays in the nominal [0, 255] range.
Pixel values stay real-valued through the whole pipeline; quantization to
8 bits happens only in :func:`save_image`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "ImageFormatError",
    "NoiseSpec",
    "PRNG_NAME",
    "add_awgn",
    "as_gray",
    "load_image",
    "quantize",
    "save_image",
    "standard_normals",
]

# Identifier recorded in dataset manifests: PCG64 bit stream, 53-bit
# uniforms, Box-Muller transform, values drawn row-major.
PRNG_NAME = "pcg64-box-muller"

# Rec. 601 luma weights for RGB -> gray conversion.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported image files."""


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise parameters.

    variance is in squared luminance units; seed feeds the PCG64 stream;
    clip clamps the noisy result to [0, 255].
    """

    variance: float
    seed: int
    clip: bool = True

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")


def as_gray(pixels) -> np.ndarray:
    """Validate and return a 2D float64 image array.

    Rejects empty, non-2D and non-finite inputs.
    """
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite pixel values")
    return img


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] then round half-up to uint8."""
    clamped = np.clip(np.asarray(img, dtype=np.float64), 0.0, 255.0)
    return np.floor(clamped + 0.5).clip(0, 255).astype(np.uint8)


def _load_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a binary PGM (P5) file")

    # Tokenize the header: P5, width, height, maxval. Whitespace separates
    # tokens; '#' starts a comment running to end of line.
    pos = 0
    tokens: list[bytes] = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ImageFormatError(f"{path}: truncated PGM header")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval precedes the raster

    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported PGM maxval {maxval} (only 8-bit supported)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: invalid PGM dimensions {width}x{height}")
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ImageFormatError(f"{path}: PGM raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)


def _load_png(path: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return np.asarray(im, dtype=np.float64)
            if mode == "RGB":
                rgb = np.asarray(im, dtype=np.float64)
                luma = rgb @ _LUMA_WEIGHTS
                return np.floor(luma + 0.5)  # round half-up to integer luma
            raise ImageFormatError(
                f"{path}: unsupported PNG mode {mode!r} (only 8-bit grayscale or RGB)"
            )
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"{path}: cannot decode PNG ({exc})") from exc


def load_image(path: str) -> np.ndarray:
    """Load an 8-bit PGM (P5) or PNG file as a float64 grayscale image.

    RGB PNGs are converted to luma with Rec. 601 weights and rounded
    half-up to integers.
    """
    if not os.path.isfile(path):
        raise ImageFormatError(f"{path}: file not found")
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic.startswith(b"P5"):
        return as_gray(_load_pgm(path))
    if magic.startswith(b"\x89PNG\r\n\x1a\n"):
        return as_gray(_load_png(path))
    raise ImageFormatError(f"{path}: unrecognized format (expected PGM P5 or PNG)")


def save_image(img: np.ndarray, path: str) -> None:
    """Write an image as 8-bit PGM or PNG, chosen by file extension.

    Pixels are clamped to [0, 255] and rounded half-up.
    """
    img = as_gray(img)
    raster = quantize(img)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        height, width = raster.shape
        header = f"P5\n{width} {height}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(raster.tobytes())
    elif ext == ".png":
        Image.fromarray(raster, mode="L").save(path, format="PNG")
    else:
        raise ImageFormatError(f"{path}: unsupported output extension {ext!r} (use .pgm or .png)")


def standard_normals(count: int, seed: int) -> np.ndarray:
    """Deterministic standard-normal draws.

    PCG64(seed) supplies 53-bit uniforms; pairs go through the Box-Muller
    transform. Same (count, seed) always yields the same values.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return np.zeros(0)
    pairs = (count + 1) // 2
    uniform = np.random.Generator(np.random.PCG64(seed)).random(2 * pairs)
    u1 = 1.0 - uniform[0::2]  # (0, 1]: keeps log() finite
    u2 = uniform[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def add_awgn(img: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Add zero-mean Gaussian noise with the given variance, row-major.

    Pure function of (pixels, spec): identical inputs give bit-identical
    output. With spec.clip the result is clamped to [0, 255].
    """
    img = as_gray(img)
    if spec.variance == 0:
        noisy = img.copy()
    else:
        noise = standard_normals(img.size, spec.seed) * np.sqrt(spec.variance)
        noisy = img + noise.reshape(img.shape)
    if spec.clip:
        np.clip(noisy, 0.0, 255.0, out=noisy)
    return noisy
