"""Raster primitives: PNM I/O, morphology, quantization, HSV thresholds,
connected components, hole filling and contour tracing.

Morphological operators use clipped windows (neighbourhoods intersected
with the image domain), which keeps closing extensive and idempotent all
the way to the border.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .pnm import read_pnm8, write_pnm8


@dataclass(frozen=True)
class Image:
    """8-bit raster, 1 channel (H, W) or 3 channels (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2 and not (px.ndim == 3 and px.shape[2] == 3):
            raise ValidationError(f"unsupported image shape {px.shape}")
        object.__setattr__(self, "pixels", px)
        px.setflags(write=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True)
class BitMask:
    """One bit per pixel, stored as a boolean grid."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValidationError("mask must be 2-D")
        object.__setattr__(self, "bits", bits)
        bits.setflags(write=False)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class HsvRange:
    """Inclusive HSV box; a hue range with h_min > h_max wraps through 0."""

    h_min: float = 0.0
    h_max: float = 360.0 - 1e-9
    s_min: float = 0.0
    s_max: float = 1.0
    v_min: float = 0.0
    v_max: float = 1.0

    def __post_init__(self):
        for h in (self.h_min, self.h_max):
            if not 0.0 <= h < 360.0:
                raise ValidationError("hue bounds must lie in [0, 360)")
        if not (0.0 <= self.s_min <= self.s_max <= 1.0):
            raise ValidationError("saturation bounds must be ordered in [0, 1]")
        if not (0.0 <= self.v_min <= self.v_max <= 1.0):
            raise ValidationError("value bounds must be ordered in [0, 1]")

    def contains(self, h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.h_min <= self.h_max:
            hue_ok = (h >= self.h_min) & (h <= self.h_max)
        else:
            hue_ok = (h >= self.h_min) | (h <= self.h_max)
        return (
            hue_ok
            & (s >= self.s_min)
            & (s <= self.s_max)
            & (v >= self.v_min)
            & (v <= self.v_max)
        )


def read_pnm(path: str | Path) -> Image:
    """Read a binary P5/P6 file with maxval 255."""
    return Image(read_pnm8(path))


def write_pnm(image: Image, path: str | Path) -> None:
    write_pnm8(image.pixels, path)


def mask_to_image(mask: BitMask) -> Image:
    """Serialize form of a mask: P5 with values {0, 255}."""
    return Image(np.where(mask.bits, 255, 0).astype(np.uint8))


def image_to_mask(image: Image) -> BitMask:
    if image.channels != 1:
        raise ValidationError("masks deserialize from 1-channel images")
    return BitMask(image.pixels != 0)


def _check_window(window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"window must be odd and >= 1, got {window}")


def morphological_close(subject, window: int):
    """Greyscale closing per channel for images, binary closing for masks.

    Dilation (windowed max) followed by erosion (windowed min) with a
    square window; extensive and idempotent.
    """
    _check_window(window)
    if isinstance(subject, BitMask):
        grid = subject.bits.astype(np.uint8)
        dilated = ndimage.maximum_filter(grid, size=window, mode="constant", cval=0)
        eroded = ndimage.minimum_filter(dilated, size=window, mode="constant", cval=1)
        return BitMask(eroded.astype(bool))
    if isinstance(subject, Image):
        px = subject.pixels
        if px.ndim == 2:
            channels = [px]
        else:
            channels = [px[:, :, c] for c in range(3)]
        closed = []
        for ch in channels:
            dilated = ndimage.maximum_filter(ch, size=window, mode="constant", cval=0)
            closed.append(
                ndimage.minimum_filter(dilated, size=window, mode="constant", cval=255)
            )
        if px.ndim == 2:
            return Image(closed[0])
        return Image(np.stack(closed, axis=-1))
    raise ValidationError(f"cannot close object of type {type(subject).__name__}")


def quantize_colors(image: Image, levels: int = 8) -> Image:
    """Uniform per-channel quantization to ``levels`` buckets.

    Each sample maps to its bucket midpoint; the mapping is idempotent
    and palette-free.
    """
    if not 1 <= levels <= 256:
        raise ValidationError(f"levels must be in [1, 256], got {levels}")
    values = np.arange(256, dtype=np.int64)
    buckets = values * levels // 256
    lut = np.minimum((2 * buckets + 1) * 128 // levels, 255).astype(np.uint8)
    return Image(lut[image.pixels])


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone conversion of one 8-bit RGB triple.

    Returns hue in degrees [0, 360), saturation and value in [0, 1].
    Hue is reported as 0 for achromatic inputs.
    """
    rf, gf, bf = r / 255.0, g / 255.0, b / 255.0
    maxc = max(rf, gf, bf)
    minc = min(rf, gf, bf)
    delta = maxc - minc
    v = maxc
    s = 0.0 if maxc == 0.0 else delta / maxc
    if delta == 0.0:
        return 0.0, s, v
    if maxc == rf:
        h = 60.0 * math.fmod((gf - bf) / delta, 6.0)
    elif maxc == gf:
        h = 60.0 * ((bf - rf) / delta + 2.0)
    else:
        h = 60.0 * ((rf - gf) / delta + 4.0)
    if h < 0.0:
        h += 360.0
    return h, s, v


def rgb_image_to_hsv(image: Image) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized hexcone conversion of a 3-channel image."""
    if image.channels != 3:
        raise ValidationError("HSV conversion needs a 3-channel image")
    px = image.pixels.astype(np.float64) / 255.0
    r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    maxc = px.max(axis=2)
    minc = px.min(axis=2)
    delta = maxc - minc
    v = maxc
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
        h = np.zeros_like(maxc)
        chromatic = delta > 0
        rmax = chromatic & (maxc == r)
        gmax = chromatic & (maxc == g) & ~rmax
        bmax = chromatic & ~rmax & ~gmax
        safe = np.where(chromatic, delta, 1.0)
        h = np.where(rmax, 60.0 * np.mod((g - b) / safe, 6.0), h)
        h = np.where(gmax, 60.0 * ((b - r) / safe + 2.0), h)
        h = np.where(bmax, 60.0 * ((r - g) / safe + 4.0), h)
    h = np.mod(h, 360.0)
    h[~chromatic] = 0.0
    return h, s, v


def threshold_hsv(image: Image, hsv_range: HsvRange) -> BitMask:
    """Pixels whose HSV lies inside the (possibly hue-wrapping) range."""
    h, s, v = rgb_image_to_hsv(image)
    return BitMask(hsv_range.contains(h, s, v))


def connected_components(
    mask: BitMask, connectivity: int = 8
) -> tuple[np.ndarray, np.ndarray]:
    """Label connected regions.

    Returns (labels, sizes): labels is an int32 grid with components
    numbered 1..N by raster order of their first pixel and 0 as
    background; sizes[i] is the pixel count of component i (sizes[0] is
    the background count).
    """
    if connectivity not in (4, 8):
        raise ValidationError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = (
        np.ones((3, 3), dtype=bool)
        if connectivity == 8
        else ndimage.generate_binary_structure(2, 1)
    )
    raw, n = ndimage.label(mask.bits, structure=structure)
    if n == 0:
        return raw.astype(np.int32), np.array([mask.bits.size], dtype=np.int64)
    flat = raw.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size))
    order = np.argsort(first[1:], kind="stable")  # raw label l -> rank
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, n + 1, dtype=np.int32)
    labels = remap[raw]
    sizes = np.bincount(labels.ravel(), minlength=n + 1).astype(np.int64)
    return labels, sizes


def fill_holes(mask: BitMask) -> BitMask:
    """Set every pixel not reachable from the border through the
    background (4-connectivity); the outer contour is unchanged."""
    background = BitMask(~mask.bits)
    labels, _ = connected_components(background, connectivity=4)
    border_labels = np.unique(
        np.concatenate(
            [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]
        )
    )
    outside = np.isin(labels, border_labels[border_labels != 0])
    return BitMask(mask.bits | (~mask.bits & ~outside))


def boundary_mask(mask: BitMask) -> BitMask:
    """Inner 1-px boundary: set pixels with a 4-neighbour outside the mask."""
    grid = mask.bits.astype(np.uint8)
    eroded = ndimage.minimum_filter(
        grid, footprint=ndimage.generate_binary_structure(2, 1), mode="constant", cval=1
    )
    return BitMask(mask.bits & (eroded == 0))


# clockwise Moore neighbourhood (rows grow downward), starting at west
_MOORE = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)]
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def trace_outer_contour(mask: BitMask) -> list[tuple[int, int]]:
    """Moore-neighbour border trace of the outermost contour.

    Starts at the first set pixel in raster order and walks clockwise;
    stops when the start is re-entered from the original backtrack
    (Jacob's criterion).  Returns the boundary as (row, col) pairs; an
    empty mask gives [].
    """
    bits = mask.bits
    rows, cols = np.nonzero(bits)
    if rows.size == 0:
        return []
    start = (int(rows[0]), int(cols[0]))

    def is_set(p):
        r, c = p
        return 0 <= r < bits.shape[0] and 0 <= c < bits.shape[1] and bool(bits[r, c])

    # the raster-order start has an unset west neighbour: enter from there
    initial = (start, (start[0], start[1] - 1))
    current, backtrack = initial
    contour = [start]
    for _ in range(8 * rows.size + 8):
        offset = (backtrack[0] - current[0], backtrack[1] - current[1])
        scan_from = _MOORE_INDEX[offset]
        nxt = None
        prev = backtrack
        for step in range(1, 9):
            d = _MOORE[(scan_from + step) % 8]
            cand = (current[0] + d[0], current[1] + d[1])
            if is_set(cand):
                nxt = cand
                break
            prev = cand
        if nxt is None:
            return contour  # isolated pixel
        current, backtrack = nxt, prev
        if (current, backtrack) == initial:
            return contour
        contour.append(current)
    raise ValidationError("contour trace failed to terminate")
