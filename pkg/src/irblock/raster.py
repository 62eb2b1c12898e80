"""Compositing blocks onto grayscale images with exact pixel-center coverage.

Images are float64 arrays of shape (height, width) with values in [0, 1].
Coverage is binary: a pixel belongs to a rectangle iff its center lies inside
under a half-open rule (the two edges adjacent to the anchor corner are
inside, the far edges are outside), and compositing overwrites covered pixels
with the block intensity, later blocks winning. No anti-aliasing: exactness
against a brute-force point-in-rectangle enumeration is the contract.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Genome, MaskBox, RotRect, block_to_rect


def validate_image(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grayscale image must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("image intensities must lie in [0,1]")
    return arr


def rasterize(rect: RotRect, mask: MaskBox, shape: tuple[int, int]) -> np.ndarray:
    """Boolean coverage of a rotated rectangle clipped to the mask box.

    A pixel (x, y) is covered iff its center (x+0.5, y+0.5) satisfies
    0 <= (q-p0).e1 < |e1|^2 and 0 <= (q-p0).e2 < |e2|^2 for the two anchor
    edges e1, e2, and the pixel lies inside the mask box.
    """
    height, width = int(shape[0]), int(shape[1])
    if height <= 0 or width <= 0:
        raise ValueError(f"image dims must be positive, got {shape}")
    out = np.zeros((height, width), dtype=bool)

    (p0x, p0y), (p1x, p1y), _, (p3x, p3y) = rect.corners
    e1x, e1y = p1x - p0x, p1y - p0y
    e2x, e2y = p3x - p0x, p3y - p0y
    sq1 = e1x * e1x + e1y * e1y
    sq2 = e2x * e2x + e2y * e2y
    if sq1 <= 0.0 or sq2 <= 0.0:
        return out

    bx0, by0, bx1, by1 = rect.bounding_box()
    x_lo = max(mask.x, 0, int(math.floor(bx0 - 0.5)))
    x_hi = min(mask.x + mask.w, width, int(math.ceil(bx1 + 0.5)))
    y_lo = max(mask.y, 0, int(math.floor(by0 - 0.5)))
    y_hi = min(mask.y + mask.h, height, int(math.ceil(by1 + 0.5)))
    if x_lo >= x_hi or y_lo >= y_hi:
        return out

    xs = np.arange(x_lo, x_hi, dtype=np.float64) + 0.5
    ys = np.arange(y_lo, y_hi, dtype=np.float64) + 0.5
    dx = xs[np.newaxis, :] - p0x
    dy = ys[:, np.newaxis] - p0y
    s1 = dx * e1x + dy * e1y
    s2 = dx * e2x + dy * e2y
    out[y_lo:y_hi, x_lo:x_hi] = (s1 >= 0.0) & (s1 < sq1) & (s2 >= 0.0) & (s2 < sq2)
    return out


def composite(image: np.ndarray, genome: Genome, mask: MaskBox) -> np.ndarray:
    """Overwrite-composite genome blocks onto a copy of the image.

    Pixels covered by several blocks take the value of the highest-index one;
    pixels outside the mask box are never touched.
    """
    img = validate_image(image)
    out = img.copy()
    for block in genome.blocks():
        cov = rasterize(block_to_rect(block, mask), mask, out.shape)
        out[cov] = block.pixel_value
    return out


def coverage_union(genome: Genome, mask: MaskBox, shape: tuple[int, int]) -> np.ndarray:
    """Union of the clipped coverages of all blocks."""
    out = np.zeros((int(shape[0]), int(shape[1])), dtype=bool)
    for block in genome.blocks():
        out |= rasterize(block_to_rect(block, mask), mask, out.shape)
    return out


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize intensities to 8 bits, rounding half up."""
    arr = validate_image(img)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def from_uint8(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / 255.0


def save_png(path: str | Path, img: np.ndarray) -> None:
    Image.fromarray(to_uint8(img), mode="L").save(str(path), format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return from_uint8(np.asarray(im.convert("L"), dtype=np.uint8))
