"""Block parameterization: rotated rectangles, genomes, bounds, quantization.

A block is described by five physical parameters: an anchor position inside
the mask box (normalized to [0,1]^2 so one bound set works across image
sizes), a grayscale pixel value, a relative long-side length (fraction of the
mask-box width), and an angle in degrees measured clockwise from the downward
image vertical. A genome concatenates k blocks into a flat vector of 5k genes
with per-gene box constraints; fixing a parameter is expressed by collapsing
its bounds to a point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GENES_PER_BLOCK = 5
GENE_NAMES = ("anchor_u", "anchor_v", "pixel_value", "rel_length", "angle_deg")
PIXEL_VALUE_OFFSET = 2

HOT_WIDTH_RATIO = 0.74
COLD_WIDTH_RATIO = 0.45
HOT_COLD_SPLIT = 0.5

DEFAULT_MAX_REL_LENGTH = 0.30
QUANTIZE_MODES = ("none", "grid01", "physical")


@dataclass(frozen=True)
class MaskBox:
    """Axis-aligned pixel region locating the target; blocks are confined to it."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"mask box extents must be positive, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"mask box origin must be non-negative, got ({self.x},{self.y})")

    @property
    def area(self) -> int:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form used by detections and IoU."""
        return (float(self.x), float(self.y), float(self.x + self.w), float(self.y + self.h))

    def fits_in(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def to_doc(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_doc(cls, doc: dict) -> "MaskBox":
        return cls(int(doc["x"]), int(doc["y"]), int(doc["w"]), int(doc["h"]))


@dataclass(frozen=True)
class Block:
    """One rectangular block in mask-relative coordinates."""

    anchor_u: float
    anchor_v: float
    pixel_value: float
    rel_length: float
    angle_deg: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.anchor_u <= 1.0 or not 0.0 <= self.anchor_v <= 1.0:
            raise ValueError(f"anchor must lie in [0,1]^2, got ({self.anchor_u},{self.anchor_v})")
        if not 0.0 <= self.pixel_value <= 1.0:
            raise ValueError(f"pixel value must lie in [0,1], got {self.pixel_value}")
        if not 0.0 <= self.rel_length <= 1.0:
            raise ValueError(f"relative length must lie in [0,1], got {self.rel_length}")
        if not 0.0 <= self.angle_deg <= 180.0:
            raise ValueError(f"angle must lie in [0,180] degrees, got {self.angle_deg}")

    def genes(self) -> np.ndarray:
        return np.array(
            [self.anchor_u, self.anchor_v, self.pixel_value, self.rel_length, self.angle_deg],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class RotRect:
    """Rotated rectangle as four (x, y) corner points in pixel coordinates.

    Corner order: anchor, anchor + length*u, the far corner, anchor + width*v,
    where u is the long-side direction and v the width direction.
    """

    corners: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.corners) != 4:
            raise ValueError("a rectangle has exactly four corners")

    def side_lengths(self) -> tuple[float, float, float, float]:
        out = []
        for i in range(4):
            (x0, y0), (x1, y1) = self.corners[i], self.corners[(i + 1) % 4]
            out.append(math.hypot(x1 - x0, y1 - y0))
        return tuple(out)

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs = [c[0] for c in self.corners]
        ys = [c[1] for c in self.corners]
        return (min(xs), min(ys), max(xs), max(ys))


def width_for(pixel_value: float, length_px: float) -> float:
    """Short-side width of a block given its intensity and long-side length.

    Bright (hot) blocks are wider than dark (cold) ones; the regime boundary
    sits at intensity 0.5.
    """
    if length_px <= 0:
        raise ValueError(f"block length must be positive, got {length_px}")
    if not 0.0 <= pixel_value <= 1.0:
        raise ValueError(f"pixel value must lie in [0,1], got {pixel_value}")
    ratio = HOT_WIDTH_RATIO if pixel_value >= HOT_COLD_SPLIT else COLD_WIDTH_RATIO
    return ratio * length_px


def rect_from_params(
    anchor_x: float, anchor_y: float, length_px: float, width_px: float, angle_deg: float
) -> RotRect:
    """Corners of a rectangle anchored at (anchor_x, anchor_y).

    The long side points along u = (sin a, cos a) with image y downward, the
    short side along v = (cos a, -sin a).
    """
    a = math.radians(angle_deg)
    ux, uy = math.sin(a), math.cos(a)
    vx, vy = math.cos(a), -math.sin(a)
    p0 = (anchor_x, anchor_y)
    p1 = (anchor_x + length_px * ux, anchor_y + length_px * uy)
    p2 = (p1[0] + width_px * vx, p1[1] + width_px * vy)
    p3 = (anchor_x + width_px * vx, anchor_y + width_px * vy)
    return RotRect(corners=(p0, p1, p2, p3))


def block_to_rect(block: Block, mask: MaskBox) -> RotRect:
    """De-normalize a block against its mask box and build the rectangle."""
    anchor_x = mask.x + block.anchor_u * mask.w
    anchor_y = mask.y + block.anchor_v * mask.h
    length_px = block.rel_length * mask.w
    if length_px <= 0:
        # Degenerate block: zero-extent rectangle at the anchor, covers nothing.
        p = (anchor_x, anchor_y)
        return RotRect(corners=(p, p, p, p))
    width_px = width_for(block.pixel_value, length_px)
    return rect_from_params(anchor_x, anchor_y, length_px, width_px, block.angle_deg)


def quantize_pixel_value(c: float, mode: str) -> float:
    """Snap an intensity to the configured grid.

    grid01 snaps to the nearest multiple of 0.1 with ties rounding up;
    physical snaps to the nearer of the two realizable paste intensities
    {0.1, 0.9}, ties going hot. "none" is the identity.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"pixel value must lie in [0,1], got {c}")
    if mode == "none":
        return c
    if mode == "grid01":
        return min(1.0, math.floor(10.0 * c + 0.5) / 10.0)
    if mode == "physical":
        return 0.9 if c >= 0.5 else 0.1
    raise ValueError(f"unknown quantize mode {mode!r}, expected one of {QUANTIZE_MODES}")


def _as_bounds(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class Genome:
    """k blocks flattened to 5k genes plus per-gene box constraints."""

    genes: np.ndarray
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray

    def __post_init__(self) -> None:
        genes = np.asarray(self.genes, dtype=np.float64)
        if genes.ndim != 1 or genes.size % GENES_PER_BLOCK != 0:
            raise ValueError(f"gene vector length must be a multiple of {GENES_PER_BLOCK}")
        lo = _as_bounds(self.bounds_lo, genes.size, "bounds_lo")
        hi = _as_bounds(self.bounds_hi, genes.size, "bounds_hi")
        if np.any(lo > hi):
            raise ValueError("bounds_lo must not exceed bounds_hi")
        if np.any(genes < lo) or np.any(genes > hi):
            d = int(np.argmax((genes < lo) | (genes > hi)))
            raise ValueError(f"gene {d} value {genes[d]} outside [{lo[d]}, {hi[d]}]")
        for arr, attr in ((genes, "genes"), (lo, "bounds_lo"), (hi, "bounds_hi")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def k(self) -> int:
        return self.genes.size // GENES_PER_BLOCK

    def block(self, i: int) -> Block:
        g = self.genes[i * GENES_PER_BLOCK : (i + 1) * GENES_PER_BLOCK]
        return Block(*[float(v) for v in g])

    def blocks(self) -> list[Block]:
        return [self.block(i) for i in range(self.k)]

    def with_genes(self, genes: np.ndarray) -> "Genome":
        return Genome(genes=genes, bounds_lo=self.bounds_lo, bounds_hi=self.bounds_hi)

    def to_doc(self) -> dict:
        return {
            "k": self.k,
            "genes": [float(v) for v in self.genes],
            "bounds_lo": [float(v) for v in self.bounds_lo],
            "bounds_hi": [float(v) for v in self.bounds_hi],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Genome":
        genes = np.asarray(doc["genes"], dtype=np.float64)
        k = int(doc["k"])
        if genes.size != k * GENES_PER_BLOCK:
            raise ValueError(f"document declares k={k} but carries {genes.size} genes")
        return cls(
            genes=genes,
            bounds_lo=np.asarray(doc["bounds_lo"], dtype=np.float64),
            bounds_hi=np.asarray(doc["bounds_hi"], dtype=np.float64),
        )


def encode(genome: Genome) -> np.ndarray:
    """Flat gene vector of a genome (a copy, independent of the genome)."""
    return np.array(genome.genes, dtype=np.float64)


def decode(vector, bounds_lo, bounds_hi, k: int | None = None) -> Genome:
    """Rebuild a genome from a flat vector; inverse of :func:`encode`."""
    vec = np.asarray(vector, dtype=np.float64)
    if k is not None and vec.size != k * GENES_PER_BLOCK:
        raise ValueError(f"expected {k * GENES_PER_BLOCK} genes for k={k}, got {vec.size}")
    return Genome(genes=vec, bounds_lo=np.asarray(bounds_lo), bounds_hi=np.asarray(bounds_hi))


def save_genome(path: str | Path, genome: Genome) -> None:
    Path(path).write_text(json.dumps(genome.to_doc(), sort_keys=True) + "\n")


def load_genome(path: str | Path) -> Genome:
    return Genome.from_doc(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GenomeTemplate:
    """Search-space definition: block count, per-gene bounds, quantization."""

    k: int
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    quantize: str = "physical"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("at least one block is required")
        n = self.k * GENES_PER_BLOCK
        lo = _as_bounds(self.bounds_lo, n, "bounds_lo")
        hi = _as_bounds(self.bounds_hi, n, "bounds_hi")
        if np.any(lo > hi):
            raise ValueError("bounds_lo must not exceed bounds_hi")
        if self.quantize not in QUANTIZE_MODES:
            raise ValueError(f"unknown quantize mode {self.quantize!r}")
        for arr, attr in ((lo, "bounds_lo"), (hi, "bounds_hi")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    def snap(self, genes: np.ndarray) -> np.ndarray:
        """Quantize pixel-value genes, then clamp everything back into bounds.

        Clamping runs last so collapsed (fixed) bounds always win over the
        quantization grid.
        """
        out = np.array(genes, dtype=np.float64)
        if self.quantize != "none":
            idx = np.arange(PIXEL_VALUE_OFFSET, out.size, GENES_PER_BLOCK)
            for d in idx:
                out[d] = quantize_pixel_value(min(1.0, max(0.0, out[d])), self.quantize)
        return np.clip(out, self.bounds_lo, self.bounds_hi)

    def genome(self, genes: np.ndarray) -> Genome:
        return Genome(genes=genes, bounds_lo=self.bounds_lo, bounds_hi=self.bounds_hi)

    def to_doc(self) -> dict:
        return {
            "k": self.k,
            "bounds_lo": [float(v) for v in self.bounds_lo],
            "bounds_hi": [float(v) for v in self.bounds_hi],
            "quantize": self.quantize,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GenomeTemplate":
        return cls(
            k=int(doc["k"]),
            bounds_lo=np.asarray(doc["bounds_lo"], dtype=np.float64),
            bounds_hi=np.asarray(doc["bounds_hi"], dtype=np.float64),
            quantize=str(doc.get("quantize", "physical")),
        )


def default_template(
    k: int,
    *,
    anchor_u: tuple[float, float] = (0.0, 1.0),
    anchor_v: tuple[float, float] = (0.0, 1.0),
    pixel_value: tuple[float, float] = (0.0, 1.0),
    rel_length: tuple[float, float] | float = 0.12,
    angle_deg: tuple[float, float] = (0.0, 180.0),
    quantize: str = "physical",
    max_rel_length: float = DEFAULT_MAX_REL_LENGTH,
) -> GenomeTemplate:
    """Bounds for k blocks; scalars fix a gene by collapsing its interval."""

    def interval(v, lo_cap, hi_cap, name):
        pair = (float(v), float(v)) if np.isscalar(v) else (float(v[0]), float(v[1]))
        if pair[0] < lo_cap or pair[1] > hi_cap:
            raise ValueError(f"{name} bounds {pair} outside [{lo_cap}, {hi_cap}]")
        return pair

    spans = [
        interval(anchor_u, 0.0, 1.0, "anchor_u"),
        interval(anchor_v, 0.0, 1.0, "anchor_v"),
        interval(pixel_value, 0.0, 1.0, "pixel_value"),
        interval(rel_length, 0.0, max_rel_length, "rel_length"),
        interval(angle_deg, 0.0, 180.0, "angle_deg"),
    ]
    lo = np.tile(np.array([s[0] for s in spans]), k)
    hi = np.tile(np.array([s[1] for s in spans]), k)
    return GenomeTemplate(k=k, bounds_lo=lo, bounds_hi=hi, quantize=quantize)
