"""Transform sampling and application for digital-to-physical robustness.

Each fitness evaluation averages the objective over a handful of random
transform instances: anchor/pixel-value jitter on the genome (capturing
placement and temperature error of real pastes), then a global brightness
factor and a box-filter downsample/nearest upsample round trip on the
synthesized image (capturing exposure and resolution loss).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GENES_PER_BLOCK, Genome, MaskBox
from .raster import composite, validate_image


@dataclass(frozen=True)
class EotConfig:
    n_samples: int = 4
    brightness_range: tuple[float, float] = (0.9, 1.1)
    downsample_range: tuple[float, float] = (0.5, 1.0)
    translate_px: float = 2.0
    value_jitter: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        for name, (lo, hi) in (
            ("brightness_range", self.brightness_range),
            ("downsample_range", self.downsample_range),
        ):
            if not (lo <= hi):
                raise ValueError(f"{name} is empty: ({lo}, {hi})")
        if not (0.0 < self.downsample_range[0] <= self.downsample_range[1] <= 1.0):
            raise ValueError("downsample factors must lie in (0, 1]")
        if self.brightness_range[0] < 0.0:
            raise ValueError("brightness factors must be non-negative")
        if self.translate_px < 0.0 or self.value_jitter < 0.0:
            raise ValueError("jitter magnitudes must be non-negative")

    @classmethod
    def identity(cls, n_samples: int = 1, seed: int = 0) -> "EotConfig":
        """All ranges collapsed so every draw is the identity transform."""
        return cls(
            n_samples=n_samples,
            brightness_range=(1.0, 1.0),
            downsample_range=(1.0, 1.0),
            translate_px=0.0,
            value_jitter=0.0,
            seed=seed,
        )

    def to_doc(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "brightness_range": list(self.brightness_range),
            "downsample_range": list(self.downsample_range),
            "translate_px": self.translate_px,
            "value_jitter": self.value_jitter,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EotConfig":
        return cls(
            n_samples=int(doc.get("n_samples", 4)),
            brightness_range=tuple(doc.get("brightness_range", (0.9, 1.1))),
            downsample_range=tuple(doc.get("downsample_range", (0.5, 1.0))),
            translate_px=float(doc.get("translate_px", 2.0)),
            value_jitter=float(doc.get("value_jitter", 0.05)),
            seed=int(doc.get("seed", 0)),
        )


@dataclass(frozen=True)
class TransformInstance:
    brightness_factor: float
    downsample_factor: float
    dx: float
    dy: float
    dvalue: float

    @property
    def is_identity(self) -> bool:
        return (
            self.brightness_factor == 1.0
            and self.downsample_factor == 1.0
            and self.dx == 0.0
            and self.dy == 0.0
            and self.dvalue == 0.0
        )


IDENTITY_TRANSFORM = TransformInstance(1.0, 1.0, 0.0, 0.0, 0.0)


def sample(config: EotConfig, rng: np.random.Generator) -> TransformInstance:
    """One transform draw; fields are drawn independently and in fixed order."""
    brightness = float(rng.uniform(*config.brightness_range))
    downsample = float(rng.uniform(*config.downsample_range))
    dx = float(rng.uniform(-config.translate_px, config.translate_px))
    dy = float(rng.uniform(-config.translate_px, config.translate_px))
    dvalue = float(rng.uniform(-config.value_jitter, config.value_jitter))
    return TransformInstance(brightness, downsample, dx, dy, dvalue)


def jitter_genome(genome: Genome, t: TransformInstance, mask: MaskBox) -> Genome:
    """Shift anchors by (dx, dy) pixels and pixel values by dvalue, in-bounds."""
    if t.dx == 0.0 and t.dy == 0.0 and t.dvalue == 0.0:
        return genome
    genes = np.array(genome.genes)
    genes[0::GENES_PER_BLOCK] += t.dx / mask.w
    genes[1::GENES_PER_BLOCK] += t.dy / mask.h
    genes[2::GENES_PER_BLOCK] += t.dvalue
    genes = np.clip(genes, genome.bounds_lo, genome.bounds_hi)
    return genome.with_genes(genes)


def _box_weights(n: int, m: int) -> np.ndarray:
    """(m, n) area-overlap weights for box-filter resampling of an axis n -> m."""
    w = np.zeros((m, n), dtype=np.float64)
    scale = n / m
    for i in range(m):
        start = i * scale
        end = (i + 1) * scale
        j0 = int(np.floor(start))
        j1 = min(n, int(np.ceil(end)))
        for j in range(j0, j1):
            overlap = min(end, j + 1.0) - max(start, float(j))
            if overlap > 0.0:
                w[i, j] = overlap / scale
    return w


def _nn_indices(n_out: int, n_in: int) -> np.ndarray:
    idx = np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.intp)
    return np.clip(idx, 0, n_in - 1)


def resample_round_trip(img: np.ndarray, factor: float) -> np.ndarray:
    """Box-filter downsample by `factor`, then nearest-neighbor upsample back."""
    h, w = img.shape
    mh = max(1, int(np.floor(h * factor + 0.5)))
    mw = max(1, int(np.floor(w * factor + 0.5)))
    if (mh, mw) == (h, w):
        return img
    small = _box_weights(h, mh) @ img @ _box_weights(w, mw).T
    return small[np.ix_(_nn_indices(h, mh), _nn_indices(w, mw))]


def apply_transform(
    t: TransformInstance, image: np.ndarray, genome: Genome, mask: MaskBox
) -> np.ndarray:
    """Render the genome under one transform draw.

    Order is fixed: genome jitter, composite, brightness, resample round
    trip. Output intensities are clamped to [0, 1].
    """
    img = validate_image(image)
    out = composite(img, jitter_genome(genome, t, mask), mask)
    if t.brightness_factor != 1.0:
        out = np.clip(out * t.brightness_factor, 0.0, 1.0)
    if t.downsample_factor != 1.0:
        out = np.clip(resample_round_trip(out, t.downsample_factor), 0.0, 1.0)
    return out
