"""Synthetic grayscale street scenes with one pedestrian-shaped target.

Desk-scale stand-in for a real thermal dataset: a warm body against a cooler
background, with the body box recorded as ground truth. Deterministic given a
seed, so campaigns over generated scenes are reproducible end to end.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .evaluate import DatasetManifest, ManifestRecord, save_manifest
from .geometry import MaskBox
from .oracle import PERSON
from .raster import save_png


def pedestrian_image(
    width: int,
    height: int,
    box: MaskBox,
    background: float = 0.15,
    body: float = 0.5,
    rng: np.random.Generator | None = None,
    noise: float = 0.0,
) -> np.ndarray:
    """Flat background with a torso-and-head figure filling the target box."""
    img = np.full((height, width), background, dtype=np.float64)
    head_h = max(2, box.h // 5)
    head_w = max(2, box.w // 2)
    head_x = box.x + (box.w - head_w) // 2
    img[box.y + head_h : box.y + box.h, box.x : box.x + box.w] = body
    img[box.y : box.y + head_h, head_x : head_x + head_w] = body
    if noise > 0.0 and rng is not None:
        img = np.clip(img + rng.normal(0.0, noise, img.shape), 0.0, 1.0)
    return img


def random_person_box(
    rng: np.random.Generator,
    width: int,
    height: int,
    h_range: tuple[int, int] = (122, 144),
    w_range: tuple[int, int] = (64, 88),
    margin: int = 8,
) -> MaskBox:
    bh = min(int(rng.integers(h_range[0], h_range[1] + 1)), height - 2 * margin)
    bw = min(int(rng.integers(w_range[0], w_range[1] + 1)), width - 2 * margin)
    bx = int(rng.integers(margin, max(margin + 1, width - bw - margin)))
    by = int(rng.integers(margin, max(margin + 1, height - bh - margin)))
    return MaskBox(bx, by, bw, bh)


def make_dataset(
    out_dir: str | Path,
    n_images: int,
    seed: int = 0,
    width: int = 256,
    height: int = 256,
    body: float = 0.5,
    background: float = 0.15,
    min_height_px: int = 120,
    noise: float = 0.0,
    h_range: tuple[int, int] = (122, 144),
    w_range: tuple[int, int] = (64, 88),
) -> Path:
    """Write PNG scenes plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDA7A)))
    records = []
    for i in range(n_images):
        box = random_person_box(rng, width, height, h_range=h_range, w_range=w_range)
        img = pedestrian_image(width, height, box, background, body, rng, noise)
        rel = f"images/scene_{i:04d}.png"
        save_png(out / rel, img)
        records.append(ManifestRecord(path=rel, boxes=((box, PERSON),)))
    manifest = DatasetManifest(
        records=tuple(records), min_height_px=min_height_px, root=out
    )
    manifest_path = out / "manifest.json"
    save_manifest(manifest_path, manifest)
    return manifest_path
