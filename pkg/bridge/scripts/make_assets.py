#!/usr/bin/env python3
"""Build the shipped bridge assets: tiny-blob weights, smoke scene, fixture.

Deterministic; rerunning overwrites the assets in place and refreezes the
regression fixture from one inference pass.
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image

from irblock_bridge.tiny import TinyBlobDetector, save_reference_weights

ASSETS = Path(__file__).parent.parent / "src" / "irblock_bridge" / "assets"

BODY_BOX = (96, 56, 72, 152)  # x, y, w, h
BACKGROUND = 0.2
BODY = 0.85


def make_smoke_scene() -> np.ndarray:
    img = np.full((256, 256), BACKGROUND)
    x, y, w, h = BODY_BOX
    head_h, head_w = h // 5, w // 2
    img[y + head_h : y + h, x : x + w] = BODY
    img[y : y + head_h, x + (w - head_w) // 2 : x + (w - head_w) // 2 + head_w] = BODY
    return img


def main() -> None:
    ASSETS.mkdir(parents=True, exist_ok=True)
    save_reference_weights(ASSETS / "tiny_blob.pt")

    scene = make_smoke_scene()
    raw = np.floor(scene * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(raw, mode="L").save(ASSETS / "smoke_pedestrian.png")

    detector = TinyBlobDetector(ASSETS / "tiny_blob.pt")
    detections = detector.detect(raw / 255.0)
    assert detections, "the shipped detector must find the shipped pedestrian"
    x1, y1, x2, y2, conf = detections[0]
    fixture = {
        "image": "smoke_pedestrian.png",
        "body_box": list(BODY_BOX),
        "expected": {"x1": x1, "y1": y1, "x2": x2, "y2": y2, "conf": conf, "cls": "person"},
        "box_tolerance_px": 5.0,
        "conf_tolerance": 0.05,
    }
    (ASSETS / "smoke_fixture.json").write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    print("expected detection:", fixture["expected"])


if __name__ == "__main__":
    main()
