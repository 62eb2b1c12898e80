"""Detector registry: model identifier -> protocol-ready detector function.

Grayscale protocol images are adapted to each model's expected input
(channel replication for 3-channel backbones, square resize), detections are
mapped back to request-image coordinates, and model class ids are translated
to protocol labels. Inference is deterministic: eval mode, no gradients, no
augmentation, fixed seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .protocol import WireDetection
from .tiny import TinyBlobDetector

ASSETS = Path(__file__).parent / "assets"

COCO_PERSON_ID = 1


@dataclass(frozen=True)
class BridgeConfig:
    model: str = "tiny-blob"
    weights: str | None = None
    input_size: int = 416
    conf_threshold: float = 0.5
    device: str = "cpu"
    class_map: dict = field(default_factory=lambda: {COCO_PERSON_ID: "person"})

    def __post_init__(self) -> None:
        if self.input_size <= 0:
            raise ValueError("input size must be positive")
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError("confidence threshold must lie in [0,1]")


class WeightLoadError(RuntimeError):
    pass


def _build_tiny(config: BridgeConfig) -> Callable[[np.ndarray], list[WireDetection]]:
    weights = config.weights or str(ASSETS / "tiny_blob.pt")
    try:
        detector = TinyBlobDetector(
            weights,
            input_size=config.input_size,
            conf_threshold=config.conf_threshold,
            device=config.device,
        )
    except Exception as exc:
        raise WeightLoadError(f"cannot load tiny-blob weights from {weights}: {exc}") from exc

    def run(image: np.ndarray) -> list[WireDetection]:
        return [WireDetection(x1, y1, x2, y2, conf) for x1, y1, x2, y2, conf in detector.detect(image)]

    return run


TORCHVISION_BUILDERS = {
    "fasterrcnn_resnet50_fpn": "fasterrcnn_resnet50_fpn",
    "retinanet_resnet50_fpn": "retinanet_resnet50_fpn",
    "maskrcnn_resnet50_fpn": "maskrcnn_resnet50_fpn",
    "fcos_resnet50_fpn": "fcos_resnet50_fpn",
    "ssd300_vgg16": "ssd300_vgg16",
}


def _build_torchvision(config: BridgeConfig) -> Callable[[np.ndarray], list[WireDetection]]:
    family = config.model.split(":", 1)[1]
    if family not in TORCHVISION_BUILDERS:
        raise ValueError(
            f"unknown torchvision family {family!r}; known: {sorted(TORCHVISION_BUILDERS)}"
        )
    try:
        from torchvision.models import detection as tv_detection
    except ImportError as exc:
        raise WeightLoadError(f"torchvision is not installed: {exc}") from exc

    builder = getattr(tv_detection, TORCHVISION_BUILDERS[family])
    if config.weights is None:
        raise WeightLoadError(f"{config.model} needs --weights (a fine-tuned checkpoint)")
    try:
        model = builder(weights=None, weights_backbone=None)
        state = torch.load(config.weights, map_location=config.device, weights_only=True)
        if isinstance(state, dict) and "model" in state and not any(
            k.startswith(("backbone", "roi_heads", "head")) for k in state
        ):
            state = state["model"]
        model.load_state_dict(state)
    except WeightLoadError:
        raise
    except Exception as exc:
        raise WeightLoadError(f"cannot load {config.model} weights: {exc}") from exc
    model.to(config.device).eval()

    @torch.no_grad()
    def run(image: np.ndarray) -> list[WireDetection]:
        height, width = image.shape
        x = torch.as_tensor(image, dtype=torch.float32, device=config.device)[None, None]
        x = torch.nn.functional.interpolate(
            x, size=(config.input_size, config.input_size), mode="bilinear", align_corners=False
        )
        x = x.repeat(1, 3, 1, 1)  # grayscale to the 3 channels the backbones expect
        out = model(list(x))[0]
        sx, sy = width / config.input_size, height / config.input_size
        detections = []
        for box, label, score in zip(out["boxes"], out["labels"], out["scores"]):
            cls = config.class_map.get(int(label))
            if cls is None or float(score) < config.conf_threshold:
                continue
            x1, y1, x2, y2 = (float(v) for v in box)
            detections.append(
                WireDetection(
                    max(0.0, x1 * sx),
                    max(0.0, y1 * sy),
                    min(float(width), x2 * sx),
                    min(float(height), y2 * sy),
                    min(1.0, max(0.0, float(score))),
                    cls,
                )
            )
        return detections

    return run


def build_detector(config: BridgeConfig) -> tuple[Callable[[np.ndarray], list[WireDetection]], list[str]]:
    """(detector_fn, class list) for the configured model; deterministic."""
    torch.manual_seed(0)
    classes = sorted(set(config.class_map.values())) or ["person"]
    if config.model == "tiny-blob":
        return _build_tiny(config), ["person"]
    if config.model.startswith("torchvision:"):
        return _build_torchvision(config), classes
    raise ValueError(
        f"unknown model {config.model!r}; use tiny-blob or torchvision:<family>"
    )
