"""Tiny center-surround blob detector with shipped weights.

A two-filter convolutional model: a small box average minus a larger one,
peaking where a warm compact body sits on a cooler background. It exists so
the bridge has a real loadable-weights model that runs hermetically in tests
and smoke checks; full-scale experiments wrap real detector families instead.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

INNER = 33
OUTER = 65
STRIDE = 8


class TinyBlobNet(nn.Module):
    def __init__(self) -> None:
        super().__init__()
        self.inner = nn.Conv2d(1, 1, INNER, stride=STRIDE, padding=INNER // 2, bias=False)
        self.outer = nn.Conv2d(1, 1, OUTER, stride=STRIDE, padding=OUTER // 2, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.inner(x) - self.outer(x)


def reference_state_dict() -> dict:
    """Constructed box-average weights; saved once and shipped as an asset."""
    net = TinyBlobNet()
    with torch.no_grad():
        net.inner.weight.fill_(1.0 / (INNER * INNER))
        net.outer.weight.fill_(1.0 / (OUTER * OUTER))
    return net.state_dict()


class TinyBlobDetector:
    """Single-class person detector over the center-surround response map."""

    def __init__(
        self,
        weights_path: str | Path,
        input_size: int = 416,
        conf_threshold: float = 0.5,
        gain: float = 3.0,
        support_level: float = 0.5,
        device: str = "cpu",
    ):
        self.net = TinyBlobNet()
        state = torch.load(str(weights_path), map_location=device, weights_only=True)
        self.net.load_state_dict(state)
        self.net.to(device).eval()
        self.device = device
        self.input_size = int(input_size)
        self.conf_threshold = conf_threshold
        self.gain = gain
        self.support_level = support_level

    @torch.no_grad()
    def detect(self, image: np.ndarray) -> list[tuple[float, float, float, float, float]]:
        """(x1, y1, x2, y2, conf) boxes in the coordinates of the input image."""
        height, width = image.shape
        x = torch.as_tensor(image, dtype=torch.float32, device=self.device)[None, None]
        x = F.interpolate(x, size=(self.input_size, self.input_size), mode="bilinear",
                          align_corners=False)
        response = self.net(x)[0, 0]
        peak = float(response.max())
        conf = min(1.0, max(0.0, peak * self.gain))
        if conf < self.conf_threshold:
            return []
        support = response >= self.support_level * peak
        ys, xs = torch.nonzero(support, as_tuple=True)
        # response cell (i, j) sees an input patch centered near (j, i) * STRIDE
        sx = width / self.input_size * STRIDE
        sy = height / self.input_size * STRIDE
        x1 = max(0.0, float(xs.min()) * sx)
        x2 = min(float(width), (float(xs.max()) + 1.0) * sx)
        y1 = max(0.0, float(ys.min()) * sy)
        y2 = min(float(height), (float(ys.max()) + 1.0) * sy)
        if x2 - x1 < 1.0:
            x2 = min(float(width), x1 + 1.0)
        if y2 - y1 < 1.0:
            y2 = min(float(height), y1 + 1.0)
        return [(x1, y1, x2, y2, conf)]


def save_reference_weights(path: str | Path) -> None:
    torch.save(reference_state_dict(), str(path))
