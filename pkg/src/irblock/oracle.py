"""Black-box detector contract: detections, fitness, stubs, query accounting.

An oracle maps a grayscale image to a list of detections and charges one
query per forward pass. The attack only ever sees this surface. Builtin
analytic stubs make every optimizer behavior exactly checkable: the coverage
stub's confidence is a closed-form function of how much of the target box the
blocks occlude.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .geometry import MaskBox
from .raster import validate_image

PERSON = "person"

Box = tuple[float, float, float, float]


class TransportError(RuntimeError):
    """A wire oracle became unreachable or timed out."""

    def __init__(self, message: str, request_id: int | None = None):
        super().__init__(message)
        self.request_id = request_id


class ProtocolError(RuntimeError):
    """A wire peer sent something outside the protocol."""


@dataclass(frozen=True)
class Detection:
    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float
    class_label: str = PERSON

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate detection box ({self.x1},{self.y1},{self.x2},{self.y2})"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0,1], got {self.confidence}")

    @property
    def box(self) -> Box:
        return (self.x1, self.y1, self.x2, self.y2)

    def clamped(self, width: int, height: int) -> "Detection":
        return Detection(
            x1=max(0.0, min(self.x1, width - 1.0)),
            y1=max(0.0, min(self.y1, height - 1.0)),
            x2=max(1.0, min(self.x2, float(width))),
            y2=max(1.0, min(self.y2, float(height))),
            confidence=self.confidence,
            class_label=self.class_label,
        )

    def to_doc(self) -> dict:
        return {
            "x1": self.x1,
            "y1": self.y1,
            "x2": self.x2,
            "y2": self.y2,
            "conf": self.confidence,
            "cls": self.class_label,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Detection":
        return cls(
            x1=float(doc["x1"]),
            y1=float(doc["y1"]),
            x2=float(doc["x2"]),
            y2=float(doc["y2"]),
            confidence=float(doc["conf"]),
            class_label=str(doc.get("cls", PERSON)),
        )


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes."""
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = max(0.0, ix2 - ix1), max(0.0, iy2 - iy1)
    inter = iw * ih
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def fitness(
    detections: list[Detection],
    target: MaskBox,
    iou_match: float = 0.5,
    class_label: str = PERSON,
) -> float:
    """Objective the attack minimizes: the strongest surviving match.

    Returns the maximum confidence among detections of the right class
    overlapping the target box at IoU >= iou_match, or 0 when none matches.
    """
    tbox = target.corners()
    best = 0.0
    for det in detections:
        if det.class_label != class_label:
            continue
        if iou(det.box, tbox) >= iou_match:
            best = max(best, det.confidence)
    return best


class _Counter:
    """Thread-safe monotone query counter."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def bump(self) -> None:
        with self._lock:
            self._count += 1

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


class Oracle:
    """Handle to a black-box detector; concrete backends override _detect."""

    def __init__(self, name: str):
        self.name = name
        self._queries = _Counter()

    @property
    def query_count(self) -> int:
        return self._queries.count

    def detect(self, image: np.ndarray) -> list[Detection]:
        self._queries.bump()
        return self._detect(image)

    def _detect(self, image: np.ndarray) -> list[Detection]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self) -> "Oracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class CoverageStub(Oracle):
    """Analytic detector: confidence falls linearly with occluded box area.

    Coverage is the fraction of pixels inside the target box whose intensity
    deviates from a clean reference by more than diff_threshold (reference
    defaults to all-zero). Confidence is clamp(1 - lam * coverage, 0, 1) and a
    person detection at the target box is emitted iff it reaches
    detect_threshold.
    """

    def __init__(
        self,
        target: MaskBox,
        lam: float = 2.0,
        reference: np.ndarray | None = None,
        diff_threshold: float = 0.15,
        detect_threshold: float = 0.5,
        name: str = "stub:coverage",
    ):
        super().__init__(name)
        if lam <= 0.0:
            raise ValueError("sensitivity lam must be positive")
        self.target = target
        self.lam = lam
        self.reference = None if reference is None else validate_image(reference)
        self.diff_threshold = diff_threshold
        self.detect_threshold = detect_threshold

    def confidence_for(self, image: np.ndarray) -> float:
        img = validate_image(image)
        t = self.target
        if not t.fits_in(img.shape[1], img.shape[0]):
            raise ValueError(f"target box {t} exceeds image bounds {img.shape}")
        window = img[t.y : t.y + t.h, t.x : t.x + t.w]
        if self.reference is None:
            ref = 0.0
        else:
            if self.reference.shape != img.shape:
                raise ValueError(
                    f"image shape {img.shape} does not match reference {self.reference.shape}"
                )
            ref = self.reference[t.y : t.y + t.h, t.x : t.x + t.w]
        covered = int(np.count_nonzero(np.abs(window - ref) > self.diff_threshold))
        coverage = covered / t.area
        return float(np.clip(1.0 - self.lam * coverage, 0.0, 1.0))

    def _detect(self, image: np.ndarray) -> list[Detection]:
        conf = self.confidence_for(image)
        if conf < self.detect_threshold:
            return []
        x1, y1, x2, y2 = self.target.corners()
        return [Detection(x1, y1, x2, y2, conf, PERSON)]


class ContrastStub(Oracle):
    """Analytic detector keyed to a stored appearance template.

    Confidence is clamp(1 - sensitivity * mean|window - template|, 0, 1); the
    more the target region departs from the remembered appearance, the less
    confident the detection.
    """

    def __init__(
        self,
        target: MaskBox,
        template: np.ndarray | None = None,
        sensitivity: float = 4.0,
        detect_threshold: float = 0.5,
        name: str = "stub:contrast",
    ):
        super().__init__(name)
        if sensitivity <= 0.0:
            raise ValueError("sensitivity must be positive")
        self.target = target
        if template is not None:
            template = validate_image(template)
            if template.shape != (target.h, target.w):
                raise ValueError(
                    f"template shape {template.shape} does not match box {(target.h, target.w)}"
                )
        self.template = template
        self.sensitivity = sensitivity
        self.detect_threshold = detect_threshold

    def confidence_for(self, image: np.ndarray) -> float:
        img = validate_image(image)
        t = self.target
        window = img[t.y : t.y + t.h, t.x : t.x + t.w]
        template = 0.0 if self.template is None else self.template
        deviation = float(np.mean(np.abs(window - template)))
        return float(np.clip(1.0 - self.sensitivity * deviation, 0.0, 1.0))

    def _detect(self, image: np.ndarray) -> list[Detection]:
        conf = self.confidence_for(image)
        if conf < self.detect_threshold:
            return []
        x1, y1, x2, y2 = self.target.corners()
        return [Detection(x1, y1, x2, y2, conf, PERSON)]


class EnsembleOracle(Oracle):
    """Composite over several oracles; detect concatenates member outputs.

    Each member charges its own counter per forward pass; this handle's
    counter tracks ensemble-level calls.
    """

    def __init__(self, members: list[Oracle], name: str = "ensemble"):
        if not members:
            raise ValueError("an ensemble needs at least one member")
        super().__init__(name)
        self.members = list(members)

    def _detect(self, image: np.ndarray) -> list[Detection]:
        out: list[Detection] = []
        for member in self.members:
            out.extend(member.detect(image))
        return out

    def close(self) -> None:
        for member in self.members:
            member.close()


def ensemble_fitness(
    oracles: list[Oracle],
    image: np.ndarray,
    target: MaskBox,
    iou_match: float = 0.5,
) -> float:
    """Mean of per-member fitness; each member is queried once."""
    if not oracles:
        raise ValueError("at least one oracle is required")
    values = [fitness(o.detect(image), target, iou_match=iou_match) for o in oracles]
    return float(np.mean(values))
