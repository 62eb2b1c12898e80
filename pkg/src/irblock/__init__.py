"""Black-box block attacks on grayscale pedestrian detectors.

The pipeline: parameterize rotated rectangular blocks (position, intensity,
length, angle), composite them onto an image inside a mask box, average the
detector's confidence over a transform distribution, and minimize that
confidence with differential evolution under a query budget.
"""

from .eot import EotConfig, TransformInstance, apply_transform, sample
from .evaluate import (
    AttackSpec,
    DatasetManifest,
    EvalReport,
    MetricUndefinedError,
    asr,
    average_precision,
    load_manifest,
    run_ablation,
    run_campaign,
    save_manifest,
    transfer_eval,
)
from .geometry import (
    Block,
    Genome,
    GenomeTemplate,
    MaskBox,
    RotRect,
    block_to_rect,
    decode,
    default_template,
    encode,
    load_genome,
    quantize_pixel_value,
    save_genome,
    width_for,
)
from .optimizer import DeConfig, RunTrace, eot_fitness, run_attack
from .oracle import (
    ContrastStub,
    CoverageStub,
    Detection,
    EnsembleOracle,
    Oracle,
    ProtocolError,
    TransportError,
    ensemble_fitness,
    fitness,
    iou,
)
from .raster import composite, coverage_union, load_png, rasterize, save_png
from .wire import WireOracle, run_conformance_suite

__version__ = "0.1.0"
