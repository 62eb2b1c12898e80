"""Wire-protocol bridge to pretrained object detectors."""

from .convert import convert_annotations
from .detectors import BridgeConfig, WeightLoadError, build_detector
from .protocol import WireDetection, make_tcp_server, serve_stdio

__version__ = "0.1.0"
