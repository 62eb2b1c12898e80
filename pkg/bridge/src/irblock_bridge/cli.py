"""Bridge entry points: serve a wrapped detector, convert annotations."""

from __future__ import annotations

import argparse
import logging
import sys

from .convert import convert_annotations
from .detectors import BridgeConfig, WeightLoadError, build_detector
from .protocol import make_tcp_server, serve_stdio

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PORT_IN_USE = 3


def cmd_serve(args: argparse.Namespace) -> int:
    config = BridgeConfig(
        model=args.model,
        weights=args.weights,
        input_size=args.resize,
        conf_threshold=args.threshold,
        device=args.device,
    )
    startup_error = None
    detector, classes = lambda image: [], ["person"]
    try:
        detector, classes = build_detector(config)
    except (WeightLoadError, ValueError) as exc:
        # The handshake carries the failure to the client before we exit.
        startup_error = str(exc)
        log.error("%s", exc)

    if args.stdio:
        serve_stdio(detector, config.model, classes, startup_error=startup_error)
        return EXIT_FATAL if startup_error is not None else EXIT_OK

    try:
        server = make_tcp_server(
            args.host, args.port, detector, config.model, classes, startup_error=startup_error
        )
    except OSError as exc:
        log.error("cannot bind %s:%d: %s", args.host, args.port, exc)
        return EXIT_PORT_IN_USE
    with server:
        print(
            f"serving {config.model} on {server.server_address[0]}:{server.server_address[1]}",
            flush=True,
        )
        if startup_error is not None:
            server.handle_request()
            return EXIT_FATAL
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    result = convert_annotations(
        args.annotations,
        args.out,
        images_root=args.images_root,
        min_height_px=args.min_height,
    )
    n = len(result["manifest"]["images"])
    print(f"wrote {args.out} with {n} images ({len(result['warnings'])} warnings)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irblock-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="speak the detector protocol for a wrapped model")
    p_serve.add_argument("--model", default="tiny-blob",
                         help="tiny-blob | torchvision:<family>")
    p_serve.add_argument("--weights", help="checkpoint path (tiny-blob defaults to the shipped asset)")
    p_serve.add_argument("--resize", type=int, default=416)
    p_serve.add_argument("--threshold", type=float, default=0.5)
    p_serve.add_argument("--device", default="cpu")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.add_argument("--stdio", action="store_true")
    p_serve.set_defaults(func=cmd_serve)

    p_convert = sub.add_parser("convert", help="annotation JSON files -> campaign manifest")
    p_convert.add_argument("--annotations", nargs="+", required=True)
    p_convert.add_argument("--out", required=True)
    p_convert.add_argument("--images-root", default="", dest="images_root")
    p_convert.add_argument("--min-height", type=int, default=120, dest="min_height")
    p_convert.set_defaults(func=cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
