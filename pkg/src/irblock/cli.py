"""Command-line driver: attack campaigns, evaluation, ablation, serving.

Settings resolve in precedence order flag > IRBLOCK_* environment variable >
config file > builtin default, and every run with an output directory echoes
its fully resolved configuration there so artifacts are reproducible from the
output alone. All randomness flows from the single seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluate as ev
from .eot import EotConfig
from .geometry import MaskBox, QUANTIZE_MODES, load_genome
from .optimizer import DeConfig
from .oracle import (
    ContrastStub,
    CoverageStub,
    EnsembleOracle,
    Oracle,
    PERSON,
    TransportError,
)
from .raster import composite, load_png, save_png
from .wire import WireOracle, make_tcp_server, serve_stdio

log = logging.getLogger(__name__)

ENV_PREFIX = "IRBLOCK_"

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2
EXIT_PORT_IN_USE = 3


@dataclass
class RunConfig:
    """Fully resolved settings for one campaign-style command."""

    manifest: str
    oracle: str
    out: str
    seed: int = 1
    k: int = 7
    length: float | None = 0.12
    length_range: tuple[float, float] | None = None
    pixel_value: float | None = None
    angle_range: tuple[float, float] = (0.0, 180.0)
    quantize: str = "physical"
    mask_mode: str = "box"
    pop: int = 100
    steps: int = 10
    rm: float = 0.5
    rc: float = 0.6
    early_stop: float = 0.5
    variant: str = "paper"
    eot_samples: int = 4
    eot_brightness: tuple[float, float] = (0.9, 1.1)
    eot_downsample: tuple[float, float] = (0.5, 1.0)
    eot_translate: float = 2.0
    eot_jitter: float = 0.05
    eot_identity: bool = False
    workers: int = 1
    run_workers: int = 1
    min_height: int | None = None
    lam: float = 2.0
    diff_threshold: float = 0.15
    sensitivity: float = 4.0

    def attack_spec(self) -> ev.AttackSpec:
        rel = self.length_range if self.length_range is not None else self.length
        if rel is None:
            rel = 0.12
        pixel = self.pixel_value if self.pixel_value is not None else (0.0, 1.0)
        return ev.AttackSpec(
            k=self.k,
            rel_length=rel,
            pixel_value=pixel,
            angle_deg=self.angle_range,
            quantize=self.quantize,
            mask_mode=self.mask_mode,
        )

    def de_config(self) -> DeConfig:
        return DeConfig(
            pop_size=self.pop,
            steps=self.steps,
            mutation_rate=self.rm,
            crossover_rate=self.rc,
            early_stop_conf=self.early_stop,
            seed=self.seed,
            variant=self.variant,
        )

    def eot_config(self) -> EotConfig:
        if self.eot_identity:
            return EotConfig.identity(n_samples=max(1, self.eot_samples), seed=self.seed)
        return EotConfig(
            n_samples=self.eot_samples,
            brightness_range=self.eot_brightness,
            downsample_range=self.eot_downsample,
            translate_px=self.eot_translate,
            value_jitter=self.eot_jitter,
            seed=self.seed,
        )

    def to_doc(self) -> dict:
        doc = {}
        for key, value in self.__dict__.items():
            doc[key] = list(value) if isinstance(value, tuple) else value
        return doc


def _resolve(args: argparse.Namespace, spec: dict) -> dict:
    """Merge flag > environment > config file > default per option."""
    file_conf = {}
    config_path = getattr(args, "config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        file_conf = json.loads(Path(config_path).read_text())
    resolved = {}
    for dest, (converter, default) in spec.items():
        value = getattr(args, dest, None)
        if value is None:
            env = os.environ.get(ENV_PREFIX + dest.upper())
            if env is not None:
                value = converter(env) if converter is not None else env
        if value is None and dest in file_conf:
            raw = file_conf[dest]
            value = converter(raw) if converter is not None and isinstance(raw, str) else raw
            if isinstance(value, list):
                value = tuple(value)
        if value is None:
            value = default
        resolved[dest] = value
    return resolved


def _pair(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.replace(",", " ").split()]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}")
    return (parts[0], parts[1])


def _boxspec(text: str) -> MaskBox:
    parts = [int(p) for p in text.replace(",", " ").split()]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected x,y,w,h, got {text!r}")
    return MaskBox(*parts)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


CAMPAIGN_OPTIONS: dict = {
    "oracle": (str, "stub:coverage"),
    "seed": (int, 1),
    "k": (int, 7),
    "length": (float, 0.12),
    "length_range": (_pair, None),
    "pixel_value": (float, None),
    "angle_range": (_pair, (0.0, 180.0)),
    "quantize": (str, "physical"),
    "mask_mode": (str, "box"),
    "pop": (int, 100),
    "steps": (int, 10),
    "rm": (float, 0.5),
    "rc": (float, 0.6),
    "early_stop": (float, 0.5),
    "variant": (str, "paper"),
    "eot_samples": (int, 4),
    "eot_brightness": (_pair, (0.9, 1.1)),
    "eot_downsample": (_pair, (0.5, 1.0)),
    "eot_translate": (float, 2.0),
    "eot_jitter": (float, 0.05),
    "eot_identity": (_bool, False),
    "workers": (int, 1),
    "run_workers": (int, 1),
    "min_height": (int, None),
    "lam": (float, 2.0),
    "diff_threshold": (float, 0.15),
    "sensitivity": (float, 4.0),
}


def _add_campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file merged under flags")
    p.add_argument("--oracle", help="stub:<kind> | cmd:<command> | tcp:host:port (comma-join for an ensemble)")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="number of blocks")
    p.add_argument("--length", type=float, help="fix relative block length")
    p.add_argument("--length-range", type=_pair, dest="length_range")
    p.add_argument("--pixel-value", type=float, dest="pixel_value", help="fix block intensity")
    p.add_argument("--angle-range", type=_pair, dest="angle_range")
    p.add_argument("--quantize", choices=QUANTIZE_MODES)
    p.add_argument("--mask-mode", dest="mask_mode", help="box | image | inflate:<factor>")
    p.add_argument("--pop", type=int, help="population size")
    p.add_argument("--steps", type=int, help="generations")
    p.add_argument("--rm", type=float, help="mutation rate")
    p.add_argument("--rc", type=float, help="crossover rate")
    p.add_argument("--early-stop", type=float, dest="early_stop")
    p.add_argument("--variant", choices=("paper", "rand1"))
    p.add_argument("--eot-samples", type=int, dest="eot_samples")
    p.add_argument("--eot-brightness", type=_pair, dest="eot_brightness")
    p.add_argument("--eot-downsample", type=_pair, dest="eot_downsample")
    p.add_argument("--eot-translate", type=float, dest="eot_translate")
    p.add_argument("--eot-jitter", type=float, dest="eot_jitter")
    p.add_argument("--eot-identity", action="store_const", const=True, dest="eot_identity")
    p.add_argument("--workers", type=int, help="parallel units")
    p.add_argument("--run-workers", type=int, dest="run_workers", help="parallel evaluations per run")
    p.add_argument("--min-height", type=int, dest="min_height", help="override manifest eligibility height")
    p.add_argument("--lam", type=float, help="coverage stub sensitivity")
    p.add_argument("--diff-threshold", type=float, dest="diff_threshold")
    p.add_argument("--sensitivity", type=float, help="contrast stub sensitivity")


def build_run_config(args: argparse.Namespace) -> RunConfig:
    resolved = _resolve(args, CAMPAIGN_OPTIONS)
    return RunConfig(manifest=args.manifest, out=args.out, **resolved)


class OracleBuilder:
    """Turns an oracle spec string into a per-unit factory."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._shared: dict[str, Oracle] = {}

    def _member(self, spec: str, image: np.ndarray, target: MaskBox) -> Oracle:
        cfg = self.config
        if spec == "stub:coverage":
            return CoverageStub(
                target, lam=cfg.lam, reference=image, diff_threshold=cfg.diff_threshold
            )
        if spec == "stub:contrast":
            window = image[target.y : target.y + target.h, target.x : target.x + target.w]
            return ContrastStub(target, template=window, sensitivity=cfg.sensitivity)
        if spec.startswith("cmd:"):
            if spec not in self._shared:
                self._shared[spec] = WireOracle.from_command(spec[len("cmd:") :])
            return self._shared[spec]
        if spec.startswith("tcp:"):
            if spec not in self._shared:
                host, port = spec[len("tcp:") :].rsplit(":", 1)
                self._shared[spec] = WireOracle.from_tcp(host, int(port))
            return self._shared[spec]
        raise ValueError(f"unknown oracle spec {spec!r}")

    def factory(self, image: np.ndarray, target: MaskBox) -> Oracle:
        specs = [s.strip() for s in self.config.oracle.split(",") if s.strip()]
        if not specs:
            raise ValueError("empty oracle spec")
        members = [self._member(s, image, target) for s in specs]
        if len(members) == 1:
            return members[0]
        return EnsembleOracle(members)

    def close(self) -> None:
        for oracle in self._shared.values():
            oracle.close()
        self._shared.clear()


def _load_manifest(config: RunConfig) -> ev.DatasetManifest:
    manifest = ev.load_manifest(config.manifest)
    if config.min_height is not None:
        manifest = ev.DatasetManifest(
            records=manifest.records, min_height_px=config.min_height, root=manifest.root
        )
    return manifest


def _echo_config(out: Path, config: RunConfig, command: str, extra: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "config": config.to_doc()}
    if extra:
        doc.update(extra)
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_attack(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    out = Path(config.out)
    _echo_config(out, config, "attack")
    manifest = _load_manifest(config)
    builder = OracleBuilder(config)
    try:
        report = ev.run_campaign(
            manifest,
            builder.factory,
            config.attack_spec(),
            config.de_config(),
            config.eot_config(),
            out_dir=out,
            n_workers=config.workers,
            run_workers=config.run_workers,
        )
    except TransportError as exc:
        log.error("oracle transport failure: %s", exc)
        return EXIT_FATAL
    finally:
        builder.close()
    print(json.dumps(report.aggregate, indent=2, sort_keys=True))
    if report.aggregate["n_units"] > 0 and report.aggregate["n_failed"] == report.aggregate["n_units"]:
        log.error("every unit failed; see report.json for per-unit errors")
        return EXIT_FATAL
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    out = Path(config.out)
    _echo_config(out, config, "evaluate")
    manifest = _load_manifest(config)
    builder = OracleBuilder(config)
    rows = []
    try:
        for index, (record, target) in enumerate(manifest.units()):
            image = load_png(manifest.image_path(record))
            oracle = builder.factory(image, target)
            dets = oracle.detect(image)
            rows.append(
                {
                    "index": index,
                    "image": record.path,
                    "target": target.to_doc(),
                    "detections": [d.to_doc() for d in dets],
                    "matched": ev.label_matched(target, dets),
                    "gt_boxes": [b.to_doc() for b, label in record.boxes if label == PERSON],
                }
            )
    except TransportError as exc:
        log.error("oracle transport failure: %s", exc)
        return EXIT_FATAL
    finally:
        builder.close()
    ap_rows = [
        (
            [evd for evd in map(lambda d: _det_from_doc(d), row["detections"])],
            [MaskBox.from_doc(b) for b in row["gt_boxes"]],
        )
        for row in rows
    ]
    try:
        ap = ev.average_precision(ap_rows)
    except ev.MetricUndefinedError:
        ap = None
    doc = {
        "rows": rows,
        "aggregate": {
            "ap": ap,
            "n_units": len(rows),
            "n_matched": sum(1 for r in rows if r["matched"]),
        },
    }
    (out / "baseline.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc["aggregate"], indent=2, sort_keys=True))
    return EXIT_OK


def _det_from_doc(doc: dict):
    from .oracle import Detection

    return Detection.from_doc(doc)


def cmd_ablate(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    out = Path(config.out)
    ks = args.ks or (7,)
    lengths = args.lengths or (0.12,)
    pixel_values = args.pixel_values
    _echo_config(
        out,
        config,
        "ablate",
        {"ks": list(ks), "lengths": list(lengths), "pixel_values": list(pixel_values or [])},
    )
    manifest = _load_manifest(config)
    builder = OracleBuilder(config)
    try:
        grid = ev.run_ablation(
            manifest,
            builder.factory,
            config.attack_spec(),
            config.de_config(),
            config.eot_config(),
            ks=ks,
            rel_lengths=lengths,
            pixel_values=pixel_values,
            out_dir=out,
            n_workers=config.workers,
        )
    finally:
        builder.close()
    n_ok = sum(1 for c in grid.values() if c.get("status") == "ok")
    print(f"{n_ok}/{len(grid)} cells completed")
    return EXIT_OK if n_ok == len(grid) else EXIT_FATAL


def cmd_transfer(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    out = Path(config.out)
    _echo_config(out, config, "transfer", {"report": args.report})
    manifest = _load_manifest(config)
    source_doc = json.loads(Path(args.report).read_text())
    source = _report_from_doc(source_doc)
    builder = OracleBuilder(config)
    try:
        report = ev.transfer_eval(source, manifest, builder.factory)
    except TransportError as exc:
        log.error("oracle transport failure: %s", exc)
        return EXIT_FATAL
    finally:
        builder.close()
    report.save(out / "transfer.json")
    ev.write_report_csv(out / "transfer.csv", report)
    print(json.dumps(report.aggregate, indent=2, sort_keys=True))
    return EXIT_OK


def _report_from_doc(doc: dict) -> ev.EvalReport:
    from .oracle import Detection

    rows = []
    for r in doc["rows"]:
        rows.append(
            ev.UnitResult(
                index=int(r["index"]),
                image_path=r["image"],
                target=MaskBox.from_doc(r["target"]),
                baseline=[Detection.from_doc(d) for d in r["baseline"]],
                attacked=[Detection.from_doc(d) for d in r["attacked"]],
                gt_boxes=[MaskBox.from_doc(b) for b in r["gt_boxes"]],
                queries=int(r["queries"]),
                best_fitness=float(r["best_fitness"]) if r["best_fitness"] is not None else float("nan"),
                early_stop=bool(r["early_stop"]),
                baseline_detected=bool(r["baseline_detected"]),
                success=bool(r["success"]),
                adv_path=r.get("adv_path"),
                trace_path=r.get("trace_path"),
                error=r.get("error"),
            )
        )
    return ev.EvalReport(rows=rows, aggregate=doc.get("aggregate", {}))


def cmd_render(args: argparse.Namespace) -> int:
    genome = load_genome(args.genome)
    image = load_png(args.image)
    save_png(args.out, composite(image, genome, args.mask))
    return EXIT_OK


def cmd_stub_serve(args: argparse.Namespace) -> int:
    def make_stub(shape: tuple[int, int]):
        target = args.target or MaskBox(0, 0, shape[1], shape[0])
        reference = load_png(args.clean) if args.clean else None
        if args.kind == "coverage":
            return CoverageStub(target, lam=args.lam, reference=reference)
        template = None
        if reference is not None:
            template = reference[target.y : target.y + target.h, target.x : target.x + target.w]
        return ContrastStub(target, template=template)

    def detector(image: np.ndarray):
        return make_stub(image.shape).detect(image)

    name = f"stub:{args.kind}"
    if args.stdio:
        serve_stdio(detector, name)
        return EXIT_OK
    try:
        server = make_tcp_server(args.host, args.port, detector, name)
    except OSError as exc:
        log.error("cannot bind %s:%d: %s", args.host, args.port, exc)
        return EXIT_PORT_IN_USE
    with server:
        print(f"serving {name} on {server.server_address[0]}:{server.server_address[1]}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irblock", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="run an attack campaign over a manifest")
    _add_campaign_flags(p_attack)
    p_attack.set_defaults(func=cmd_attack)

    p_eval = sub.add_parser("evaluate", help="baseline detections and AP, no attack")
    _add_campaign_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_ablate = sub.add_parser("ablate", help="sweep block count / length / intensity")
    _add_campaign_flags(p_ablate)
    p_ablate.add_argument("--ks", type=_ints, help="comma-separated block counts")
    p_ablate.add_argument("--lengths", type=_floats, help="comma-separated relative lengths")
    p_ablate.add_argument("--pixel-values", type=_floats, dest="pixel_values")
    p_ablate.set_defaults(func=cmd_ablate)

    p_transfer = sub.add_parser("transfer", help="re-score saved adversarial images")
    _add_campaign_flags(p_transfer)
    p_transfer.add_argument("--report", required=True, help="report.json of the source campaign")
    p_transfer.set_defaults(func=cmd_transfer)

    p_render = sub.add_parser("render", help="composite a saved genome onto an image")
    p_render.add_argument("--genome", required=True)
    p_render.add_argument("--image", required=True)
    p_render.add_argument("--mask", required=True, type=_boxspec, help="x,y,w,h")
    p_render.add_argument("--out", required=True)
    p_render.set_defaults(func=cmd_render)

    p_serve = sub.add_parser("stub-serve", help="serve a builtin stub over the wire protocol")
    p_serve.add_argument("--kind", choices=("coverage", "contrast"), default="coverage")
    p_serve.add_argument("--target", type=_boxspec, help="x,y,w,h (default: whole frame)")
    p_serve.add_argument("--clean", help="clean reference PNG")
    p_serve.add_argument("--lam", type=float, default=2.0)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.add_argument("--stdio", action="store_true", help="serve over stdin/stdout")
    p_serve.set_defaults(func=cmd_stub_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        log.error("oracle transport failure: %s", exc)
        return EXIT_FATAL
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
