"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion; every tolerance is pinned in the assertions below.
"""

import sys
import threading
import time

import numpy as np
import pytest

from irblock.eot import EotConfig
from irblock.evaluate import asr, average_precision
from irblock.geometry import (
    Block,
    Genome,
    MaskBox,
    block_to_rect,
    default_template,
    width_for,
)
from irblock.optimizer import DeConfig, clip_redraw, crossover, eot_fitness, run_attack
from irblock.oracle import CoverageStub, Detection, Oracle, fitness
from irblock.raster import composite
from irblock.synthetic import pedestrian_image, random_person_box
from irblock.wire import WireOracle, make_tcp_server, run_conformance_suite

from reference import asr_ref, average_precision_ref, make_detection, rasterize_bruteforce


def ok(name: str) -> None:
    print(f"\nACCEPTANCE PASS: {name}")


def random_block(rng) -> Block:
    return Block(
        anchor_u=float(rng.uniform(0, 1)),
        anchor_v=float(rng.uniform(0, 1)),
        pixel_value=float(rng.uniform(0, 1)),
        rel_length=float(rng.uniform(0.02, 1.0)),
        angle_deg=float(rng.uniform(0, 180)),
    )


def single_block_genome(block: Block) -> Genome:
    return Genome(
        genes=block.genes(),
        bounds_lo=np.zeros(5),
        bounds_hi=np.array([1, 1, 1, 1, 180.0]),
    )


class TestRasterizationOracleEquivalence:
    def test_500_random_rectangles_in_budget(self):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        mismatches = 0
        for i in range(500):
            if i % 5 == 0:  # every fifth case also exercises mask clipping
                mask = MaskBox(
                    int(rng.integers(0, 24)),
                    int(rng.integers(0, 24)),
                    int(rng.integers(8, 40)),
                    int(rng.integers(8, 40)),
                )
            else:
                mask = MaskBox(0, 0, 64, 64)
            block = random_block(rng)
            background = 0.5
            value = block.pixel_value
            if abs(value - background) < 0.05:  # keep the diff observable
                block = Block(block.anchor_u, block.anchor_v, 0.95, block.rel_length, block.angle_deg)
                value = 0.95
            image = np.full((64, 64), background)
            out = composite(image, single_block_genome(block), mask)
            got = out != image
            want = rasterize_bruteforce(block_to_rect(block, mask), mask, (64, 64))
            mismatches += int(np.count_nonzero(got != want))
        elapsed = time.perf_counter() - start
        assert mismatches == 0
        assert elapsed < 10.0, f"took {elapsed:.1f}s"
        ok(f"rasterization oracle equivalence (500 rects, 0 mismatches, {elapsed:.1f}s)")


class TestGeometry:
    def test_side_lengths_and_width_rule(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            block = random_block(rng)
            mask = MaskBox(
                int(rng.integers(0, 40)),
                int(rng.integers(0, 40)),
                int(rng.integers(1, 200)),
                int(rng.integers(1, 200)),
            )
            rect = block_to_rect(block, mask)
            length = block.rel_length * mask.w
            width = width_for(block.pixel_value, length)
            sides = rect.side_lengths()
            for got, want in zip(sides, (length, width, length, width)):
                assert got == pytest.approx(want, rel=1e-6)
        for length in (1.0, 7.3, 100.0, 4096.0):
            assert width_for(0.9, length) == 0.74 * length
            assert width_for(0.1, length) == 0.45 * length
        ok("geometry: side lengths within 1e-6, width rule exact")


class _HashOracle(Oracle):
    def __init__(self, target: MaskBox):
        super().__init__("hash-landscape")
        self.target = target

    def _detect(self, image):
        import hashlib

        digest = hashlib.sha256(np.ascontiguousarray(image).tobytes()).digest()
        conf = int.from_bytes(digest[:8], "big") / 2.0**64
        x1, y1, x2, y2 = self.target.corners()
        return [Detection(x1, y1, x2, y2, conf)]


class TestDeCorrectness:
    img = np.full((32, 32), 0.4)
    mask = MaskBox(4, 4, 24, 24)

    def template(self):
        return default_template(2, rel_length=(0.05, 0.3), quantize="grid01")

    def test_fifty_seeds_monotone_and_bounded(self):
        tpl = self.template()
        for seed in range(50):
            violations = []

            def check(gen, pop, fits):
                in_bounds = np.all(pop >= tpl.bounds_lo) and np.all(pop <= tpl.bounds_hi)
                pix = pop[:, 2::5]
                on_grid = np.allclose(np.round(pix * 10) / 10, pix)
                if not (in_bounds and on_grid):
                    violations.append(gen)

            de = DeConfig(pop_size=12, steps=6, seed=seed, early_stop_conf=0.0)
            trace = run_attack(
                self.img, self.mask, _HashOracle(self.mask), de, EotConfig.identity(),
                tpl, on_generation=check,
            )
            assert np.all(np.diff(trace.fitness_trace) <= 0.0)
            assert violations == []
        ok("DE correctness: 50 seeds, monotone traces, bounds and grids hold")

    def test_bit_identical_across_worker_counts(self):
        tpl = self.template()
        for seed in (0, 1, 2, 3, 4):
            de = DeConfig(pop_size=10, steps=4, seed=seed, early_stop_conf=0.0)
            eot = EotConfig(n_samples=2, seed=seed)
            one = run_attack(self.img, self.mask, _HashOracle(self.mask), de, eot, tpl, n_workers=1)
            eight = run_attack(self.img, self.mask, _HashOracle(self.mask), de, eot, tpl, n_workers=8)
            assert one.to_json() == eight.to_json()
        ok("DE correctness: bit-identical traces across 1- and 8-worker runs")


class TestStubAttackEfficacy:
    def test_twenty_images(self):
        rng = np.random.default_rng(101)
        pop, steps = 100, 10
        successes, queries = [], []
        start = time.perf_counter()
        for i in range(20):
            box = random_person_box(rng, 256, 256)  # always taller than 120 px
            assert box.h > 120
            image = pedestrian_image(256, 256, box, background=0.15, body=0.5)
            mask = MaskBox(0, 0, 256, 256)
            template = default_template(
                7, rel_length=0.12, pixel_value=0.9, quantize="physical"
            )
            oracle = CoverageStub(box, lam=2.0, reference=image)
            de = DeConfig(pop_size=pop, steps=steps, seed=1000 + i, early_stop_conf=0.5)
            trace = run_attack(
                image, mask, oracle, de, EotConfig.identity(), template,
                target=box, image_id=i,
            )
            successes.append(trace.best_fitness < 0.5)
            queries.append(trace.total_queries)
            assert oracle.query_count == trace.total_queries
        elapsed = time.perf_counter() - start
        success_rate = np.mean(successes)
        mean_queries = float(np.mean(queries))
        assert success_rate >= 0.9, f"success rate {success_rate}"
        assert mean_queries <= pop * (steps + 1), f"mean queries {mean_queries}"
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
        ok(
            "stub-attack efficacy: "
            f"{int(np.sum(successes))}/20 below 0.5, mean queries {mean_queries:.1f}, {elapsed:.1f}s"
        )


class TestMetricOracles:
    def test_worked_examples(self):
        label = MaskBox(0, 0, 10, 10)
        labels = [label] * 10
        attacked = [[make_detection(label, 0.9)] if i < 3 else [] for i in range(10)]
        assert asr(labels, attacked) == pytest.approx(0.7, abs=1e-12)

        gt = [MaskBox(0, 0, 10, 10), MaskBox(20, 20, 10, 10)]
        dets = [
            make_detection(gt[0], 0.9),
            Detection(40.0, 40.0, 50.0, 50.0, 0.8),
            make_detection(gt[1], 0.7),
        ]
        assert average_precision([(dets, gt)]) == pytest.approx(5.0 / 6.0, abs=1e-12)
        ok("metric oracles: worked examples reproduce exactly")

    def test_exhaustive_family_against_bruteforce(self):
        rng = np.random.default_rng(55)
        checked = 0
        for n_images in (1, 2, 3, 5):
            for trial in range(60):
                labels, attacked, rows = [], [], []
                for _ in range(n_images):
                    n_gt = int(rng.integers(1, 5))  # up to 4 boxes
                    gts = [
                        MaskBox(int(rng.integers(0, 30)), int(rng.integers(0, 30)),
                                int(rng.integers(6, 14)), int(rng.integers(6, 14)))
                        for _ in range(n_gt)
                    ]
                    dets = []
                    for _ in range(int(rng.integers(0, 5))):
                        anchor = gts[int(rng.integers(0, n_gt))]
                        dx, dy = rng.uniform(-5, 5, size=2)
                        conf = float(np.round(rng.uniform(0, 1), 3))
                        cls = "person" if rng.random() < 0.85 else "car"
                        dets.append(
                            Detection(anchor.x + dx, anchor.y + dy,
                                      anchor.x + dx + anchor.w, anchor.y + dy + anchor.h,
                                      conf, cls)
                        )
                    rows.append((dets, gts))
                    labels.append(gts[0])
                    attacked.append(dets)
                assert asr(labels, attacked) == asr_ref(labels, attacked)
                assert average_precision(rows) == pytest.approx(
                    average_precision_ref(rows), abs=1e-12
                )
                checked += 1
        ok(f"metric oracles: {checked} generated cases match brute force exactly")


class TestMutationCrossoverStatistics:
    def test_clip_redraw_uniformity(self):
        rng = np.random.default_rng(77)
        lo, hi = np.zeros(1), np.ones(1)
        redrawn = []
        while len(redrawn) < 10_000:
            v = np.array([float(rng.uniform(1.01, 3.0))])  # always violates
            redrawn.append(float(clip_redraw(v, lo, hi, rng)[0]))
        redrawn = np.array(redrawn)
        assert abs(redrawn.mean() - 0.5) < 0.02
        assert redrawn.max() < 1.0
        ok(f"mutation clipping: {len(redrawn)} redraws, mean {redrawn.mean():.3f}")

    def test_crossover_inheritance_rate(self):
        rng = np.random.default_rng(78)
        child = np.zeros(10_000)
        parent = np.ones(10_000)
        out = crossover(child, parent, 0.6, rng)
        rate = out.mean()
        assert abs(rate - 0.6) < 0.02
        ok(f"crossover: parent inheritance rate {rate:.3f} (target 0.6 +/- 0.02)")


class TestProtocolConformance:
    TARGET = MaskBox(2, 2, 8, 8)

    @staticmethod
    def detector(img):
        return CoverageStub(TestProtocolConformance.TARGET, lam=2.0).detect(img)

    def test_both_transports(self):
        server = make_tcp_server("127.0.0.1", 0, self.detector, "acceptance-stub")
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            tcp_passed = run_conformance_suite(
                lambda: WireOracle.from_tcp("127.0.0.1", port, timeout=10)
            )
        finally:
            server.shutdown()
            server.server_close()
        cmd = [
            sys.executable, "-m", "irblock.cli", "stub-serve", "--stdio",
            "--kind", "coverage", "--target", "2,2,8,8",
        ]
        sub_passed = run_conformance_suite(lambda: WireOracle.from_command(cmd, timeout=30))
        assert len(tcp_passed) == 6 and len(sub_passed) == 6
        # 8-bit quantization on the wire is round-half-up
        from irblock.wire import encode_pixels
        import base64

        raw = base64.b64decode(encode_pixels(np.array([[127.4 / 255.0, 127.5 / 255.0]])))
        assert list(raw) == [127, 128]
        ok("protocol conformance: subprocess and TCP transports, round-half-up codec")


class TestDeterminismIdentity:
    def test_zero_block_composite_identity(self):
        rng = np.random.default_rng(5)
        image = rng.random((48, 48))
        empty = Genome(genes=np.zeros(0), bounds_lo=np.zeros(0), bounds_hi=np.zeros(0))
        out = composite(image, empty, MaskBox(0, 0, 48, 48))
        assert np.array_equal(out, image)
        ok("determinism: zero-block composite is bit-identical to input")

    def test_identity_eot_equals_plain_fitness(self):
        rng = np.random.default_rng(6)
        image = np.full((32, 32), 0.4)
        mask = MaskBox(4, 4, 24, 24)
        template = default_template(2, rel_length=(0.05, 0.3))
        genes = template.snap(rng.uniform(template.bounds_lo, template.bounds_hi))
        genome = template.genome(genes)
        oracle = CoverageStub(mask, lam=2.0, reference=image)
        via_eot = eot_fitness(
            genome, image, mask, oracle, EotConfig.identity(), np.random.default_rng(0)
        )
        plain = fitness(oracle.detect(composite(image, genome, mask)), mask)
        assert via_eot == plain
        ok("determinism: identity transform distribution reduces to plain fitness")
