import hashlib

import numpy as np
import pytest

from irblock.eot import EotConfig
from irblock.geometry import Block, GenomeTemplate, MaskBox, default_template
from irblock.optimizer import (
    DeConfig,
    RunTrace,
    clip_redraw,
    crossover,
    eot_fitness,
    init_population,
    mutate,
    run_attack,
    select,
    stream,
)
from irblock.oracle import CoverageStub, Detection, Oracle

from reference import rasterize_bruteforce
from irblock.geometry import block_to_rect


class HashOracle(Oracle):
    """Deterministic pseudo-random fitness landscape over images."""

    def __init__(self, target: MaskBox):
        super().__init__("hash-landscape")
        self.target = target

    def _detect(self, image):
        digest = hashlib.sha256(np.ascontiguousarray(image).tobytes()).digest()
        conf = int.from_bytes(digest[:8], "big") / 2.0**64
        x1, y1, x2, y2 = self.target.corners()
        return [Detection(x1, y1, x2, y2, conf)]


class ConstantOracle(Oracle):
    def __init__(self, target: MaskBox, conf: float):
        super().__init__(f"const:{conf}")
        self.target = target
        self.conf = conf

    def _detect(self, image):
        if self.conf <= 0.0:
            return []
        x1, y1, x2, y2 = self.target.corners()
        return [Detection(x1, y1, x2, y2, self.conf)]


def small_setup(k=2, quantize="grid01"):
    img = np.full((32, 32), 0.4)
    mask = MaskBox(4, 4, 24, 24)
    tpl = default_template(k, rel_length=(0.05, 0.3), quantize=quantize)
    return img, mask, tpl


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            DeConfig(pop_size=3)
        with pytest.raises(ValueError):
            DeConfig(steps=0)
        with pytest.raises(ValueError):
            DeConfig(mutation_rate=0.0)
        with pytest.raises(ValueError):
            DeConfig(crossover_rate=1.5)
        with pytest.raises(ValueError):
            DeConfig(variant="best2")

    def test_doc_round_trip(self):
        cfg = DeConfig(pop_size=10, steps=3, seed=4)
        assert DeConfig.from_doc(cfg.to_doc()) == cfg


class TestInitPopulation:
    def test_degenerate_bounds_give_identical_genomes(self, rng):
        tpl = GenomeTemplate(
            k=1,
            bounds_lo=np.array([0.3, 0.3, 0.9, 0.1, 45.0]),
            bounds_hi=np.array([0.3, 0.3, 0.9, 0.1, 45.0]),
            quantize="none",
        )
        pop = init_population(tpl, 8, rng)
        assert np.all(pop == pop[0])

    def test_same_seed_same_population(self):
        tpl = default_template(2, rel_length=(0.05, 0.3))
        a = init_population(tpl, 20, np.random.default_rng(9))
        b = init_population(tpl, 20, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_uniformity_of_free_gene(self):
        tpl = GenomeTemplate(
            k=1,
            bounds_lo=np.array([0.0, 0, 0, 0.1, 0]),
            bounds_hi=np.array([1.0, 0, 0, 0.1, 0]),
            quantize="none",
        )
        pop = init_population(tpl, 10_000, np.random.default_rng(3))
        assert abs(pop[:, 0].mean() - 0.5) < 0.02

    def test_snapped_to_grid(self, rng):
        tpl = default_template(1, rel_length=(0.05, 0.3), quantize="grid01")
        pop = init_population(tpl, 50, rng)
        assert np.allclose(np.round(pop[:, 2] * 10) / 10, pop[:, 2])


class TestMutate:
    def test_zero_difference_returns_base(self, rng):
        pop = np.vstack([np.full(5, 0.5), np.full(5, 0.2), np.full(5, 0.2), np.full(5, 0.2)])
        lo, hi = np.zeros(5), np.ones(5)
        child = mutate(pop, 0, 0.5, lo, hi, rng)
        assert np.array_equal(child, pop[0])

    def test_formula_over_partner_choices(self, rng):
        # with distinct partner rows the result must be base + R*(a-b) for some ordered pair
        pop = np.array([[0.5], [0.8], [0.2], [0.4]])
        lo, hi = np.zeros(1), np.ones(1)
        allowed = set()
        for a in (0.8, 0.2, 0.4):
            for b in (0.8, 0.2, 0.4):
                if a != b:
                    allowed.add(round(0.5 + 0.5 * (a - b), 12))
        seen = set()
        for s in range(300):
            child = mutate(pop, 0, 0.5, lo, hi, np.random.default_rng(s))
            seen.add(round(float(child[0]), 12))
        assert seen <= allowed
        assert len(seen) == len(allowed)  # every ordered pair eventually drawn

    def test_out_of_bounds_redrawn_uniformly(self):
        # base 0.95 plus any difference except +-(0.5) lands outside [0,1],
        # and the only in-bounds algebraic outcome is 0.45
        pop = np.array([[0.95], [1.0], [0.0], [0.5]])
        lo, hi = np.zeros(1), np.ones(1)
        redrawn = []
        for s in range(20_000):
            rng = np.random.default_rng(s)
            child = mutate(pop, 0, 1.0, lo, hi, rng)
            v = float(child[0])
            if abs(v - 0.45) > 1e-12:
                redrawn.append(v)
        redrawn = np.array(redrawn)
        assert len(redrawn) > 5000
        assert abs(redrawn.mean() - 0.5) < 0.02
        assert redrawn.max() < 1.0 and redrawn.min() > 0.0  # redrawn, never clamped

    def test_needs_four_members(self, rng):
        pop = np.zeros((3, 5))
        with pytest.raises(ValueError):
            mutate(pop, 0, 0.5, np.zeros(5), np.ones(5), rng)


class TestCrossover:
    def test_rate_zero_keeps_child(self, rng):
        child, parent = np.arange(5.0), np.arange(5.0) + 10
        assert np.array_equal(crossover(child, parent, 0.0, rng), child)

    def test_rate_one_takes_parent(self, rng):
        child, parent = np.arange(5.0), np.arange(5.0) + 10
        assert np.array_equal(crossover(child, parent, 1.0, rng), parent)

    def test_inheritance_rate(self):
        child = np.zeros(10_000)
        parent = np.ones(10_000)
        out = crossover(child, parent, 0.6, np.random.default_rng(11))
        assert abs(out.mean() - 0.6) < 0.02

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            crossover(np.zeros(4), np.zeros(5), 0.5, rng)


class TestSelect:
    def test_parent_kept_when_child_worse(self):
        assert select(0.4, 0.6) is True

    def test_child_wins_when_better(self):
        assert select(0.6, 0.4) is False

    def test_tie_goes_to_child(self):
        assert select(0.5, 0.5) is False


class TestEotFitness:
    def test_identity_single_sample_equals_plain_fitness(self, rng):
        img, mask, tpl = small_setup()
        genes = init_population(tpl, 4, rng)[0]
        genome = tpl.genome(genes)
        oracle = CoverageStub(mask, lam=2.0, reference=img)
        from irblock.oracle import fitness as plain_fitness
        from irblock.raster import composite

        value = eot_fitness(
            genome, img, mask, oracle, EotConfig.identity(), np.random.default_rng(0)
        )
        expected = plain_fitness(oracle.detect(composite(img, genome, mask)), mask)
        assert value == expected

    def test_clean_image_full_confidence(self):
        img, mask, _ = small_setup()
        from irblock.geometry import Genome

        zero = Genome(  # zero-length blocks cover nothing
            genes=np.tile([0.5, 0.5, 0.9, 0.0, 0.0], 2),
            bounds_lo=np.tile([0, 0, 0, 0, 0.0], 2),
            bounds_hi=np.tile([1, 1, 1, 1, 180.0], 2),
        )
        oracle = CoverageStub(mask, lam=2.0, reference=img)
        value = eot_fitness(zero, img, mask, oracle, EotConfig.identity(), np.random.default_rng(0))
        assert value == 1.0

    def test_quarter_coverage_exact_value_and_queries(self):
        # two cold blocks tiling exactly a quarter of a 16x16 box
        img = np.full((16, 16), 0.5)
        mask = MaskBox(0, 0, 16, 16)
        blocks = [Block(0.0, 0.0, 0.1, 0.5, 0.0), Block(0.25, 0.0, 0.1, 0.5, 0.0)]
        genes = np.concatenate([b.genes() for b in blocks])
        tpl = GenomeTemplate(
            k=2,
            bounds_lo=np.tile([0, 0, 0, 0, 0.0], 2),
            bounds_hi=np.tile([1, 1, 1, 1, 180.0], 2),
            quantize="none",
        )
        genome = tpl.genome(genes)
        covered = 0
        for b in blocks:
            covered += rasterize_bruteforce(block_to_rect(b, mask), mask, img.shape).sum()
        assert covered == 64  # exactly a quarter of 256
        oracle = CoverageStub(mask, lam=2.0, reference=img)
        cfg = EotConfig.identity(n_samples=4)
        value = eot_fitness(genome, img, mask, oracle, cfg, np.random.default_rng(0))
        assert value == 0.5
        assert oracle.query_count == 4


class TestRunAttack:
    def test_flat_landscape_full_budget(self):
        img, mask, tpl = small_setup()
        oracle = ConstantOracle(mask, 1.0)
        de = DeConfig(pop_size=6, steps=3, seed=2)
        eot = EotConfig.identity(n_samples=2)
        trace = run_attack(img, mask, oracle, de, eot, tpl)
        assert trace.best_fitness == 1.0
        assert not trace.early_stop
        assert trace.total_queries == 2 * 6 * (3 + 1)
        assert oracle.query_count == trace.total_queries

    def test_early_stop_on_first_evaluation(self):
        img, mask, tpl = small_setup()
        oracle = ConstantOracle(mask, 0.3)
        de = DeConfig(pop_size=6, steps=3, seed=2)
        trace = run_attack(img, mask, oracle, de, EotConfig.identity(), tpl)
        assert trace.early_stop
        assert trace.total_queries == 1
        assert oracle.query_count == 1

    def test_trace_non_increasing_random_landscapes(self):
        img, mask, tpl = small_setup()
        for seed in range(20):
            oracle = HashOracle(mask)
            de = DeConfig(pop_size=8, steps=5, seed=seed, early_stop_conf=0.0)
            trace = run_attack(img, mask, oracle, de, EotConfig.identity(), tpl)
            diffs = np.diff(trace.fitness_trace)
            assert np.all(diffs <= 0.0)
            assert trace.total_queries == 8 * 6

    def test_population_in_bounds_and_on_grid_every_generation(self):
        img, mask, tpl = small_setup(quantize="grid01")
        seen = []

        def check(gen, pop, fits):
            seen.append(gen)
            assert np.all(pop >= tpl.bounds_lo) and np.all(pop <= tpl.bounds_hi)
            pix = pop[:, 2::5]
            assert np.allclose(np.round(pix * 10) / 10, pix)

        oracle = HashOracle(mask)
        de = DeConfig(pop_size=8, steps=4, seed=3, early_stop_conf=0.0)
        run_attack(img, mask, oracle, de, EotConfig.identity(), tpl, on_generation=check)
        assert seen == [1, 2, 3, 4]

    def test_bit_identical_across_workers_and_reruns(self):
        img, mask, tpl = small_setup()
        de = DeConfig(pop_size=8, steps=4, seed=5, early_stop_conf=0.0)
        eot = EotConfig(n_samples=2, seed=5)
        traces = [
            run_attack(img, mask, HashOracle(mask), de, eot, tpl, n_workers=w)
            for w in (1, 8, 1)
        ]
        assert traces[0].to_json() == traces[1].to_json() == traces[2].to_json()

    def test_degenerate_bounds_return_after_init(self):
        img, mask, _ = small_setup()
        tpl = GenomeTemplate(
            k=1,
            bounds_lo=np.array([0.5, 0.5, 0.9, 0.1, 45.0]),
            bounds_hi=np.array([0.5, 0.5, 0.9, 0.1, 45.0]),
            quantize="none",
        )
        oracle = ConstantOracle(mask, 0.9)
        de = DeConfig(pop_size=6, steps=5, seed=1)
        trace = run_attack(img, mask, oracle, de, EotConfig.identity(), tpl)
        assert trace.total_queries == 6
        assert trace.generations_run == 0
        assert np.array_equal(trace.best_genome.genes, tpl.bounds_lo)

    def test_query_bound(self):
        img, mask, tpl = small_setup()
        for seed in range(5):
            oracle = HashOracle(mask)
            de = DeConfig(pop_size=6, steps=4, seed=seed)
            eot = EotConfig.identity(n_samples=3)
            trace = run_attack(img, mask, oracle, de, eot, tpl)
            assert trace.total_queries <= 3 * 6 * 5
            if not trace.early_stop:
                assert trace.total_queries == 3 * 6 * 5

    def test_trace_round_trip(self, tmp_path):
        img, mask, tpl = small_setup()
        trace = run_attack(
            img, mask, HashOracle(mask), DeConfig(pop_size=6, steps=2, seed=8), EotConfig.identity(), tpl
        )
        path = tmp_path / "trace.json"
        trace.save(path)
        loaded = RunTrace.load(path)
        assert loaded.to_json() == trace.to_json()


class TestStreams:
    def test_streams_independent_of_order(self):
        a = stream(1, 2, 3, 4).random(5)
        b = stream(1, 2, 3, 5).random(5)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, stream(1, 2, 3, 4).random(5))

    def test_clip_redraw_leaves_inliers(self, rng):
        lo, hi = np.zeros(4), np.ones(4)
        v = np.array([0.2, 0.8, 0.5, 0.6])
        assert np.array_equal(clip_redraw(v, lo, hi, rng), v)
