"""Population-based differential evolution over block genomes.

Per generation every individual spawns one child: the individual plus a
scaled difference of two other randomly chosen members, with out-of-bounds
components re-drawn uniformly inside their constraint interval, then a
binomial crossover that takes each component from the parent with probability
equal to the crossover rate. A child replaces its parent unless it is
strictly worse. Fitness is the transform-averaged detector confidence on the
target, so lower is better; the run halts as soon as the best observed value
drops below the early-stop threshold.

Randomness is organized as independent streams keyed by
(seed, image_id, generation, individual) so reruns are bit-identical
regardless of how evaluations are scheduled across workers.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .eot import EotConfig, apply_transform, sample
from .geometry import Genome, GenomeTemplate, MaskBox
from .oracle import EnsembleOracle, Oracle, ensemble_fitness, fitness

MUTATION_VARIANTS = ("paper", "rand1")


@dataclass(frozen=True)
class DeConfig:
    pop_size: int = 100
    steps: int = 10
    mutation_rate: float = 0.5
    crossover_rate: float = 0.6
    early_stop_conf: float = 0.5
    seed: int = 0
    variant: str = "paper"

    def __post_init__(self) -> None:
        if self.pop_size < 4:
            raise ValueError("population must have at least 4 members")
        if self.steps < 1:
            raise ValueError("at least one generation is required")
        if self.mutation_rate <= 0.0:
            raise ValueError("mutation rate must be positive")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover rate must lie in [0,1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.variant not in MUTATION_VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected {MUTATION_VARIANTS}")

    def to_doc(self) -> dict:
        return {
            "pop_size": self.pop_size,
            "steps": self.steps,
            "mutation_rate": self.mutation_rate,
            "crossover_rate": self.crossover_rate,
            "early_stop_conf": self.early_stop_conf,
            "seed": self.seed,
            "variant": self.variant,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DeConfig":
        return cls(**{k: doc[k] for k in cls().to_doc() if k in doc})


@dataclass
class RunTrace:
    """Outcome of one attack run: best solution, fitness history, query bill."""

    fitness_trace: list[float]
    best_fitness: float
    best_genome: Genome
    total_queries: int
    early_stop: bool
    generations_run: int

    def to_doc(self) -> dict:
        return {
            "fitness_trace": [float(v) for v in self.fitness_trace],
            "best_fitness": float(self.best_fitness),
            "best_genome": self.best_genome.to_doc(),
            "total_queries": int(self.total_queries),
            "early_stop": bool(self.early_stop),
            "generations_run": int(self.generations_run),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_doc(cls, doc: dict) -> "RunTrace":
        return cls(
            fitness_trace=[float(v) for v in doc["fitness_trace"]],
            best_fitness=float(doc["best_fitness"]),
            best_genome=Genome.from_doc(doc["best_genome"]),
            total_queries=int(doc["total_queries"]),
            early_stop=bool(doc["early_stop"]),
            generations_run=int(doc["generations_run"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunTrace":
        return cls.from_doc(json.loads(Path(path).read_text()))


def stream(seed: int, image_id: int, generation: int, individual: int) -> np.random.Generator:
    """Independent generator for one (generation, individual) work unit."""
    return np.random.default_rng(np.random.SeedSequence((seed, image_id, generation, individual)))


def init_population(
    template: GenomeTemplate, pop_size: int, rng: np.random.Generator
) -> np.ndarray:
    """(pop_size, 5k) genes, each uniform within its bounds, grid-snapped."""
    lo, hi = template.bounds_lo, template.bounds_hi
    if np.any(lo > hi):
        raise ValueError("bounds_lo must not exceed bounds_hi")
    genes = rng.uniform(lo, hi, size=(pop_size, lo.size))
    return np.stack([template.snap(row) for row in genes])


def clip_redraw(
    vector: np.ndarray, lo: np.ndarray, hi: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Replace out-of-bounds components by fresh uniform draws in-bounds."""
    out = np.array(vector, dtype=np.float64)
    bad = (out < lo) | (out > hi)
    if np.any(bad):
        out[bad] = rng.uniform(lo[bad], hi[bad])
    return out


def mutate(
    population: np.ndarray,
    g1: int,
    mutation_rate: float,
    lo: np.ndarray,
    hi: np.ndarray,
    rng: np.random.Generator,
    variant: str = "paper",
) -> np.ndarray:
    """Difference mutation of individual g1 against two distinct partners.

    The "paper" variant perturbs the individual itself; "rand1" uses an
    independent random base vector instead.
    """
    g = population.shape[0]
    if g < 4:
        raise ValueError("mutation needs a population of at least 4")
    n_partners = 2 if variant == "paper" else 3
    picks = rng.choice(g - 1, size=n_partners, replace=False)
    picks = picks + (picks >= g1)  # skip g1 while keeping uniformity
    if variant == "paper":
        base = population[g1]
        g2, g3 = picks
    else:
        base = population[picks[0]]
        g2, g3 = picks[1], picks[2]
    child = base + mutation_rate * (population[g2] - population[g3])
    return clip_redraw(child, lo, hi, rng)


def crossover(
    child: np.ndarray, parent: np.ndarray, crossover_rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Binomial mix: each component comes from the parent with prob crossover_rate."""
    if child.shape != parent.shape:
        raise ValueError(f"shape mismatch {child.shape} vs {parent.shape}")
    r = rng.random(child.size)
    return np.where(r < crossover_rate, parent, child)


def select(parent_fitness: float, child_fitness: float) -> bool:
    """True when the parent survives: only a strictly worse child is rejected."""
    return child_fitness > parent_fitness


def eot_fitness(
    genome: Genome,
    image: np.ndarray,
    mask: MaskBox,
    oracle: Oracle,
    eot_config: EotConfig,
    rng: np.random.Generator,
    target: MaskBox | None = None,
    iou_match: float = 0.5,
) -> float:
    """Transform-averaged objective; issues exactly n_samples queries per member."""
    target = target if target is not None else mask
    total = 0.0
    for _ in range(eot_config.n_samples):
        t = sample(eot_config, rng)
        rendered = apply_transform(t, image, genome, mask)
        if isinstance(oracle, EnsembleOracle):
            total += ensemble_fitness(oracle.members, rendered, target, iou_match=iou_match)
        else:
            total += fitness(oracle.detect(rendered), target, iou_match=iou_match)
    return total / eot_config.n_samples


@dataclass
class _BestTracker:
    fitness: float = float("inf")
    genes: np.ndarray | None = None

    def offer(self, fitness_value: float, genes: np.ndarray) -> None:
        if genes is not None and fitness_value < self.fitness:
            self.fitness = fitness_value
            self.genes = np.array(genes)


def run_attack(
    image: np.ndarray,
    mask: MaskBox,
    oracle: Oracle,
    de_config: DeConfig,
    eot_config: EotConfig,
    template: GenomeTemplate,
    *,
    target: MaskBox | None = None,
    image_id: int = 0,
    n_workers: int = 1,
    on_generation: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> RunTrace:
    """Full attack on one image: init, evolve, track the best, stop early.

    Query accounting follows sequential semantics: the reported total counts
    evaluations up to and including the one that tripped the early stop, in
    individual order, regardless of how many evaluations a parallel schedule
    actually issued. n_samples transform draws cost n_samples queries each.
    """
    target = target if target is not None else mask
    g, n_eot = de_config.pop_size, eot_config.n_samples
    seed = de_config.seed
    lo, hi = template.bounds_lo, template.bounds_hi

    def evaluate(genes: np.ndarray, rng: np.random.Generator) -> float:
        return eot_fitness(
            template.genome(genes), image, mask, oracle, eot_config, rng, target=target
        )

    def run_batch(jobs: list[Callable[[], tuple]]) -> list[tuple]:
        if n_workers <= 1:
            return [job() for job in jobs]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(job) for job in jobs]
            return [f.result() for f in futures]

    best = _BestTracker()
    trace: list[float] = []
    queries = 0
    early = False
    generations_run = 0

    population = init_population(template, g, stream(seed, image_id, 0, g))
    pop_fitness = np.full(g, np.nan)

    def fold_init(i: int, f: float) -> None:
        nonlocal queries, early
        queries += n_eot
        pop_fitness[i] = f
        best.offer(f, population[i])
        if best.fitness < de_config.early_stop_conf:
            early = True

    init_jobs = [
        (lambda i=i: (i, evaluate(population[i], stream(seed, image_id, 0, i))))
        for i in range(g)
    ]
    if n_workers <= 1:
        for job in init_jobs:
            i, f = job()
            fold_init(i, f)
            if early:
                break
    else:
        for i, f in run_batch(init_jobs):
            if early:
                continue  # issued but past the sequential stopping point
            fold_init(i, f)
    trace.append(best.fitness)

    degenerate = bool(np.all(lo == hi))
    if not early and not degenerate:
        for gen in range(1, de_config.steps + 1):
            parents = population.copy()
            parent_fitness = pop_fitness.copy()

            def make_child(i: int, gen: int = gen) -> Callable[[], tuple]:
                def job() -> tuple:
                    rng = stream(seed, image_id, gen, i)
                    mutant = mutate(
                        parents, i, de_config.mutation_rate, lo, hi, rng, de_config.variant
                    )
                    child = template.snap(
                        crossover(mutant, parents[i], de_config.crossover_rate, rng)
                    )
                    return i, child, evaluate(child, rng)

                return job

            def fold(i: int, child: np.ndarray, f: float) -> None:
                nonlocal queries, early
                queries += n_eot
                best.offer(f, child)
                if best.fitness < de_config.early_stop_conf:
                    early = True
                if not select(parent_fitness[i], f):
                    population[i] = child
                    pop_fitness[i] = f

            jobs = [make_child(i) for i in range(g)]
            if n_workers <= 1:
                for job in jobs:
                    i, child, f = job()
                    fold(i, child, f)
                    if early:
                        break
            else:
                for i, child, f in run_batch(jobs):
                    if early:
                        continue
                    fold(i, child, f)
            generations_run = gen
            trace.append(best.fitness)
            if on_generation is not None:
                on_generation(gen, population.copy(), pop_fitness.copy())
            if early:
                break

    return RunTrace(
        fitness_trace=trace,
        best_fitness=best.fitness,
        best_genome=template.genome(best.genes),
        total_queries=queries,
        early_stop=early,
        generations_run=generations_run,
    )
