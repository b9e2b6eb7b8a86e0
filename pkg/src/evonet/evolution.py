"""Mutation-only genetic search over networks and their local trainers.

Each generation every new individual is decoded, trained for a fixed number
of epochs by its own trainer, and scored by RMSE on the fitness set. Parents
are drawn uniformly from the best ``selection_fraction`` of the population,
mutated, and the top ``ceil(elitism_fraction * N)`` individuals are carried
over unchanged, fitness included. With Lamarckian write-back (the default)
the trained weights are re-encoded into the offspring's genome.

Randomness is derived from ``(seed, generation, index)`` alone, so a run is
reproducible whatever the number of worker processes.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .genome import Genome, GenomeLayout, decode, mutate, random_genome, with_trained_weights
from .network import EvaluationBatch, NetworkPhenotype, flatten_params, predict, rmse, unflatten_params
from .trainers import Termination, TrainerKind, TrainerSpec, train

# stream tags mixed into the per-individual seeds
_INIT, _SELECT, _MUTATE = 0, 1, 2


@dataclass(frozen=True)
class EvolutionConfig:
    """Search settings; the defaults are the standard full budget."""

    population_size: int = 40
    max_generations: int = 40
    max_hidden: int = 16
    epochs_per_eval: int = 500
    elitism_fraction: float = 0.05
    selection_fraction: float = 0.50
    mutation_rate: float = 0.40
    fitness_split: str = "test"
    fixed_trainer: TrainerKind | None = None
    target_rmse: float | None = None
    seed: int = 0
    writeback: str = "lamarckian"
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.max_generations < 1:
            raise ValueError("max_generations must be at least 1")
        if not 1 <= self.max_hidden <= 32:
            raise ValueError("max_hidden must be in [1, 32]")
        if self.epochs_per_eval < 0:
            raise ValueError("epochs_per_eval must be non-negative")
        for name in ("elitism_fraction", "selection_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if self.fitness_split not in ("test", "holdout"):
            raise ValueError("fitness_split must be 'test' or 'holdout'")
        if self.writeback not in ("lamarckian", "baldwinian"):
            raise ValueError("writeback must be 'lamarckian' or 'baldwinian'")
        if self.target_rmse is not None and not self.target_rmse >= 0:
            raise ValueError("target_rmse must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if isinstance(self.fixed_trainer, str):
            object.__setattr__(self, "fixed_trainer", TrainerKind.parse(self.fixed_trainer))

    @property
    def algorithm_mode(self) -> str:
        return "evolved" if self.fixed_trainer is None else f"fixed({self.fixed_trainer.name})"

    @property
    def n_elite(self) -> int:
        return min(self.population_size, math.ceil(self.elitism_fraction * self.population_size))

    @property
    def pool_size(self) -> int:
        return max(1, math.floor(self.selection_fraction * self.population_size))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fixed_trainer"] = None if self.fixed_trainer is None else self.fixed_trainer.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        return cls(**d)


@dataclass(frozen=True)
class Individual:
    genome: Genome
    fitness: float | None = None
    trained_phenotype: NetworkPhenotype | None = None
    trainer: TrainerSpec | None = None
    train_rmse: float | None = None
    test_rmse: float | None = None
    termination: Termination | None = None
    clamped: int = 0

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    def to_dict(self) -> dict:
        net = self.trained_phenotype
        return {
            "genome": self.genome.to_string(),
            "fitness": self.fitness,
            "train_rmse": self.train_rmse,
            "test_rmse": self.test_rmse,
            "trainer": None if self.trainer is None else {"kind": self.trainer.kind.name, **self.trainer.as_dict()},
            "architecture": None if net is None else net.architecture,
            "activations": None if net is None else [a.tag for a in net.activations],
            "params": None if net is None else flatten_params(net).tolist(),
            "termination": None if self.termination is None else self.termination.value,
            "clamped": self.clamped,
        }

    @classmethod
    def from_dict(cls, d: dict, layout: GenomeLayout) -> "Individual":
        from .activations import ActivationKind
        from .network import NetworkShape

        net = None
        if d.get("params") is not None:
            shape = NetworkShape(layout.n_inputs, tuple(ActivationKind.from_tag(t) for t in d["activations"]))
            net = unflatten_params(shape, d["params"])
        spec = None
        if d.get("trainer") is not None:
            t = dict(d["trainer"])
            spec = TrainerSpec.from_dict(TrainerKind.parse(t.pop("kind")), t)
        return cls(
            genome=Genome.from_string(layout, d["genome"]),
            fitness=d.get("fitness"),
            trained_phenotype=net,
            trainer=spec,
            train_rmse=d.get("train_rmse"),
            test_rmse=d.get("test_rmse"),
            termination=None if d.get("termination") is None else Termination(d["termination"]),
            clamped=d.get("clamped", 0),
        )


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_rmse: float
    mean_rmse: float
    worst_rmse: float
    mean_test_rmse: float
    best_architecture: str
    best_trainer: str
    trainer_kind_histogram: dict
    best_genome: str
    evaluations: int
    clamped_weights: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationStats":
        return cls(**d)


@dataclass
class EvolutionReport:
    config: EvolutionConfig
    n_inputs: int
    generations: list[GenerationStats] = field(default_factory=list)
    best: Individual | None = None
    predictions: list[float] = field(default_factory=list)
    stopped_by: str = "max_generations"

    @property
    def layout(self) -> GenomeLayout:
        return GenomeLayout(self.n_inputs, self.config.max_hidden)

    @property
    def trace(self) -> list[float]:
        """Population-mean test RMSE per generation."""
        return [g.mean_test_rmse for g in self.generations]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_inputs": self.n_inputs,
            "generations": [g.to_dict() for g in self.generations],
            "best": None if self.best is None else self.best.to_dict(),
            "predictions": list(self.predictions),
            "stopped_by": self.stopped_by,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionReport":
        cfg = EvolutionConfig.from_dict(d["config"])
        layout = GenomeLayout(d["n_inputs"], cfg.max_hidden)
        return cls(
            config=cfg,
            n_inputs=d["n_inputs"],
            generations=[GenerationStats.from_dict(g) for g in d["generations"]],
            best=None if d["best"] is None else Individual.from_dict(d["best"], layout),
            predictions=list(d["predictions"]),
            stopped_by=d.get("stopped_by", "max_generations"),
        )


def evaluate(individual: Individual, train_set: EvaluationBatch, fitness_set: EvaluationBatch,
             config: EvolutionConfig, test_set: EvaluationBatch | None = None) -> Individual:
    """Decode, train and score ``individual``; returns a new, evaluated individual.

    The trainer returns its best parameters even on numerical failure, so the
    fitness is always the honest RMSE of what training produced.
    """
    net, spec = decode(individual.genome, config.fixed_trainer)
    result = train(net, train_set, spec, config.epochs_per_eval)
    trained = result.network(net.shape)
    fitness = rmse(trained, fitness_set)
    if not math.isfinite(fitness):
        fitness = math.inf
    genome, clamped = individual.genome, 0
    if config.writeback == "lamarckian":
        genome, clamped = with_trained_weights(genome, result.final_params)
    test = fitness if test_set is None or test_set is fitness_set else rmse(trained, test_set)
    return Individual(
        genome=genome,
        fitness=fitness,
        trained_phenotype=trained,
        trainer=spec,
        train_rmse=rmse(trained, train_set),
        test_rmse=test,
        termination=result.termination,
        clamped=clamped,
    )


def _rank_key(item: tuple[int, Individual]):
    i, ind = item
    if ind.fitness is None:
        raise ValueError("every individual must be evaluated before ranking")
    return (ind.fitness, ind.genome.sort_key(), i)


def rank(population: Sequence[Individual]) -> list[Individual]:
    """Best first: ascending fitness, then genome bytes, then position."""
    return [ind for _, ind in sorted(enumerate(population), key=_rank_key)]


def select_parents(population: Sequence[Individual], config: EvolutionConfig,
                   rng: np.random.Generator, n: int | None = None) -> list[Individual]:
    """Draw ``n`` parents uniformly, with replacement, from the top-ranked pool."""
    if not population:
        raise ValueError("cannot select from an empty population")
    n = len(population) if n is None else n
    pool = rank(population)[:max(1, math.floor(config.selection_fraction * len(population)))]
    return [pool[int(k)] for k in rng.integers(0, len(pool), n)]


def _evaluate_task(args):
    return evaluate(*args)


def _evaluate_all(individuals, train_set, fitness_set, config, test_set, executor):
    todo = [(i, ind) for i, ind in enumerate(individuals) if not ind.evaluated]
    tasks = [(ind, train_set, fitness_set, config, test_set) for _, ind in todo]
    if executor is None:
        done = [_evaluate_task(t) for t in tasks]
    else:
        done = list(executor.map(_evaluate_task, tasks))  # map preserves submission order
    out = list(individuals)
    for (i, _), ind in zip(todo, done):
        out[i] = ind
    return out


def _stats(gen: int, population: list[Individual], n_evaluated: int) -> GenerationStats:
    ranked = rank(population)
    fit = np.array([ind.fitness for ind in population])
    best = ranked[0]
    hist = Counter(ind.trainer.kind.name for ind in population)
    return GenerationStats(
        generation=gen,
        best_rmse=float(fit.min()),
        mean_rmse=float(fit.mean()),
        worst_rmse=float(fit.max()),
        mean_test_rmse=float(np.mean([ind.test_rmse for ind in population])),
        best_architecture=best.trained_phenotype.architecture,
        best_trainer=best.trainer.kind.name,
        trainer_kind_histogram={k.name: hist.get(k.name, 0) for k in TrainerKind},
        best_genome=best.genome.to_string(),
        evaluations=n_evaluated,
        clamped_weights=sum(ind.clamped for ind in population),
    )


def _check_sets(train_set, fitness_set, test_set):
    d = train_set.n_inputs
    for name, b in (("fitness", fitness_set), ("test", test_set)):
        if b is not None and b.n_inputs != d:
            raise ValueError(f"{name} set has {b.n_inputs} inputs, training set has {d}")


def evolve(train_set: EvaluationBatch, fitness_set: EvaluationBatch, config: EvolutionConfig,
           test_set: EvaluationBatch | None = None,
           progress: Callable[[GenerationStats], None] | None = None) -> EvolutionReport:
    """Run the generational loop and report the best individual of the last generation.

    ``test_set`` (default: ``fitness_set``) is only used for reporting: the
    per-generation mean test RMSE and the final predictions.
    """
    _check_sets(train_set, fitness_set, test_set)
    test_set = fitness_set if test_set is None else test_set
    layout = GenomeLayout(train_set.n_inputs, config.max_hidden)
    report = EvolutionReport(config=config, n_inputs=layout.n_inputs)
    N = config.population_size
    executor = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        population = [
            Individual(random_genome(np.random.default_rng([config.seed, 0, i, _INIT]), layout))
            for i in range(N)
        ]
        for gen in range(config.max_generations):
            if gen > 0:
                ranked = rank(population)
                elites = ranked[:config.n_elite]
                sel_rng = np.random.default_rng([config.seed, gen, 0, _SELECT])
                parents = select_parents(population, config, sel_rng, N - len(elites))
                children = [
                    Individual(mutate(p.genome, config.mutation_rate,
                                      np.random.default_rng([config.seed, gen, len(elites) + k, _MUTATE])))
                    for k, p in enumerate(parents)
                ]
                population = elites + children
            n_new = sum(not ind.evaluated for ind in population)
            population = _evaluate_all(population, train_set, fitness_set, config, test_set, executor)
            stats = _stats(gen, population, n_new)
            report.generations.append(stats)
            if progress is not None:
                progress(stats)
            if config.target_rmse is not None and stats.best_rmse <= config.target_rmse:
                report.stopped_by = "target_rmse"
                break
    finally:
        if executor is not None:
            executor.shutdown()
    report.best = rank(population)[0]
    report.predictions = predict(report.best.trained_phenotype, test_set.inputs).tolist()
    return report


def fitness_batches(dataset, split: str = "test") -> tuple[EvaluationBatch, EvaluationBatch]:
    """(training batch, fitness batch) for a dataset under the chosen fitness split."""
    if split == "test":
        return dataset.train, dataset.test
    if split == "holdout":
        return dataset.holdout(0.2)
    raise ValueError(f"unknown fitness split {split!r}")


def evolve_dataset(dataset, config: EvolutionConfig,
                   progress: Callable[[GenerationStats], None] | None = None) -> EvolutionReport:
    train_set, fitness_set = fitness_batches(dataset, config.fitness_split)
    return evolve(train_set, fitness_set, config, test_set=dataset.test, progress=progress)


__all__ = [
    "EvolutionConfig", "Individual", "GenerationStats", "EvolutionReport",
    "evaluate", "rank", "select_parents", "evolve", "evolve_dataset", "fitness_batches",
]
