import json
import math

import numpy as np
import pytest

from evonet.datasets import build_dataset, normalize
from evonet.evolution import (
    EvolutionConfig,
    EvolutionReport,
    Individual,
    evaluate,
    evolve,
    evolve_dataset,
    fitness_batches,
    rank,
    select_parents,
)
from evonet.genome import Genome, GenomeLayout, decode, random_genome
from evonet.network import EvaluationBatch, predict, rmse
from evonet.trainers import TrainerKind

SMALL = dict(population_size=6, max_generations=3, epochs_per_eval=15, max_hidden=6)


@pytest.fixture(scope="module")
def mackey():
    return normalize(build_dataset("mackey"))


@pytest.fixture(scope="module")
def small_sets(mackey):
    # a thinned Mackey-Glass problem keeps these runs fast
    return (EvaluationBatch(mackey.train.inputs[::5], mackey.train.targets[::5]),
            EvaluationBatch(mackey.test.inputs[::5], mackey.test.targets[::5]))


def test_defaults():
    c = EvolutionConfig()
    assert (c.population_size, c.max_generations, c.epochs_per_eval) == (40, 40, 500)
    assert (c.elitism_fraction, c.selection_fraction, c.mutation_rate) == (0.05, 0.50, 0.40)
    assert c.n_elite == 2 and c.pool_size == 20
    assert c.fitness_split == "test" and c.algorithm_mode == "evolved" and c.writeback == "lamarckian"
    assert EvolutionConfig(fixed_trainer="lm").algorithm_mode == "fixed(LM)"


@pytest.mark.parametrize("kw", [
    dict(population_size=1), dict(elitism_fraction=0.0), dict(selection_fraction=1.5),
    dict(mutation_rate=-0.1), dict(fitness_split="train"), dict(max_hidden=40), dict(max_generations=0),
    dict(writeback="darwinian"), dict(workers=0),
])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        EvolutionConfig(**kw)


def test_config_dict_round_trip():
    c = EvolutionConfig(fixed_trainer=TrainerKind.SCG, target_rmse=0.01, seed=5)
    assert EvolutionConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def _scored(fits, layout=GenomeLayout(2, 2), seed=0):
    rng = np.random.default_rng(seed)
    return [Individual(random_genome(rng, layout), fitness=f) for f in fits]


def test_pool_of_two_is_the_better_one():
    pop = _scored([0.3, 0.1])
    parents = select_parents(pop, EvolutionConfig(population_size=2), np.random.default_rng(0), 50)
    assert all(p is pop[1] for p in parents)


def test_equal_fitness_tie_break():
    pop = _scored([0.5] * 8)
    cfg = EvolutionConfig(population_size=8)
    ranked = rank(pop)
    keys = [(ind.genome.sort_key(), pop.index(ind)) for ind in ranked]
    assert keys == sorted(keys)
    parents = select_parents(pop, cfg, np.random.default_rng(1), 400)
    assert {id(p) for p in parents} == {id(p) for p in ranked[:4]}


def test_select_rejects_empty_or_unevaluated():
    with pytest.raises(ValueError):
        select_parents([], EvolutionConfig(), np.random.default_rng(0))
    pop = _scored([0.1, 0.2])
    pop[0] = Individual(pop[0].genome)
    with pytest.raises(ValueError):
        select_parents(pop, EvolutionConfig(population_size=2), np.random.default_rng(0))


def test_selection_frequency_uniform_over_pool():
    pop = _scored(np.linspace(0.01, 1.0, 80))
    cfg = EvolutionConfig(population_size=80)
    parents = select_parents(pop, cfg, np.random.default_rng(2), 10000)
    counts = np.bincount([pop.index(p) for p in parents], minlength=80)
    assert np.all(counts[40:] == 0)
    assert np.all(np.abs(counts[:40] - 250) <= 0.2 * 250)


def test_evaluate_zero_epochs_is_untrained_rmse(small_sets):
    train_set, test_set = small_sets
    g = random_genome(np.random.default_rng(0), GenomeLayout(4, 6))
    ind = evaluate(Individual(g), train_set, test_set, EvolutionConfig(epochs_per_eval=0, max_hidden=6))
    net, _ = decode(g)
    assert ind.fitness == rmse(net, test_set)
    assert ind.genome == g  # nothing trained, nothing written back


def test_evaluate_perfect_fit_is_zero():
    layout = GenomeLayout(2, 3)
    g = random_genome(np.random.default_rng(1), layout)
    net, _ = decode(g)
    X = np.random.default_rng(2).random((20, 2))
    batch = EvaluationBatch(X, predict(net, X))
    ind = evaluate(Individual(g), batch, batch, EvolutionConfig(max_hidden=3, epochs_per_eval=20))
    assert ind.fitness == 0.0


def test_evaluate_deterministic_and_lamarckian(small_sets):
    train_set, test_set = small_sets
    g = random_genome(np.random.default_rng(3), GenomeLayout(4, 6))
    cfg = EvolutionConfig(max_hidden=6, epochs_per_eval=20, fixed_trainer=TrainerKind.LM)
    a = evaluate(Individual(g), train_set, test_set, cfg)
    b = evaluate(Individual(g), train_set, test_set, cfg)
    assert a.fitness == b.fitness and a.genome == b.genome
    assert a.trainer.kind is TrainerKind.LM
    assert a.fitness < rmse(decode(g)[0], test_set)
    # trained weights now live in the genome, to 16-bit resolution
    redecoded, _ = decode(a.genome)
    assert abs(rmse(redecoded, test_set) - a.fitness) < 1e-2
    baldwin = evaluate(Individual(g), train_set, test_set,
                       EvolutionConfig(max_hidden=6, epochs_per_eval=20, fixed_trainer="lm", writeback="baldwinian"))
    assert baldwin.genome == g and baldwin.fitness == a.fitness


def test_single_generation_pop_two(small_sets):
    report = evolve(*small_sets, EvolutionConfig(population_size=2, max_generations=1, epochs_per_eval=5, max_hidden=4))
    assert len(report.generations) == 1
    assert report.generations[0].evaluations == 2


def test_evolve_invariants(small_sets):
    cfg = EvolutionConfig(**SMALL, seed=3)
    sizes = []
    report = evolve(*small_sets, cfg, progress=lambda s: sizes.append(sum(s.trainer_kind_histogram.values())))
    assert sizes == [cfg.population_size] * cfg.max_generations
    best = [g.best_rmse for g in report.generations]
    assert all(b <= a for a, b in zip(best, best[1:]))
    for g in report.generations:
        assert g.best_rmse <= g.mean_rmse <= g.worst_rmse
        assert len(g.best_genome) == GenomeLayout(4, 6).length
    # generations after the first re-evaluate only the non-elite offspring
    assert [g.evaluations for g in report.generations] == [6, 5, 5]
    assert report.best.fitness == best[-1]
    assert len(report.predictions) == len(small_sets[1])


def test_fixed_mode_uses_one_trainer(small_sets):
    report = evolve(*small_sets, EvolutionConfig(**SMALL, fixed_trainer=TrainerKind.SCG))
    for g in report.generations:
        assert g.trainer_kind_histogram == {"BP": 0, "SCG": 6, "QNA": 0, "LM": 0}


def test_evolved_mode_mixes_trainers(small_sets):
    report = evolve(*small_sets, EvolutionConfig(population_size=12, max_generations=1, epochs_per_eval=3, max_hidden=4))
    assert sum(v > 0 for v in report.generations[0].trainer_kind_histogram.values()) >= 2


def test_deterministic_across_workers(small_sets):
    a = evolve(*small_sets, EvolutionConfig(**SMALL, seed=11))
    b = evolve(*small_sets, EvolutionConfig(**SMALL, seed=11, workers=2))
    da, db = a.to_dict(), b.to_dict()
    da["config"].pop("workers"), db["config"].pop("workers")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)


def test_target_rmse_stops_early(small_sets):
    report = evolve(*small_sets, EvolutionConfig(**{**SMALL, "max_generations": 10}, target_rmse=1.0))
    assert len(report.generations) == 1 and report.stopped_by == "target_rmse"


def test_rejects_mismatched_sets(small_sets):
    train_set, _ = small_sets
    bad = EvaluationBatch(np.ones((3, 2)), np.ones(3))
    with pytest.raises(ValueError):
        evolve(train_set, bad, EvolutionConfig(**SMALL))


def test_report_json_round_trip(small_sets):
    report = evolve(*small_sets, EvolutionConfig(**SMALL, fixed_trainer=TrainerKind.LM))
    text = json.dumps(report.to_dict())
    back = EvolutionReport.from_dict(json.loads(text))
    assert json.dumps(back.to_dict()) == text
    assert back.best.trained_phenotype == report.best.trained_phenotype
    assert back.trace == report.trace


def test_holdout_fitness_split(mackey):
    fit_train, hold = fitness_batches(mackey, "holdout")
    assert len(fit_train) == 400 and len(hold) == 100
    assert np.array_equal(hold.inputs, mackey.inputs[400:500])
    cfg = EvolutionConfig(population_size=2, max_generations=1, epochs_per_eval=2, max_hidden=3, fitness_split="holdout")
    report = evolve_dataset(mackey, cfg)
    best = report.best
    assert best.fitness == rmse(best.trained_phenotype, hold)
    assert best.test_rmse == rmse(best.trained_phenotype, mackey.test)


def test_trained_params_inside_genome_range_after_clamp(small_sets):
    report = evolve(*small_sets, EvolutionConfig(**SMALL, fixed_trainer=TrainerKind.LM, seed=2))
    net, spec = decode(Genome.from_string(GenomeLayout(4, 6), report.generations[-1].best_genome))
    assert math.isfinite(rmse(net, small_sets[1]))
