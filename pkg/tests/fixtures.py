"""Shared synthetic fixtures for the end-to-end and acceptance tests."""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass
from typing import Dict

from multike.evaluation import compute_metrics, rank_candidates
from multike.literal import load_word_embeddings
from multike.synthetic import generate_synthetic_pair, synthetic_word_vectors
from multike.training import TrainConfig, TrainResult, train_multike

VIEWS = ("name", "relation", "attribute", "combined")

# The acceptance fixture: 300 entities per KG, 10 relations, 8 attributes,
# name noise 0.1, structure dropout 0.2, d = 32, Q = 50 epochs.
FIXTURE_SEED = 1
FIXTURE_CONFIG = TrainConfig(dim=32, epochs=50, learning_rate=0.1, itc_learning_rate=0.3,
                             batch_size=256, seed=0, combination="itc", seed_ratio=0.3)


@functools.lru_cache(maxsize=None)
def fixture_pair():
    return generate_synthetic_pair(300, 10, 8, name_noise=0.1, structure_dropout=0.2,
                                   rng_seed=FIXTURE_SEED)


@functools.lru_cache(maxsize=None)
def fixture_word_table():
    return load_word_embeddings(synthetic_word_vectors(fixture_pair(), 32,
                                                       rng_seed=FIXTURE_SEED))


@dataclass
class FixtureRun:
    result: TrainResult
    hits1: Dict[str, float]
    seconds: float


def _freeze(overrides: dict):
    return tuple(sorted(overrides.items()))


@functools.lru_cache(maxsize=None)
def _run(frozen) -> FixtureRun:
    overrides = dict(frozen)
    config = FIXTURE_CONFIG.updated(overrides)
    dataset = fixture_pair().resplit(config.seed_ratio, 0)
    start = time.perf_counter()
    result = train_multike(dataset, config, fixture_word_table())
    seconds = time.perf_counter() - start
    pairs = dataset.pair_indices(dataset.test_alignment)
    hits = {v: compute_metrics(rank_candidates(result.view(v), pairs)).hits[1] for v in VIEWS}
    return FixtureRun(result, hits, seconds)


def fixture_run(**overrides) -> FixtureRun:
    """Train (once per distinct override set) on the acceptance fixture."""
    return _run(_freeze(overrides))
