import numpy as np
import pytest

from backend.app.services.cluster_service import (
    congruence_distances,
    gap_statistic,
    optimal_cluster_count,
    partition_around_medoids,
    within_dispersion,
)
from backend.app.services.dynamics_service import Population

PATTERNS = np.array([
    [1.0, 1.0, -1.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, 0.0, 0.0, 1.0, -1.0],
])


def _planted(seed, per_cluster=10, sigma=0.05):
    rng = np.random.default_rng(seed)
    rows = [p + rng.normal(0.0, sigma, size=p.size) for p in PATTERNS for _ in range(per_cluster)]
    return Population.from_preferences(np.array(rows))


def test_congruence_distance_treats_opposites_as_one_pattern():
    v = np.array([0.5, -1.0, 0.25, 2.0])
    D = congruence_distances(np.vstack([v, -v, 3 * v + 1]))
    assert np.allclose(D, 0.0, atol=1e-12)


def test_congruence_distance_constant_rows():
    D = congruence_distances(np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 2.0]]))
    assert D[0, 1] == 0.0
    assert D[0, 2] == 1.0 and D[2, 1] == 1.0


def test_pam_separates_planted_groups():
    pop = _planted(0)
    D = congruence_distances(pop.preferences())
    labels = partition_around_medoids(D, 3)
    for block in range(3):
        assert len(set(labels[block * 10:(block + 1) * 10])) == 1
    assert len(set(labels)) == 3
    assert within_dispersion(D, labels) < within_dispersion(D, np.zeros(30, dtype=int))


def test_identical_population_has_one_cluster():
    pop = Population.from_preferences(np.tile([0.3, -0.1, 0.8, -0.5], (12, 1)))
    for seed in range(5):
        assert optimal_cluster_count(pop, 5, 10, np.random.default_rng(seed)) == 1


def test_opposite_camps_are_one_culture():
    v = np.array([1.0, -0.5, 0.25, -0.75, 0.0, 0.4])
    pop = Population.from_preferences(np.vstack([v] * 6 + [-v] * 6))
    assert optimal_cluster_count(pop, 4, 10, np.random.default_rng(1)) == 1


def test_planted_clusters_are_recovered():
    hits = sum(
        optimal_cluster_count(_planted(seed), 5, 20, np.random.default_rng(1000 + seed)) == 3
        for seed in range(20)
    )
    assert hits >= 18


def test_k_max_is_capped_by_population_size():
    pop = Population.from_preferences(np.random.default_rng(0).normal(size=(3, 5)))
    result = gap_statistic(pop.preferences(), 10, 5, np.random.default_rng(0))
    assert len(result["gap"]) == 3
    assert 1 <= result["k"] <= 3


def test_gap_statistic_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gap_statistic(np.eye(3), 0, 5, np.random.default_rng(0))
