# backend/app/services/cluster_service.py

from typing import List

import numpy as np

from backend.app.services.dynamics_service import Population

DISPERSION_FLOOR = 1e-12
# per-agent dispersion below this counts as a single exact cluster
ZERO_DISPERSION = 1e-9


def congruence_distances(X: np.ndarray) -> np.ndarray:
    """
    ``d(a, b) = 1 - |pearson(X_a, X_b)|`` for every row pair.

    Rows with zero variance have no correlation: they sit at distance 0 from an
    identical row and 1 from anything else.
    """
    X = np.asarray(X, dtype=np.float64)
    constant = np.all(X == X[:, :1], axis=1)
    Xc = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Xc, Xc))
    safe = np.where(constant, 1.0, norms)
    C = (Xc @ Xc.T) / np.outer(safe, safe)
    D = 1.0 - np.clip(np.abs(C), 0.0, 1.0)

    if constant.any():
        flat = np.where(constant)[0]
        D[flat, :] = 1.0
        D[:, flat] = 1.0
        for i in flat:
            same = np.all(X == X[i], axis=1)
            D[i, same] = 0.0
            D[same, i] = 0.0
    np.fill_diagonal(D, 0.0)
    return D


def _build(D: np.ndarray, k: int) -> List[int]:
    medoids = [int(np.argmin(D.sum(axis=1)))]
    while len(medoids) < k:
        cost = D[:, medoids].min(axis=1)
        gains = np.maximum(cost[:, None] - D, 0.0).sum(axis=0)
        gains[medoids] = -1.0
        medoids.append(int(np.argmax(gains)))
    return medoids


def partition_around_medoids(D: np.ndarray, k: int, max_iter: int = 100) -> np.ndarray:
    """Deterministic k-medoids: greedy BUILD start, then alternate assignment and medoid update."""
    n = D.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    medoids = np.array(_build(D, k))
    for _ in range(max_iter):
        labels = np.argmin(D[:, medoids], axis=1)
        updated = medoids.copy()
        for c in range(k):
            members = np.where(labels == c)[0]
            if members.size == 0:
                continue
            within = D[np.ix_(members, members)].sum(axis=1)
            updated[c] = members[int(np.argmin(within))]
        if np.array_equal(updated, medoids):
            break
        medoids = updated
    return np.argmin(D[:, medoids], axis=1)


def within_dispersion(D: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for c in np.unique(labels):
        members = np.where(labels == c)[0]
        total += D[np.ix_(members, members)].sum() / (2.0 * members.size)
    return total


def _log_dispersions(X: np.ndarray, k_max: int) -> np.ndarray:
    D = congruence_distances(X)
    return np.array([
        np.log(max(within_dispersion(D, partition_around_medoids(D, k)), DISPERSION_FLOOR))
        for k in range(1, k_max + 1)
    ])


def gap_statistic(X: np.ndarray, k_max: int, n_refs: int, rng: np.random.Generator) -> dict:
    """
    Gap curve for k = 1..k_max under the congruence distance.

    Reference sets permute each coordinate independently across rows.
    Returns ``{"k": chosen, "gap": [...], "s": [...]}``.
    """
    X = np.asarray(X, dtype=np.float64)
    if k_max < 1 or n_refs < 1:
        raise ValueError(f"gap statistic needs k_max >= 1 and n_refs >= 1, got {k_max}, {n_refs}")
    k_max = min(k_max, X.shape[0])

    D = congruence_distances(X)
    if within_dispersion(D, np.zeros(X.shape[0], dtype=int)) <= ZERO_DISPERSION * X.shape[0]:
        return {"k": 1, "gap": [0.0] * k_max, "s": [0.0] * k_max}

    observed = _log_dispersions(X, k_max)
    reference = np.vstack([_log_dispersions(rng.permuted(X, axis=0), k_max) for _ in range(n_refs)])
    gap = reference.mean(axis=0) - observed
    s = reference.std(axis=0) * np.sqrt(1.0 + 1.0 / n_refs)

    chosen = k_max
    for k in range(1, k_max):
        if gap[k - 1] >= gap[k] - s[k]:
            chosen = k
            break
    return {"k": chosen, "gap": gap.tolist(), "s": s.tolist()}


def optimal_cluster_count(pop: Population, k_max: int, n_refs: int, rng: np.random.Generator) -> int:
    return gap_statistic(pop.preferences(), k_max, n_refs, rng)["k"]
