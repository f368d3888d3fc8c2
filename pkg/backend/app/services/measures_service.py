# backend/app/services/measures_service.py
#
# Population measures. All logarithms are natural (mutual information in nats).

from dataclasses import asdict, dataclass
from typing import Optional, Tuple, Union

import numpy as np

from backend.app.models import MIMode, ModelConfig
from backend.app.services.dynamics_service import AgentState, Population

COUPLING_FLOOR = 1e-9


@dataclass(frozen=True)
class MeasurementRecord:
    t: int
    pref_similarity: Optional[float]
    pref_congruence: Optional[float]
    assoc_similarity: Optional[float]
    mean_mutual_info: float
    excluded_pairs: int
    mean_interpretive_distance: Optional[float] = None
    cluster_count: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class JointExhibitDistribution:
    """Probability of exhibiting the ordered practice pair (i, j); diagonal is zero."""

    p: np.ndarray

    def __post_init__(self):
        p = self.p
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"joint must be square, got shape {p.shape}")
        if np.any(p < 0):
            raise ValueError("joint has negative entries")
        if np.any(np.diag(p) != 0):
            raise ValueError("joint puts mass on the diagonal")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"joint sums to {p.sum()}, not 1")


# ---------- CORRELATION ----------

def pearson(x, y) -> Optional[float]:
    """Product-moment correlation, or None when either vector is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs two 1-d vectors of equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("pearson needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    rho = float(np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return min(1.0, max(-1.0, rho))


def _pairwise_correlations(X: np.ndarray) -> Tuple[np.ndarray, int]:
    """Correlations of all unordered row pairs with defined Pearson, plus the excluded count."""
    n = X.shape[0]
    iu, ju = np.triu_indices(n, 1)
    constant = np.all(X == X[:, :1], axis=1)
    valid = ~constant[iu] & ~constant[ju]
    Xc = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Xc, Xc))
    a, b = iu[valid], ju[valid]
    rho = np.einsum("ij,ij->i", Xc[a], Xc[b]) / (norms[a] * norms[b])
    return np.clip(rho, -1.0, 1.0), int((~valid).sum())


def _off_diagonal_rows(pop: Population) -> np.ndarray:
    mask = ~np.eye(pop.k, dtype=bool)
    return np.vstack([agent.R[mask] for agent in pop.agents])


def _mean_or_none(values: np.ndarray) -> Optional[float]:
    return float(values.mean()) if values.size else None


def _require_pairs(pop: Population):
    if pop.n < 2:
        raise ValueError("agreement measures need at least two agents")


def preference_similarity(pop: Population) -> Optional[float]:
    _require_pairs(pop)
    rho, _ = _pairwise_correlations(pop.preferences())
    return _mean_or_none(rho)


def preference_congruence(pop: Population) -> Optional[float]:
    _require_pairs(pop)
    rho, _ = _pairwise_correlations(pop.preferences())
    return _mean_or_none(np.abs(rho))


def association_similarity(pop: Population) -> Optional[float]:
    _require_pairs(pop)
    rho, _ = _pairwise_correlations(_off_diagonal_rows(pop))
    return _mean_or_none(rho)


def interpretive_distance(Ra, Rb) -> Optional[float]:
    """``(1/K^2) sum |Ra/max(Ra) - Rb/max(Rb)|``; None when a maximum is not positive."""
    Ra = np.asarray(Ra, dtype=np.float64)
    Rb = np.asarray(Rb, dtype=np.float64)
    if Ra.shape != Rb.shape:
        raise ValueError(f"matrices differ in shape: {Ra.shape} vs {Rb.shape}")
    top_a, top_b = Ra.max(), Rb.max()
    if top_a <= 0 or top_b <= 0:
        return None
    return float(np.abs(Ra / top_a - Rb / top_b).sum() / Ra.size)


def mean_interpretive_distance(pop: Population) -> Optional[float]:
    distances = []
    for a in range(pop.n):
        for b in range(a + 1, pop.n):
            d = interpretive_distance(pop.agents[a].R, pop.agents[b].R)
            if d is not None:
                distances.append(d)
    return float(np.mean(distances)) if distances else None


# ---------- PREDICTABILITY ----------

def _mode(cfg: Union[ModelConfig, MIMode, str]) -> MIMode:
    if isinstance(cfg, ModelConfig):
        return cfg.mi_mode
    return MIMode(cfg)


def _logsumexp(x: np.ndarray, axis: Optional[int] = None) -> np.ndarray:
    top = np.max(x, axis=axis, keepdims=True)
    total = top + np.log(np.sum(np.exp(x - top), axis=axis, keepdims=True))
    return np.squeeze(total, axis=axis) if axis is not None else total.item()


def joint_exhibit_distribution(agent: AgentState, cfg: Union[ModelConfig, MIMode, str]) -> JointExhibitDistribution:
    V = np.asarray(agent.V, dtype=np.float64)
    k = V.shape[0]
    if k < 2:
        raise ValueError("pair exhibition needs K >= 2")
    off = ~np.eye(k, dtype=bool)
    log_first = V - _logsumexp(V)
    # row i holds V_j for j != i and -inf on the diagonal
    rest = np.where(off, V[None, :], -np.inf)

    if _mode(cfg) == MIMode.SEQUENTIAL:
        # log P(j | i) = V_j - logsumexp(V without i)
        log_p = log_first[:, None] + rest - _logsumexp(rest, axis=1)[:, None]
    else:
        log_p = log_first[:, None] + np.log(np.maximum(agent.R, COUPLING_FLOOR)) + rest
        log_p = log_p - _logsumexp(log_p[off])
    p = np.where(off, np.exp(log_p), 0.0)
    return JointExhibitDistribution(p / p.sum())


def mutual_information(joint: JointExhibitDistribution) -> float:
    p = joint.p
    row = p.sum(axis=1)
    col = p.sum(axis=0)
    rows, cols = np.nonzero(p)
    mass = p[rows, cols]
    return float(np.sum(mass * (np.log(mass) - np.log(row[rows]) - np.log(col[cols]))))


def mean_mutual_information(pop: Population, cfg: Union[ModelConfig, MIMode, str]) -> float:
    return float(np.mean([mutual_information(joint_exhibit_distribution(a, cfg)) for a in pop.agents]))


# ---------- SNAPSHOT ----------

def measure_population(
    pop: Population,
    cfg: Union[ModelConfig, MIMode, str],
    t: int = 0,
    with_interpretive_distance: bool = False,
    cluster_count: Optional[int] = None,
) -> MeasurementRecord:
    _require_pairs(pop)
    pref_rho, pref_excluded = _pairwise_correlations(pop.preferences())
    assoc_rho, assoc_excluded = _pairwise_correlations(_off_diagonal_rows(pop))
    return MeasurementRecord(
        t=t,
        pref_similarity=_mean_or_none(pref_rho),
        pref_congruence=_mean_or_none(np.abs(pref_rho)),
        assoc_similarity=_mean_or_none(assoc_rho),
        mean_mutual_info=mean_mutual_information(pop, cfg),
        excluded_pairs=pref_excluded + assoc_excluded,
        mean_interpretive_distance=mean_interpretive_distance(pop) if with_interpretive_distance else None,
        cluster_count=cluster_count,
    )
