# backend/app/services/dynamics_service.py

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np

from backend.app.models import ModelConfig, Retention
from backend.app.services.network_service import DuplexNetwork, out_neighbors


class StepKind(str, Enum):
    ASSOCIATION = "association"
    PREFERENCE = "preference"
    SKIPPED = "skipped"


# ---------- STATE ----------

@dataclass
class AgentState:
    """Preference vector ``V`` (length K) and association matrix ``R`` (K x K)."""

    V: np.ndarray
    R: np.ndarray

    def copy(self) -> "AgentState":
        return AgentState(self.V.copy(), self.R.copy())


@dataclass
class Population:
    agents: List[AgentState]
    k: int

    def __post_init__(self):
        for idx, agent in enumerate(self.agents):
            if agent.V.shape != (self.k,) or agent.R.shape != (self.k, self.k):
                raise ValueError(f"agent {idx} does not hold K={self.k} practices")

    @property
    def n(self) -> int:
        return len(self.agents)

    def snapshot(self) -> "Population":
        return Population([a.copy() for a in self.agents], self.k)

    def preferences(self) -> np.ndarray:
        """Agents' V stacked row-wise, shape (n, K)."""
        return np.vstack([a.V for a in self.agents])

    @classmethod
    def from_preferences(cls, V: np.ndarray, R: Optional[np.ndarray] = None) -> "Population":
        """Population with the given V rows and a shared R (all ones when omitted)."""
        V = np.asarray(V, dtype=np.float64)
        k = V.shape[1]
        base = np.ones((k, k)) if R is None else np.asarray(R, dtype=np.float64)
        return cls([AgentState(row.copy(), base.copy()) for row in V], k)


@dataclass(frozen=True)
class StepOutcome:
    kind: StepKind
    observer: int
    sender: Optional[int] = None
    practices: Tuple[int, ...] = ()
    proposal_retained: bool = False
    cs_before: Optional[float] = None
    cs_after: Optional[float] = None
    cs_fallback: bool = False

    def __post_init__(self):
        if self.kind == StepKind.SKIPPED and self.sender is not None:
            raise ValueError("a skipped step has no sender")


def init_population(n: int, k: int, rng: np.random.Generator) -> Population:
    if n < 2 or k < 2:
        raise ValueError(f"population needs n >= 2 and k >= 2, got n={n}, k={k}")
    agents = [AgentState(rng.uniform(-1.0, 1.0, size=k), np.ones((k, k))) for _ in range(n)]
    return Population(agents, k)


# ---------- EXHIBITION ----------

def _softmax_weights(V: np.ndarray) -> np.ndarray:
    return np.exp(V - V.max())


def softmax_probabilities(V: np.ndarray) -> np.ndarray:
    w = _softmax_weights(np.asarray(V, dtype=np.float64))
    return w / w.sum()


def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(weights)
    idx = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(idx, len(weights) - 1)


def exhibit_single(agent: AgentState, rng: np.random.Generator) -> int:
    return _draw(_softmax_weights(agent.V), rng)


def exhibit_pair(agent: AgentState, rng: np.random.Generator) -> Tuple[int, int]:
    """Two distinct practices drawn sequentially without replacement from softmax(V)."""
    V = agent.V
    i = _draw(_softmax_weights(V), rng)
    rest = np.delete(np.arange(V.shape[0]), i)
    # shifted by the max of the remaining practices, so the second law never underflows
    j = rest[_draw(_softmax_weights(V[rest]), rng)]
    return i, int(j)


# ---------- CONSTRAINT SATISFACTION ----------

@lru_cache(maxsize=None)
def _off_diagonal(k: int) -> np.ndarray:
    mask = ~np.eye(k, dtype=bool)
    mask.setflags(write=False)
    return mask


def _constraint_satisfaction(V: np.ndarray, R: np.ndarray, cfg: ModelConfig) -> Tuple[float, bool]:
    k = V.shape[0]
    fallback = False
    if cfg.cs_normalize:
        top = R.max()
        if top > 0:
            R = R / top
        else:
            fallback = True
    diff = np.abs(R - np.abs(V[:, None] - V[None, :]))
    total = diff.sum() if cfg.cs_include_diagonal else diff[_off_diagonal(k)].sum()
    return float(2.0 * total / (k * (k - 1))), fallback


def constraint_satisfaction(V: np.ndarray, R: np.ndarray, cfg: ModelConfig) -> float:
    """``2/(K(K-1)) * sum |R_ij - |V_i - V_j||`` over ordered pairs (diagonal optional)."""
    return _constraint_satisfaction(np.asarray(V, dtype=np.float64), np.asarray(R, dtype=np.float64), cfg)[0]


def _accept(cs_proposal: float, cs_current: float, retention: Retention) -> bool:
    if retention == Retention.LESS:
        return cs_proposal < cs_current
    return cs_proposal > cs_current


# ---------- TRANSMISSION ----------

def _pick_pair(net: DuplexNetwork, layer_id: int, rng: np.random.Generator) -> Tuple[int, Optional[int]]:
    observer = int(rng.integers(net.n))
    neighbors = out_neighbors(net, layer_id, observer)
    if not neighbors:
        return observer, None
    return observer, neighbors[int(rng.integers(len(neighbors)))]


def association_step(pop: Population, net: DuplexNetwork, cfg: ModelConfig, rng: np.random.Generator) -> StepOutcome:
    b, a = _pick_pair(net, 1, rng)
    if a is None:
        return StepOutcome(StepKind.SKIPPED, observer=b)

    i, j = exhibit_pair(pop.agents[a], rng)
    observer = pop.agents[b]
    observer.R[i, j] += 1.0
    if cfg.symmetric_R:
        observer.R[j, i] += 1.0

    V = observer.V
    if abs(V[i]) < abs(V[j]):
        weaker = i
    elif abs(V[j]) < abs(V[i]):
        weaker = j
    else:
        weaker = min(i, j)

    proposal = V.copy()
    proposal[weaker] += rng.standard_normal()
    cs_before, fb_before = _constraint_satisfaction(V, observer.R, cfg)
    cs_after, fb_after = _constraint_satisfaction(proposal, observer.R, cfg)
    retained = _accept(cs_after, cs_before, cfg.retention)
    if retained:
        observer.V = proposal

    return StepOutcome(
        StepKind.ASSOCIATION,
        observer=b,
        sender=a,
        practices=(i, j),
        proposal_retained=retained,
        cs_before=cs_before,
        cs_after=cs_after,
        cs_fallback=fb_before or fb_after,
    )


def preference_step(pop: Population, net: DuplexNetwork, cfg: ModelConfig, rng: np.random.Generator) -> StepOutcome:
    b, a = _pick_pair(net, 2, rng)
    if a is None:
        return StepOutcome(StepKind.SKIPPED, observer=b)

    i = exhibit_single(pop.agents[a], rng)
    observer = pop.agents[b]
    observer.V[i] += 1.0

    noise = rng.standard_normal(pop.k)
    proposal = observer.R.copy()
    proposal[i, :] += noise
    if cfg.symmetric_R:
        # column mirrors the row; (i, i) was already perturbed once
        column = noise.copy()
        column[i] = 0.0
        proposal[:, i] += column

    cs_before, fb_before = _constraint_satisfaction(observer.V, observer.R, cfg)
    cs_after, fb_after = _constraint_satisfaction(observer.V, proposal, cfg)
    retained = _accept(cs_after, cs_before, cfg.retention)
    if retained:
        observer.R = proposal

    return StepOutcome(
        StepKind.PREFERENCE,
        observer=b,
        sender=a,
        practices=(i,),
        proposal_retained=retained,
        cs_before=cs_before,
        cs_after=cs_after,
        cs_fallback=fb_before or fb_after,
    )


def step(pop: Population, net: DuplexNetwork, cfg: ModelConfig, rng: np.random.Generator) -> StepOutcome:
    if rng.random() < cfg.alpha:
        return preference_step(pop, net, cfg, rng)
    return association_step(pop, net, cfg, rng)


Sink = Callable[[int, Population, int], None]


def run(
    pop: Population,
    net: DuplexNetwork,
    cfg: ModelConfig,
    sample_every: int,
    sink: Sink,
    rng: Optional[np.random.Generator] = None,
    on_step: Optional[Callable[[int, StepOutcome], None]] = None,
) -> Population:
    """
    Execute ``cfg.steps`` rounds in place.

    ``sink(t, snapshot, skipped_steps)`` is called at t = 0, every ``sample_every``
    rounds and at t = cfg.steps; it receives a copy of the population. ``on_step``
    sees every StepOutcome with its 1-based round number.
    """
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1, got {sample_every}")
    if pop.n != net.n:
        raise ValueError(f"population has {pop.n} agents but the network has {net.n} nodes")
    if rng is None:
        rng = np.random.default_rng(cfg.master_seed)

    skipped = 0
    sink(0, pop.snapshot(), skipped)
    for t in range(1, cfg.steps + 1):
        outcome = step(pop, net, cfg, rng)
        if outcome.kind == StepKind.SKIPPED:
            skipped += 1
        if on_step is not None:
            on_step(t, outcome)
        if t % sample_every == 0 or t == cfg.steps:
            sink(t, pop.snapshot(), skipped)
    return pop
