# backend/app/services/network_service.py

import os
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from backend.app.errors import DuplexFormatError, TopologyError
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)

LAYER_IDS = (1, 2)


# ---------- TYPES ----------

@dataclass(frozen=True)
class DirectedLayer:
    """Directed edge set over nodes ``0..n-1`` stored as ordered out-adjacency lists."""

    n: int
    out_adjacency: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.out_adjacency) != self.n:
            raise TopologyError(f"adjacency has {len(self.out_adjacency)} rows for n={self.n}")
        for src, targets in enumerate(self.out_adjacency):
            if len(set(targets)) != len(targets):
                raise TopologyError(f"duplicate edge out of node {src}")
            for dst in targets:
                if dst == src:
                    raise TopologyError(f"self-loop on node {src}")
                if not 0 <= dst < self.n:
                    raise TopologyError(f"edge {src}->{dst} references a node outside [0, {self.n})")

    @classmethod
    def from_lists(cls, n: int, out_adjacency: Sequence[Sequence[int]]) -> "DirectedLayer":
        return cls(n, tuple(tuple(int(v) for v in targets) for targets in out_adjacency))

    @property
    def edge_count(self) -> int:
        return sum(len(targets) for targets in self.out_adjacency)

    def edges(self) -> Iterator[Tuple[int, int]]:
        for src, targets in enumerate(self.out_adjacency):
            for dst in targets:
                yield src, dst

    def out_degrees(self) -> np.ndarray:
        return np.array([len(t) for t in self.out_adjacency], dtype=np.int64)

    def in_degrees(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for _, dst in self.edges():
            counts[dst] += 1
        return counts


@dataclass(frozen=True)
class DuplexNetwork:
    """Two directed layers over one node set: layer 1 observation, layer 2 influence."""

    n: int
    layer1: DirectedLayer
    layer2: DirectedLayer

    def __post_init__(self):
        if self.layer1.n != self.n or self.layer2.n != self.n:
            raise TopologyError(
                f"layer sizes {self.layer1.n}/{self.layer2.n} do not match duplex n={self.n}"
            )

    def layer(self, layer_id: int) -> DirectedLayer:
        if layer_id == 1:
            return self.layer1
        if layer_id == 2:
            return self.layer2
        raise ValueError(f"layer_id must be 1 or 2, got {layer_id!r}")


# ---------- GENERATORS ----------

def generate_complete(n: int) -> DirectedLayer:
    if n < 1:
        raise TopologyError(f"complete digraph needs n >= 1, got {n}")
    return DirectedLayer(n, tuple(tuple(v for v in range(n) if v != u) for u in range(n)))


def generate_scale_free(
    n: int,
    k_out: int,
    seed: int,
    attractiveness: Optional[float] = None,
) -> DirectedLayer:
    """
    Directed preferential attachment with constant out-degree.

    Starts from a complete digraph on ``k_out + 1`` nodes; every later node picks
    ``k_out`` distinct existing targets with probability proportional to
    ``in_degree + attractiveness``. The in-degree tail exponent is
    ``2 + attractiveness / k_out``, so the default ``attractiveness = k_out`` gives 3.
    """
    if k_out < 1:
        raise TopologyError(f"scale-free k_out must be >= 1, got {k_out}")
    if k_out > n - 1:
        raise TopologyError(f"scale-free k_out={k_out} exceeds n-1={n - 1}")
    a = float(k_out if attractiveness is None else attractiveness)
    if a <= 0:
        raise TopologyError(f"attractiveness must be positive, got {a}")

    rng = np.random.default_rng(seed)
    core = k_out + 1
    adjacency: List[List[int]] = [[v for v in range(core) if v != u] for u in range(core)]
    in_deg = np.zeros(n, dtype=np.float64)
    in_deg[:core] = k_out

    for new in range(core, n):
        weights = in_deg[:new] + a
        targets = rng.choice(new, size=k_out, replace=False, p=weights / weights.sum())
        adjacency.append([int(t) for t in targets])
        in_deg[targets] += 1.0

    return DirectedLayer.from_lists(n, adjacency)


def generate_small_world(
    n: int,
    clusters: int,
    k_out: int,
    p_rewire: float,
    seed: int,
) -> DirectedLayer:
    """
    Caveman-style clusters with out-edge rewiring.

    Nodes are split into ``clusters`` consecutive blocks; each node points to the
    next ``k_out`` members of its block (cyclically), which is the complete block
    digraph when ``k_out = block_size - 1``. Each edge is then, independently with
    probability ``p_rewire``, redirected to a uniformly chosen node that is neither
    the source nor one of its current targets. Out-degrees never change.
    """
    if clusters < 1:
        raise TopologyError(f"small-world needs clusters >= 1, got {clusters}")
    if n % clusters != 0:
        raise TopologyError(f"n={n} is not divisible by clusters={clusters}")
    size = n // clusters
    if k_out < 1 or k_out > size - 1:
        raise TopologyError(f"small-world k_out={k_out} must lie in [1, {size - 1}] for cluster size {size}")
    if not 0.0 <= p_rewire <= 1.0:
        raise TopologyError(f"p_rewire={p_rewire} is not a probability")

    adjacency: List[List[int]] = []
    for u in range(n):
        base = (u // size) * size
        offset = u - base
        adjacency.append([base + (offset + step) % size for step in range(1, k_out + 1)])

    rng = np.random.default_rng(seed)
    for u in range(n):
        targets = adjacency[u]
        for pos in range(len(targets)):
            if rng.random() >= p_rewire:
                continue
            taken = set(targets)
            taken.add(u)
            candidates = [w for w in range(n) if w not in taken]
            if not candidates:
                continue
            targets[pos] = candidates[int(rng.integers(len(candidates)))]

    return DirectedLayer.from_lists(n, adjacency)


def duplicate(layer: DirectedLayer) -> DuplexNetwork:
    """Duplex whose two layers carry the same edges (independent copies)."""
    copy = DirectedLayer(layer.n, tuple(tuple(targets) for targets in layer.out_adjacency))
    return DuplexNetwork(layer.n, layer, copy)


# ---------- QUERIES ----------

def out_neighbors(net: DuplexNetwork, layer_id: int, node: int) -> Tuple[int, ...]:
    layer = net.layer(layer_id)
    if not 0 <= node < net.n:
        raise IndexError(f"node {node} outside [0, {net.n})")
    return layer.out_adjacency[node]


def to_digraph(layer: DirectedLayer) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(layer.n))
    g.add_edges_from(layer.edges())
    return g


def path_length_summary(layer: DirectedLayer) -> dict:
    """
    Directed shortest-path diagnostics.

    ``mean_path_length`` averages over reachable ordered pairs only and is ``inf``
    when some ordered pair is unreachable; ``efficiency`` is the mean of ``1/d``
    over all ordered pairs (unreachable pairs count 0).
    """
    g = to_digraph(layer)
    pairs = layer.n * (layer.n - 1)
    total = 0
    inverse = 0.0
    reachable = 0
    for src, lengths in nx.all_pairs_shortest_path_length(g):
        for dst, d in lengths.items():
            if dst == src:
                continue
            reachable += 1
            total += d
            inverse += 1.0 / d
    if pairs == 0:
        return {"reachable_pairs": 0, "mean_path_length": 0.0, "efficiency": 0.0}
    return {
        "reachable_pairs": reachable,
        "mean_path_length": total / reachable if reachable == pairs else float("inf"),
        "efficiency": inverse / pairs,
    }


# ---------- PERSISTENCE ----------

def save_duplex(net: DuplexNetwork, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    lines = [f"duplex n={net.n}"]
    for layer_id in LAYER_IDS:
        lines.append(f"layer {layer_id}")
        lines.extend(f"{src} {dst}" for src, dst in net.layer(layer_id).edges())
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"Saved duplex (n={net.n}, {net.layer1.edge_count}/{net.layer2.edge_count} edges) to {path}")


def load_duplex(path: str) -> DuplexNetwork:
    n: Optional[int] = None
    layers = {1: None, 2: None}
    current: Optional[int] = None

    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if n is None:
                if len(parts) != 2 or parts[0] != "duplex" or not parts[1].startswith("n="):
                    raise DuplexFormatError(lineno, f"expected 'duplex n=<N>', got {line!r}")
                try:
                    n = int(parts[1][2:])
                except ValueError:
                    raise DuplexFormatError(lineno, f"node count is not an integer: {parts[1]!r}")
                if n < 0:
                    raise DuplexFormatError(lineno, f"negative node count {n}")
                continue
            if parts[0] == "layer":
                if len(parts) != 2 or parts[1] not in ("1", "2"):
                    raise DuplexFormatError(lineno, f"expected 'layer 1' or 'layer 2', got {line!r}")
                current = int(parts[1])
                if layers[current] is not None:
                    raise DuplexFormatError(lineno, f"layer {current} declared twice")
                layers[current] = [[] for _ in range(n)]
                continue
            if current is None:
                raise DuplexFormatError(lineno, "edge before any 'layer' header")
            if len(parts) != 2:
                raise DuplexFormatError(lineno, f"expected 'src dst', got {line!r}")
            try:
                src, dst = int(parts[0]), int(parts[1])
            except ValueError:
                raise DuplexFormatError(lineno, f"non-integer node in {line!r}")
            if not (0 <= src < n and 0 <= dst < n):
                raise DuplexFormatError(lineno, f"node index out of range for n={n}: {line!r}")
            if src == dst:
                raise DuplexFormatError(lineno, f"self-loop {line!r}")
            if dst in layers[current][src]:
                raise DuplexFormatError(lineno, f"duplicate edge {line!r}")
            layers[current][src].append(dst)

    if n is None:
        raise DuplexFormatError(0, "missing 'duplex n=<N>' header")
    for layer_id, adjacency in layers.items():
        if adjacency is None:
            raise DuplexFormatError(0, f"missing 'layer {layer_id}' section")

    return DuplexNetwork(
        n,
        DirectedLayer.from_lists(n, layers[1]),
        DirectedLayer.from_lists(n, layers[2]),
    )
