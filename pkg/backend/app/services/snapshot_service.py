# backend/app/services/snapshot_service.py

import json
import os
from typing import Tuple

import numpy as np

from backend.app.errors import SnapshotError
from backend.app.services.dynamics_service import AgentState, Population


def save_population(pop: Population, path: str, t: int = 0):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    data = {
        "k": pop.k,
        "t": t,
        "agents": [{"V": a.V.tolist(), "R": a.R.tolist()} for a in pop.agents],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def load_snapshot(path: str) -> Tuple[Population, int]:
    """Population and the round ``t`` it was saved at."""
    if not os.path.exists(path):
        raise SnapshotError(f"snapshot not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise SnapshotError(f"snapshot {path} is not valid JSON: {e}")
    try:
        k = int(data["k"])
        t = int(data.get("t", 0))
        agents = [
            AgentState(np.array(a["V"], dtype=np.float64), np.array(a["R"], dtype=np.float64))
            for a in data["agents"]
        ]
        return Population(agents, k), t
    except (KeyError, TypeError, ValueError) as e:
        raise SnapshotError(f"snapshot {path} is malformed: {e}")


def load_population(path: str) -> Population:
    return load_snapshot(path)[0]
