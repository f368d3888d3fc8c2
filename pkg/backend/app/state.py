from typing import List, TypedDict

from backend.app.models import ExperimentSpec
from backend.app.services.dynamics_service import Population
from backend.app.services.experiment_service import ResultRow
from backend.app.services.network_service import DuplexNetwork


class CellState(TypedDict, total=False):
    spec: ExperimentSpec
    alpha: float
    replicate: int
    network: DuplexNetwork
    population: Population
    rows: List[ResultRow]
