from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backend.app import config


class Retention(str, Enum):
    GREATER = "greater"
    LESS = "less"


class MIMode(str, Enum):
    SEQUENTIAL = "sequential"
    ASSOCIATION_COUPLED = "association_coupled"


class Topology(str, Enum):
    COMPLETE = "complete"
    SCALE_FREE = "scale-free"
    SMALL_WORLD = "small-world"
    FILE = "file"


class ModelConfig(BaseModel):
    """Parameters of the combined transmission process."""

    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)

    alpha: float = Field(0.0, ge=0.0, le=1.0)
    k: int = Field(config.DEFAULT_K, ge=2)
    steps: int = Field(config.DEFAULT_STEPS, ge=0)
    symmetric_R: bool = True
    cs_normalize: bool = False
    cs_include_diagonal: bool = False
    retention: Retention = Retention.GREATER
    mi_mode: MIMode = MIMode.SEQUENTIAL
    master_seed: int = Field(config.DEFAULT_MASTER_SEED, ge=0, lt=2**64)


class TopologyParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    k_out: Optional[int] = Field(None, ge=1)
    clusters: Optional[int] = Field(None, ge=1)
    p_rewire: float = Field(config.DEFAULT_P_REWIRE, ge=0.0, le=1.0)
    attractiveness: Optional[float] = Field(None, gt=0.0)
    path: Optional[str] = None


class ExperimentSpec(BaseModel):
    """One experiment: a topology, a model template and the (alpha, replicate) grid."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    topology: Topology
    topology_params: TopologyParams = TopologyParams()
    n: int = Field(30, ge=2)
    model: ModelConfig = ModelConfig()
    alphas: List[float] = Field(default_factory=lambda: list(config.DEFAULT_ALPHAS), min_length=1)
    replicates: int = Field(config.DEFAULT_REPLICATES, ge=1)
    sample_every: int = Field(config.DEFAULT_SAMPLE_EVERY, ge=1)
    out_path: Optional[str] = None
    measure_clusters: bool = False
    cluster_k_max: int = Field(config.GAP_K_MAX, ge=1)
    cluster_refs: int = Field(config.GAP_REFS, ge=1)
    max_workers: int = Field(config.MAX_WORKERS, ge=1)

    @field_validator("alphas")
    @classmethod
    def _alphas_are_probabilities(cls, alphas: List[float]) -> List[float]:
        for a in alphas:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"alpha {a} outside [0, 1]")
        return alphas

    @model_validator(mode="after")
    def _topology_has_params(self) -> "ExperimentSpec":
        params = self.topology_params
        if self.topology == Topology.SCALE_FREE and params.k_out is None:
            raise ValueError("scale-free topology needs topology_params.k_out")
        if self.topology == Topology.SMALL_WORLD and (params.k_out is None or params.clusters is None):
            raise ValueError("small-world topology needs topology_params.k_out and clusters")
        if self.topology == Topology.FILE and not params.path:
            raise ValueError("file topology needs topology_params.path")
        return self

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as f:
            return cls.model_validate_json(f.read())
