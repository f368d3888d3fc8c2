# backend/app/services/experiment_service.py

import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from backend.app import config
from backend.app.errors import CellFailedError, EmptySelectionError, TopologyError
from backend.app.models import ExperimentSpec, Topology
from backend.app.services.cluster_service import optimal_cluster_count
from backend.app.services.dynamics_service import Population, init_population, run
from backend.app.services.measures_service import MeasurementRecord, measure_population
from backend.app.services.network_service import (
    DuplexNetwork,
    duplicate,
    generate_complete,
    generate_scale_free,
    generate_small_world,
    load_duplex,
)
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)

MASK64 = (1 << 64) - 1
ALPHA_GRID = 1_000_000
STRUCTURE_LANE = 2**32 - 1
CLUSTER_LANE = 2**32 - 2

MEASURES = ("pref_similarity", "pref_congruence", "assoc_similarity", "mean_mutual_info")
CSV_COLUMNS = [
    "topology",
    "alpha",
    "replicate",
    "t",
    "pref_similarity",
    "pref_congruence",
    "assoc_similarity",
    "mean_mutual_info",
    "excluded_pairs",
    "skipped_steps",
]


# ---------- SEEDING ----------

def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, alpha_index: int, replicate: int) -> int:
    """
    Stream seed of one cell. Frozen definition, do not change:

        h = mix(master); h = mix(h ^ alpha_index); h = mix(h ^ replicate)

    where ``mix`` is the splitmix64 step (add the golden-ratio increment, then the
    30/27/31 xor-shift-multiply finalizer), all arithmetic mod 2**64.
    """
    h = _mix64(master & MASK64)
    h = _mix64(h ^ (alpha_index & MASK64))
    return _mix64(h ^ (replicate & MASK64))


def alpha_index(alpha: float) -> int:
    """Alpha on the micro-grid, so a cell's seed never depends on the rest of the sweep."""
    return int(round(alpha * ALPHA_GRID))


def cell_seed(master: int, alpha: float, replicate: int) -> int:
    return derive_seed(master, alpha_index(alpha), replicate)


def structure_seed(master: int, replicate: int) -> int:
    return derive_seed(master, STRUCTURE_LANE, replicate)


# ---------- ROWS ----------

@dataclass(frozen=True)
class ResultRow:
    topology: str
    alpha: float
    replicate: int
    t: int
    pref_similarity: Optional[float]
    pref_congruence: Optional[float]
    assoc_similarity: Optional[float]
    mean_mutual_info: float
    excluded_pairs: int
    skipped_steps: int
    cluster_count: Optional[int] = None

    @classmethod
    def from_record(cls, topology: str, alpha: float, replicate: int, record: MeasurementRecord, skipped: int) -> "ResultRow":
        return cls(
            topology=topology,
            alpha=alpha,
            replicate=replicate,
            t=record.t,
            pref_similarity=record.pref_similarity,
            pref_congruence=record.pref_congruence,
            assoc_similarity=record.assoc_similarity,
            mean_mutual_info=record.mean_mutual_info,
            excluded_pairs=record.excluded_pairs,
            skipped_steps=skipped,
            cluster_count=record.cluster_count,
        )


def results_table(rows: Iterable[ResultRow], with_clusters: bool = False) -> pd.DataFrame:
    columns = CSV_COLUMNS + (["cluster_count"] if with_clusters else [])
    table = pd.DataFrame([asdict(r) for r in rows], columns=CSV_COLUMNS + ["cluster_count"])
    for col in MEASURES + ("alpha", "cluster_count"):
        table[col] = pd.to_numeric(table[col]).astype("float64")
    table = table.sort_values(["topology", "alpha", "replicate", "t"], kind="mergesort")
    return table[columns].reset_index(drop=True)


def write_results(table: pd.DataFrame, path: str) -> None:
    """Write the CSV atomically: either the full file appears or nothing does."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    partial = path + ".part"
    try:
        table.to_csv(partial, index=False, float_format="%.9g", na_rep="", lineterminator="\n")
        os.replace(partial, path)
    finally:
        if os.path.exists(partial):
            os.remove(partial)
    logger.info(f"Wrote {len(table)} rows to {path}")


def read_results(path: str) -> pd.DataFrame:
    return pd.read_csv(path)


def default_out_path(spec: ExperimentSpec) -> str:
    """The config's ``out_path``, else ``<OUTPUT_DIR>/<topology>.csv``."""
    return spec.out_path or os.path.join(config.OUTPUT_DIR, f"{spec.topology.value}.csv")


# ---------- CELLS ----------

def build_duplex(spec: ExperimentSpec, replicate: int) -> DuplexNetwork:
    params = spec.topology_params
    seed = structure_seed(spec.model.master_seed, replicate)
    if spec.topology == Topology.COMPLETE:
        net = duplicate(generate_complete(spec.n))
    elif spec.topology == Topology.SCALE_FREE:
        net = duplicate(generate_scale_free(spec.n, params.k_out, seed, params.attractiveness))
    elif spec.topology == Topology.SMALL_WORLD:
        net = duplicate(generate_small_world(spec.n, params.clusters, params.k_out, params.p_rewire, seed))
    else:
        net = load_duplex(params.path)
    if net.n != spec.n:
        raise TopologyError(f"network has {net.n} nodes but the experiment asks for n={spec.n}")
    return net


def simulate_cell(
    spec: ExperimentSpec,
    alpha: float,
    replicate: int,
    net: DuplexNetwork,
) -> Tuple[List[ResultRow], Population]:
    seed = cell_seed(spec.model.master_seed, alpha, replicate)
    cfg = spec.model.model_copy(update={"alpha": alpha, "master_seed": seed})
    rng = np.random.default_rng(seed)
    cluster_rng = np.random.default_rng(derive_seed(seed, CLUSTER_LANE, 0))
    pop = init_population(spec.n, cfg.k, rng)
    topology = spec.topology.value
    rows: List[ResultRow] = []

    def sink(t: int, snapshot: Population, skipped: int):
        clusters = None
        if spec.measure_clusters:
            clusters = optimal_cluster_count(snapshot, spec.cluster_k_max, spec.cluster_refs, cluster_rng)
        record = measure_population(snapshot, cfg, t=t, cluster_count=clusters)
        rows.append(ResultRow.from_record(topology, alpha, replicate, record, skipped))
        logger.debug(f"alpha={alpha:g} replicate={replicate} t={t} similarity={record.pref_similarity}")

    final = run(pop, net, cfg, spec.sample_every, sink, rng=rng)
    return rows, final


def run_cell(spec: ExperimentSpec, alpha: float, replicate: int) -> dict:
    """Run one (alpha, replicate) cell through the workflow and return its final state."""
    from backend.app.workflow import build_workflow

    return build_workflow().invoke({"spec": spec, "alpha": alpha, "replicate": replicate})


def run_single(spec: ExperimentSpec, alpha: float, replicate: int) -> List[ResultRow]:
    return run_cell(spec, alpha, replicate)["rows"]


def _run_cell_rows(spec: ExperimentSpec, alpha: float, replicate: int) -> List[ResultRow]:
    return run_single(spec, alpha, replicate)


def run_sweep(spec: ExperimentSpec, out_path: Optional[str] = None) -> pd.DataFrame:
    """
    Execute every (alpha, replicate) cell and return the canonical result table.

    Cells run in a process pool when ``spec.max_workers > 1``. Row order is sorted
    by alpha, replicate and t regardless of completion order. Any failing cell
    aborts the sweep and no output file is written. The table goes to
    ``out_path``, else to ``spec.out_path``; with neither set nothing is written.
    """
    alphas = sorted(set(spec.alphas))
    cells = [(a, r) for a in alphas for r in range(spec.replicates)]
    logger.info(f"Sweep on {spec.topology.value} (n={spec.n}): {len(cells)} cells, {spec.max_workers} worker(s)")
    # generator parameter errors surface here, before any cell starts
    build_duplex(spec, 0)

    rows: List[ResultRow] = []
    if spec.max_workers <= 1:
        for alpha, replicate in cells:
            try:
                rows.extend(run_single(spec, alpha, replicate))
            except Exception as e:
                raise CellFailedError(alpha, replicate, e) from e
    else:
        with ProcessPoolExecutor(max_workers=spec.max_workers) as pool:
            futures = {pool.submit(_run_cell_rows, spec, a, r): (a, r) for a, r in cells}
            for future in as_completed(futures):
                alpha, replicate = futures[future]
                try:
                    rows.extend(future.result())
                except Exception as e:
                    for pending in futures:
                        pending.cancel()
                    raise CellFailedError(alpha, replicate, e) from e

    table = results_table(rows, with_clusters=spec.measure_clusters)
    target = out_path or spec.out_path
    if target:
        write_results(table, target)
    return table


# ---------- AGGREGATION ----------

def final_comparison(table: pd.DataFrame) -> pd.DataFrame:
    """
    Mean and sample standard deviation of each measure at each cell's final time,
    per (topology, alpha). A single replicate reports std 0.
    """
    if table.empty:
        raise EmptySelectionError("result table is empty")
    measures = [m for m in MEASURES + ("cluster_count",) if m in table.columns]
    cells = table.groupby(["topology", "alpha", "replicate"])["t"].idxmax()
    final = table.loc[cells.values]

    grouped = final.groupby(["topology", "alpha"])
    summary = grouped[measures].agg(["mean", "std"])
    summary.columns = [f"{m}_{stat}" for m, stat in summary.columns]
    summary["replicates"] = grouped["replicate"].nunique()
    summary["t_final"] = grouped["t"].max()
    single = summary["replicates"] == 1
    for m in measures:
        summary.loc[single, f"{m}_std"] = 0.0

    expected: Dict[str, int] = final.groupby("topology")["replicate"].nunique().to_dict()
    summary = summary.reset_index()
    summary["missing_replicates"] = summary["topology"].map(expected) - summary["replicates"]
    for _, row in summary[summary["missing_replicates"] > 0].iterrows():
        logger.warning(
            f"topology={row['topology']} alpha={row['alpha']:g} is missing {int(row['missing_replicates'])} replicate(s)"
        )
    return summary
