import argparse
import json
import sys
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from backend.app import config
from backend.app.errors import SimulationError
from backend.app.models import ExperimentSpec, MIMode
from backend.app.services.cluster_service import optimal_cluster_count
from backend.app.services.experiment_service import (
    default_out_path,
    final_comparison,
    read_results,
    results_table,
    run_cell,
    run_sweep,
    write_results,
)
from backend.app.services.measures_service import measure_population
from backend.app.services.network_service import (
    duplicate,
    generate_complete,
    generate_scale_free,
    generate_small_world,
    path_length_summary,
    save_duplex,
)
from backend.app.services.plot_service import emit_final_plot, emit_plot
from backend.app.services.snapshot_service import load_snapshot, save_population
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)


def _parse_alphas(text: str) -> List[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"alphas must be a comma-separated list of numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duplex-contagion",
        description="Associative diffusion and preference contagion on duplex networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a duplicated duplex network file")
    gen.add_argument("--topology", required=True, choices=["complete", "scale-free", "small-world"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k-out", type=int)
    gen.add_argument("--clusters", type=int)
    gen.add_argument("--p-rewire", type=float, default=config.DEFAULT_P_REWIRE)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run one cell (model alpha, replicate 0) of an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="defaults to the config's out_path, else OUTPUT_DIR/<topology>.csv")
    run.add_argument("--snapshot", help="also save the final population as JSON")

    sweep = sub.add_parser("sweep", help="run every (alpha, replicate) cell of an experiment")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--alphas", type=_parse_alphas, required=True)
    sweep.add_argument("--replicates", type=int, required=True)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--out", help="defaults to the config's out_path, else OUTPUT_DIR/<topology>.csv")

    plot = sub.add_parser("plot", help="draw a measure from a result CSV as SVG")
    plot.add_argument("--in", dest="in_path", required=True)
    plot.add_argument("--measure", required=True)
    plot.add_argument("--topology")
    plot.add_argument("--final", action="store_true", help="final value against alpha, one curve per topology")
    plot.add_argument("--out", required=True)

    measure = sub.add_parser("measure", help="recompute measures from a population snapshot")
    measure.add_argument("--population", required=True)
    measure.add_argument("--mi-mode", choices=[m.value for m in MIMode], default=MIMode.SEQUENTIAL.value)
    measure.add_argument("--clusters", action="store_true", help="also estimate the optimal cluster count")
    measure.add_argument("--seed", type=int, default=config.DEFAULT_MASTER_SEED)

    return parser


def _generate(args):
    if args.topology == "complete":
        layer = generate_complete(args.n)
    elif args.topology == "scale-free":
        if args.k_out is None:
            raise SimulationError("scale-free needs --k-out")
        layer = generate_scale_free(args.n, args.k_out, args.seed)
    else:
        if args.k_out is None or args.clusters is None:
            raise SimulationError("small-world needs --k-out and --clusters")
        layer = generate_small_world(args.n, args.clusters, args.k_out, args.p_rewire, args.seed)
    summary = path_length_summary(layer)
    logger.info(
        f"{args.topology}: {layer.edge_count} edges, mean path {summary['mean_path_length']:.4g}, "
        f"efficiency {summary['efficiency']:.4g}"
    )
    save_duplex(duplicate(layer), args.out)


def _run(args):
    spec = ExperimentSpec.from_file(args.config)
    state = run_cell(spec, spec.model.alpha, 0)
    out = args.out or default_out_path(spec)
    write_results(results_table(state["rows"], with_clusters=spec.measure_clusters), out)
    if args.snapshot:
        save_population(state["population"], args.snapshot, t=spec.model.steps)


def _sweep(args):
    spec = ExperimentSpec.from_file(args.config)
    overrides = {"alphas": args.alphas, "replicates": args.replicates}
    if args.workers is not None:
        overrides["max_workers"] = args.workers
    spec = ExperimentSpec.model_validate({**spec.model_dump(), **overrides})
    run_sweep(spec, out_path=args.out or default_out_path(spec))


def _plot(args):
    table = read_results(args.in_path)
    if args.final:
        emit_final_plot(final_comparison(table), args.measure, args.out)
    else:
        emit_plot(table, args.measure, args.out, topology=args.topology)


def _measure(args):
    pop, t = load_snapshot(args.population)
    clusters = None
    if args.clusters:
        clusters = optimal_cluster_count(pop, config.GAP_K_MAX, config.GAP_REFS, np.random.default_rng(args.seed))
    record = measure_population(pop, args.mi_mode, t=t, with_interpretive_distance=True, cluster_count=clusters)
    print(json.dumps(record.to_dict(), indent=2))


COMMANDS = {
    "generate": _generate,
    "run": _run,
    "sweep": _sweep,
    "plot": _plot,
    "measure": _measure,
}


def run_app(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        print(f"error: invalid config: {where}: {first['msg']}", file=sys.stderr)
        return 1
    except (SimulationError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0
