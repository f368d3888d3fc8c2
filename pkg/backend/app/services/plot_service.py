# backend/app/services/plot_service.py

import os
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from backend.app.errors import EmptySelectionError, UnknownMeasureError
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)

MEASURE_LABELS = {
    "pref_similarity": "Preference similarity",
    "pref_congruence": "Preference congruence",
    "assoc_similarity": "Association similarity",
    "mean_mutual_info": "Mutual information (nats)",
    "cluster_count": "Optimal cluster count",
}

# fixed ids and no timestamp, so identical input gives identical bytes
_SVG_RC = {"svg.hashsalt": "duplex-contagion", "svg.fonttype": "path"}
_SVG_METADATA = {"Date": None}


def _check_measure(measure: str, table: pd.DataFrame, column: str):
    if measure not in MEASURE_LABELS or column not in table.columns:
        raise UnknownMeasureError(f"unknown measure {measure!r}; choose from {', '.join(MEASURE_LABELS)}")


def _save(fig, out_path: str):
    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata=_SVG_METADATA)
    logger.info(f"Figure saved to {out_path}")


def emit_plot(table: pd.DataFrame, measure: str, out_path: str, topology: Optional[str] = None) -> List[str]:
    """
    Line chart of the replicate-mean ``measure`` against t, one curve per alpha.
    Returns the legend labels.
    """
    _check_measure(measure, table, measure)
    rows = table if topology is None else table[table["topology"] == topology]
    if rows.empty:
        raise EmptySelectionError(f"no rows for topology {topology!r}")
    topologies = sorted(rows["topology"].unique())
    if len(topologies) > 1:
        raise EmptySelectionError(f"table holds several topologies ({', '.join(topologies)}); pick one")

    curves = rows.groupby(["alpha", "t"])[measure].mean().reset_index()
    labels = []
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for alpha, curve in curves.groupby("alpha"):
            label = f"α = {alpha:g}"
            ax.plot(curve["t"], curve[measure], label=label, linewidth=1.2)
            labels.append(label)
        ax.set_xlabel("t")
        ax.set_ylabel(MEASURE_LABELS[measure])
        ax.set_title(topologies[0])
        ax.legend()
        fig.tight_layout()
        _save(fig, out_path)
        plt.close(fig)
    return labels


def emit_final_plot(summary: pd.DataFrame, measure: str, out_path: str) -> List[str]:
    """Final replicate-mean of ``measure`` against alpha, one curve per topology, std as error bars."""
    _check_measure(measure, summary, f"{measure}_mean")
    if summary.empty:
        raise EmptySelectionError("summary is empty")

    labels = []
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for topology, group in summary.sort_values("alpha").groupby("topology"):
            ax.errorbar(
                group["alpha"],
                group[f"{measure}_mean"],
                yerr=group[f"{measure}_std"],
                marker="o",
                capsize=3,
                label=topology,
            )
            labels.append(topology)
        ax.set_xlabel("α")
        ax.set_ylabel(MEASURE_LABELS[measure])
        ax.legend()
        fig.tight_layout()
        _save(fig, out_path)
        plt.close(fig)
    return labels
