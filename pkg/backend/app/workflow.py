from langgraph.graph import END, StateGraph

from backend.app.nodes.build_network import build_network_node
from backend.app.nodes.debug import log_state
from backend.app.nodes.simulate import simulate_node
from backend.app.state import CellState


def build_workflow():
    workflow = StateGraph(CellState)

    workflow.add_node("build_network", build_network_node)
    workflow.add_node("simulate", simulate_node)
    workflow.add_node("debug", log_state)

    workflow.set_entry_point("build_network")

    workflow.add_edge("build_network", "simulate")
    workflow.add_edge("simulate", "debug")
    workflow.add_edge("debug", END)

    return workflow.compile()
