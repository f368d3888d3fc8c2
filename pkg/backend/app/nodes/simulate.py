from backend.app.services.experiment_service import simulate_cell


def simulate_node(state):
    rows, population = simulate_cell(state["spec"], state["alpha"], state.get("replicate", 0), state["network"])
    return {**state, "rows": rows, "population": population}
