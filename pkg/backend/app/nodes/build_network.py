from backend.app.services.experiment_service import build_duplex
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)


def build_network_node(state):
    spec = state["spec"]
    replicate = state.get("replicate", 0)
    network = build_duplex(spec, replicate)
    logger.debug(
        f"{spec.topology.value} duplex for replicate {replicate}: "
        f"{network.layer1.edge_count}/{network.layer2.edge_count} edges"
    )
    return {**state, "network": network}
