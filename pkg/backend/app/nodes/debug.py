from backend.app.utils.logger import get_logger

logger = get_logger(__name__)


def log_state(state):
    rows = state.get("rows", [])
    final = rows[-1] if rows else None
    if final is not None:
        logger.info(
            f"cell alpha={state['alpha']:g} replicate={state.get('replicate', 0)} done at t={final.t}: "
            f"similarity={final.pref_similarity} congruence={final.pref_congruence} "
            f"association={final.assoc_similarity} mi={final.mean_mutual_info:.4g} skipped={final.skipped_steps}"
        )
    return state
