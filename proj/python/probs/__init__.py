"""Python bindings for the Connect-K self-play library."""

from ._probs import (
    CheckpointError,
    ContractViolation,
    DivergenceError,
    GameState,
    QNet,
    Trainer,
    ValueNet,
    Variant,
    baseline_match,
    beam_search,
    beam_search_fn,
    expected_score,
    fit_ratings,
    from_text,
    greedy_action,
    load_networks,
    lookahead_action,
    new_game,
    play_moves,
)

__all__ = [name for name in dir() if not name.startswith("_")]
