"""Field computation, winner-take-all activation, and iterative recall.

Recall runs synchronous full-state updates: every unit's field is computed
from the previous state, the activation function picks the winners, and
iteration stops at a fixed point or at the iteration cap. Tie-breaking is
deterministic (lowest index) so benchmark numbers are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .patterns import Layout, Pattern
from .plasticity import Rule, WeightState


@dataclass
class NetworkConfig:
    layout: Layout
    rule: Rule
    max_iterations: int = 10
    zero_diagonal: bool = False
    tie_break: str = "lowest_index"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tie_break != "lowest_index":
            raise ValueError(f"unsupported tie_break {self.tie_break!r}")


@dataclass
class RecallResult:
    final_state: Pattern
    iterations_used: int
    converged: bool


def field(ws: WeightState, activity: Pattern | np.ndarray) -> np.ndarray:
    """Per-unit input field h_j = b_j + sum_i activity_i * w_ij."""
    bits = activity.bits if isinstance(activity, Pattern) else np.asarray(activity)
    if bits.shape != (ws.w.shape[0],):
        raise ValueError(f"activity length {bits.shape} does not match {ws.w.shape}")
    return ws.b + bits.astype(np.float64) @ ws.w


def _activate_batch_modular(h: np.ndarray, layout: Layout) -> np.ndarray:
    rows = h.shape[0]
    blocks = h.reshape(rows, layout.H, layout.M)
    winners = blocks.argmax(axis=2)  # first maximum wins ties
    out = np.zeros((rows, layout.N), dtype=np.uint8)
    np.put_along_axis(
        out.reshape(rows, layout.H, layout.M), winners[:, :, None], 1, axis=2
    )
    return out


def _activate_batch_kwta(h: np.ndarray, layout: Layout) -> np.ndarray:
    rows = h.shape[0]
    # stable sort keeps lowest indices first among equal fields
    order = np.argsort(-h, axis=1, kind="stable")[:, : layout.K]
    out = np.zeros((rows, layout.N), dtype=np.uint8)
    np.put_along_axis(out, order, 1, axis=1)
    return out


def activate_batch(h: np.ndarray, layout: Layout) -> np.ndarray:
    if layout.modular:
        return _activate_batch_modular(h, layout)
    return _activate_batch_kwta(h, layout)


def activate_modular(h: np.ndarray, layout: Layout) -> Pattern:
    """Within each block, the unit with the largest field wins."""
    if not layout.modular:
        raise ValueError("local WTA applies to modular layouts")
    bits = _activate_batch_modular(np.asarray(h, dtype=np.float64)[None, :], layout)[0]
    return Pattern(bits, layout)


def activate_kwta(h: np.ndarray, layout: Layout) -> Pattern:
    """The K units with the largest fields win, network-wide."""
    if layout.modular:
        raise ValueError("kWTA applies to non-modular layouts")
    bits = _activate_batch_kwta(np.asarray(h, dtype=np.float64)[None, :], layout)[0]
    return Pattern(bits, layout)


def activate(h: np.ndarray, layout: Layout) -> Pattern:
    return activate_modular(h, layout) if layout.modular else activate_kwta(h, layout)


def effective_weights(ws: WeightState, cfg: NetworkConfig) -> np.ndarray:
    if not cfg.zero_diagonal:
        return ws.w
    w = ws.w.copy()
    np.fill_diagonal(w, 0.0)
    return w


def recall_batch(
    ws: WeightState, cues: np.ndarray, cfg: NetworkConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Synchronous recall of many cues against one weight state.

    Returns (final_states, iterations_used, converged) with one row per
    cue. Rows that reach a fixed point stop updating; the rest run to the
    iteration cap and keep their last computed state.
    """
    layout = cfg.layout
    w = effective_weights(ws, cfg)
    states = np.ascontiguousarray(cues, dtype=np.uint8).copy()
    rows = states.shape[0]
    iters = np.zeros(rows, dtype=np.int64)
    conv = np.zeros(rows, dtype=bool)
    pending = np.arange(rows)
    for step in range(1, cfg.max_iterations + 1):
        cur = states[pending]
        h = cur.astype(np.float64) @ w + ws.b
        nxt = activate_batch(h, layout)
        fixed = np.all(nxt == cur, axis=1)
        iters[pending] = step
        states[pending] = nxt
        conv[pending[fixed]] = True
        pending = pending[~fixed]
        if pending.size == 0:
            break
    return states, iters, conv


def recall(ws: WeightState, cue: Pattern, cfg: NetworkConfig) -> RecallResult:
    """Iterate the network from a cue to a fixed point or the cap."""
    states, iters, conv = recall_batch(ws, cue.bits[None, :], cfg)
    return RecallResult(
        final_state=Pattern(states[0], cfg.layout),
        iterations_used=int(iters[0]),
        converged=bool(conv[0]),
    )
