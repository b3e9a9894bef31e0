"""Exact value oracle over observation windows and the policies built on it.

The oracle computes, by depth-limited dynamic programming, the maximum
discounted coverage gain reachable inside an agent's window when the
first move is fixed. Because every agent runs the same oracle with the
same tie-break order, any two agents given the same window agree on both
values and the derived greedy action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .env import ACTION_DELTAS, CELL_OOB, CELL_UNCOVERED, Action, Observation


@dataclass(frozen=True)
class ValueOracleConfig:
    """Lookahead parameters shared by every agent in a scenario."""

    gamma: float = 0.9
    horizon: int = 3
    radius: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")


class AdversaryStrategy(Enum):
    """How a self-interested agent chooses its environment action."""

    NAIVE = "naive"  # greedy on its own truthful view
    CONSISTENT_LIAR = "consistent_liar"  # greedy on the view it transmitted


@dataclass(frozen=True)
class ActionDistribution:
    """Probability per action, aligned with the ``Action`` order."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != len(Action):
            raise ValueError(f"need {len(Action)} probabilities, got {len(self.probs)}")
        if any(p < 0.0 for p in self.probs):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(self.probs)!r}, not 1")

    def __getitem__(self, action: Action) -> float:
        return self.probs[action]


@lru_cache(maxsize=1 << 18)
def _value_table(
    window_bytes: bytes, size: int, gamma: float, horizon: int
) -> tuple[float, ...]:
    """Value of each first action for one window, by exact depth-limited DP.

    State is (cell index, bitmask of cells covered since the start). Moves
    that would leave the window or enter an out-of-grid cell resolve to
    staying put; arriving on an uncovered cell gains 1 and covers it.
    """
    cells = tuple(window_bytes)
    center = (size // 2) * size + (size // 2)

    moves: list[tuple[int, ...]] = []
    for idx in range(size * size):
        row, col = divmod(idx, size)
        dests = []
        for action in Action:
            dx, dy = ACTION_DELTAS[action]
            nr, nc = row + dy, col + dx
            if 0 <= nr < size and 0 <= nc < size:
                nidx = nr * size + nc
                if cells[nidx] == CELL_OOB:
                    nidx = idx  # blocked by an out-of-grid cell
            else:
                nidx = idx
            dests.append(nidx)
        moves.append(tuple(dests))

    memo: dict[tuple[int, int, int], float] = {}

    def best(idx: int, mask: int, depth: int) -> float:
        if depth == 0:
            return 0.0
        key = (idx, mask, depth)
        cached = memo.get(key)
        if cached is not None:
            return cached
        out = 0.0
        for dest in moves[idx]:
            bit = 1 << dest
            if cells[dest] == CELL_UNCOVERED and not mask & bit:
                v = 1.0 + gamma * best(dest, mask | bit, depth - 1)
            else:
                v = gamma * best(dest, mask, depth - 1)
            if v > out:
                out = v
        memo[key] = out
        return out

    values = []
    for dest in moves[center]:
        bit = 1 << dest
        if cells[dest] == CELL_UNCOVERED:
            values.append(1.0 + gamma * best(dest, bit, horizon - 1))
        else:
            values.append(gamma * best(dest, 0, horizon - 1))
    return tuple(values)


def action_values(obs: Observation, cfg: ValueOracleConfig) -> tuple[float, ...]:
    """Values of all actions on one observation, in ``Action`` order."""
    return _value_table(obs.window_key(), obs.local_map.shape[0], cfg.gamma, cfg.horizon)


def value(obs: Observation, action: Action, cfg: ValueOracleConfig) -> float:
    """Discounted maximum window-coverage gain when acting ``action`` first."""
    return action_values(obs, cfg)[action]


def greedy_action(obs: Observation, cfg: ValueOracleConfig) -> Action:
    """Argmax action; ties go to the earliest action in the fixed order."""
    values = action_values(obs, cfg)
    best = Action.UP
    best_value = values[Action.UP]
    for action in Action:
        if values[action] > best_value:
            best, best_value = action, values[action]
    return best


def action_distribution(
    obs: Observation, temperature: float, cfg: ValueOracleConfig
) -> ActionDistribution:
    """Softmax over action values. Invariant to shifting all values equally."""
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    values = action_values(obs, cfg)
    top = max(values)
    weights = [math.exp((v - top) / temperature) for v in values]
    total = sum(weights)
    return ActionDistribution(tuple(w / total for w in weights))


def adversary_act(
    obs: Observation, strategy: AdversaryStrategy, cfg: ValueOracleConfig
) -> Action:
    """Action of a self-interested agent.

    ``obs`` must be the strategy's decision basis: the agent's truthful
    observation for NAIVE, the observation it transmitted this step for
    CONSISTENT_LIAR (so its behavior matches its own claim).
    """
    if not isinstance(strategy, AdversaryStrategy):
        raise ValueError(f"unknown adversary strategy {strategy!r}")
    return greedy_action(obs, cfg)


def clear_value_cache() -> None:
    """Drop memoized value tables (test isolation and memory control)."""
    _value_table.cache_clear()
