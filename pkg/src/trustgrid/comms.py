"""Communication layer: topology graph, message exchange, falsification.

Every step each agent transmits one observation payload over each of its
bidirectional channels. Cooperative agents transmit the truth; a
self-interested agent first runs its payload through a scripted
falsification strategy.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .env import CELL_COVERED, CELL_OOB, CELL_UNCOVERED, GridState, Observation, observe
from .policies import AdversaryStrategy

# Candidate cells drawn when spoofing a position; farthest (Manhattan) wins.
POSITION_SPOOF_CANDIDATES = 8


class Role(Enum):
    COOPERATIVE = "cooperative"
    SELF_INTERESTED = "self_interested"


class FalsificationStrategy(Enum):
    TRUTHFUL = "truthful"
    LURE = "lure"  # report every uncovered cell as covered
    POSITION_SPOOF = "position_spoof"  # claim a far-away position
    BABBLE = "babble"  # random flags, no usable content


@dataclass(frozen=True)
class AgentSpec:
    """Roster entry: who an agent is and how it communicates and acts."""

    agent_id: int
    role: Role
    falsification: FalsificationStrategy = FalsificationStrategy.TRUTHFUL
    acting: AdversaryStrategy = AdversaryStrategy.NAIVE
    start: tuple[int, int] | None = None


@dataclass(frozen=True)
class CommGraph:
    """Symmetric communication topology without self-edges."""

    adjacency: tuple[tuple[int, tuple[int, ...]], ...]

    @classmethod
    def complete(cls, ids: list[int] | tuple[int, ...]) -> "CommGraph":
        ids = sorted(ids)
        return cls(
            tuple(
                (i, tuple(j for j in ids if j != i))
                for i in ids
            )
        )

    @classmethod
    def from_edges(
        cls, ids: list[int] | tuple[int, ...], edges: list[tuple[int, int]]
    ) -> "CommGraph":
        """Build from undirected pairs; both directions are implied."""
        ids = sorted(ids)
        known = set(ids)
        neighbors: dict[int, set[int]] = {i: set() for i in ids}
        for a, b in edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) references an unknown agent")
            if a == b:
                raise ValueError(f"self-edge on agent {a}")
            neighbors[a].add(b)
            neighbors[b].add(a)
        return cls(tuple((i, tuple(sorted(neighbors[i]))) for i in ids))

    def __post_init__(self) -> None:
        seen = {i for i, _ in self.adjacency}
        for i, nbrs in self.adjacency:
            for j in nbrs:
                if j == i:
                    raise ValueError(f"self-edge on agent {i}")
                if j not in seen:
                    raise ValueError(f"edge ({i}, {j}) references an unknown agent")
                if i not in dict(self.adjacency)[j]:
                    raise ValueError(f"asymmetric graph: edge ({i}, {j}) has no reverse")

    def agents(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.adjacency)

    def neighbors(self, agent_id: int) -> tuple[int, ...]:
        for i, nbrs in self.adjacency:
            if i == agent_id:
                return nbrs
        raise KeyError(f"unknown agent {agent_id}")

    def directed_edge_count(self) -> int:
        return sum(len(nbrs) for _, nbrs in self.adjacency)


@dataclass(frozen=True)
class Message:
    """One observation payload on one channel at one step."""

    sender: int
    payload: Observation
    t: int

    def __post_init__(self) -> None:
        if self.payload.t != self.t:
            raise ValueError(f"payload step {self.payload.t} != message step {self.t}")
        if self.payload.agent_id != self.sender:
            raise ValueError(
                f"payload agent {self.payload.agent_id} != sender {self.sender}"
            )


def falsify(
    obs: Observation,
    strategy: FalsificationStrategy,
    rng: random.Random,
    grid_size: tuple[int, int],
) -> Observation:
    """Transform a truthful observation per the sender's strategy.

    ``grid_size`` bounds the cells a spoofed position may claim. The rng is
    the sender's per-episode stream; TRUTHFUL and LURE draw nothing from it.
    """
    if strategy is FalsificationStrategy.TRUTHFUL:
        return obs

    window = obs.local_map
    if strategy is FalsificationStrategy.LURE:
        faked = np.where(window == CELL_UNCOVERED, CELL_COVERED, window).astype(np.int8)
        return Observation(obs.agent_id, obs.position, faked, obs.t)

    if strategy is FalsificationStrategy.BABBLE:
        faked = window.copy()
        size = window.shape[0]
        for row in range(size):
            for col in range(size):
                if faked[row, col] != CELL_OOB:
                    faked[row, col] = CELL_COVERED if rng.random() < 0.5 else CELL_UNCOVERED
        return Observation(obs.agent_id, obs.position, faked, obs.t)

    if strategy is FalsificationStrategy.POSITION_SPOOF:
        width, height = grid_size
        x, y = obs.position
        candidates = [
            (rng.randrange(width), rng.randrange(height))
            for _ in range(POSITION_SPOOF_CANDIDATES)
        ]
        fake = max(candidates, key=lambda c: abs(c[0] - x) + abs(c[1] - y))
        radius = obs.radius
        size = window.shape[0]
        faked = np.full((size, size), CELL_COVERED, dtype=np.int8)
        for row in range(size):
            for col in range(size):
                gx = fake[0] + (col - radius)
                gy = fake[1] + (row - radius)
                if not (0 <= gx < width and 0 <= gy < height):
                    faked[row, col] = CELL_OOB
                elif abs(gx - x) <= radius and abs(gy - y) <= radius:
                    # inside the sender's real window: reuse true knowledge
                    faked[row, col] = window[gy - (y - radius), gx - (x - radius)]
        return Observation(obs.agent_id, fake, faked, obs.t)

    raise ValueError(f"unknown falsification strategy {strategy!r}")


def transmit(
    state: GridState,
    roster: dict[int, AgentSpec],
    rng: random.Random,
    radius: int,
) -> dict[int, Observation]:
    """The payload each agent transmits this step, keyed by sender.

    Payloads are computed once per sender in ascending id order so the
    falsification rng stream is identical regardless of topology.
    """
    payloads: dict[int, Observation] = {}
    for i in sorted(roster):
        spec = roster[i]
        if spec.role is Role.COOPERATIVE and spec.falsification is not FalsificationStrategy.TRUTHFUL:
            raise ValueError(f"cooperative agent {i} must transmit truthfully")
        truthful = observe(state, i, radius)
        payloads[i] = falsify(
            truthful, spec.falsification, rng, (state.width, state.height)
        )
    return payloads


def address(
    payloads: dict[int, Observation], graph: CommGraph, t: int
) -> dict[int, tuple[Message, ...]]:
    """Fan payloads out over the directed edges: receiver id -> inbox."""
    inboxes: dict[int, tuple[Message, ...]] = {}
    for receiver in graph.agents():
        inboxes[receiver] = tuple(
            Message(sender, payloads[sender], t)
            for sender in graph.neighbors(receiver)
        )
    return inboxes


def broadcast(
    state: GridState,
    graph: CommGraph,
    roster: dict[int, AgentSpec],
    rng: random.Random,
    radius: int,
) -> dict[int, tuple[Message, ...]]:
    """One exchange round: every agent's payload delivered on every edge.

    Returns per-receiver inboxes ordered by sender id; the total message
    count equals the number of directed edges. Never mutates ``state``.
    """
    if set(graph.agents()) != set(roster):
        raise ValueError("graph agents do not match the roster")
    return address(transmit(state, roster, rng, radius), graph, state.t)
