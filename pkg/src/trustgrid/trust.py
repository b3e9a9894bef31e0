"""Peer trust from observed behaviour.

Each agent keeps a belief in [0, 1] per agent. After every exchange it asks:
given the observation a peer claimed, would I have acted as that peer did?
Agents share one policy, so an honest peer's action must match (or score
close to) the observer's own choice on the claimed observation. Verdicts
accumulate into per-peer counts that drive belief updates, and beliefs gate
which incoming messages an agent is willing to use.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .comms import Message
from .env import Observation
from .policies import (
    Action,
    ValueOracleConfig,
    action_distribution,
    action_values,
    greedy_action,
)

# Belief step multiplier: one inconsistent verdict early in an episode is
# enough to collapse belief from 1.0 to the floor.
DEFAULT_STEP_MULTIPLIER = 3.7
DEFAULT_TAU = 0.5


class ConsistencyMode(Enum):
    EXACT_MATCH = "exact_match"
    VALUE_THRESHOLD = "value_threshold"
    KL = "kl"


class GatingMode(Enum):
    THRESHOLD = "threshold"  # keep iff belief >= tau
    BERNOULLI = "bernoulli"  # keep with probability equal to belief


@dataclass(frozen=True)
class ConsistencyConfig:
    mode: ConsistencyMode = ConsistencyMode.EXACT_MATCH
    rho: float = 0.0
    kl_threshold: float | None = None
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.rho < 0.0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")
        if self.kl_threshold is not None and self.kl_threshold < 0.0:
            raise ValueError(
                f"kl threshold must be non-negative, got {self.kl_threshold}"
            )
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class Verdict:
    """One consistency judgement: the flag that counts, plus its raw score."""

    consistent: bool
    score: float


@dataclass
class TrustState:
    """One observer's running model of every agent, itself included.

    ``counts[peer]`` is [inconsistent verdicts, consistent verdicts]. The
    self entry stays at belief 1.0 with zero counts; it exists so the belief
    vector is total over the roster.
    """

    owner: int
    beliefs: dict[int, float]
    counts: dict[int, list[int]]
    s: float
    t: int = 1


def init_trust(
    owner: int,
    all_agent_ids: list[int] | tuple[int, ...],
    s: float = DEFAULT_STEP_MULTIPLIER,
) -> TrustState:
    """Fresh state: full belief in everyone, no evidence yet."""
    if s <= 0.0:
        raise ValueError(f"belief step multiplier must be positive, got {s}")
    ids = sorted(all_agent_ids)
    if owner not in ids:
        raise ValueError(f"owner {owner} is not in the agent list")
    return TrustState(
        owner=owner,
        beliefs={i: 1.0 for i in ids},
        counts={i: [0, 0] for i in ids},
        s=s,
    )


def value_gap(
    payload: Observation, observed: Action, oracle: ValueOracleConfig
) -> float:
    """How much worse the observed action scores than the observer's best,
    both evaluated on the claimed observation. Zero for a value-tied action
    even when it is not the canonical tie-break choice."""
    values = action_values(payload, oracle)
    return max(values) - values[observed]


def kl_score(
    payload: Observation,
    observed: Action,
    temperature: float = 1.0,
    oracle: ValueOracleConfig | None = None,
) -> float:
    """Surprise of the observed action under a softmax policy.

    Compares the softmax distribution on the claimed observation against the
    same distribution with the probabilities of the canonical and observed
    actions swapped; only those two actions contribute. Exactly 0.0 when the
    observed action is the canonical one or ties it in probability.
    """
    if oracle is None:
        oracle = ValueOracleConfig()
    canonical = greedy_action(payload, oracle)
    if observed == canonical:
        return 0.0
    dist = action_distribution(payload, temperature, oracle)
    p_canon = dist[canonical]
    p_obs = dist[observed]
    if p_canon == p_obs:
        return 0.0
    return (p_canon - p_obs) * math.log(p_canon / p_obs)


def calibrate_kl_threshold(
    samples: list[tuple[Observation, Action]],
    temperature: float = 1.0,
    oracle: ValueOracleConfig | None = None,
) -> float:
    """Mean surprise score over known-honest (observation, action) samples.

    Under a stochastic policy honest peers routinely deviate from the
    canonical action, so the consistency cut-off has to come from data:
    scores at or below this mean pass.
    """
    if not samples:
        raise ValueError("cannot calibrate a threshold from zero samples")
    total = 0.0
    for payload, observed in samples:
        total += kl_score(payload, observed, temperature, oracle)
    return total / len(samples)


def consistency_check(
    oracle: ValueOracleConfig,
    msg_prev: Message,
    observed_action: Action,
    cfg: ConsistencyConfig,
) -> Verdict:
    """Judge one peer message against the action the peer was seen to take.

    The observer evaluates the claimed observation with its own oracle; the
    reported score is the value gap (or the KL surprise in KL mode).
    """
    payload = msg_prev.payload
    if cfg.mode is ConsistencyMode.EXACT_MATCH:
        consistent = greedy_action(payload, oracle) == observed_action
        return Verdict(consistent, value_gap(payload, observed_action, oracle))
    if cfg.mode is ConsistencyMode.VALUE_THRESHOLD:
        gap = value_gap(payload, observed_action, oracle)
        return Verdict(gap <= cfg.rho, gap)
    if cfg.mode is ConsistencyMode.KL:
        if cfg.kl_threshold is None:
            raise ValueError("KL consistency requires a calibrated threshold")
        score = kl_score(payload, observed_action, cfg.temperature, oracle)
        return Verdict(score <= cfg.kl_threshold, score)
    raise ValueError(f"unknown consistency mode {cfg.mode!r}")


def update_consistency_count(ts: TrustState, peer: int, verdict: Verdict) -> None:
    if peer not in ts.counts:
        raise KeyError(f"agent {ts.owner} has no count entry for {peer}")
    ts.counts[peer][1 if verdict.consistent else 0] += 1


def update_belief(ts: TrustState, peer: int, verdict: Verdict) -> None:
    """Move belief by s * (matching verdict count / step), clamped to [0, 1].

    The count must already include this step's verdict. Counts grow while
    the divisor is the running step, so a consistent streak holds belief at
    the ceiling and repeated inconsistency pins it to the floor.
    """
    if ts.t < 2:
        raise ValueError(f"belief update requires step >= 2, got {ts.t}")
    if peer not in ts.beliefs:
        raise KeyError(f"agent {ts.owner} has no belief entry for {peer}")
    count = ts.counts[peer][1 if verdict.consistent else 0]
    belief = ts.beliefs[peer]
    if verdict.consistent:
        belief = belief + ts.s * (count / ts.t)
    else:
        belief = belief - ts.s * (count / ts.t)
    ts.beliefs[peer] = min(1.0, max(0.0, belief))


def step_trust_all(
    states: dict[int, TrustState],
    prev_msgs: dict[int, tuple[Message, ...]],
    observed_actions: dict[int, Action],
    cfg: ConsistencyConfig,
    oracle: ValueOracleConfig,
) -> dict[tuple[int, int], Verdict]:
    """One reevaluation round over every observer after an environment step.

    ``prev_msgs`` holds each observer's inbox from the step just taken and
    ``observed_actions`` the actions the senders were seen to take that
    step. Every received message is judged, including messages the observer
    chose not to act on, so beliefs can keep moving for gated senders. Each
    observer advances its step counter exactly once; with no message there
    is no verdict and no belief change for that pair.
    """
    verdicts: dict[tuple[int, int], Verdict] = {}
    for observer in sorted(states):
        ts = states[observer]
        ts.t += 1
        for msg in prev_msgs.get(observer, ()):
            if msg.sender not in observed_actions:
                raise KeyError(f"no observed action for message sender {msg.sender}")
            verdict = consistency_check(oracle, msg, observed_actions[msg.sender], cfg)
            update_consistency_count(ts, msg.sender, verdict)
            update_belief(ts, msg.sender, verdict)
            verdicts[(observer, msg.sender)] = verdict
    return verdicts


def gate_messages(
    ts: TrustState,
    msgs: tuple[Message, ...],
    tau: float = DEFAULT_TAU,
    mode: GatingMode = GatingMode.THRESHOLD,
    rng: random.Random | None = None,
) -> tuple[Message, ...]:
    """Drop messages from senders the owner does not trust.

    Threshold mode keeps a message iff the sender's belief is at least tau,
    so tau = 0 disables gating. Bernoulli mode keeps it with probability
    equal to the belief, drawing one uniform per message in inbox order.
    Dropped senders simply contribute nothing; the owner proceeds on fewer
    messages.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if mode is GatingMode.BERNOULLI and rng is None:
        raise ValueError("bernoulli gating requires an rng")
    kept: list[Message] = []
    for msg in msgs:
        if msg.sender not in ts.beliefs:
            raise KeyError(f"agent {ts.owner} has no belief entry for {msg.sender}")
        belief = ts.beliefs[msg.sender]
        if mode is GatingMode.THRESHOLD:
            keep = belief >= tau
        else:
            keep = rng.random() < belief
        if keep:
            kept.append(msg)
    return tuple(kept)
