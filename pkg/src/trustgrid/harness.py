"""Experiment runner: seeded episode batches, CSV/JSON artifacts.

One run executes a scenario's seed list episode by episode. Each step:
agents exchange messages, the trust-gated (or ungated) inboxes feed each
agent's action choice, the environment advances, and every observer
re-evaluates its peers from the messages and actions of the step just
taken. Output is fully determined by (config, seed list), byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
import random
import statistics
from dataclasses import dataclass

import numpy as np

from .comms import FalsificationStrategy, Message, Role, address, transmit
from .config import ScenarioConfig
from .env import (
    CELL_COVERED,
    CELL_UNCOVERED,
    Observation,
    coverage_fraction,
    observe,
    reset,
    step,
)
from .metrics import EpisodeSummary, StepLog, classify_step, f1, summarize
from .policies import Action, AdversaryStrategy, adversary_act, greedy_action
from .trust import gate_messages, init_trust, step_trust_all

CSV_HEADER = "step,episode,coverage,observer,peer,belief,verdict,tp,tn,fp,fn,f1"


@dataclass(frozen=True)
class EpisodeRun:
    seed: int
    steps: list[StepLog]
    summary: EpisodeSummary


@dataclass(frozen=True)
class RunArtifact:
    config: ScenarioConfig
    episodes: list[EpisodeRun]

    def coverage_timelines(self) -> list[tuple[float, ...]]:
        return [ep.summary.coverage_timeline for ep in self.episodes]

    def mean_coverage_timeline(self) -> tuple[float, ...]:
        return _mean_timeline(self.coverage_timelines())

    def mean_team_f1_timeline(self) -> tuple[float, ...]:
        return _mean_timeline([ep.summary.mean_f1_timeline for ep in self.episodes])

    def final_coverages(self) -> list[float]:
        return [ep.summary.final_coverage for ep in self.episodes]

    def cooperative_coverages(self) -> list[float]:
        """Per episode: fraction of grid cells first covered by cooperative
        agents. Start cells are credited to nobody."""
        cells = self.config.width * self.config.height
        roles = self.config.roles()
        out = []
        for ep in self.episodes:
            credited = sum(
                total
                for agent, total in ep.summary.reward_totals.items()
                if roles[agent] is Role.COOPERATIVE
            )
            out.append(credited / cells)
        return out


def _mean_timeline(timelines: list[tuple[float, ...]]) -> tuple[float, ...]:
    if not timelines:
        return ()
    n = len(timelines)
    return tuple(sum(tl[k] for tl in timelines) / n for k in range(len(timelines[0])))


def merge_observation(own: Observation, msgs: tuple[Message, ...]) -> Observation:
    """Overlay peers' claimed coverage onto the agent's own window.

    Claims are unioned: a cell the agent sees as uncovered flips to covered
    when any retained peer claims it covered. Cells outside the agent's
    window, and claims about them, are ignored. Returns ``own`` unchanged
    (same object) when no claim lands.
    """
    if not msgs:
        return own
    size = own.local_map.shape[0]
    radius = own.radius
    x, y = own.position
    window = None
    for msg in msgs:
        payload = msg.payload
        rows, cols = np.nonzero(payload.local_map == CELL_COVERED)
        if rows.size == 0:
            continue
        px, py = payload.position
        own_rows = rows + (py - payload.radius) - (y - radius)
        own_cols = cols + (px - payload.radius) - (x - radius)
        inside = (
            (own_rows >= 0) & (own_rows < size) & (own_cols >= 0) & (own_cols < size)
        )
        own_rows = own_rows[inside]
        own_cols = own_cols[inside]
        base = own.local_map if window is None else window
        news = base[own_rows, own_cols] == CELL_UNCOVERED
        if not news.any():
            continue
        if window is None:
            window = own.local_map.copy()
        window[own_rows[news], own_cols[news]] = CELL_COVERED
    if window is None:
        return own
    return Observation(own.agent_id, own.position, window, own.t)


def run_episode(cfg: ScenarioConfig, seed: int) -> EpisodeRun:
    """One seeded episode under the scenario's defense mode.

    Step order: broadcast, gate (trust-gating modes only), act, advance the
    environment, then update every observer's trust from this step's
    messages and actions so the verdicts shape the next step's gating.
    Trust is monitored in every mode; only gating is mode-dependent.
    """
    state = reset(cfg, seed)
    comms_rng = random.Random(f"comms:{seed}")
    gate_rng = random.Random(f"gate:{seed}")
    roster = {spec.agent_id: spec for spec in cfg.roster}
    roles = cfg.roles()
    ids = sorted(roster)
    radius = cfg.oracle.radius
    trust_states = {i: init_trust(i, ids, cfg.s) for i in ids}
    heard = {i: cfg.topology.neighbors(i) for i in ids}
    gating = cfg.gating_enabled()

    steps: list[StepLog] = []
    for _ in range(cfg.steps):
        payloads = transmit(state, roster, comms_rng, radius)
        inboxes = address(payloads, cfg.topology, state.t)
        actions: dict[int, Action] = {}
        for i in ids:
            spec = roster[i]
            if spec.role is Role.SELF_INTERESTED:
                basis = (
                    payloads[i]
                    if spec.acting is AdversaryStrategy.CONSISTENT_LIAR
                    else observe(state, i, radius)
                )
                actions[i] = adversary_act(basis, spec.acting, cfg.oracle)
            else:
                inbox = inboxes[i]
                if gating:
                    inbox = gate_messages(
                        trust_states[i], inbox, cfg.tau, cfg.gating, gate_rng
                    )
                merged = merge_observation(observe(state, i, radius), inbox)
                actions[i] = greedy_action(merged, cfg.oracle)
        state, rewards = step(state, actions)
        verdict_map = step_trust_all(
            trust_states, inboxes, actions, cfg.consistency, cfg.oracle
        )
        confusion = classify_step(trust_states, roles, cfg.tau, heard)
        steps.append(
            StepLog(
                step=state.t,
                coverage=coverage_fraction(state),
                rewards=rewards,
                beliefs={
                    (obs, peer): trust_states[obs].beliefs[peer]
                    for obs in ids
                    for peer in heard[obs]
                },
                verdicts={
                    pair: verdict.consistent for pair, verdict in verdict_map.items()
                },
                confusion=confusion,
            )
        )
    return EpisodeRun(seed=seed, steps=steps, summary=summarize(steps, roles))


def run_scenario(cfg: ScenarioConfig) -> RunArtifact:
    cfg.validate()
    return RunArtifact(config=cfg, episodes=[run_episode(cfg, s) for s in cfg.seeds])


def _fmt(value: float | int) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return "%.9g" % value


def _round_sig(value):
    """Recursively round floats to 9 significant digits for stable JSON."""
    if isinstance(value, float):
        return float("%.9g" % value)
    if isinstance(value, dict):
        return {k: _round_sig(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_sig(v) for v in value]
    return value


def _echo_config(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "grid": {"width": cfg.width, "height": cfg.height},
        "steps": cfg.steps,
        "seeds": list(cfg.seeds),
        "oracle": {
            "gamma": cfg.oracle.gamma,
            "horizon": cfg.oracle.horizon,
            "radius": cfg.oracle.radius,
        },
        "defense": {
            "mode": cfg.mode.value,
            "consistency": cfg.consistency.mode.value,
            "rho": cfg.consistency.rho,
            "kl_threshold": cfg.consistency.kl_threshold,
            "temperature": cfg.consistency.temperature,
            "s": cfg.s,
            "tau": cfg.tau,
            "gating": cfg.gating.value,
        },
        "roster": [
            {
                "id": spec.agent_id,
                "role": spec.role.value,
                "falsification": spec.falsification.value,
                "acting": spec.acting.value,
                "start": list(spec.start) if spec.start is not None else None,
            }
            for spec in cfg.roster
        ],
        "topology": sorted(
            [i, j] for i in cfg.topology.agents() for j in cfg.topology.neighbors(i) if i < j
        ),
    }


def artifact_summary(artifact: RunArtifact) -> dict:
    cfg = artifact.config
    finals = artifact.final_coverages()
    coop = artifact.cooperative_coverages()
    payload = {
        "scenario": cfg.name,
        "config": _echo_config(cfg),
        "episodes": len(artifact.episodes),
        "seeds": list(cfg.seeds),
        "coverage": {
            "mean_final": statistics.fmean(finals),
            "stddev_final": statistics.pstdev(finals),
            "mean_timeline": list(artifact.mean_coverage_timeline()),
        },
        "cooperative_coverage": {
            "mean_final": statistics.fmean(coop),
            "stddev_final": statistics.pstdev(coop),
        },
        "team_f1": {"mean_timeline": list(artifact.mean_team_f1_timeline())},
        "mean_reward_per_agent": {
            str(i): statistics.fmean(
                ep.summary.reward_totals[i] for ep in artifact.episodes
            )
            for i in sorted(cfg.agent_ids())
        },
        "notes": [],
    }
    if any(spec.acting is AdversaryStrategy.CONSISTENT_LIAR for spec in cfg.roster):
        payload["notes"].append(
            "consistent_liar is a scripted stand-in for an adversary that has "
            "adapted its behaviour to evade action-consistency checks"
        )
    if any(
        spec.falsification is not FalsificationStrategy.TRUTHFUL for spec in cfg.roster
    ):
        payload["notes"].append(
            "adversarial payloads are scripted transformations, not learned messages"
        )
    return payload


def write_artifact(artifact: RunArtifact, out_dir: str) -> tuple[str, str]:
    """Write <scenario>.csv and <scenario>.json; byte-stable across reruns.

    CSV: one row per (episode, step, observer, heard peer). belief and
    verdict are pair-level; tp/tn/fp/fn and f1 are the observer's counts
    for that step, so each row's counts sum to the observer's
    received-message count. Floats use 9 significant digits everywhere.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg = artifact.config
    heard = {i: cfg.topology.neighbors(i) for i in cfg.agent_ids()}

    csv_path = os.path.join(out_dir, f"{cfg.name}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for ep in artifact.episodes:
            for entry in ep.steps:
                for observer in sorted(heard):
                    counts = entry.confusion[observer]
                    score = f1(counts)
                    for peer in heard[observer]:
                        writer.writerow(
                            [
                                str(entry.step),
                                str(ep.seed),
                                _fmt(entry.coverage),
                                str(observer),
                                str(peer),
                                _fmt(entry.beliefs[(observer, peer)]),
                                _fmt(entry.verdicts[(observer, peer)]),
                                str(counts.tp),
                                str(counts.tn),
                                str(counts.fp),
                                str(counts.fn),
                                _fmt(score),
                            ]
                        )

    json_path = os.path.join(out_dir, f"{cfg.name}.json")
    with open(json_path, "w", newline="") as fh:
        json.dump(_round_sig(artifact_summary(artifact)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
