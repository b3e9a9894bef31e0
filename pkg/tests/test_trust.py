"""Trust state, consistency verdicts, belief arithmetic, gating."""

from __future__ import annotations

import random

import numpy as np
import pytest

from oracles import kl_surprise, replay_beliefs
from trustgrid.comms import Message
from trustgrid.env import CELL_COVERED, CELL_OOB, CELL_UNCOVERED, Action, Observation
from trustgrid.policies import ValueOracleConfig, action_values, greedy_action
from trustgrid.trust import (
    ConsistencyConfig,
    ConsistencyMode,
    GatingMode,
    Verdict,
    calibrate_kl_threshold,
    consistency_check,
    gate_messages,
    init_trust,
    kl_score,
    step_trust_all,
    update_belief,
    update_consistency_count,
    value_gap,
)

ORACLE = ValueOracleConfig(gamma=0.9, horizon=1, radius=1)


def window_obs(rows, agent_id=0, position=(1, 1), t=0):
    return Observation(agent_id, position, np.array(rows, dtype=np.int8), t)


def right_window(agent_id=0, t=0):
    """Single uncovered cell to the right: greedy is Right, value 1."""
    rows = [[CELL_COVERED] * 3 for _ in range(3)]
    rows[1][2] = CELL_UNCOVERED
    return window_obs(rows, agent_id=agent_id, t=t)


def msg(obs):
    return Message(sender=obs.agent_id, payload=obs, t=obs.t)


def test_init_trust_full_belief_and_zero_counts():
    ts = init_trust(2, [0, 1, 2, 3])
    assert ts.owner == 2
    assert ts.t == 1
    assert ts.beliefs == {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0}
    assert ts.counts == {0: [0, 0], 1: [0, 0], 2: [0, 0], 3: [0, 0]}
    assert ts.s == 3.7


def test_init_trust_validates_inputs():
    with pytest.raises(ValueError):
        init_trust(0, [0, 1], s=0.0)
    with pytest.raises(ValueError):
        init_trust(0, [0, 1], s=-1.0)
    with pytest.raises(ValueError):
        init_trust(9, [0, 1])


def test_fresh_state_gates_nothing():
    ts = init_trust(0, [0, 1, 2])
    inbox = (msg(right_window(agent_id=1)), msg(right_window(agent_id=2)))
    assert gate_messages(ts, inbox, tau=1.0) == inbox


def test_value_gap_zero_for_value_ties():
    rows = [[CELL_COVERED] * 3 for _ in range(3)]
    rows[1][0] = CELL_UNCOVERED
    rows[1][2] = CELL_UNCOVERED
    obs = window_obs(rows)
    assert value_gap(obs, Action.LEFT, ORACLE) == 0.0
    assert value_gap(obs, Action.RIGHT, ORACLE) == 0.0
    assert greedy_action(obs, ORACLE) is Action.LEFT  # earlier in the order


def test_exact_match_verdicts():
    cfg = ConsistencyConfig(mode=ConsistencyMode.EXACT_MATCH)
    obs = right_window()
    assert consistency_check(ORACLE, msg(obs), Action.RIGHT, cfg) == Verdict(True, 0.0)
    verdict = consistency_check(ORACLE, msg(obs), Action.DOWN, cfg)
    assert not verdict.consistent
    assert verdict.score == 1.0


def test_exact_match_flags_the_offbrand_tie():
    # tied value but not the shared tie-break choice: inconsistent, gap 0
    rows = [[CELL_COVERED] * 3 for _ in range(3)]
    rows[1][0] = CELL_UNCOVERED
    rows[1][2] = CELL_UNCOVERED
    obs = window_obs(rows)
    cfg = ConsistencyConfig(mode=ConsistencyMode.EXACT_MATCH)
    verdict = consistency_check(ORACLE, msg(obs), Action.RIGHT, cfg)
    assert verdict == Verdict(False, 0.0)


def test_value_threshold_verdicts():
    obs = right_window()
    loose = ConsistencyConfig(mode=ConsistencyMode.VALUE_THRESHOLD, rho=0.1)
    tight = ConsistencyConfig(mode=ConsistencyMode.VALUE_THRESHOLD, rho=0.0)
    # greedy action passes every threshold
    assert consistency_check(ORACLE, msg(obs), Action.RIGHT, loose).consistent
    assert consistency_check(ORACLE, msg(obs), Action.RIGHT, tight).consistent
    # gap 1 fails rho = 0.1
    verdict = consistency_check(ORACLE, msg(obs), Action.DOWN, loose)
    assert verdict == Verdict(False, 1.0)
    # a sub-threshold gap passes, an over-threshold one fails
    cfg3 = ValueOracleConfig(gamma=0.9, horizon=3, radius=1)
    rows = [
        [CELL_COVERED, CELL_UNCOVERED, CELL_COVERED],
        [CELL_COVERED, CELL_COVERED, CELL_UNCOVERED],
        [CELL_COVERED, CELL_COVERED, CELL_UNCOVERED],
    ]
    obs2 = window_obs(rows)
    gap_up = value_gap(obs2, Action.UP, cfg3)
    assert 0.0 < gap_up <= 0.1  # 1.9 down the right column vs 1.81 going up first
    near = ConsistencyConfig(mode=ConsistencyMode.VALUE_THRESHOLD, rho=0.1)
    assert consistency_check(cfg3, msg(obs2), Action.UP, near).consistent
    assert not consistency_check(
        cfg3, msg(obs2), Action.DOWN, near
    ).consistent


def test_value_threshold_zero_accepts_exact_match_superset():
    rng = random.Random(17)
    exact = ConsistencyConfig(mode=ConsistencyMode.EXACT_MATCH)
    zero = ConsistencyConfig(mode=ConsistencyMode.VALUE_THRESHOLD, rho=0.0)
    for _ in range(40):
        rows = [
            [rng.choice((CELL_UNCOVERED, CELL_COVERED, CELL_OOB)) for _ in range(3)]
            for _ in range(3)
        ]
        obs = window_obs(rows)
        for action in Action:
            e = consistency_check(ORACLE, msg(obs), action, exact).consistent
            z = consistency_check(ORACLE, msg(obs), action, zero).consistent
            assert z or not e  # ExactMatch-consistent implies gap 0


def test_consistency_config_validation():
    with pytest.raises(ValueError):
        ConsistencyConfig(rho=-0.1)
    with pytest.raises(ValueError):
        ConsistencyConfig(kl_threshold=-1.0)
    with pytest.raises(ValueError):
        ConsistencyConfig(temperature=0.0)
    with pytest.raises(ValueError):
        consistency_check(
            ORACLE, msg(right_window()), Action.UP, ConsistencyConfig(mode=ConsistencyMode.KL)
        )


def test_count_updates():
    ts = init_trust(0, [0, 1])
    update_consistency_count(ts, 1, Verdict(True, 0.0))
    assert ts.counts[1] == [0, 1]
    update_consistency_count(ts, 1, Verdict(False, 1.0))
    update_consistency_count(ts, 1, Verdict(False, 1.0))
    assert ts.counts[1] == [2, 1]
    with pytest.raises(KeyError):
        update_consistency_count(ts, 5, Verdict(True, 0.0))


def test_belief_update_spec_arithmetic():
    ts = init_trust(0, [0, 1], s=0.5)
    ts.t = 2
    ts.counts[1] = [1, 0]  # count already includes this step's verdict
    update_belief(ts, 1, Verdict(False, 1.0))
    assert ts.beliefs[1] == 1.0 - 0.5 * (1 / 2)

    ts2 = init_trust(0, [0, 1], s=0.5)
    ts2.t = 2
    ts2.counts[1] = [0, 1]
    update_belief(ts2, 1, Verdict(True, 0.0))
    assert ts2.beliefs[1] == 1.0  # clamped at the ceiling


def test_belief_collapse_at_default_step_multiplier():
    ts = init_trust(0, [0, 1], s=3.7)
    ts.t = 2
    ts.counts[1] = [1, 0]
    update_belief(ts, 1, Verdict(False, 1.0))
    assert ts.beliefs[1] == 0.0


def test_belief_update_requires_second_step():
    ts = init_trust(0, [0, 1])
    with pytest.raises(ValueError):
        update_belief(ts, 1, Verdict(True, 0.0))


def test_belief_trajectories_match_replay_oracle():
    rng = random.Random(99)
    for _ in range(30):
        s = rng.choice((0.1, 0.5, 1.0, 3.7))
        verdicts = [rng.random() < 0.5 for _ in range(rng.randrange(1, 30))]
        ts = init_trust(0, [0, 1], s=s)
        got = []
        for consistent in verdicts:
            ts.t += 1
            verdict = Verdict(consistent, 0.0)
            update_consistency_count(ts, 1, verdict)
            update_belief(ts, 1, verdict)
            got.append(ts.beliefs[1])
        assert got == replay_beliefs(verdicts, s)


def test_step_trust_all_cooperative_beliefs_stay_at_one():
    ids = [0, 1, 2]
    states = {i: init_trust(i, ids) for i in ids}
    cfg = ConsistencyConfig()
    obs = {i: right_window(agent_id=i) for i in ids}
    inboxes = {
        i: tuple(msg(obs[j]) for j in ids if j != i)
        for i in ids
    }
    actions = {i: Action.RIGHT for i in ids}
    for _ in range(5):
        verdicts = step_trust_all(states, inboxes, actions, cfg, ORACLE)
        assert all(v.consistent for v in verdicts.values())
    for i in ids:
        assert states[i].t == 6
        assert all(b == 1.0 for b in states[i].beliefs.values())


def test_step_trust_all_flags_a_liar_everywhere():
    ids = [0, 1, 2]
    states = {i: init_trust(i, ids) for i in ids}
    cfg = ConsistencyConfig()
    lie = window_obs([[CELL_COVERED] * 3 for _ in range(3)], agent_id=0)
    truth = {i: right_window(agent_id=i) for i in (1, 2)}
    inboxes = {
        0: (msg(truth[1]), msg(truth[2])),
        1: (msg(lie), msg(truth[2])),
        2: (msg(lie), msg(truth[1])),
    }
    actions = {0: Action.RIGHT, 1: Action.RIGHT, 2: Action.RIGHT}
    verdicts = step_trust_all(states, inboxes, actions, cfg, ORACLE)
    # greedy on the all-covered lie is Up, agent 0 acted Right
    assert not verdicts[(1, 0)].consistent
    assert not verdicts[(2, 0)].consistent
    assert states[1].beliefs[0] == 0.0
    assert states[2].beliefs[0] == 0.0
    assert states[0].beliefs == {0: 1.0, 1: 1.0, 2: 1.0}


def test_step_trust_all_observers_are_independent():
    ids = [0, 1, 2]
    cfg = ConsistencyConfig()
    obs = {i: right_window(agent_id=i) for i in ids}
    actions = {i: Action.DOWN for i in ids}

    full = {i: init_trust(i, ids) for i in ids}
    inboxes = {i: tuple(msg(obs[j]) for j in ids if j != i) for i in ids}
    step_trust_all(full, inboxes, actions, cfg, ORACLE)

    solo = {1: init_trust(1, ids)}
    step_trust_all(solo, {1: inboxes[1]}, actions, cfg, ORACLE)
    assert solo[1].beliefs == full[1].beliefs
    assert solo[1].counts == full[1].counts


def test_step_trust_all_requires_sender_actions():
    states = {0: init_trust(0, [0, 1])}
    inboxes = {0: (msg(right_window(agent_id=1)),)}
    with pytest.raises(KeyError):
        step_trust_all(states, inboxes, {0: Action.STAY}, ConsistencyConfig(), ORACLE)


def test_step_trust_all_no_message_no_change():
    states = {0: init_trust(0, [0, 1])}
    step_trust_all(states, {0: ()}, {}, ConsistencyConfig(), ORACLE)
    assert states[0].t == 2
    assert states[0].beliefs[1] == 1.0
    assert states[0].counts[1] == [0, 0]


def test_gate_messages_threshold_rule():
    ts = init_trust(0, [0, 1, 2])
    ts.beliefs[1] = 0.3
    inbox = (msg(right_window(agent_id=1)), msg(right_window(agent_id=2)))
    kept = gate_messages(ts, inbox, tau=0.5)
    assert [m.sender for m in kept] == [2]
    # boundary: belief exactly tau is kept
    ts.beliefs[1] = 0.5
    assert [m.sender for m in gate_messages(ts, inbox, tau=0.5)] == [1, 2]
    # tau = 0 disables gating
    ts.beliefs[1] = 0.0
    assert gate_messages(ts, inbox, tau=0.0) == inbox
    with pytest.raises(ValueError):
        gate_messages(ts, inbox, tau=1.5)
    with pytest.raises(KeyError):
        gate_messages(ts, (msg(right_window(agent_id=9)),), tau=0.5)


def test_gate_messages_bernoulli_samples_by_belief():
    ts = init_trust(0, [0, 1])
    ts.beliefs[1] = 0.25
    inbox = (msg(right_window(agent_id=1)),)
    with pytest.raises(ValueError):
        gate_messages(ts, inbox, tau=0.5, mode=GatingMode.BERNOULLI)
    rng = random.Random(123)
    kept = sum(
        len(gate_messages(ts, inbox, tau=0.5, mode=GatingMode.BERNOULLI, rng=rng))
        for _ in range(4000)
    )
    assert 0.2 < kept / 4000 < 0.3
    # belief 1.0 always passes, 0.0 never does
    ts.beliefs[1] = 1.0
    assert gate_messages(ts, inbox, tau=0.5, mode=GatingMode.BERNOULLI, rng=rng) == inbox
    ts.beliefs[1] = 0.0
    assert gate_messages(ts, inbox, tau=0.5, mode=GatingMode.BERNOULLI, rng=rng) == ()


def test_kl_score_zero_cases():
    obs = right_window()
    assert kl_score(obs, Action.RIGHT, 1.0, ORACLE) == 0.0
    # symmetric window: left and right tie, probabilities equal
    rows = [[CELL_COVERED] * 3 for _ in range(3)]
    rows[1][0] = CELL_UNCOVERED
    rows[1][2] = CELL_UNCOVERED
    tied = window_obs(rows)
    assert kl_score(tied, Action.RIGHT, 1.0, ORACLE) == 0.0


def test_kl_score_matches_full_divergence_sum():
    rng = random.Random(41)
    for _ in range(50):
        rows = [
            [rng.choice((CELL_UNCOVERED, CELL_COVERED, CELL_OOB)) for _ in range(3)]
            for _ in range(3)
        ]
        obs = window_obs(rows)
        values = list(action_values(obs, ORACLE))
        for action in Action:
            got = kl_score(obs, action, 1.0, ORACLE)
            want = kl_surprise(values, int(action), 1.0)
            assert got == pytest.approx(want, abs=1e-12)
            assert got >= 0.0


def test_kl_mode_verdicts_respect_threshold():
    obs = right_window()
    score = kl_score(obs, Action.DOWN, 1.0, ORACLE)
    assert score > 0.0
    tight = ConsistencyConfig(mode=ConsistencyMode.KL, kl_threshold=score / 2)
    loose = ConsistencyConfig(mode=ConsistencyMode.KL, kl_threshold=score * 2)
    assert not consistency_check(ORACLE, msg(obs), Action.DOWN, tight).consistent
    assert consistency_check(ORACLE, msg(obs), Action.DOWN, loose).consistent


def test_calibrate_kl_threshold_single_and_empty():
    obs = right_window()
    lone = calibrate_kl_threshold([(obs, Action.DOWN)], 1.0, ORACLE)
    assert lone == kl_score(obs, Action.DOWN, 1.0, ORACLE)
    with pytest.raises(ValueError):
        calibrate_kl_threshold([], 1.0, ORACLE)


def test_calibrate_kl_threshold_near_zero_for_greedy_actors():
    rng = random.Random(8)
    samples = []
    for _ in range(50):
        rows = [
            [rng.choice((CELL_UNCOVERED, CELL_COVERED)) for _ in range(3)]
            for _ in range(3)
        ]
        obs = window_obs(rows)
        samples.append((obs, greedy_action(obs, ORACLE)))
    assert calibrate_kl_threshold(samples, 1.0, ORACLE) < 1e-6
