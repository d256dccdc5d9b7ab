import math
import random

import pytest

from oracles import brute_outcome
from redblue.agents import AgentAction, BackendUnavailable, HeuristicAgent, ScriptedAgent
from redblue.config import ConfigInvalid, SimConfig
from redblue.dynamics import Side
from redblue.engine import (
    OutcomeKind,
    broadcaster_for,
    check_termination,
    classify_alignment,
    init_run,
    run_simulation,
)
from redblue.metrics import Alignment
from redblue.net import OpinionNetwork, generate_graph


def cfg(**sections) -> SimConfig:
    return SimConfig.from_dict(sections)


def const(v):
    return {"kind": "constant", "value": v}


SKIP = ScriptedAgent([])


class Recorder:
    def __init__(self, action):
        self.action = action
        self.seen = []

    def act(self, obs):
        self.seen.append(obs)
        return self.action


def test_init_constant_opinions():
    sim = init_run(cfg(init_opinions=const(0.5)), generate_graph("complete", 4))
    assert sim.opinions == [0.5] * 4
    assert sim.blue_energy == 10_000


def test_init_uniform_deterministic():
    net = generate_graph("complete", 30)
    a = init_run(cfg(seed=9), net).opinions
    b = init_run(cfg(seed=9), net).opinions
    c = init_run(cfg(seed=10), net).opinions
    assert a == b and a != c


def test_init_bimodal_share():
    net = OpinionNetwork(1000, ())
    sim = init_run(cfg(seed=3, init_opinions={"kind": "bimodal", "low": 0.1, "high": 0.9,
                                              "fraction": 0.5}), net)
    lows = sum(1 for x in sim.opinions if x == 0.1)
    assert lows + sum(1 for x in sim.opinions if x == 0.9) == 1000
    # binomial(1000, 0.5): mean 500, sigma ~15.8, 4 sigma well inside [400, 600]
    assert 400 <= lows <= 600


def test_init_beta_and_uniform_ranges():
    net = OpinionNetwork(500, ())
    sim = init_run(cfg(init_opinions={"kind": "beta", "a": 2, "b": 5},
                       epsilon={"kind": "uniform", "low": 0.1, "high": 0.3}), net)
    assert all(0 <= x <= 1 for x in sim.opinions)
    assert abs(sum(sim.opinions) / 500 - 2 / 7) < 0.03
    assert all(0.1 <= e <= 0.3 for e in sim.epsilon)
    assert all(0.5 <= s <= 1.0 for s in sim.susceptibility)


def test_init_rejects_invalid_config():
    from redblue.config import TerminationConfig
    with pytest.raises(ConfigInvalid) as info:
        init_run(SimConfig(termination=TerminationConfig(max_rounds=0)), generate_graph("complete", 3))
    assert info.value.field == "termination.max_rounds"


@pytest.mark.parametrize(
    "x,delta,expected",
    [
        (0.5, 0.05, Alignment.NEUTRAL),
        (0.44, 0.05, Alignment.RED),
        (0.55, 0.05, Alignment.NEUTRAL),
        (0.5500001, 0.05, Alignment.BLUE),
        (0.45, 0.05, Alignment.NEUTRAL),
        (0.0, 0.0, Alignment.RED),
    ],
)
def test_classify_alignment(x, delta, expected):
    assert classify_alignment(x, delta) is expected


def test_broadcaster_alternates_red_first():
    assert broadcaster_for(1) is Side.RED
    assert broadcaster_for(2) is Side.BLUE
    assert [broadcaster_for(r) for r in range(1, 6)] == [Side.RED, Side.BLUE] * 2 + [Side.RED]


def test_check_termination_examples():
    assert check_termination((6, 1, 3), 2, 10).kind is OutcomeKind.RED_MAJORITY
    assert check_termination((6, 1, 3), 2, 10).at_round == 2
    assert check_termination((5, 0, 5), 10, 10).kind is OutcomeKind.STALEMATE
    assert check_termination((2, 0, 2), 3, 10) is None
    assert check_termination((1, 0, 3), 1, 10).kind is OutcomeKind.BLUE_MAJORITY


def test_check_termination_matches_recount():
    rnd = random.Random(1)
    for _ in range(300):
        n = rnd.randint(1, 30)
        xs = [rnd.choice([rnd.random(), 0.5, 0.45, 0.55]) for _ in range(n)]
        delta = rnd.choice([0.0, 0.05, 0.2])
        T = rnd.randint(1, 5)
        r = rnd.randint(1, T)
        from redblue.metrics import alignment_distribution
        got = check_termination(alignment_distribution(xs, delta), r, T)
        assert (got.kind.value if got else None) == brute_outcome(xs, delta, r, T)


def two_node_config(**over):
    base = dict(
        init_opinions=const(0.5),
        susceptibility=const(1.0),
        epsilon=const(0.6),
        dynamics={"mu": 0.3},
        termination={"max_rounds": 5, "neutral_band": 0.05},
    )
    base.update(over)
    return cfg(**base)


def test_two_node_red_broadcast():
    net = generate_graph("complete", 2)
    sim = init_run(two_node_config(), net)
    rec = sim.run_round(ScriptedAgent([("m", 10)]), SKIP)
    assert sim.opinions == pytest.approx([0.35, 0.35])
    assert (rec.n_red, rec.n_neutral, rec.n_blue) == (2, 0, 0)
    assert rec.broadcaster is Side.RED and rec.cost == 0
    assert (rec.accepted, rec.rejected, rec.backfired) == (2, 0, 0)
    assert rec.class_change_rate == 1.0
    assert sim.outcome.kind is OutcomeKind.RED_MAJORITY and sim.outcome.at_round == 1


def test_blue_affordability_clamp():
    net = generate_graph("complete", 2)
    sim = init_run(two_node_config(economics={"initial_energy": 3, "cost_coefficient": 1}), net)
    sim.run_round(SKIP, SKIP)
    rec = sim.run_round(SKIP, ScriptedAgent([("b", 7)]))
    assert rec.broadcaster is Side.BLUE
    assert rec.potency == 3 and rec.cost == 300 and rec.blue_energy == 0
    rec = sim.run_round(SKIP, SKIP)
    rec = sim.run_round(SKIP, ScriptedAgent([("b", 2)]))
    assert rec.potency == 0 and rec.cost == 0
    assert sim.telemetry.messages[-1].text == ""


def test_fractional_costs_are_exact():
    net = generate_graph("complete", 2)
    sim = init_run(two_node_config(economics={"initial_energy": 1.0, "cost_coefficient": 0.1}), net)
    sim.run_round(SKIP, SKIP)
    rec = sim.run_round(SKIP, ScriptedAgent([("b", 3)]))
    assert rec.cost == 30 and rec.blue_energy == 70


def test_red_budget_limits_red():
    net = generate_graph("complete", 2)
    sim = init_run(two_node_config(economics={"red_budget": 2}), net)
    rec = sim.run_round(ScriptedAgent([("r", 9)]), SKIP)
    assert rec.potency == 2 and rec.cost == 200


def test_observation_contents():
    net = generate_graph("complete", 4)
    red = Recorder(AgentAction("r1", 2))
    blue = Recorder(AgentAction("b1", 1))
    sim = init_run(cfg(init_opinions=const(0.5), topic="vaccines",
                       termination={"max_rounds": 3}), net)
    sim.run_round(red, blue)
    sim.run_round(red, blue)
    o1, o2 = red.seen[0], blue.seen[0]
    assert o1.round == 1 and o1.own_side is Side.RED and o1.own_energy is None
    assert o1.counts == (0, 4, 0) and o1.mean_opinion == 0.5 and o1.topic == "vaccines"
    assert o1.opponent_last_message is None
    assert o2.round == 2 and o2.own_energy == 100.0
    assert o2.opponent_last_message == ("r1", 2)


def test_out_of_range_scripted_potency_is_clamped_and_logged():
    net = generate_graph("complete", 2)
    sim = init_run(two_node_config(), net)
    rec = sim.run_round(ScriptedAgent([("big", 50)]), SKIP)
    assert rec.potency == 10
    assert sim.telemetry.events[0]["event"] == "potency_clamped"


class Broken:
    def act(self, obs):
        raise BackendUnavailable("down")


def test_backend_failure_falls_back_to_heuristic(caplog):
    net = generate_graph("complete", 4)
    tel = run_simulation(cfg(termination={"max_rounds": 2}, init_opinions=const(0.5)), net,
                         Broken(), SKIP)
    assert len(tel.records) >= 1
    assert tel.records[0].potency == 3  # heuristic: round(10 * 0.3)
    assert tel.events[0]["event"] == "fallback" and tel.events[0]["side"] == "red"
    assert "fallback" in caplog.text


def test_minimum_run_is_stalemate():
    net = generate_graph("complete", 4)
    tel = run_simulation(cfg(termination={"max_rounds": 1}, init_opinions=const(0.5)), net, SKIP, SKIP)
    assert tel.outcome.kind is OutcomeKind.STALEMATE and tel.outcome.at_round == 1


def test_all_red_start_ends_in_round_one():
    net = generate_graph("erdos_renyi", 10, seed=1, p=0.5)
    tel = run_simulation(cfg(init_opinions=const(0.0)), net, HeuristicAgent(), HeuristicAgent())
    assert tel.outcome.kind is OutcomeKind.RED_MAJORITY and tel.outcome.at_round == 1


def test_run_after_end_raises():
    net = generate_graph("complete", 2)
    sim = init_run(two_node_config(), net)
    sim.run_round(ScriptedAgent([("m", 10)]), SKIP)
    with pytest.raises(RuntimeError):
        sim.run_round(SKIP, SKIP)


def scripted_pair():
    red = ScriptedAgent([(f"red {i}", p) for i, p in enumerate([6, 9, 3, 10, 7])])
    blue = ScriptedAgent([(f"blue {i}", p) for i, p in enumerate([4, 8, 2, 10, 5])])
    return red, blue


def test_scripted_run_is_deterministic():
    net = generate_graph("erdos_renyi", 20, seed=42, p=0.2)
    c = cfg(seed=42, termination={"max_rounds": 10})
    a = run_simulation(c, net, *scripted_pair())
    b = run_simulation(c, net, *scripted_pair())
    assert a.records == b.records and a.messages == b.messages and a.snapshots == b.snapshots
    assert a.outcome == b.outcome


def test_energy_ledger_and_outcome_soundness():
    rnd = random.Random(8)
    for _ in range(50):
        net = generate_graph("erdos_renyi", rnd.randint(4, 25), seed=rnd.getrandbits(32), p=0.3)
        c = cfg(seed=rnd.getrandbits(32), termination={"max_rounds": rnd.randint(1, 15)},
                economics={"initial_energy": rnd.randint(0, 5000) / 100,
                           "cost_coefficient": rnd.randint(1, 300) / 100})
        tel = run_simulation(c, net, HeuristicAgent(), HeuristicAgent())
        spent = 0
        for rec in tel.records:
            if rec.broadcaster is Side.BLUE:
                spent += rec.cost
            assert rec.blue_energy == c.economics.initial_energy_cents - spent >= 0
        final = tel.snapshots[-1]
        assert tel.outcome.kind.value == brute_outcome(
            final, c.termination.neutral_band, tel.outcome.at_round, c.termination.max_rounds)


def test_symmetric_skip_run_conserves_mass():
    net = generate_graph("erdos_renyi", 40, seed=5, p=0.2)
    c = cfg(seed=5, interaction={"peer_rule": "symmetric"}, dynamics={"mu": 0.4},
            epsilon=const(0.3), termination={"max_rounds": 100, "neutral_band": 0.49})
    tel = run_simulation(c, net, SKIP, SKIP)
    assert len(tel.records) == 100
    start = math.fsum(tel.snapshots[0])
    for snap in tel.snapshots:
        assert abs(math.fsum(snap) - start) <= 1e-9


def test_sampled_edges_scheme_runs():
    net = generate_graph("complete", 10)
    c = cfg(interaction={"scheme": "sampled_edges", "edges_per_round": 5},
            epsilon=const(1.0), susceptibility=const(1.0), termination={"max_rounds": 3, "neutral_band": 0.49})
    tel = run_simulation(c, net, SKIP, SKIP)
    moved = sum(1 for a, b in zip(tel.snapshots[0], tel.snapshots[1]) if a != b)
    assert 1 <= moved <= 5


def test_substreams_recorded():
    net = generate_graph("complete", 3)
    tel = run_simulation(cfg(termination={"max_rounds": 2, "neutral_band": 0.49}), net, SKIP, SKIP)
    assert tel.substreams == ["init.opinion", "init.susc", "init.eps", "round.1.edges", "round.2.edges"]


def test_phase_order_broadcast_then_peers():
    # node 0 accepts the red broadcast then pulls node 1 (outside the broadcast gate)
    net = OpinionNetwork(2, ((0, 1),))
    c = cfg(init_opinions={"kind": "uniform", "low": 0.3, "high": 0.3}, susceptibility=const(1.0),
            epsilon=const(0.35), dynamics={"mu": 0.5}, termination={"max_rounds": 3, "neutral_band": 0.49})
    sim = init_run(c, net)
    sim.opinions[1] = 0.5
    sim.run_round(ScriptedAgent([("r", 5)]), SKIP)
    x0 = 0.3 + 0.5 * 0.5 * (0.0 - 0.3)
    # node 1 rejects the broadcast, then sees node 0's post-broadcast opinion;
    # peers-first would have given 0.4
    assert sim.opinions[0] == pytest.approx(x0)
    assert sim.opinions[1] == pytest.approx(0.5 + 0.5 * (x0 - 0.5))
    assert sim.telemetry.records[0].rejected == 1
