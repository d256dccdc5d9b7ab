"""The round loop.

Round r: Red broadcasts on odd rounds, Blue on even ones. The broadcaster
sees an aggregate Observation and returns (text, potency); potency is cut to
what the wallet affords and charged in integer cents. The broadcast is
applied to every node in id order, then every directed edge is visited once
in a fresh seeded order with immediate (asynchronous) peer updates. The round
is recorded and termination is checked.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .agents import (
    Agent,
    AgentAction,
    BackendUnavailable,
    EconomicsView,
    Observation,
    heuristic_policy,
)
from .config import ConfigInvalid, SimConfig
from .dynamics import Effect, Side, broadcast_step, directed_step, peer_update_symmetric
from .metrics import (
    RoundRecord,
    alignment_distribution,
    class_changes,
    classify_alignment,
    mean_and_variance,
)
from .net import OpinionNetwork
from .rng import SeedTree

log = logging.getLogger(__name__)

__all__ = [
    "BroadcastMessage", "OutcomeKind", "Outcome", "RunTelemetry", "Simulation",
    "broadcaster_for", "check_termination", "classify_alignment", "init_run",
    "run_simulation",
]


class OutcomeKind(str, Enum):
    RED_MAJORITY = "RedMajority"
    BLUE_MAJORITY = "BlueMajority"
    STALEMATE = "Stalemate"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    at_round: int


@dataclass(frozen=True)
class BroadcastMessage:
    round: int
    side: Side
    text: str
    potency: int
    cost: int  # cents
    accepted: int = 0
    rejected: int = 0
    backfired: int = 0


@dataclass
class RunTelemetry:
    config: SimConfig
    n: int
    records: list[RoundRecord] = field(default_factory=list)
    messages: list[BroadcastMessage] = field(default_factory=list)
    snapshots: list[tuple[float, ...]] = field(default_factory=list)
    outcome: Outcome | None = None
    events: list[dict] = field(default_factory=list)
    substreams: list[str] = field(default_factory=list)
    duration_s: float = 0.0


def broadcaster_for(r: int) -> Side:
    return Side.RED if r % 2 == 1 else Side.BLUE


def check_termination(
    counts: tuple[int, int, int], r: int, max_rounds: int, majority_fraction: float = 0.5
) -> Outcome | None:
    n_red, _, n_blue = counts
    n = sum(counts)
    if n_red > majority_fraction * n:
        return Outcome(OutcomeKind.RED_MAJORITY, r)
    if n_blue > majority_fraction * n:
        return Outcome(OutcomeKind.BLUE_MAJORITY, r)
    if r >= max_rounds:
        return Outcome(OutcomeKind.STALEMATE, r)
    return None


class Simulation:
    """Mutable state of one run. Build with :func:`init_run`."""

    def __init__(self, config: SimConfig, net: OpinionNetwork):
        if not isinstance(config, SimConfig):
            raise ConfigInvalid("<root>", "expected a SimConfig")
        # re-validate through the dict form so hand-built configs get the same checks
        config = SimConfig.from_dict(config.to_dict())
        self.config = config
        self.net = net
        self.n = net.n
        self.seeds = SeedTree(config.seed)
        self.opinions = config.init_opinions.sample(self.seeds.stream("init.opinion"), net.n)
        self.susceptibility = config.susceptibility.sample(self.seeds.stream("init.susc"), net.n)
        eps = config.epsilon.sample(self.seeds.stream("init.eps"), net.n)
        self.epsilon = [max(e, 1e-12) for e in eps]

        econ = config.economics
        self.cost_cents = econ.cost_cents
        self.wallet: dict[Side, int | None] = {
            Side.RED: econ.red_budget_cents,
            Side.BLUE: econ.initial_energy_cents,
        }
        self.round = 0
        self.outcome: Outcome | None = None
        self.telemetry = RunTelemetry(config, net.n)
        self.telemetry.snapshots.append(tuple(self.opinions))
        self._last_action: dict[Side, tuple[str, int]] = {}
        self._mean = mean_and_variance(self.opinions)[0]
        self._counts = alignment_distribution(self.opinions, config.termination.neutral_band)

    @property
    def blue_energy(self) -> int:
        return self.wallet[Side.BLUE]

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def observation(self, side: Side, r: int) -> Observation:
        wallet = self.wallet[side]
        return Observation(
            round=r,
            topic=self.config.topic,
            own_side=side,
            counts=self._counts,
            mean_opinion=self._mean,
            own_energy=None if wallet is None else wallet / 100,
            opponent_last_message=self._last_action.get(side.opponent),
        )

    def _choose(self, agent: Agent, side: Side, obs: Observation) -> AgentAction:
        try:
            return agent.act(obs)
        except BackendUnavailable as exc:
            log.warning("round %d: %s backend unavailable, using heuristic fallback: %s",
                        obs.round, side.value, exc)
            self.telemetry.events.append(
                {"round": obs.round, "side": side.value, "event": "fallback", "error": str(exc)}
            )
            view = EconomicsView(self.config.dynamics.p_max, self.config.economics.cost_coefficient)
            return heuristic_policy(obs, view)

    def _settle(self, side: Side, r: int, action: AgentAction) -> tuple[str, int, int]:
        p_max = self.config.dynamics.p_max
        potency = action.potency
        if isinstance(potency, bool) or not isinstance(potency, int) or not 0 <= potency <= p_max:
            fixed = min(p_max, max(0, int(potency)))
            self.telemetry.events.append(
                {"round": r, "side": side.value, "event": "potency_clamped",
                 "requested": potency, "used": fixed}
            )
            potency = fixed
        wallet = self.wallet[side]
        if wallet is not None:
            potency = min(potency, wallet // self.cost_cents)
        if potency == 0:
            return "", 0, 0
        cost = potency * self.cost_cents if wallet is not None else 0
        if wallet is not None:
            self.wallet[side] = wallet - cost
        return action.text, potency, cost

    def run_round(self, red: Agent, blue: Agent) -> RoundRecord:
        if self.done:
            raise RuntimeError(f"simulation already ended: {self.outcome}")
        r = self.round + 1
        side = broadcaster_for(r)
        obs = self.observation(side, r)
        action = self._choose(red if side is Side.RED else blue, side, obs)
        text, potency, cost = self._settle(side, r, action)
        self._last_action[side] = (text, potency)

        x, s, eps = self.opinions, self.susceptibility, self.epsilon
        params = self.config.dynamics
        tally = {Effect.ACCEPTED: 0, Effect.REJECTED: 0, Effect.BACKFIRED: 0}
        if potency:
            for i in range(self.n):
                x[i], effect = broadcast_step(x[i], s[i], eps[i], side, potency, params)
                tally[effect] += 1

        self._peer_sweep(r)

        delta = self.config.termination.neutral_band
        changes = class_changes(self.telemetry.snapshots[-1], x, delta)
        counts = alignment_distribution(x, delta)
        mean, var = mean_and_variance(x)
        record = RoundRecord(
            round=r,
            broadcaster=side,
            potency=potency,
            cost=cost,
            blue_energy=self.wallet[Side.BLUE],
            accepted=tally[Effect.ACCEPTED],
            rejected=tally[Effect.REJECTED],
            backfired=tally[Effect.BACKFIRED],
            n_red=counts[0],
            n_neutral=counts[1],
            n_blue=counts[2],
            mean_opinion=mean,
            var_opinion=var,
            class_change_count=changes,
        )
        self.telemetry.records.append(record)
        self.telemetry.messages.append(
            BroadcastMessage(r, side, text, potency, cost, *tally.values())
        )
        self.telemetry.snapshots.append(tuple(x))
        self.round = r
        self._mean, self._counts = mean, counts
        term = self.config.termination
        self.outcome = check_termination(counts, r, term.max_rounds, term.majority_fraction)
        self.telemetry.outcome = self.outcome
        return record

    def _peer_sweep(self, r: int) -> None:
        edges = self.net.edges
        if not edges:
            return
        stream = self.seeds.stream(f"round.{r}.edges")
        inter = self.config.interaction
        if inter.scheme == "sampled_edges":
            order = stream.below_block(len(edges), inter.edges_per_round).tolist()
        else:
            order = stream.permutation(len(edges)).tolist()
        x, s, eps = self.opinions, self.susceptibility, self.epsilon
        mu = self.config.dynamics.mu
        if inter.peer_rule == "symmetric":
            for k in order:
                u, v = edges[k]
                e = eps[u] if eps[u] < eps[v] else eps[v]
                x[u], x[v] = peer_update_symmetric(x[u], x[v], e, mu)
        else:
            for k in order:
                u, v = edges[k]
                x[v] = directed_step(x[v], s[v], eps[v], x[u], mu)

    def finish(self) -> RunTelemetry:
        tel = self.telemetry
        tel.substreams = list(self.seeds.names)
        return tel


def init_run(config: SimConfig, net: OpinionNetwork) -> Simulation:
    return Simulation(config, net)


def run_simulation(
    config: SimConfig,
    net: OpinionNetwork,
    red_agent: Agent,
    blue_agent: Agent,
    on_round: Callable[[Simulation, RoundRecord], None] | None = None,
) -> RunTelemetry:
    """Play rounds until a strict majority or the round cap.

    ``on_round`` is called after every recorded round, e.g. by a streaming
    bundle writer.
    """
    start = time.perf_counter()
    sim = init_run(config, net)
    while not sim.done:
        record = sim.run_round(red_agent, blue_agent)
        if on_round is not None:
            on_round(sim, record)
    tel = sim.finish()
    for side, agent in ((Side.RED, red_agent), (Side.BLUE, blue_agent)):
        for event in getattr(agent, "events", ()):
            tel.events.append({"side": side.value, **event})
    tel.duration_s = time.perf_counter() - start
    return tel
