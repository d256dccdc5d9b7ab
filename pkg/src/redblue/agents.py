"""Broadcasting agents: what Red and Blue say each turn, and how hard."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

from .dynamics import Side


class AgentError(RuntimeError):
    pass


class BackendUnavailable(AgentError):
    pass


class TranscriptExhausted(AgentError):
    pass


class RoundMismatch(AgentError):
    pass


@dataclass(frozen=True)
class Observation:
    """Aggregate view of the network handed to the broadcaster.

    ``own_energy`` is None for an unlimited budget. ``opponent_last_message``
    is the opponent's latest (text, potency), potency 0 meaning it skipped.
    """

    round: int
    topic: str
    own_side: Side
    counts: tuple[int, int, int]
    mean_opinion: float
    own_energy: float | None = None
    opponent_last_message: tuple[str, int] | None = None

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def own_count(self) -> int:
        return self.counts[0] if self.own_side is Side.RED else self.counts[2]

    @property
    def opponent_count(self) -> int:
        return self.counts[2] if self.own_side is Side.RED else self.counts[0]


@dataclass(frozen=True)
class AgentAction:
    text: str
    potency: int

    @classmethod
    def skip(cls) -> AgentAction:
        return cls("", 0)

    @property
    def is_skip(self) -> bool:
        return self.potency == 0


@dataclass(frozen=True)
class EconomicsView:
    """What a policy needs to know about prices."""

    p_max: int = 10
    cost_coefficient: float = 1.0


class Agent(Protocol):
    def act(self, obs: Observation) -> AgentAction: ...


def affordable_potency(energy: float | None, cost_coefficient: float, p_max: int) -> int:
    if energy is None:
        return p_max
    # cent arithmetic, same as the engine's ledger
    return min(p_max, round(energy * 100) // round(cost_coefficient * 100))


def heuristic_policy(obs: Observation, params: EconomicsView) -> AgentAction:
    """Deterministic baseline: push harder the further behind you are.

    potency = round_half_up(p_max * (max(0, (opp - own) / n) + 0.3)), kept in
    [1, p_max], then cut to what the remaining energy buys (0 means skip).
    """
    margin = max(0.0, (obs.opponent_count - obs.own_count) / obs.n) + 0.3
    potency = min(params.p_max, max(1, math.floor(params.p_max * margin + 0.5)))
    potency = min(potency, affordable_potency(obs.own_energy, params.cost_coefficient, params.p_max))
    if potency <= 0:
        return AgentAction.skip()
    n_red, n_neutral, n_blue = obs.counts
    text = (
        f"[{obs.own_side.value}] round {obs.round} on {obs.topic!r}: "
        f"red {n_red}, neutral {n_neutral}, blue {n_blue}, mean {obs.mean_opinion:.3f}"
    )
    return AgentAction(text, potency)


class HeuristicAgent:
    def __init__(self, params: EconomicsView | None = None):
        self.params = params or EconomicsView()

    def act(self, obs: Observation) -> AgentAction:
        return heuristic_policy(obs, self.params)


class ScriptedAgent:
    """Plays a fixed queue of actions in call order, then skips forever."""

    def __init__(self, actions: Iterable[AgentAction | tuple[str, int]]):
        self._queue = [a if isinstance(a, AgentAction) else AgentAction(*a) for a in actions]
        self._next = 0

    def act(self, obs: Observation) -> AgentAction:
        if self._next >= len(self._queue):
            return AgentAction.skip()
        action = self._queue[self._next]
        self._next += 1
        return action

    @classmethod
    def from_jsonl(cls, text: str) -> ScriptedAgent:
        """One object per line: ``{"text": ..., "potency": ...}`` (``message`` also accepted)."""
        actions = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                body = obj.get("text", obj.get("message", ""))
                potency = obj["potency"]
            except (json.JSONDecodeError, AttributeError, KeyError) as exc:
                raise ValueError(f"script line {lineno}: {exc}") from None
            if not isinstance(body, str) or isinstance(potency, bool) or not isinstance(potency, int):
                raise ValueError(f"script line {lineno}: text must be a string, potency an integer")
            actions.append(AgentAction(body, potency))
        return cls(actions)


class TranscriptAgent:
    """Replays one side of a recorded message log, keyed by round number."""

    def __init__(self, log: Iterable[dict], side: Side):
        self.side = Side(side)
        self._by_round: dict[int, AgentAction] = {}
        for entry in log:
            if Side(entry["side"]) is not self.side:
                continue
            self._by_round[int(entry["round"])] = AgentAction(entry["text"], int(entry["potency"]))
        self._last = max(self._by_round, default=0)

    def act(self, obs: Observation) -> AgentAction:
        if obs.round in self._by_round:
            return self._by_round[obs.round]
        if obs.round > self._last:
            raise TranscriptExhausted(f"no {self.side.value} entries at or after round {obs.round}")
        raise RoundMismatch(f"transcript has no {self.side.value} entry for round {obs.round}")

    @classmethod
    def from_jsonl(cls, path: str | Path, side: Side) -> TranscriptAgent:
        path = Path(path)
        if path.is_dir():
            path = path / "messages.jsonl"
        lines = path.read_text(encoding="utf-8").splitlines()
        return cls((json.loads(line) for line in lines if line.strip()), side)
