"""Alignment classes and the run evaluation metrics.

All telemetry-level functions only read ``snapshots`` (opinions per round,
index 0 = initial state), ``records`` and ``messages``, so they give the same
answer on an in-memory run and on one reloaded from its exported files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .dynamics import Side


class Alignment(str, Enum):
    RED = "red"
    NEUTRAL = "neutral"
    BLUE = "blue"


def classify_alignment(x: float, delta: float) -> Alignment:
    if x < 0.5 - delta:
        return Alignment.RED
    if x > 0.5 + delta:
        return Alignment.BLUE
    return Alignment.NEUTRAL


def alignment_distribution(snapshot: Sequence[float], delta: float) -> tuple[int, int, int]:
    lo, hi = 0.5 - delta, 0.5 + delta
    red = sum(1 for x in snapshot if x < lo)
    blue = sum(1 for x in snapshot if x > hi)
    return red, len(snapshot) - red - blue, blue


def mean_and_variance(snapshot: Sequence[float]) -> tuple[float, float]:
    """Population mean and variance, two-pass with exactly rounded sums."""
    n = len(snapshot)
    mean = math.fsum(snapshot) / n
    return mean, math.fsum((x - mean) ** 2 for x in snapshot) / n


@dataclass(frozen=True)
class RoundRecord:
    """One round's summary. Energy and cost are integer cents."""

    round: int
    broadcaster: Side
    potency: int
    cost: int
    blue_energy: int
    accepted: int
    rejected: int
    backfired: int
    n_red: int
    n_neutral: int
    n_blue: int
    mean_opinion: float
    var_opinion: float
    class_change_count: int

    @property
    def n(self) -> int:
        return self.n_red + self.n_neutral + self.n_blue

    @property
    def class_change_rate(self) -> float:
        return self.class_change_count / self.n


def class_changes(before: Sequence[float], after: Sequence[float], delta: float) -> int:
    return sum(
        1 for a, b in zip(before, after)
        if classify_alignment(a, delta) is not classify_alignment(b, delta)
    )


def polarization_series(telemetry) -> list[tuple[int, int, int, int, float]]:
    """(round, n_red, n_neutral, n_blue, var_opinion) for every recorded round."""
    delta = telemetry.config.termination.neutral_band
    rows = []
    for r, snap in enumerate(telemetry.snapshots[1:], start=1):
        counts = alignment_distribution(snap, delta)
        rows.append((r, *counts, mean_and_variance(snap)[1]))
    return rows


@dataclass(frozen=True)
class ResourceEfficiency:
    value: float
    spend: float
    gain: int
    degenerate: bool


def resource_efficiency(telemetry, delta: float | None = None) -> ResourceEfficiency:
    """Blue energy spent per blue-aligned node gained over the run.

    A gain of zero or less is replaced by 1 and flagged as degenerate, so the
    value is the raw spend in that case.
    """
    if delta is None:
        delta = telemetry.config.termination.neutral_band
    e0 = telemetry.config.economics.initial_energy_cents
    final = telemetry.records[-1].blue_energy if telemetry.records else e0
    spend = (e0 - final) / 100
    gain = (alignment_distribution(telemetry.snapshots[-1], delta)[2]
            - alignment_distribution(telemetry.snapshots[0], delta)[2])
    if spend == 0:
        return ResourceEfficiency(0.0, 0.0, gain, gain <= 0)
    return ResourceEfficiency(spend / max(1, gain), spend, gain, gain <= 0)


def _pole_class(side: Side) -> Alignment:
    return Alignment.RED if side is Side.RED else Alignment.BLUE


def node_resilience(telemetry, delta: float | None = None) -> list[float | None]:
    """Per-node share of challenging broadcasts the node withstood.

    A node's predisposition is its class in the initial snapshot. A broadcast
    from side A challenges every node predisposed to A's opponent. The node
    fails to withstand it when it is not A-aligned before that round and is
    A-aligned after it. Neutral-predisposed or never-challenged nodes get None.
    """
    if delta is None:
        delta = telemetry.config.termination.neutral_band
    snaps = telemetry.snapshots
    classes = [[classify_alignment(x, delta) for x in snap] for snap in snaps]
    n = len(snaps[0])
    challenges = [0] * n
    flips = [0] * n
    for msg in telemetry.messages:
        if msg.potency == 0:
            continue
        r = msg.round
        target = _pole_class(msg.side)
        opposed = _pole_class(msg.side.opponent)
        before, after = classes[r - 1], classes[r]
        for i in range(n):
            if classes[0][i] is not opposed:
                continue
            challenges[i] += 1
            if before[i] is not target and after[i] is target:
                flips[i] += 1
    return [None if c == 0 else 1.0 - f / c for c, f in zip(challenges, flips)]


def temporal_evolution(telemetry, delta: float | None = None) -> list[tuple[int, float, float]]:
    """(round, change in mean opinion, share of nodes that changed class)."""
    if delta is None:
        delta = telemetry.config.termination.neutral_band
    snaps = telemetry.snapshots
    n = len(snaps[0])
    rows = []
    prev_mean = mean_and_variance(snaps[0])[0]
    for r in range(1, len(snaps)):
        mean = mean_and_variance(snaps[r])[0]
        rows.append((r, mean - prev_mean, class_changes(snaps[r - 1], snaps[r], delta) / n))
        prev_mean = mean
    return rows
