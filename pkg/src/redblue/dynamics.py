"""Green-node state and the opinion update rules.

Opinions live on [0, 1] with Red at 0.0 and Blue at 1.0. Peer influence is
bounded-confidence (Deffuant): two opinions interact only when they differ by
less than the confidence bound. Broadcasts move a node toward the sender's
pole by a step scaled with potency, or push it away (backfire) when a strong
message hits a node outside its confidence bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class PotencyOutOfRange(ValueError):
    pass


class NonFiniteOpinion(ValueError):
    pass


class Side(str, Enum):
    RED = "red"
    BLUE = "blue"

    @property
    def pole(self) -> float:
        return 0.0 if self is Side.RED else 1.0

    @property
    def opponent(self) -> Side:
        return Side.BLUE if self is Side.RED else Side.RED


class Effect(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    BACKFIRED = "backfired"


@dataclass(frozen=True)
class GreenNodeState:
    opinion: float
    susceptibility: float = 1.0
    confidence_bound: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.opinion <= 1.0:
            raise ValueError(f"opinion must be in [0, 1], got {self.opinion}")
        if not 0.0 <= self.susceptibility <= 1.0:
            raise ValueError(f"susceptibility must be in [0, 1], got {self.susceptibility}")
        if not 0.0 < self.confidence_bound <= 1.0:
            raise ValueError(f"confidence bound must be in (0, 1], got {self.confidence_bound}")


@dataclass(frozen=True)
class DynamicsParams:
    mu: float = 0.3
    p_max: int = 10
    backfire_threshold: int = 8
    backfire_strength: float = 0.1
    backfire_applies_to_blue: bool = False

    def __post_init__(self):
        if not 0.0 < self.mu <= 0.5:
            raise ValueError(f"mu must be in (0, 0.5], got {self.mu}")
        if self.p_max < 1:
            raise ValueError(f"p_max must be >= 1, got {self.p_max}")
        if not 1 <= self.backfire_threshold <= self.p_max:
            raise ValueError("backfire_threshold must be in [1, p_max]")
        if not 0.0 <= self.backfire_strength <= 0.5:
            raise ValueError(f"backfire_strength must be in [0, 0.5], got {self.backfire_strength}")


def clamp01(x: float) -> float:
    if not math.isfinite(x):
        raise NonFiniteOpinion(f"opinion update produced {x}")
    return min(1.0, max(0.0, x))


def peer_update_symmetric(xi: float, xj: float, eps: float, mu: float) -> tuple[float, float]:
    """Classic Deffuant pair update; no susceptibility so xi + xj is conserved."""
    if abs(xi - xj) < eps:
        return xi + mu * (xj - xi), xj + mu * (xi - xj)
    return xi, xj


def directed_step(x: float, s: float, eps: float, sender: float, mu: float) -> float:
    """Receiver-only move toward ``sender``; the scalar core of peer updates."""
    if abs(sender - x) < eps:
        return clamp01(x + mu * s * (sender - x))
    return x


def peer_update_directed(receiver: GreenNodeState, sender_opinion: float, mu: float) -> float:
    return directed_step(
        receiver.opinion, receiver.susceptibility, receiver.confidence_bound, sender_opinion, mu
    )


def broadcast_step(
    x: float, s: float, eps: float, side: Side, potency: int, params: DynamicsParams
) -> tuple[float, Effect]:
    if isinstance(potency, bool) or not isinstance(potency, int) or not 1 <= potency <= params.p_max:
        raise PotencyOutOfRange(f"potency must be an integer in [1, {params.p_max}], got {potency!r}")
    t = side.pole
    scale = s * potency / params.p_max
    # potency scales the step only; the gate is the node's confidence bound
    if abs(x - t) <= eps:
        return clamp01(x + params.mu * scale * (t - x)), Effect.ACCEPTED
    if potency >= params.backfire_threshold and (
        side is Side.RED or params.backfire_applies_to_blue
    ):
        return clamp01(x - params.backfire_strength * scale * (t - x)), Effect.BACKFIRED
    return x, Effect.REJECTED


def broadcast_update(
    node: GreenNodeState, side: Side, potency: int, params: DynamicsParams
) -> tuple[float, Effect]:
    return broadcast_step(
        node.opinion, node.susceptibility, node.confidence_bound, side, potency, params
    )
