"""Simulation configuration: typed, validated, round-trippable through plain dicts.

Defaults:

    seed                              0
    topic                             ""
    dynamics.mu                       0.3
    dynamics.p_max                    10
    dynamics.backfire_threshold       8
    dynamics.backfire_strength        0.1
    dynamics.backfire_applies_to_blue false
    economics.initial_energy          100.0
    economics.cost_coefficient        1.0
    economics.red_budget              null (unlimited)
    termination.max_rounds            50
    termination.majority_fraction     0.5
    termination.neutral_band          0.05
    interaction.scheme                "all_edges_shuffled"  (or "sampled_edges")
    interaction.edges_per_round       null (required for sampled_edges)
    interaction.peer_rule             "directed"  (or "symmetric")
    init_opinions                     {"kind": "uniform", "low": 0.0, "high": 1.0}
    susceptibility                    {"kind": "uniform", "low": 0.5, "high": 1.0}
    epsilon                           {"kind": "constant", "value": 0.25}
    both_per_round                    false (reserved, true is rejected)

Distribution kinds: uniform(low, high), constant(value),
bimodal(low, high, fraction) where ``fraction`` is the share drawn at ``low``,
and beta(a, b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsParams
from .rng import MASK64, Stream


class ConfigInvalid(ValueError):
    def __init__(self, field_path: str, reason: str):
        self.field = field_path
        self.reason = reason
        super().__init__(f"{field_path}: {reason}")


_DIST_KEYS = {
    "uniform": {"low": 0.0, "high": 1.0},
    "constant": {"value": 0.5},
    "bimodal": {"low": 0.1, "high": 0.9, "fraction": 0.5},
    "beta": {"a": 2.0, "b": 2.0},
}


@dataclass(frozen=True)
class Distribution:
    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def __getitem__(self, name: str) -> float:
        return dict(self.params)[name]

    def sample(self, stream: Stream, n: int) -> list[float]:
        if self.kind == "constant":
            return [self["value"]] * n
        if self.kind == "uniform":
            return self._clip(stream.uniform_block(self["low"], self["high"], n))
        if self.kind == "bimodal":
            u = stream.random_block(n)
            return [self["low"] if v < self["fraction"] else self["high"] for v in u.tolist()]
        return self._clip(stream.beta_block(self["a"], self["b"], n))

    def _clip(self, values: np.ndarray) -> list[float]:
        lo, hi = self.support
        return np.clip(values, lo, hi).tolist()

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "constant":
            return self["value"], self["value"]
        if self.kind == "beta":
            return 0.0, 1.0
        return self["low"], self["high"]

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}

    @classmethod
    def from_dict(cls, data, path: str, lo: float = 0.0, hi: float = 1.0, open_low: bool = False):
        if not isinstance(data, dict):
            raise ConfigInvalid(path, "expected an object")
        kind = data.get("kind")
        if kind not in _DIST_KEYS:
            raise ConfigInvalid(f"{path}.kind", f"expected one of {sorted(_DIST_KEYS)}, got {kind!r}")
        defaults = _DIST_KEYS[kind]
        _reject_unknown(data, set(defaults) | {"kind"}, path)
        params = {k: _real(data.get(k, v), f"{path}.{k}") for k, v in defaults.items()}

        def check_value(name):
            v = params[name]
            if v < lo or v > hi or (open_low and v <= lo):
                bracket = "(" if open_low else "["
                raise ConfigInvalid(f"{path}.{name}", f"must be in {bracket}{lo}, {hi}], got {v}")

        if kind == "constant":
            check_value("value")
        elif kind in ("uniform", "bimodal"):
            check_value("low")
            check_value("high")
            if params["low"] > params["high"]:
                raise ConfigInvalid(f"{path}.low", "must not exceed high")
            if kind == "bimodal" and not 0.0 <= params["fraction"] <= 1.0:
                raise ConfigInvalid(f"{path}.fraction", "must be in [0, 1]")
        else:
            if open_low:
                raise ConfigInvalid(f"{path}.kind", "beta can reach 0; use uniform or constant here")
            for name in ("a", "b"):
                if params[name] <= 0:
                    raise ConfigInvalid(f"{path}.{name}", "must be positive")
            if (lo, hi) != (0.0, 1.0):
                raise ConfigInvalid(f"{path}.kind", "beta needs the full [0, 1] range")
        return cls(kind, tuple(params.items()))


@dataclass(frozen=True)
class EconomicsConfig:
    initial_energy: float = 100.0
    cost_coefficient: float = 1.0
    red_budget: float | None = None

    @property
    def initial_energy_cents(self) -> int:
        return round(self.initial_energy * 100)

    @property
    def cost_cents(self) -> int:
        return round(self.cost_coefficient * 100)

    @property
    def red_budget_cents(self) -> int | None:
        return None if self.red_budget is None else round(self.red_budget * 100)


@dataclass(frozen=True)
class TerminationConfig:
    max_rounds: int = 50
    majority_fraction: float = 0.5
    neutral_band: float = 0.05


@dataclass(frozen=True)
class InteractionConfig:
    scheme: str = "all_edges_shuffled"
    edges_per_round: int | None = None
    peer_rule: str = "directed"


@dataclass(frozen=True)
class SimConfig:
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    economics: EconomicsConfig = field(default_factory=EconomicsConfig)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    interaction: InteractionConfig = field(default_factory=InteractionConfig)
    init_opinions: Distribution = Distribution("uniform", (("low", 0.0), ("high", 1.0)))
    susceptibility: Distribution = Distribution("uniform", (("low", 0.5), ("high", 1.0)))
    epsilon: Distribution = Distribution("constant", (("value", 0.25),))
    seed: int = 0
    topic: str = ""
    both_per_round: bool = False

    def to_dict(self) -> dict:
        d = self.dynamics
        return {
            "seed": self.seed,
            "topic": self.topic,
            "dynamics": {
                "mu": d.mu,
                "p_max": d.p_max,
                "backfire_threshold": d.backfire_threshold,
                "backfire_strength": d.backfire_strength,
                "backfire_applies_to_blue": d.backfire_applies_to_blue,
            },
            "economics": {
                "initial_energy": self.economics.initial_energy,
                "cost_coefficient": self.economics.cost_coefficient,
                "red_budget": self.economics.red_budget,
            },
            "termination": {
                "max_rounds": self.termination.max_rounds,
                "majority_fraction": self.termination.majority_fraction,
                "neutral_band": self.termination.neutral_band,
            },
            "interaction": {
                "scheme": self.interaction.scheme,
                "edges_per_round": self.interaction.edges_per_round,
                "peer_rule": self.interaction.peer_rule,
            },
            "init_opinions": self.init_opinions.to_dict(),
            "susceptibility": self.susceptibility.to_dict(),
            "epsilon": self.epsilon.to_dict(),
            "both_per_round": self.both_per_round,
        }

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        """Validate a plain dict, filling defaults. Unknown keys are errors."""
        if not isinstance(data, dict):
            raise ConfigInvalid("<root>", "expected a JSON object")
        top = {
            "seed", "topic", "dynamics", "economics", "termination", "interaction",
            "init_opinions", "susceptibility", "epsilon", "both_per_round",
        }
        _reject_unknown(data, top, "")
        base = cls()

        seed = data.get("seed", base.seed)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MASK64:
            raise ConfigInvalid("seed", "must be an integer in [0, 2^64)")
        topic = data.get("topic", base.topic)
        if not isinstance(topic, str):
            raise ConfigInvalid("topic", "must be a string")
        both = data.get("both_per_round", False)
        if not isinstance(both, bool):
            raise ConfigInvalid("both_per_round", "must be a boolean")
        if both:
            raise ConfigInvalid("both_per_round", "reserved; only one broadcaster per round is implemented")

        return cls(
            dynamics=_dynamics(_section(data, "dynamics")),
            economics=_economics(_section(data, "economics")),
            termination=_termination(_section(data, "termination")),
            interaction=_interaction(_section(data, "interaction")),
            init_opinions=_dist(data, "init_opinions", base.init_opinions),
            susceptibility=_dist(data, "susceptibility", base.susceptibility),
            epsilon=_dist(data, "epsilon", base.epsilon, open_low=True),
            seed=seed,
            topic=topic,
        )


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigInvalid(name, "expected an object")
    return sec


def _dist(data: dict, name: str, default: Distribution, open_low: bool = False) -> Distribution:
    if name not in data:
        return default
    return Distribution.from_dict(data[name], name, open_low=open_low)


def _reject_unknown(data: dict, allowed: set[str], path: str) -> None:
    for key in data:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigInvalid(where, "unknown key")


def _real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigInvalid(path, f"expected a finite number, got {value!r}")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(path, f"expected an integer, got {value!r}")
    return value


def _cents(value: float, path: str) -> float:
    if abs(value * 100 - round(value * 100)) > 1e-6:
        raise ConfigInvalid(path, "must be a whole number of cents (multiple of 0.01)")
    return value


def _dynamics(sec: dict) -> DynamicsParams:
    base = DynamicsParams()
    _reject_unknown(sec, {"mu", "p_max", "backfire_threshold", "backfire_strength",
                          "backfire_applies_to_blue"}, "dynamics")
    mu = _real(sec.get("mu", base.mu), "dynamics.mu")
    if not 0.0 < mu <= 0.5:
        raise ConfigInvalid("dynamics.mu", f"must be in (0, 0.5], got {mu}")
    p_max = _int(sec.get("p_max", base.p_max), "dynamics.p_max")
    if p_max < 1:
        raise ConfigInvalid("dynamics.p_max", "must be >= 1")
    p_b = _int(sec.get("backfire_threshold", min(base.backfire_threshold, p_max)),
               "dynamics.backfire_threshold")
    if not 1 <= p_b <= p_max:
        raise ConfigInvalid("dynamics.backfire_threshold", f"must be in [1, {p_max}]")
    mu_b = _real(sec.get("backfire_strength", base.backfire_strength), "dynamics.backfire_strength")
    if not 0.0 <= mu_b <= 0.5:
        raise ConfigInvalid("dynamics.backfire_strength", "must be in [0, 0.5]")
    to_blue = sec.get("backfire_applies_to_blue", base.backfire_applies_to_blue)
    if not isinstance(to_blue, bool):
        raise ConfigInvalid("dynamics.backfire_applies_to_blue", "must be a boolean")
    return DynamicsParams(mu, p_max, p_b, mu_b, to_blue)


def _economics(sec: dict) -> EconomicsConfig:
    _reject_unknown(sec, {"initial_energy", "cost_coefficient", "red_budget"}, "economics")
    e0 = _real(sec.get("initial_energy", 100.0), "economics.initial_energy")
    if e0 < 0:
        raise ConfigInvalid("economics.initial_energy", "must be >= 0")
    c = _real(sec.get("cost_coefficient", 1.0), "economics.cost_coefficient")
    if c <= 0:
        raise ConfigInvalid("economics.cost_coefficient", "must be > 0")
    red = sec.get("red_budget")
    if red is not None:
        red = _cents(_real(red, "economics.red_budget"), "economics.red_budget")
        if red < 0:
            raise ConfigInvalid("economics.red_budget", "must be >= 0")
    return EconomicsConfig(
        _cents(e0, "economics.initial_energy"), _cents(c, "economics.cost_coefficient"), red
    )


def _termination(sec: dict) -> TerminationConfig:
    _reject_unknown(sec, {"max_rounds", "majority_fraction", "neutral_band"}, "termination")
    t = _int(sec.get("max_rounds", 50), "termination.max_rounds")
    if t < 1:
        raise ConfigInvalid("termination.max_rounds", "must be >= 1")
    frac = _real(sec.get("majority_fraction", 0.5), "termination.majority_fraction")
    if not 0.5 <= frac < 1.0:
        raise ConfigInvalid("termination.majority_fraction", "must be in [0.5, 1)")
    delta = _real(sec.get("neutral_band", 0.05), "termination.neutral_band")
    if not 0.0 <= delta < 0.5:
        raise ConfigInvalid("termination.neutral_band", "must be in [0, 0.5)")
    return TerminationConfig(t, frac, delta)


def _interaction(sec: dict) -> InteractionConfig:
    _reject_unknown(sec, {"scheme", "edges_per_round", "peer_rule"}, "interaction")
    scheme = sec.get("scheme", "all_edges_shuffled")
    if scheme not in ("all_edges_shuffled", "sampled_edges"):
        raise ConfigInvalid("interaction.scheme", "must be 'all_edges_shuffled' or 'sampled_edges'")
    m = sec.get("edges_per_round")
    if scheme == "sampled_edges":
        m = _int(m, "interaction.edges_per_round")
        if m < 1:
            raise ConfigInvalid("interaction.edges_per_round", "must be >= 1")
    elif m is not None:
        raise ConfigInvalid("interaction.edges_per_round", "only used with sampled_edges")
    rule = sec.get("peer_rule", "directed")
    if rule not in ("directed", "symmetric"):
        raise ConfigInvalid("interaction.peer_rule", "must be 'directed' or 'symmetric'")
    return InteractionConfig(scheme, m, rule)
