"""Remote LLM agent over the OpenAI-compatible chat-completions protocol."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Callable

import httpx

from .agents import AgentAction, BackendUnavailable, Observation
from .dynamics import Side

log = logging.getLogger(__name__)

DEFAULT_KEY_ENV = {Side.RED: "SIM_LLM_API_KEY_RED", Side.BLUE: "SIM_LLM_API_KEY_BLUE"}

DEFAULT_TEMPLATE = (
    "Topic: {topic}\n"
    "Round: {round}\n"
    "Population (red-aligned, neutral, blue-aligned): {counts}\n"
    "Mean opinion (0 = red pole, 1 = blue pole): {mean}\n"
    "Your remaining energy: {energy}\n"
    "Opponent's last message: {opponent_message}\n"
    "Write your next broadcast."
)

PLACEHOLDERS = ("topic", "round", "counts", "mean", "energy", "opponent_message")


class AuthMissing(RuntimeError):
    def __init__(self, env_var: str):
        self.env_var = env_var
        super().__init__(f"environment variable {env_var} is not set")


@dataclass(frozen=True)
class LlmBackendConfig:
    endpoint_url: str
    model_name: str
    api_key_env_var: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    prompt_template: str = DEFAULT_TEMPLATE
    role_instructions: str = ""
    temperature: float = 0.7
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if not 0 <= self.max_retries <= 5:
            raise ValueError("max_retries must be in [0, 5]")
        if self.backoff_base < 0 or self.backoff_factor < 1:
            raise ValueError("backoff_base must be >= 0 and backoff_factor >= 1")

    @classmethod
    def from_dict(cls, data: dict, side: Side) -> LlmBackendConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown LLM config keys: {sorted(unknown)}")
        data = dict(data)
        data.setdefault("api_key_env_var", DEFAULT_KEY_ENV[side])
        return cls(**data)


def render_prompt(template: str, obs: Observation) -> str:
    energy = "unlimited" if obs.own_energy is None else f"{obs.own_energy:.2f}"
    if obs.opponent_last_message is None:
        opp = "(none yet)"
    else:
        text, potency = obs.opponent_last_message
        opp = "(skipped)" if potency == 0 else f"{text!r} (potency {potency})"
    values = {
        "topic": obs.topic,
        "round": str(obs.round),
        "counts": "{}, {}, {}".format(*obs.counts),
        "mean": f"{obs.mean_opinion:.4f}",
        "energy": energy,
        "opponent_message": opp,
    }
    # plain replacement so literal braces in user templates survive
    for key in PLACEHOLDERS:
        template = template.replace("{" + key + "}", values[key])
    return template


def extract_action(content: str, p_max: int) -> tuple[AgentAction, bool]:
    """Pull the first JSON object with ``message`` and ``potency`` out of a reply.

    Returns the action and whether the potency had to be clamped into
    [1, p_max]. Raises ValueError when no usable object is present.
    """
    decoder = json.JSONDecoder()
    start = content.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(content, start)
        except json.JSONDecodeError:
            start = content.find("{", start + 1)
            continue
        if isinstance(obj, dict) and "message" in obj and "potency" in obj:
            message, raw = obj["message"], obj["potency"]
            if not isinstance(message, str):
                raise ValueError("message is not a string")
            if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw != raw:
                raise ValueError(f"potency is not a number: {raw!r}")
            potency = int(round(raw)) if abs(raw) < 1e9 else (p_max if raw > 0 else 1)
            clamped = min(p_max, max(1, potency))
            return AgentAction(message, clamped), clamped != raw
        start = content.find("{", start + 1)
    raise ValueError("no JSON object with 'message' and 'potency' in reply")


class LlmAgent:
    """Asks a chat-completions endpoint for each broadcast.

    The API key is read once, at construction, so a missing credential stops
    a run before its first round.
    """

    def __init__(
        self,
        cfg: LlmBackendConfig,
        side: Side,
        p_max: int = 10,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self.side = side
        self.p_max = p_max
        self._sleep = sleep
        self.api_key = None
        if cfg.api_key_env_var:
            self.api_key = os.environ.get(cfg.api_key_env_var)
            if not self.api_key:
                raise AuthMissing(cfg.api_key_env_var)
        self._client = httpx.Client(timeout=cfg.timeout, transport=transport)
        self.events: list[dict] = []

    def close(self) -> None:
        self._client.close()

    def messages(self, obs: Observation) -> list[dict]:
        system = (
            f"You are the {self.side.value} agent in an opinion-dynamics simulation. "
            f"{self.cfg.role_instructions}".strip()
            + "\nReply with one JSON object: "
            + '{"message": "<broadcast text>", "potency": <integer from 1 to '
            + f"{self.p_max}>}}"
        )
        return [
            {"role": "system", "content": system},
            {"role": "user", "content": render_prompt(self.cfg.prompt_template, obs)},
        ]

    def _request(self, obs: Observation) -> str:
        url = self.cfg.endpoint_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.cfg.model_name,
            "messages": self.messages(obs),
            "temperature": self.cfg.temperature,
        }
        resp = self._client.post(url, headers=headers, json=body)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def act(self, obs: Observation) -> AgentAction:
        attempts = self.cfg.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.cfg.backoff_base * self.cfg.backoff_factor ** (attempt - 1))
            try:
                content = self._request(obs)
                action, clamped = extract_action(content, self.p_max)
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                last_error = exc
                log.warning("%s agent attempt %d/%d failed: %s",
                            self.side.value, attempt + 1, attempts, exc)
                self.events.append({"round": obs.round, "event": "attempt_failed", "error": str(exc)})
                continue
            if clamped:
                log.warning("%s agent potency clamped to %d in round %d",
                            self.side.value, action.potency, obs.round)
                self.events.append({"round": obs.round, "event": "potency_clamped",
                                    "potency": action.potency})
            return action
        raise BackendUnavailable(
            f"{self.side.value} endpoint failed after {attempts} attempts: {last_error}"
        )
