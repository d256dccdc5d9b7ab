"""Config loading and the run bundle on disk.

A bundle directory holds:

    rounds.csv      one row per round
    messages.jsonl  one object per broadcast turn (skips have potency 0)
    states.csv      long format ``round,node_id,opinion``; round 0 is the start
    run.json        config echo, outcome, seed, versions, substream names

Reals are fixed-point with FLOAT_DECIMALS places, money columns are exact
cents, line endings are LF. The same telemetry always gives the same bytes.
"""

from __future__ import annotations

import io
import json
import math
import platform
from pathlib import Path

from . import __version__
from .config import SimConfig
from .dynamics import Side
from .engine import BroadcastMessage, Outcome, OutcomeKind, RunTelemetry, Simulation
from .metrics import RoundRecord, alignment_distribution, class_changes, mean_and_variance
from .net import OpinionNetwork

FLOAT_DECIMALS = 12
CONSISTENCY_TOL = 1e-9

ROUNDS_HEADER = (
    "round,broadcaster,potency,cost,blue_energy,n_red,n_neutral,n_blue,"
    "mean_opinion,var_opinion,accepted,rejected,backfired,class_change_rate"
)
STATES_HEADER = "round,node_id,opinion"
MESSAGE_KEYS = ("round", "side", "potency", "cost", "text", "accepted", "rejected", "backfired")


class ConfigParseError(ValueError):
    def __init__(self, msg: str, position: int):
        self.position = position
        super().__init__(f"{msg} (at character {position})")


class BundleInconsistent(ValueError):
    def __init__(self, file: str, check: str):
        self.file = file
        self.check = check
        super().__init__(f"{file}: {check}")


def load_config(text: str) -> SimConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.pos) from None
    return SimConfig.from_dict(data)


def fmt_real(x: float) -> str:
    s = f"{x:.{FLOAT_DECIMALS}f}"
    if s.startswith("-") and not s.strip("-0."):
        s = s[1:]
    return s


def fmt_cents(cents: int) -> str:
    """Exact decimal for a cent amount: 700 -> '7', 250 -> '2.5'."""
    whole, frac = divmod(cents, 100)
    return str(whole) if frac == 0 else f"{whole}.{frac:02d}".rstrip("0")


def parse_cents(text: str) -> int:
    whole, _, frac = text.partition(".")
    return int(whole) * 100 + int((frac + "00")[:2])


def _cents_json(cents: int):
    return cents // 100 if cents % 100 == 0 else cents / 100


def round_row(rec: RoundRecord) -> str:
    return ",".join((
        str(rec.round), rec.broadcaster.value, str(rec.potency), fmt_cents(rec.cost),
        fmt_real(rec.blue_energy / 100), str(rec.n_red), str(rec.n_neutral), str(rec.n_blue),
        fmt_real(rec.mean_opinion), fmt_real(rec.var_opinion), str(rec.accepted),
        str(rec.rejected), str(rec.backfired), fmt_real(rec.class_change_rate),
    )) + "\n"


def message_line(msg: BroadcastMessage) -> str:
    obj = {
        "round": msg.round,
        "side": msg.side.value,
        "potency": msg.potency,
        "cost": _cents_json(msg.cost),
        "text": msg.text,
        "accepted": msg.accepted,
        "rejected": msg.rejected,
        "backfired": msg.backfired,
    }
    return json.dumps(obj, separators=(",", ":")) + "\n"


def state_rows(r: int, snapshot) -> str:
    return "".join(f"{r},{i},{fmt_real(x)}\n" for i, x in enumerate(snapshot))


def export_rounds_csv(telemetry: RunTelemetry) -> str:
    return ROUNDS_HEADER + "\n" + "".join(round_row(rec) for rec in telemetry.records)


def export_messages_jsonl(telemetry: RunTelemetry) -> str:
    return "".join(message_line(m) for m in telemetry.messages)


def export_states_csv(telemetry: RunTelemetry) -> str:
    buf = io.StringIO()
    buf.write(STATES_HEADER + "\n")
    for r, snap in enumerate(telemetry.snapshots):
        buf.write(state_rows(r, snap))
    return buf.getvalue()


def run_metadata(telemetry: RunTelemetry, net: OpinionNetwork | None = None,
                 extra: dict | None = None) -> dict:
    outcome = telemetry.outcome
    meta = {
        "tool": "redblue",
        "version": __version__,
        "python": platform.python_version(),
        "seed": telemetry.config.seed,
        "config": telemetry.config.to_dict(),
        "n": telemetry.n,
        "outcome": outcome.kind.value if outcome else None,
        "termination_round": outcome.at_round if outcome else None,
        "rounds": len(telemetry.records),
        "duration_s": round(telemetry.duration_s, 6),
        "rng_substreams": substream_patterns(telemetry.substreams),
        "pole_convention": {"red": 0.0, "blue": 1.0},
        "events": telemetry.events,
    }
    if net is not None:
        meta["num_edges"] = net.num_edges
        meta["components"] = net.component_count()
    if extra:
        meta.update(extra)
    return meta


def substream_patterns(names: list[str]) -> list[str]:
    out: list[str] = []
    for name in names:
        parts = name.split(".")
        if len(parts) == 3 and parts[0] == "round" and parts[1].isdigit():
            name = f"round.{{r}}.{parts[2]}"
        if name not in out:
            out.append(name)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_node_map(out: Path, net: OpinionNetwork) -> None:
    if net.labels is not None:
        _write(out / "node_map.csv",
               "node_id,label\n" + "".join(f"{i},{lab}\n" for i, lab in enumerate(net.labels)))


def write_bundle(telemetry: RunTelemetry, out_dir: str | Path,
                 net: OpinionNetwork | None = None, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "rounds.csv", export_rounds_csv(telemetry))
    _write(out / "messages.jsonl", export_messages_jsonl(telemetry))
    _write(out / "states.csv", export_states_csv(telemetry))
    _write(out / "run.json", json.dumps(run_metadata(telemetry, net, extra), indent=2) + "\n")
    if net is not None:
        write_node_map(out, net)
    return out


class StreamingBundleWriter:
    """Appends rows as rounds finish; pass ``writer.on_round`` to run_simulation.

    Produces the same bytes as :func:`write_bundle`.
    """

    def __init__(self, out_dir: str | Path):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self._rounds = open(self.out / "rounds.csv", "w", encoding="utf-8", newline="\n")
        self._messages = open(self.out / "messages.jsonl", "w", encoding="utf-8", newline="\n")
        self._states = open(self.out / "states.csv", "w", encoding="utf-8", newline="\n")
        self._rounds.write(ROUNDS_HEADER + "\n")
        self._states.write(STATES_HEADER + "\n")
        self._started = False

    def on_round(self, sim: Simulation, record: RoundRecord) -> None:
        tel = sim.telemetry
        if not self._started:
            self._states.write(state_rows(0, tel.snapshots[0]))
            self._started = True
        self._rounds.write(round_row(record))
        self._messages.write(message_line(tel.messages[-1]))
        self._states.write(state_rows(record.round, tel.snapshots[-1]))

    def close(self, telemetry: RunTelemetry, net: OpinionNetwork | None = None,
              extra: dict | None = None) -> Path:
        if not self._started:
            self._states.write(state_rows(0, telemetry.snapshots[0]))
        for fh in (self._rounds, self._messages, self._states):
            fh.close()
        _write(self.out / "run.json",
               json.dumps(run_metadata(telemetry, net, extra), indent=2) + "\n")
        if net is not None:
            write_node_map(self.out, net)
        return self.out


# --- reading a bundle back -------------------------------------------------

def _read_lines(path: Path) -> list[str]:
    if not path.exists():
        raise BundleInconsistent(path.name, "file missing")
    return path.read_text(encoding="utf-8").splitlines()


def load_bundle(run_dir: str | Path, check: bool = True) -> RunTelemetry:
    """Rebuild telemetry from a bundle's files.

    With ``check`` every cross-file invariant is verified and the first failure
    raises BundleInconsistent naming the file at fault.
    """
    run_dir = Path(run_dir)
    try:
        meta = json.loads("\n".join(_read_lines(run_dir / "run.json")))
        config = SimConfig.from_dict(meta["config"])
        n = int(meta["n"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BundleInconsistent):
            raise
        raise BundleInconsistent("run.json", f"unreadable: {exc}") from None

    records = _parse_rounds(_read_lines(run_dir / "rounds.csv"))
    messages = _parse_messages(_read_lines(run_dir / "messages.jsonl"))
    snapshots = _parse_states(_read_lines(run_dir / "states.csv"), n)

    tel = RunTelemetry(config, n, records, messages, snapshots)
    if meta.get("outcome"):
        tel.outcome = Outcome(OutcomeKind(meta["outcome"]), int(meta["termination_round"]))
    tel.events = list(meta.get("events", []))
    tel.substreams = list(meta.get("rng_substreams", []))
    tel.duration_s = float(meta.get("duration_s", 0.0))
    if check:
        check_bundle(tel, meta)
    return tel


def _parse_rounds(lines: list[str]) -> list[RoundRecord]:
    if not lines or lines[0] != ROUNDS_HEADER:
        raise BundleInconsistent("rounds.csv", "header mismatch")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        f = line.split(",")
        if len(f) != 14:
            raise BundleInconsistent("rounds.csv", f"line {lineno}: expected 14 fields")
        try:
            n_red, n_neu, n_blue = int(f[5]), int(f[6]), int(f[7])
            rate = float(f[13])
            out.append(RoundRecord(
                round=int(f[0]), broadcaster=Side(f[1]), potency=int(f[2]),
                cost=parse_cents(f[3]), blue_energy=round(float(f[4]) * 100),
                accepted=int(f[10]), rejected=int(f[11]), backfired=int(f[12]),
                n_red=n_red, n_neutral=n_neu, n_blue=n_blue,
                mean_opinion=float(f[8]), var_opinion=float(f[9]),
                class_change_count=round(rate * (n_red + n_neu + n_blue)),
            ))
        except ValueError as exc:
            raise BundleInconsistent("rounds.csv", f"line {lineno}: {exc}") from None
    return out


def _parse_messages(lines: list[str]) -> list[BroadcastMessage]:
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            cost = round(obj["cost"] * 100)
            out.append(BroadcastMessage(
                int(obj["round"]), Side(obj["side"]), obj["text"], int(obj["potency"]),
                cost, int(obj["accepted"]), int(obj["rejected"]), int(obj["backfired"]),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise BundleInconsistent("messages.jsonl", f"line {lineno}: {exc}") from None
    return out


def _parse_states(lines: list[str], n: int) -> list[tuple[float, ...]]:
    if not lines or lines[0] != STATES_HEADER:
        raise BundleInconsistent("states.csv", "header mismatch")
    rows = lines[1:]
    if len(rows) % n:
        raise BundleInconsistent("states.csv", f"{len(rows)} rows is not a multiple of n={n}")
    snapshots = []
    for start in range(0, len(rows), n):
        r = start // n
        snap = []
        for i, line in enumerate(rows[start:start + n]):
            f = line.split(",")
            try:
                ok = len(f) == 3 and int(f[0]) == r and int(f[1]) == i
                value = float(f[2]) if ok else math.nan
            except ValueError:
                ok = False
            if not ok or not 0.0 <= value <= 1.0:
                raise BundleInconsistent("states.csv", f"row {start + i + 2}: expected round {r} node {i}")
            snap.append(value)
        snapshots.append(tuple(snap))
    return snapshots


def check_bundle(tel: RunTelemetry, meta: dict) -> None:
    # run.json's round count is the reference, so a short file is the one named
    rounds = int(meta.get("rounds", len(tel.records)))
    if [rec.round for rec in tel.records] != list(range(1, len(tel.records) + 1)):
        raise BundleInconsistent("rounds.csv", "rounds are not 1..R in order")
    if len(tel.records) != rounds:
        raise BundleInconsistent("rounds.csv", f"has {len(tel.records)} rows, run.json says {rounds} rounds")
    if len(tel.snapshots) != rounds + 1:
        raise BundleInconsistent(
            "states.csv", f"has {len(tel.snapshots)} snapshots, expected {rounds + 1}"
        )
    if len(tel.messages) != rounds:
        raise BundleInconsistent("messages.jsonl", f"has {len(tel.messages)} entries for {rounds} rounds")
    if tel.outcome is not None and tel.outcome.at_round != rounds:
        raise BundleInconsistent("run.json", "termination round disagrees with the round count")
    delta = tel.config.termination.neutral_band
    for rec, msg in zip(tel.records, tel.messages):
        if (msg.round, msg.side, msg.potency, msg.cost) != (
            rec.round, rec.broadcaster, rec.potency, rec.cost
        ) or (msg.accepted, msg.rejected, msg.backfired) != (rec.accepted, rec.rejected, rec.backfired):
            raise BundleInconsistent("messages.jsonl", f"round {rec.round} disagrees with rounds.csv")
    for rec in tel.records:
        snap = tel.snapshots[rec.round]
        if alignment_distribution(snap, delta) != (rec.n_red, rec.n_neutral, rec.n_blue):
            raise BundleInconsistent("states.csv", f"round {rec.round} class counts disagree with rounds.csv")
        mean, var = mean_and_variance(snap)
        if abs(mean - rec.mean_opinion) > CONSISTENCY_TOL or abs(var - rec.var_opinion) > CONSISTENCY_TOL:
            raise BundleInconsistent("states.csv", f"round {rec.round} mean/variance disagree with rounds.csv")
        changes = class_changes(tel.snapshots[rec.round - 1], snap, delta)
        if changes != rec.class_change_count:
            raise BundleInconsistent("states.csv", f"round {rec.round} class changes disagree with rounds.csv")
    energy = tel.config.economics.initial_energy_cents
    for rec in tel.records:
        if rec.broadcaster is Side.BLUE:
            energy -= rec.cost
        if rec.blue_energy != energy:
            raise BundleInconsistent("rounds.csv", f"round {rec.round} energy ledger does not balance")
