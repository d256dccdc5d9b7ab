"""Command line: ``redblue generate-graph | run | analyze``.

Exit codes: 0 success, 1 aborted at the confirmation prompt, 2 invalid flags
or config, 3 missing credentials, 4 inconsistent run bundle.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable

from . import metrics
from .agents import EconomicsView, HeuristicAgent, ScriptedAgent, TranscriptAgent
from .config import ConfigInvalid, SimConfig
from .dynamics import Side
from .engine import run_simulation
from .llm import AuthMissing, LlmAgent, LlmBackendConfig
from .net import GraphError, InvalidParams, generate_graph, load_edge_list
from .persist import (
    BundleInconsistent,
    ConfigParseError,
    StreamingBundleWriter,
    fmt_real,
    load_bundle,
    load_config,
    write_bundle,
)

EXIT_OK, EXIT_ABORT, EXIT_INVALID, EXIT_CREDENTIALS, EXIT_BUNDLE = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        self.code = code
        super().__init__(message)


def _add_generator_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--kind", required=required,
                   choices=["complete", "erdos_renyi", "barabasi_albert", "watts_strogatz"])
    p.add_argument("--n", type=int, required=required, help="node count")
    p.add_argument("--p", type=float, help="edge probability (erdos_renyi)")
    p.add_argument("--m", type=int, help="edges per new node (barabasi_albert)")
    p.add_argument("--k", type=int, help="lattice degree, even (watts_strogatz)")
    p.add_argument("--beta", type=float, help="rewiring probability (watts_strogatz)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redblue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-graph", help="write a random edge list")
    _add_generator_flags(g, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, type=Path)

    r = sub.add_parser("run", help="run a simulation and write a run bundle")
    r.add_argument("--config", type=Path, help="JSON config (defaults when omitted)")
    r.add_argument("--graph", type=Path, help="edge-list CSV")
    r.add_argument("--remap-ids", action="store_true", help="treat edge-list ids as labels")
    _add_generator_flags(r, required=False)
    r.add_argument("--graph-seed", type=int, help="generator seed (defaults to the run seed)")
    r.add_argument("--red", default="heuristic", help="scripted:<path> | heuristic | "
                   "transcript:<path> | llm:<config-path>")
    r.add_argument("--blue", default="heuristic")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--topic")
    r.add_argument("--yes", action="store_true", help="skip the confirmation prompt")
    r.add_argument("--stream", action="store_true", help="write files while the run progresses")
    r.add_argument("--out", required=True, type=Path)

    a = sub.add_parser("analyze", help="recompute metrics from a run bundle")
    a.add_argument("--run", required=True, type=Path, help="run bundle directory")
    a.add_argument("--out", type=Path, help="where to write metric CSVs (default: --run)")
    return parser


def _generator_params(args) -> dict:
    names = {"erdos_renyi": ["p"], "barabasi_albert": ["m"], "watts_strogatz": ["k", "beta"]}
    params = {}
    for name in names.get(args.kind, []):
        value = getattr(args, name)
        if value is None:
            raise CliError(f"--{name} is required for --kind {args.kind}")
        params[name] = value
    return params


def _generate(args, seed: int):
    if args.n is None:
        raise CliError("--n is required with --kind")
    try:
        return generate_graph(args.kind, args.n, seed, **_generator_params(args))
    except InvalidParams as exc:
        raise CliError(f"--{exc.param}: {exc}") from None


def cmd_generate_graph(args, out=None) -> int:
    out = out or sys.stdout
    net = _generate(args, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(net.to_edge_list())
    print(f"wrote {net.num_edges} edges on {net.n} nodes to {args.out}", file=out)
    return EXIT_OK


def make_agent(spec: str, side: Side, config: SimConfig):
    kind, _, arg = spec.partition(":")
    view = EconomicsView(config.dynamics.p_max, config.economics.cost_coefficient)
    try:
        if kind == "heuristic" and not arg:
            return HeuristicAgent(view)
        if kind == "scripted" and arg:
            return ScriptedAgent.from_jsonl(Path(arg).read_text(encoding="utf-8"))
        if kind == "transcript" and arg:
            return TranscriptAgent.from_jsonl(arg, side)
        if kind == "llm" and arg:
            cfg = LlmBackendConfig.from_dict(json.loads(Path(arg).read_text(encoding="utf-8")), side)
            return LlmAgent(cfg, side, p_max=config.dynamics.p_max)
    except AuthMissing as exc:
        raise CliError(f"--{side.value}: {exc}", EXIT_CREDENTIALS) from None
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise CliError(f"--{side.value}: {exc}") from None
    raise CliError(f"--{side.value}: unknown agent spec {spec!r}")


def settings_summary(config: SimConfig, net, red: str, blue: str, graph_desc: str) -> str:
    d, e, t, i = config.dynamics, config.economics, config.termination, config.interaction
    rows = [
        ("topic", config.topic or "(not set)"),
        ("graph", f"{graph_desc}: {net.n} nodes, {net.num_edges} edges, "
                  f"{net.component_count()} component(s)"),
        ("red agent", red),
        ("blue agent", blue),
        ("seed", str(config.seed)),
        ("max rounds", str(t.max_rounds)),
        ("neutral band", str(t.neutral_band)),
        ("mu / p_max", f"{d.mu} / {d.p_max}"),
        ("backfire", f"p >= {d.backfire_threshold}, strength {d.backfire_strength}"
                     f"{', also blue' if d.backfire_applies_to_blue else ''}"),
        ("blue energy / cost", f"{e.initial_energy} / {e.cost_coefficient} per potency"),
        ("peer interaction", f"{i.scheme}, {i.peer_rule}"),
        ("initial opinions", json.dumps(config.init_opinions.to_dict())),
        ("susceptibility", json.dumps(config.susceptibility.to_dict())),
        ("confidence bound", json.dumps(config.epsilon.to_dict())),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"  {k.ljust(width)}  {v}" for k, v in rows)


def cmd_run(args, out=None, ask: Callable[[str], str] | None = None) -> int:
    out = out or sys.stdout
    ask = ask or input
    try:
        config = load_config(args.config.read_text(encoding="utf-8")) if args.config else SimConfig()
    except OSError as exc:
        raise CliError(f"--config: {exc}") from None
    except (ConfigParseError, ConfigInvalid) as exc:
        raise CliError(f"--config: {exc}") from None
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.topic is not None:
        overrides["topic"] = args.topic
    if overrides:
        try:
            config = SimConfig.from_dict({**config.to_dict(), **overrides})
        except ConfigInvalid as exc:
            raise CliError(f"--{exc.field}: {exc.reason}") from None

    if (args.graph is None) == (args.kind is None):
        raise CliError("give exactly one of --graph or --kind")
    if args.graph is not None:
        try:
            net, dups = load_edge_list(args.graph.read_text(encoding="utf-8"), remap=args.remap_ids)
        except (OSError, GraphError) as exc:
            raise CliError(f"--graph: {exc}") from None
        graph_desc = str(args.graph)
        graph_meta = {"source": "file", "path": str(args.graph), "duplicates_dropped": dups}
        if dups:
            print(f"warning: dropped {dups} duplicate edge line(s)", file=out)
    else:
        gseed = config.seed if args.graph_seed is None else args.graph_seed
        net = _generate(args, gseed)
        graph_desc = f"generated {args.kind}"
        graph_meta = {"source": "generated", "kind": args.kind, "seed": gseed,
                      "params": _generator_params(args)}

    red = make_agent(args.red, Side.RED, config)
    blue = make_agent(args.blue, Side.BLUE, config)

    if args.yes:
        if not config.topic:
            raise CliError("--topic is required with --yes when the config has no topic")
    else:
        print("Simulation settings:", file=out)
        print(settings_summary(config, net, args.red, args.blue, graph_desc), file=out)
        if not config.topic:
            topic = ask("Topic: ").strip()
            if not topic:
                raise CliError("a topic is required")
            config = SimConfig.from_dict({**config.to_dict(), "topic": topic})
        if ask("Proceed? [y/N] ").strip().lower() not in ("y", "yes"):
            print("aborted", file=out)
            return EXIT_ABORT

    extra = {"graph": graph_meta, "agents": {"red": args.red, "blue": args.blue}}
    if args.stream:
        writer = StreamingBundleWriter(args.out)
        tel = run_simulation(config, net, red, blue, on_round=writer.on_round)
        writer.close(tel, net, extra)
    else:
        tel = run_simulation(config, net, red, blue)
        write_bundle(tel, args.out, net, extra)
    for agent in (red, blue):
        if isinstance(agent, LlmAgent):
            agent.close()
    print(f"outcome={tel.outcome.kind.value} round={tel.outcome.at_round}", file=out)
    return EXIT_OK


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def cmd_analyze(args, out=None) -> int:
    out = out or sys.stdout
    try:
        tel = load_bundle(args.run)
    except BundleInconsistent as exc:
        raise CliError(f"inconsistent bundle: {exc}", EXIT_BUNDLE) from None
    dest = args.out or args.run
    dest.mkdir(parents=True, exist_ok=True)
    delta = tel.config.termination.neutral_band
    n = tel.n

    final = metrics.alignment_distribution(tel.snapshots[-1], delta)
    eff = metrics.resource_efficiency(tel)
    resilience = metrics.node_resilience(tel)
    temporal = metrics.temporal_evolution(tel)
    polar = metrics.polarization_series(tel)
    defined = [v for v in resilience if v is not None]
    mean_res = sum(defined) / len(defined) if defined else None
    rates = [rate for _, _, rate in temporal]

    summary = [
        ("outcome", tel.outcome.kind.value if tel.outcome else ""),
        ("termination_round", str(tel.outcome.at_round) if tel.outcome else ""),
        ("final_n_red", str(final[0])),
        ("final_n_neutral", str(final[1])),
        ("final_n_blue", str(final[2])),
        ("final_share_red", fmt_real(final[0] / n)),
        ("final_share_neutral", fmt_real(final[1] / n)),
        ("final_share_blue", fmt_real(final[2] / n)),
        ("blue_energy_spent", fmt_real(eff.spend)),
        ("blue_gain", str(eff.gain)),
        ("resource_efficiency", fmt_real(eff.value)),
        ("resource_efficiency_degenerate", str(eff.degenerate).lower()),
        ("resilience_defined_nodes", str(len(defined))),
        ("mean_resilience", "" if mean_res is None else fmt_real(mean_res)),
        ("mean_class_change_rate", fmt_real(sum(rates) / len(rates)) if rates else ""),
    ]
    _write_csv(dest / "metrics.csv", "metric,value", summary)
    _write_csv(dest / "polarization.csv", "round,n_red,n_neutral,n_blue,var_opinion",
               ((str(r), str(a), str(b), str(c), fmt_real(v)) for r, a, b, c, v in polar))
    _write_csv(dest / "temporal.csv", "round,delta_mean_opinion,class_change_rate",
               ((str(r), fmt_real(d), fmt_real(c)) for r, d, c in temporal))
    _write_csv(dest / "resilience.csv", "node_id,resilience",
               ((str(i), "" if v is None else fmt_real(v)) for i, v in enumerate(resilience)))
    width = max(len(k) for k, _ in summary)
    for key, value in summary:
        print(f"{key.ljust(width)}  {value}", file=out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"generate-graph": cmd_generate_graph, "run": cmd_run, "analyze": cmd_analyze}
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
