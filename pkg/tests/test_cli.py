import json

import pytest

from redblue.cli import main


def write_scripts(tmp_path):
    red = tmp_path / "red.jsonl"
    blue = tmp_path / "blue.jsonl"
    red.write_text("".join(json.dumps({"text": f"r{i}", "potency": p}) + "\n"
                           for i, p in enumerate([7, 4, 9])))
    blue.write_text("".join(json.dumps({"text": f"b{i}", "potency": p}) + "\n"
                            for i, p in enumerate([5, 3])))
    return red, blue


@pytest.fixture
def no_input(monkeypatch):
    def boom(prompt=""):
        raise AssertionError("headless run read from stdin")
    monkeypatch.setattr("builtins.input", boom)


def test_generate_complete_three(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["generate-graph", "--kind", "complete", "--n", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 6 and "0,1" in lines and "2,1" in lines
    assert "6 edges" in capsys.readouterr().out


def test_generate_invalid_param_names_flag(tmp_path, capsys):
    code = main(["generate-graph", "--kind", "erdos_renyi", "--n", "10", "--p", "1.5",
                 "--out", str(tmp_path / "g.csv")])
    assert code == 2
    assert "--p" in capsys.readouterr().err
    assert not (tmp_path / "g.csv").exists()


def test_generate_missing_param(tmp_path, capsys):
    assert main(["generate-graph", "--kind", "watts_strogatz", "--n", "10", "--k", "4",
                 "--out", str(tmp_path / "g.csv")]) == 2
    assert "--beta" in capsys.readouterr().err


def test_generate_is_deterministic(tmp_path):
    flags = ["generate-graph", "--kind", "barabasi_albert", "--n", "50", "--m", "2", "--seed", "9"]
    main(flags + ["--out", str(tmp_path / "a.csv")])
    main(flags + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def headless_run(tmp_path, out_name="run", extra=()):
    graph = tmp_path / "g.csv"
    main(["generate-graph", "--kind", "erdos_renyi", "--n", "15", "--p", "0.3", "--seed", "1",
          "--out", str(graph)])
    red, blue = write_scripts(tmp_path)
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"seed": 7, "termination": {"max_rounds": 6}}))
    return main(["run", "--config", str(config), "--graph", str(graph),
                 "--red", f"scripted:{red}", "--blue", f"scripted:{blue}",
                 "--topic", "t", "--yes", "--out", str(tmp_path / out_name), *extra])


def test_headless_run_writes_deterministic_bundle(tmp_path, capsys, no_input):
    assert headless_run(tmp_path, "a") == 0
    out = capsys.readouterr().out
    assert out.strip().splitlines()[-1].startswith("outcome=")
    assert headless_run(tmp_path, "b") == 0
    for name in ("rounds.csv", "messages.jsonl", "states.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "run.json").read_text())
    assert meta["config"]["topic"] == "t" and meta["seed"] == 7


def test_streaming_run_matches_batch(tmp_path, no_input):
    headless_run(tmp_path, "batch")
    headless_run(tmp_path, "stream", ["--stream"])
    for name in ("rounds.csv", "messages.jsonl", "states.csv"):
        assert (tmp_path / "batch" / name).read_bytes() == (tmp_path / "stream" / name).read_bytes()


def test_outcome_line_format(tmp_path, capsys, no_input):
    headless_run(tmp_path)
    line = capsys.readouterr().out.strip().splitlines()[-1]
    kind, rnd = line.split()
    assert kind.split("=")[1] in {"RedMajority", "BlueMajority", "Stalemate"}
    assert int(rnd.split("=")[1]) >= 1


def test_generated_graph_run(tmp_path, no_input):
    code = main(["run", "--kind", "watts_strogatz", "--n", "30", "--k", "4", "--beta", "0.2",
                 "--topic", "t", "--yes", "--out", str(tmp_path / "r")])
    assert code == 0
    meta = json.loads((tmp_path / "r" / "run.json").read_text())
    assert meta["graph"]["kind"] == "watts_strogatz"


def test_missing_credentials_exit_3_before_any_round(tmp_path, monkeypatch, capsys, no_input):
    monkeypatch.delenv("SIM_LLM_API_KEY_RED", raising=False)
    llm = tmp_path / "llm.json"
    llm.write_text(json.dumps({"endpoint_url": "http://127.0.0.1:9/v1", "model_name": "m"}))
    out = tmp_path / "run"
    code = main(["run", "--kind", "complete", "--n", "4", "--red", f"llm:{llm}",
                 "--topic", "t", "--yes", "--out", str(out)])
    assert code == 3
    assert "SIM_LLM_API_KEY_RED" in capsys.readouterr().err
    assert not out.exists()


def test_yes_without_topic_is_invalid(tmp_path, no_input):
    assert main(["run", "--kind", "complete", "--n", "4", "--yes", "--out", str(tmp_path / "r")]) == 2


def test_bad_config_exit_2(tmp_path, capsys):
    config = tmp_path / "c.json"
    config.write_text('{"dynamics": {"mu": 0.9}}')
    code = main(["run", "--config", str(config), "--kind", "complete", "--n", "4",
                 "--topic", "t", "--yes", "--out", str(tmp_path / "r")])
    assert code == 2
    assert "dynamics.mu" in capsys.readouterr().err


def test_unknown_agent_spec(tmp_path):
    assert main(["run", "--kind", "complete", "--n", "4", "--blue", "psychic", "--topic", "t",
                 "--yes", "--out", str(tmp_path / "r")]) == 2


def test_interactive_confirms_and_asks_topic(tmp_path, monkeypatch, capsys):
    answers = iter(["vaccines", "y"])
    prompts = []

    def fake_input(prompt=""):
        prompts.append(prompt)
        return next(answers)

    monkeypatch.setattr("builtins.input", fake_input)
    code = main(["run", "--kind", "complete", "--n", "6", "--out", str(tmp_path / "r")])
    assert code == 0
    assert prompts == ["Topic: ", "Proceed? [y/N] "]
    out = capsys.readouterr().out
    assert "Simulation settings:" in out and "max rounds" in out
    assert json.loads((tmp_path / "r" / "run.json").read_text())["config"]["topic"] == "vaccines"


def test_interactive_abort(tmp_path, monkeypatch):
    monkeypatch.setattr("builtins.input", lambda prompt="": "n")
    code = main(["run", "--kind", "complete", "--n", "6", "--topic", "t", "--out", str(tmp_path / "r")])
    assert code == 1
    assert not (tmp_path / "r").exists()


def two_node_bundle(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({
        "init_opinions": {"kind": "constant", "value": 0.5},
        "susceptibility": {"kind": "constant", "value": 1.0},
        "epsilon": {"kind": "constant", "value": 0.6},
    }))
    red = tmp_path / "red.jsonl"
    red.write_text('{"text": "m", "potency": 10}\n')
    main(["run", "--config", str(config), "--kind", "complete", "--n", "2",
          "--red", f"scripted:{red}", "--blue", f"scripted:{tmp_path / 'empty.jsonl'}",
          "--topic", "t", "--yes", "--out", str(tmp_path / "run")])
    return tmp_path / "run"


def read_metrics(path):
    return dict(line.split(",", 1) for line in path.read_text().splitlines()[1:])


def test_analyze_two_node_zero_spend(tmp_path, capsys):
    (tmp_path / "empty.jsonl").write_text("")
    run = two_node_bundle(tmp_path)
    assert main(["analyze", "--run", str(run)]) == 0
    summary = read_metrics(run / "metrics.csv")
    assert float(summary["resource_efficiency"]) == 0.0
    assert summary["outcome"] == "RedMajority"
    assert (run / "polarization.csv").read_text() == (
        "round,n_red,n_neutral,n_blue,var_opinion\n1,2,0,0,0.000000000000\n"
    )
    assert "resource_efficiency" in capsys.readouterr().out


def test_analyze_is_idempotent(tmp_path):
    headless_run(tmp_path)
    run = tmp_path / "run"
    files = ("metrics.csv", "polarization.csv", "temporal.csv", "resilience.csv")
    main(["analyze", "--run", str(run), "--out", str(tmp_path / "m1")])
    main(["analyze", "--run", str(run), "--out", str(tmp_path / "m2")])
    for name in files:
        assert (tmp_path / "m1" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()


def test_analyze_truncated_states_exit_4(tmp_path, capsys):
    headless_run(tmp_path)
    states = tmp_path / "run" / "states.csv"
    lines = states.read_text().splitlines(keepends=True)
    states.write_text("".join(lines[:-15]))
    assert main(["analyze", "--run", str(tmp_path / "run")]) == 4
    assert "states.csv" in capsys.readouterr().err
