import csv
import json

import numpy as np
import pytest

from netsparse.cli import main
from netsparse.errors import ConfigError, MissingTrace
from netsparse.harness import (
    PRESETS,
    TRACE_HEADER,
    ScenarioConfig,
    dump_config,
    emit_plot_data,
    parse_config,
    resolve_scenario,
    run_scenario,
    write_trace,
)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("s1")
    return run_scenario(PRESETS["scenario1"].with_(steps=30), out_dir=out), out


def test_presets():
    s1, s2 = PRESETS["scenario1"], PRESETS["scenario2"]
    assert (s1.subsystems, s1.alpha, s1.active_inputs, s1.atoms) == (30, 0.05, (13, 15), 30)
    assert (s1.h_backward, s1.h_forward, s1.oversampling, s1.uncertainty_fraction) == (10, 5, 1.3, 0.0)
    assert s2.active_inputs == (2, 4, 26, 28) and s2.uncertainty_fraction == 0.025
    assert s1.graph == "star"


def test_config_round_trip():
    cfg = PRESETS["scenario2"].with_(omp_tol=1e-7, atom_reuse=False, graph="1-0,2-1")
    assert parse_config(dump_config(cfg)) == cfg


def test_config_parsing(tmp_path):
    text = "# comment\nsubsystems = 6  # six\ngraph = figure3\nactive_inputs = 1, 6\nomp_tol = none\n"
    cfg = parse_config(text)
    assert cfg.subsystems == 6 and cfg.active_inputs == (1, 6) and cfg.omp_tol is None
    assert sorted(cfg.edges()) == sorted([(6, 1), (1, 4), (2, 4), (4, 0), (5, 0), (3, 0)])
    f = tmp_path / "c.txt"
    f.write_text(text)
    assert resolve_scenario(str(f)) == cfg


@pytest.mark.parametrize(
    "text", ["bogus = 1", "steps = many", "just words", "active_inputs = 31", "h_backward = 0", "atom_reuse = maybe"]
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        resolve_scenario("scenario9")


def test_warmup_only_run(tmp_path):
    res = run_scenario(PRESETS["scenario1"].with_(steps=10), out_dir=tmp_path)
    assert all(t.err_norm == 0.0 and t.mode == "warmup" for t in res.trace)
    assert res.message_logs == [] and res.summary["compressed_steps"] == 0
    assert res.summary["max_nsr_db"] is None
    assert len(read_rows(tmp_path / "messages.csv")) == 0
    plots = emit_plot_data(tmp_path / "trace.csv", tmp_path / "plots")
    rows = read_rows(plots["sparsity"])
    assert len(rows) == 10
    assert all(r["phase"] == "warmup" and r["s"] == "" and r["s_hat"] == "" for r in rows)


def test_short_run_outputs(short_run):
    res, out = short_run
    rows = read_rows(out / "trace.csv")
    assert tuple(rows[0].keys()) == TRACE_HEADER
    assert len(rows) == 30
    n, K, hb = 30, 30, 10
    comp = [r for r in rows if r["mode"] == "compressed"]
    assert len(comp) == K - hb
    for r in comp:
        assert int(r["messages"]) == 30 and int(r["rounds"]) == 1
        assert int(r["p"]) == int(np.ceil(round(1.3 * int(r["s"]), 9)))
        nsr = float(r["nsr_db"])
        assert nsr == pytest.approx(20 * np.log10(float(r["err_norm"]) / float(r["x_norm"])))
    assert int(rows[-1]["cumulative_scalars"]) == hb * n + sum(int(r["p"]) for r in comp)
    assert int(rows[-1]["cumulative_scalars"]) < n * K
    summary = json.loads((out / "summary.json").read_text())
    assert summary["compression_ratio"] == pytest.approx(int(rows[-1]["cumulative_scalars"]) / (n * K))
    assert summary["mean_s"] == pytest.approx(np.mean([int(r["s"]) for r in comp]))
    assert len(read_rows(out / "messages.csv")) == 30 * (K - hb)
    assert parse_config((out / "config.txt").read_text()) == res.config


def test_sparsity_small_after_warmup(short_run):
    res, _ = short_run
    assert all(t.s <= 10 for t in res.compressed_steps)


def test_window_error_within_its_bound(short_run):
    res, _ = short_run
    for t in res.compressed_steps:
        bound = max(t.bounds["lemma3_bound"], t.lemma3_bound_partial)
        assert t.bounds["delta_XXhat"] <= bound * (1 + 1e-9) + 1e-12


def test_plot_data_mirrors_trace(short_run, tmp_path):
    res, out = short_run
    plots = emit_plot_data(out / "trace.csv", tmp_path)
    eb = read_rows(plots["error_bound"])
    assert len(eb) == len(res.compressed_steps)
    for r, t in zip(eb, res.compressed_steps):
        assert float(r["err_norm"]) == t.err_norm
        assert float(r["bound_tho0"]) == t.bounds["bound_tho0"]
    assert len(read_rows(plots["scaled_error"])) == len(res.compressed_steps)
    bw = read_rows(plots["bandwidth"])
    assert [int(r["baseline_scalars"]) for r in bw] == [30 * (k + 1) for k in range(30)]
    sp = read_rows(plots["sparsity"])
    assert [r["phase"] for r in sp[:10]] == ["warmup"] * 10
    assert all(r["phase"] == "compressed" and r["s"] for r in sp[10:])


def test_empty_trace(tmp_path):
    write_trace([], tmp_path / "t.csv")
    plots = emit_plot_data(tmp_path / "t.csv", tmp_path / "p")
    for path in plots.values():
        with open(path) as fh:
            lines = fh.read().splitlines()
        assert len(lines) == 1 and lines[0]


def test_missing_trace(tmp_path):
    with pytest.raises(MissingTrace):
        emit_plot_data(tmp_path / "nope.csv", tmp_path)


def test_figure3_graph_run():
    cfg = ScenarioConfig(subsystems=6, active_inputs=(2, 5), atoms=6, h_backward=4, h_forward=2, steps=8, graph="figure3")
    res = run_scenario(cfg)
    assert all(t.rounds == 3 and t.messages == 6 for t in res.compressed_steps)


def test_refresh_rows_are_full_state():
    cfg = PRESETS["scenario2"].with_(steps=20, refresh_period=3)
    res = run_scenario(cfg)
    full = [t.k for t in res.trace if t.mode == "full"]
    assert full == [13, 17]
    assert all(res.trace[k].err_norm == 0.0 for k in full)


def test_cli_run_and_plots(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--scenario", "scenario1", "--steps", "15", "--seed", "3", "--out", str(out)])
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 3 and summary["steps"] == 15
    assert code in (0, 2)  # 2 flags error-bound violations, outputs still written
    assert code == (2 if summary["dominance_violations"] else 0)
    assert main(["plots", "--trace", str(out / "trace.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "bandwidth.csv").exists()


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--scenario", "nope"]) == 1
    assert main(["plots", "--trace", str(tmp_path / "x.csv"), "--out", str(tmp_path)]) == 1
    assert "MissingTrace" in capsys.readouterr().err


def test_cli_validate_graph(tmp_path, capsys):
    good = tmp_path / "g.txt"
    good.write_text("6 1\n1 4\n2 4\n4 0\n5 0\n3 0\n")
    assert main(["validate-graph", "--edges", str(good)]) == 0
    assert "rounds=3" in capsys.readouterr().out
    bad = tmp_path / "b.txt"
    bad.write_text("1 0\n1 2\n2 0\n")
    assert main(["validate-graph", "--edges", str(bad)]) == 1
    assert "MultiplePaths" in capsys.readouterr().err


def test_strict_bounds_aborts_on_violation():
    from netsparse.errors import InvariantViolation

    cfg = PRESETS["scenario1"].with_(steps=60, seed=2)
    lax = run_scenario(cfg)
    bad = [t.k for t in lax.compressed_steps if not t.dominance_ok]
    if not bad:
        pytest.skip("no bound violation in this window")
    with pytest.raises(InvariantViolation, match=f"step {bad[0]}"):
        run_scenario(cfg, strict_bounds=True)
