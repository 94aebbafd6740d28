import csv
import io

import pytest

from contact_lab import __version__
from contact_lab.cli import main, parse_init
from contact_lab.graphs import Line, build_sv_tree, parse_edgelist


def _table(path):
    text = path.read_text()
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_verify_rw_interval_schema(tmp_path):
    out = tmp_path / "rw"
    assert main(["verify", "rw_interval", "--n_runs", "500", "--out", str(out)]) == 0
    text = (tmp_path / "rw.csv").read_text()
    assert text.startswith(f"# contact_lab {__version__}\n")
    assert "# seed=0" in text and "# lemma=rw_interval" in text
    header = [line for line in text.splitlines() if not line.startswith("#")][0]
    assert header == "n,lambda,n_runs,p_hat,ci_low,ci_high,bound,verdict"
    row = _table(tmp_path / "rw.csv")[0]
    assert row["n"] == "5" and row["n_runs"] == "500" and row["bound"] == "0.5"
    assert row["verdict"] in ("Consistent", "Inconclusive", "Violated")


def test_violated_verdict_exits_2(tmp_path):
    with pytest.warns(UserWarning):
        code = main(["verify", "rw_interval", "--lambda", "0.9", "--n_runs", "500", "--out", str(tmp_path / "v")])
    assert code == 2
    assert _table(tmp_path / "v.csv")[0]["verdict"] == "Violated"


def test_errors_exit_1_with_one_line(tmp_path, capsys):
    assert main(["estimate", "--graph", "star", "--n", "5", "--lambda", "-1"]) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: TypeMismatch:")
    assert main(["verify", "nonsense"]) == 1
    assert capsys.readouterr().err.startswith("error: ConfigError:")
    assert main(["oracle", "--graph", "interval", "--n", "13", "--lambda", "0.1", "--times", "1",
                 "--out", str(tmp_path / "o")]) == 1
    assert "StateSpaceTooLarge" in capsys.readouterr().err
    assert main(["build", "--config", str(tmp_path / "missing.conf")]) == 1


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("graph = interval\nn = 2\nlambda = 0.25\ntimes = 0.5, 1, 2\n[oracle]\ninit = line:1\n")
    out = tmp_path / "orc"
    assert main(["oracle", "--config", str(conf), "--out", str(out)]) == 0
    rows = _table(tmp_path / "orc.csv")
    assert [r["time"] for r in rows] == ["0.5", "1", "2"]
    assert float(rows[1]["probability"]) == pytest.approx(0.40006230937101942015, abs=1e-12)


def test_build_writes_edge_list(tmp_path):
    assert main(["build", "--graph", "sv_tree", "--i_max", "4", "--out", str(tmp_path / "g")]) == 0
    g = parse_edgelist((tmp_path / "g.edges").read_text())
    assert g == build_sv_tree(4)
    assert _table(tmp_path / "g.csv")[0]["vertices"] == "1988"
    assert main(["build", "--graph", "sv_plus", "--i_max", "4", "--out", str(tmp_path / "p")]) == 0
    assert _table(tmp_path / "p.csv")[0]["vertices"] == "1878"


def test_simulate_trace_and_svg(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--graph", "star", "--n", "8", "--lambda", "0.5", "--trace", "true",
                 "--horizon", "10", "--out", str(out)]) == 0
    trace = (tmp_path / "sim.trace").read_text().splitlines()
    assert trace[0].startswith("# init=")
    for line in trace[1:]:
        parts = line.split()
        assert parts[1] in ("R", "T") and len(parts) == (3 if parts[1] == "R" else 4)
    svg = (tmp_path / "sim.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    n_rec = sum(1 for line in trace[1:] if line.split()[1] == "R")
    assert svg.count('stroke="black"') == n_rec
    assert svg.count("marker-end") == len(trace) - 1 - n_rec


def test_simulate_replay_method(tmp_path):
    args = ["simulate", "--graph", "sv_tree", "--i_max", "2", "--lambda", "0.5", "--method", "replay",
            "--seed", "3", "--out", str(tmp_path / "r")]
    assert main(args) == 0
    row = _table(tmp_path / "r.csv")[0]
    assert row["stop_reason"] in ("extinction", "horizon", "event_budget")


def test_sweep_curves_non_increasing(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--graph", "star", "--n", "50", "--lambdas", "0.1,0.2,0.3,0.4,0.5",
                 "--times", "0.5,1,2,4,8", "--n_runs", "200", "--out", str(out)]) == 0
    rows = _table(tmp_path / "sw.csv")
    by_lam = {}
    for r in rows:
        by_lam.setdefault(r["lambda"], []).append((float(r["t"]), int(r["survivors"])))
    assert len(by_lam) == 5
    for curve in by_lam.values():
        counts = [c for _, c in sorted(curve)]
        assert counts == sorted(counts, reverse=True)


def test_repeat_runs_are_byte_identical(tmp_path, monkeypatch):
    args = ["verify", "star_extinction", "--n_runs", "300", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    monkeypatch.setenv("CONTACT_LAB_THREADS", "3")
    assert main(args + ["--out", str(tmp_path / "c")]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_schedule_and_estimate(tmp_path):
    assert main(["schedule", "--i", "4", "--lambda", "0.25", "--out", str(tmp_path / "s")]) == 0
    row = _table(tmp_path / "s.csv")[0]
    assert row["log_tau"] == "3692" and abs(float(row["L"]) - 35.6) < 0.05
    assert main(["estimate", "--graph", "interval", "--n", "3", "--lambda", "0.25", "--horizon", "1",
                 "--n_runs", "200", "--out", str(tmp_path / "e")]) == 0
    row = _table(tmp_path / "e.csv")[0]
    assert float(row["ci_low"]) <= float(row["p_hat"]) <= float(row["ci_high"])
    assert row["oracle"] != ""


def test_parse_init():
    g = build_sv_tree(2)
    assert parse_init("line:1,0", g, "sv_tree") == tuple(sorted((g.vertex_of(Line(1)), g.vertex_of(Line(0)))))
    assert len(parse_init("all", g, "sv_tree")) == len(g)
    with pytest.raises(ValueError):
        parse_init("hub", g, "sv_tree")
    with pytest.raises(ValueError):
        parse_init("some", g, "sv_tree")
