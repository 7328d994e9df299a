import csv
import io
import json

import pytest

from grcsim.cli import main
from grcsim.graph import load_graph


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.txt"
    assert main(["gen", "--kind", "gnp-connected", "--n", "10", "--weights", "uniform", "--graph-seed", "2",
                 "--out", str(path)]) == 0
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_gen_writes_loadable_graph(graph_file):
    g = load_graph(open(graph_file).read())
    assert g.n == 10 and g.weights is not None


def test_gen_oracle_csv(capsys):
    code, out = run(capsys, "gen", "--kind", "path", "--n", "3", "--oracle")
    assert code == 0 and out.splitlines()[0] == "u,v,distance"


def test_run_mst_json(capsys, graph_file):
    code, out = run(capsys, "run", "--algo", "mst", "--graph", graph_file, "--seed", "3")
    data = json.loads(out)
    assert code == 0 and data["optimal"] and len(data["tree"]) == 9


def test_run_spanner_json(capsys, graph_file):
    code, out = run(capsys, "run", "--algo", "spanner", "--graph", graph_file, "--kappa", "2", "--low-memory")
    data = json.loads(out)
    assert code == 0 and data["stretch"] <= 3 and len(data["delta"]) == 10


def test_run_batch_csv(capsys, graph_file):
    code, out = run(capsys, "run", "--algo", "mst", "--graph", graph_file, "--seeds", "3", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["seed"] for r in rows] == ["0", "1", "2"]


def test_run_config_reports_schema_errors(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"algo": "mst", "graph": {"kind": "path", "n": 4}, "seeds": []}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "seeds: no seeds" in capsys.readouterr().err


def test_run_config_writes_outputs(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("GRCSIM_OUT_DIR", str(tmp_path / "out"))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "tiny", "algo": "mst",
                               "graph": {"kind": "cycle", "n": 5, "weights": "uniform"}, "seeds": 2}))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "tiny.csv").exists()


def test_verify_exit_codes(capsys, graph_file):
    code, out = run(capsys, "verify", "--task", "connectivity", "--graph", graph_file, "--oracle")
    assert code == 0 and json.loads(out)["oracle"] is True
    code, out = run(capsys, "verify", "--task", "connected-spanning", "--graph", graph_file, "--subgraph", "0")
    assert code == 1 and json.loads(out)["decision"] is False


def test_verify_st_options(capsys):
    code, _ = run(capsys, "verify", "--task", "st-connectivity", "--kind", "path", "--n", "4",
                  "--subgraph", "0,1,2", "--s", "0", "--t", "3")
    assert code == 0
    code, _ = run(capsys, "verify", "--task", "e-cycle", "--kind", "cycle", "--n", "4",
                  "--subgraph", "0,1,2,3", "--edge", "2")
    assert code == 0


def test_cutsim_csv(capsys, graph_file):
    code, out = run(capsys, "cutsim", "--graph", graph_file, "--rounds", "6")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "round,bits,bound,q" and len(lines) == 7


def test_cutsim_cut_file(capsys, graph_file, tmp_path):
    side = tmp_path / "side.txt"
    side.write_text("0 1 2\n")
    code, out = run(capsys, "cutsim", "--graph", graph_file, "--cut", str(side), "--rounds", "3",
                    "--algo", "spanner", "--kappa", "2")
    assert code == 0 and len(out.splitlines()) == 4


def test_fit_from_batch(capsys, tmp_path):
    path = tmp_path / "b.csv"
    for n in (8, 16):
        main(["run", "--algo", "mst", "--kind", "cycle", "--n", str(n), "--weights", "uniform", "--seeds", "2",
              "--format", "csv", "--out", str(tmp_path / f"b{n}.csv")])
    body = (tmp_path / "b8.csv").read_text() + "".join((tmp_path / "b16.csv").read_text().splitlines(True)[1:])
    path.write_text(body)
    capsys.readouterr()
    code, out = run(capsys, "fit", str(path), "--model", "log")
    assert code == 0 and json.loads(out)["points"] == 2
    single = tmp_path / "b8.csv"
    assert main(["fit", str(single)]) == 2


def test_trace_dump(capsys, graph_file):
    code, out = run(capsys, "trace", "--graph", graph_file, "--rounds", "2")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 20 and lines[0].startswith("t=0 v=0 part=")


@pytest.mark.parametrize("name", ["counting", "leader", "orient", "outgoing"])
def test_prim_subcommands(capsys, name):
    code, out = run(capsys, "prim", name, "--kind", "cycle", "--n", "6")
    assert code == 0 and json.loads(out)["primitive"] == name


def test_preset_list_and_run(capsys, tmp_path):
    code, out = run(capsys, "preset", "list")
    assert code == 0 and "determinism" in out.split()
    code, out = run(capsys, "preset", "smoke", "--out", str(tmp_path))
    assert code == 0 and out.startswith("PASS")
    assert main(["preset", "missing"]) == 2


def test_missing_graph_source_exits():
    with pytest.raises(SystemExit):
        main(["run", "--algo", "mst"])


def test_bad_graph_file_is_an_error(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1 1\n0 0\n")
    assert main(["verify", "--task", "connectivity", "--graph", str(bad)]) == 2
    assert "self-loop at line 2" in capsys.readouterr().err
