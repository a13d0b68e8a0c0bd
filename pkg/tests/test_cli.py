import json
import os
import subprocess
import sys

import numpy as np
import pytest

from s2cag import save_graph
from s2cag.cli import main, preset_params
from s2cag.metrics import ari

from conftest import planted_graph


@pytest.fixture
def graph_dir(tmp_path, rng):
    g = planted_graph(rng, 120, 3, 9)
    paths = save_graph(g, tmp_path / "g")
    return g, paths


def argv(paths, *extra, out=None, labels=True):
    a = ["--edges", paths["edges"], "--attrs", paths["attrs"]]
    if labels:
        a += ["--labels", paths["labels"]]
    if out is not None:
        a += ["--out", str(out)]
    return a + list(extra)


def read_labels(path):
    rows = np.loadtxt(path, skiprows=1, dtype=np.int64)
    return rows[:, 1]


def test_cluster_writes_outputs(graph_dir, tmp_path, capsys):
    g, paths = graph_dir
    out = tmp_path / "run"
    assert main(["cluster", *argv(paths, "--k", "3", out=out)]) == 0
    printed = capsys.readouterr().out
    assert "branch=" in printed and "f_naive=" in printed
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == 1 and rep["acc"] > 0.9
    assert rep["cost_estimates"]["f_naive"] > 0
    first = (out / "labels.tsv").read_text().splitlines()[0]
    assert first == "vertex_id\tcluster"
    assert len(read_labels(out / "labels.tsv")) == g.n


def test_msscag_report(graph_dir, tmp_path):
    _, paths = graph_dir
    out = tmp_path / "m"
    assert main(["cluster", *argv(paths, "--method", "msscag", "--k", "3", out=out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["branch"] == "subspace-iteration" and rep["modularity"] is not None
    assert rep["params"]["iters"] == 50


def test_branch_equivalence_and_determinism(graph_dir, tmp_path):
    _, paths = graph_dir
    runs = {}
    for b in ("naive", "integrated"):
        out = tmp_path / b
        assert main(["cluster", *argv(paths, "--k", "3", "--force-branch", b, out=out)]) == 0
        runs[b] = read_labels(out / "labels.tsv")
    assert ari(runs["naive"], runs["integrated"]) >= 0.99
    again = tmp_path / "again"
    main(["cluster", *argv(paths, "--k", "3", "--force-branch", "naive", out=again)])
    assert (again / "labels.tsv").read_bytes() == (tmp_path / "naive" / "labels.tsv").read_bytes()


def test_missing_file_exit_2(graph_dir, tmp_path, capsys):
    _, paths = graph_dir
    missing = str(tmp_path / "absent.mtx")
    code = main(["cluster", "--edges", paths["edges"], "--attrs", missing, "--k", "2",
                 "--out", str(tmp_path / "o")])
    assert code == 2
    assert missing in capsys.readouterr().err


def test_usage_errors(graph_dir, tmp_path):
    _, paths = graph_dir
    out = str(tmp_path / "o")
    assert main(["cluster", *argv(paths, out=out)]) == 2                        # no k
    assert main(["cluster", *argv(paths, "--k", "0", out=out)]) == 2
    assert main(["cluster", *argv(paths, "--preset", "nope", out=out)]) == 2
    assert main(["cluster", *argv(paths, "--k", "2", "--threads", "0", out=out)]) == 2
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_runtime_failure_exit_1(graph_dir, tmp_path):
    _, paths = graph_dir
    assert main(["cluster", *argv(paths, "--k", "500", out=tmp_path / "o")]) == 1


def test_presets():
    p = preset_params("CiteSeer", "sscag")
    assert (p["k"], p["alpha"], p["order"], p["iters"], p["gamma"]) == (6, 0.8, 60, 7, 0.9)
    p = preset_params("citeseer", "msscag")
    assert (p["order"], p["iters"]) == (40, 100)
    p = preset_params("arxiv", "msscag")
    assert (p["k"], p["alpha"], p["iters"]) == (40, 2.5, 50)


def test_preset_with_override(graph_dir, tmp_path):
    _, paths = graph_dir
    out = tmp_path / "p"
    assert main(["cluster", *argv(paths, "--preset", "acm", "--order", "4", out=out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["params"]["alpha"] == 0.8 and rep["params"]["order"] == 4 and rep["k"] == 3


def test_threads_env(graph_dir, tmp_path, monkeypatch):
    _, paths = graph_dir
    monkeypatch.setenv("SSCAG_THREADS", "1")
    assert main(["cluster", *argv(paths, "--k", "3", out=tmp_path / "t")]) == 0
    monkeypatch.setenv("SSCAG_THREADS", "many")
    assert main(["cluster", *argv(paths, "--k", "3", out=tmp_path / "t")]) == 2


def test_diagnose(graph_dir, tmp_path, capsys):
    _, paths = graph_dir
    assert main(["diagnose", *argv(paths, "--alpha", "0.8", "--order", "5", out=tmp_path / "d")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["beta_sum"] <= out["n"] + 1e-8 and out["pi_bound_violations"] == 0
    assert (tmp_path / "d" / "diagnostics.json").exists()


def test_bench(graph_dir, tmp_path, capsys):
    _, paths = graph_dir
    assert main(["bench", *argv(paths, "--k", "3", "--repeats", "5", out=tmp_path / "b")]) == 0
    rep = json.loads((tmp_path / "b" / "bench.json").read_text())
    assert len(rep["samples"]) == 5
    assert set(rep["median_ms"]) >= {"normalize", "nsr", "svd", "rounding", "total", "wall_ms"}
    assert "median ms" in capsys.readouterr().out


def test_convert(tmp_path, rng):
    n = 30
    feats = rng.random((n, 4))
    np.save(tmp_path / "x.npy", feats)
    (tmp_path / "e.csv").write_text("".join(f"{i},{(i + 1) % n}\n" for i in range(n)))
    (tmp_path / "l.tsv").write_text("".join(f"{i}\t{i % 3}\n" for i in range(n)))
    out = tmp_path / "canon"
    code = main(["convert", "--edges", str(tmp_path / "e.csv"), "--attrs", str(tmp_path / "x.npy"),
                 "--labels", str(tmp_path / "l.tsv"), "--out", str(out)])
    assert code == 0
    assert sorted(os.listdir(out)) == ["attrs.mtx", "edges.txt", "labels.tsv"]
    assert main(["cluster", "--edges", str(out / "edges.txt"), "--attrs", str(out / "attrs.mtx"),
                 "--labels", str(out / "labels.tsv"), "--k", "3", "--out", str(tmp_path / "r")]) == 0


def test_module_entry_point(graph_dir, tmp_path):
    _, paths = graph_dir
    res = subprocess.run([sys.executable, "-m", "s2cag", "cluster",
                          *argv(paths, "--k", "3", out=tmp_path / "s")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
