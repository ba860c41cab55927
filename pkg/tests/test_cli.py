import json

import numpy as np
import pytest

from fermentor import petri
from fermentor.cli import main
from fermentor.config import ConfigError, from_environment, merge, parse_config_text
from fermentor.data import ground_truth, read_samples, write_samples

FAST_ML = ["--arch", "4,16,1", "--epochs", "200", "--target", "100"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_exit_codes(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "sequential.net")
    assert code == 0 and "soundness (direct): sound" in out
    code, out, _ = run(capsys, "verify", "examples/broken_xor.net")
    assert code == 1 and "clause (2)" in out and '"p2": 1' in out
    assert run(capsys, "verify", tmp_path / "missing.net")[0] == 3
    bad = tmp_path / "bad.net"
    bad.write_text("place a\nplace a\n")
    code, _, err = run(capsys, "verify", bad)
    assert code == 3 and ":2:" in err
    assert run(capsys, "verify", "sequential.net", "--budget", "1")[0] == 2
    assert run(capsys, "verify")[0] == 3  # argparse usage error


def test_verify_json_and_dot(capsys, tmp_path):
    dot = tmp_path / "g.dot"
    code, out, _ = run(capsys, "verify", "parallel.net", "--report", "json", "--no-timing", "--dot", dot)
    rep = json.loads(out)
    assert code == 0 and rep["sound"]["status"] == "sound" and rep["theorem1"]["status"] == "holds"
    assert rep["config"]["timing"] is False and "wall_time" not in rep["stats"]
    assert dot.read_text().startswith('digraph "')


def test_verify_overrides(capsys):
    code, out, _ = run(capsys, "verify", "ssf.net", "--rewrite-limit", "2", "--budget", "50")
    assert code == 2
    assert run(capsys, "verify", "sequential.net", "--arc-weight", "nope")[0] == 3
    assert run(capsys, "verify", "sequential.net", "--arc-weight", "x:y=2")[0] == 3


@pytest.mark.slow
def test_verify_ssf(capsys):
    code, out, _ = run(capsys, "verify", "examples/ssf.net", "--restore-on-reset", "--report", "json", "--no-timing")
    rep = json.loads(out)
    assert code == 0 and rep["theorem1"]["status"] == "holds"
    assert rep["stats"]["workflow_nodes"] == 36506


def test_reach_counts_and_compress(capsys, tmp_path):
    chain = tmp_path / "chain.net"
    chain.write_text("place start init 1\nplace end\ntrans t\narc start -> t\narc t -> end\n")
    code, out, _ = run(capsys, "reach", chain)
    assert code == 0 and out.rstrip().endswith("// 2 nodes, 1 edges")
    star = tmp_path / "star.net"
    star.write_text("place p init 3\nplace q\ntrans t\narc p -> t\narc t -> q\n")
    dot = tmp_path / "s.dot"
    code, out, _ = run(capsys, "reach", star, "--compress", "--dot", dot)
    assert "4 nodes, 3 edges; compressed: 2 nodes, 1 edges" in out
    assert 'label="t*"' in dot.read_text()


def test_synth(capsys, tmp_path):
    p = tmp_path / "d.csv"
    assert run(capsys, "synth", "--n", 34, "--seed", 5, "--out", p)[0] == 0
    X = read_samples(p)
    assert X.shape == (34, 5)
    q = tmp_path / "q.csv"
    run(capsys, "synth", "--n", 34, "--seed", 5, "--out", q)
    assert p.read_bytes() == q.read_bytes()
    run(capsys, "synth", "--n", 10, "--noise", 0, "--out", q)
    X = read_samples(q)
    assert np.allclose(ground_truth(*X[:, :4].T), X[:, 4], atol=1e-12)
    assert run(capsys, "synth", "--n", 0)[0] == 3


def test_seed_from_environment(capsys, tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("FERMENTOR_SEED", "9")
    run(capsys, "synth", "--n", 5, "--out", a)
    monkeypatch.delenv("FERMENTOR_SEED")
    run(capsys, "synth", "--n", 5, "--seed", 9, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_config_layers(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nseed = 3\ngan.threshold = 0.2\nfcnn.max_epochs = 7\n")
    env = {"FERMENTOR_SEED": "4", "FERMENTOR_GAN__THRESHOLD": "0.3"}
    cfg = merge(f, {"gan.threshold": 0.4, "fcnn.arch": None}, environ=env)
    assert (cfg["seed"], cfg["gan.threshold"], cfg["fcnn.max_epochs"]) == (4, 0.4, 7)
    assert from_environment({"FERMENTOR_TIMING": "off"}) == {"timing": False}
    for bad in ("seed 3", "nope = 1", "seed = x"):
        with pytest.raises(ConfigError):
            parse_config_text(bad)


def test_config_file_errors_exit_3(capsys, tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("unknown = 1\n")
    assert run(capsys, "synth", "--config", f)[0] == 3
    assert run(capsys, "synth", "--config", tmp_path / "none.cfg")[0] == 3


def test_augment_command(capsys, tmp_path):
    d, g = tmp_path / "d.csv", tmp_path / "g.csv"
    run(capsys, "synth", "--n", 34, "--seed", 1, "--out", d)
    code, _, err = run(capsys, "augment", d, "--target", 150, "--epochs", 50, "--out", g, "--emit-provenance")
    assert code == 0 and "accepted 150" in err
    lines = g.read_text().splitlines()
    assert lines[0].endswith("round,matched_real,mse") and len(lines) == 151
    assert all(float(line.split(",")[-1]) <= 0.15 for line in lines[1:])
    code, _, err = run(capsys, "augment", d, "--threshold", 1, "--target", 50, "--epochs", 5, "--out", g)
    assert "round 0: drew 64, kept 64 (acceptance 1.000)" in err
    code, _, err = run(capsys, "augment", d, "--threshold", 1e-9, "--target", 20, "--epochs", 2,
                       "--rounds", 1, "--out", g)
    assert code == 0 and "warning:" in err
    assert run(capsys, "augment", d, "--threshold", 2, "--out", g)[0] == 3


def test_augment_schema_mismatch(capsys, tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n")
    assert run(capsys, "augment", f)[0] == 3


def test_train_predict_evaluate(capsys, tmp_path):
    d, m = tmp_path / "lin.csv", tmp_path / "m.txt"
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(39, 44, 60), rng.uniform(44, 47, 60),
                         rng.uniform(33, 36, 60), rng.uniform(1.3, 1.8, 60)])
    y = 20 + 0.4 * X[:, 0] + 0.1 * X[:, 1] + 0.2 * X[:, 2] - 3 * X[:, 3]
    write_samples(d, np.column_stack([X, y]))
    code, out, _ = run(capsys, "train", d, "--model", m, "--arch", "4,64,1", "--epochs", 3000,
                       "--lr", 0.2, "--batch-size", 60, "--loss-threshold", 1e-9,
                       "--no-batch-norm", "--output-activation", "identity")
    assert code == 0 and m.exists()
    code, out, _ = run(capsys, "predict", "--model", m, "--input", "41.5,45.5,34.5,1.55")
    truth = 20 + 0.4 * 41.5 + 0.1 * 45.5 + 0.2 * 34.5 - 3 * 1.55
    assert abs(float(out) - truth) < 0.01 * truth
    code, out, _ = run(capsys, "evaluate", d, "--model", m, "--report", "json")
    assert json.loads(out)["mse"] < 1e-3
    q = tmp_path / "q.csv"
    q.write_text("cellar_temp,humidity,starch,acidity\n41,45,35,1.5\n42,46,34,1.6\n")
    code, out, _ = run(capsys, "predict", "--model", m, "--data", q)
    assert out.splitlines()[0].endswith(",alcohol") and len(out.splitlines()) == 3
    assert run(capsys, "predict", "--model", m, "--input", "1,2,3")[0] == 3
    assert run(capsys, "predict", "--model", tmp_path / "none.txt", "--input", "1,2,3,4")[0] == 3
    assert run(capsys, "predict", "--model", d, "--input", "1,2,3,4")[0] == 3


def test_compare_and_bench(capsys, tmp_path):
    d = tmp_path / "d.csv"
    run(capsys, "synth", "--n", 59, "--seed", 2, "--out", d)
    js, plot = tmp_path / "r.json", tmp_path / "p.csv"
    code, out, _ = run(capsys, "compare", d, *FAST_ML, "--json", js, "--plot-csv", plot)
    assert code == 0 and "FCNN" in out and "MLR" in out and "GAN-prediction" in out
    rep = json.loads(js.read_text())
    assert rep["n_train"] == 34 and rep["n_test"] == 25 and rep["config"]["seed"] == 0
    assert len(plot.read_text().splitlines()) == 5
    bench = tmp_path / "b.csv"
    code, _, _ = run(capsys, "bench", d, *FAST_ML, "--out", bench)
    rows = bench.read_text().splitlines()
    assert code == 0 and [r.split(",")[0] for r in rows[1:]] == ["34", "429", "750", "1077"]
    assert all(float(c) > 0 for r in rows[1:] for c in r.split(",")[1::2])
    assert run(capsys, "compare", "--train", d)[0] == 3
    assert run(capsys, "compare")[0] == 3


def test_bundled_net_lookup_matches_file(capsys):
    code, out, _ = run(capsys, "reach", "whatever/dir/parallel.net")
    g = petri.explore(petri.load_net(petri.bundled_net_path("parallel.net")))
    assert code == 0 and f"// {len(g.nodes)} nodes, {len(g.edges)} edges" in out
