import os

import numpy as np
import pytest

from causalgnn.cli import main, run_benchmark
from causalgnn.graphs import has_cycle_dfs, read_edge_list
from causalgnn.inference import load_edge_probabilities
from causalgnn.synthgen import read_manifest


def _run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small end-to-end run shared by the CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    corpus = str(root / "corpus")
    feats = str(root / "features")
    model = str(root / "model.txt")
    pred = str(root / "pred")
    report = str(root / "report.txt")

    assert _run("synth", "--out", corpus, "--nodes", "5", "--edge-mults", "1",
                "--samples", "120", "--models", "ER", "--graphs-total", "4",
                "--seed", "3") == 0
    assert _run("featurize", "--data", corpus, "--out", feats) == 0
    assert _run("train", "--features", feats, "--truth", corpus,
                "--out", model, "--epochs", "5", "--hidden-dim", "8",
                "--layers", "1", "--seed", "0") == 0
    assert _run("infer", "--model", model, "--features", feats,
                "--method", "mldag", "--out", pred) == 0
    assert _run("eval", "--pred", pred, "--truth", corpus, "--out", report,
                "--manifest", os.path.join(corpus, "manifest.csv")) == 0
    return dict(root=root, corpus=corpus, feats=feats, model=model,
                pred=pred, report=report)


class TestPipeline:
    def test_corpus_artifacts(self, pipeline):
        recs = read_manifest(os.path.join(pipeline["corpus"], "manifest.csv"))
        assert len(recs) == 4
        for rec in recs:
            assert rec["d"] == 5 and rec["n"] == 120

    def test_feature_files_exist(self, pipeline):
        names = sorted(os.listdir(pipeline["feats"]))
        assert names == [f"features_{k:04d}.txt" for k in range(4)]

    def test_training_log_written(self, pipeline):
        log = open(pipeline["model"] + ".log").read().splitlines()
        assert len(log) == 5
        assert all(ln.startswith("epoch=") for ln in log)

    def test_predictions_are_dags(self, pipeline):
        for k in range(4):
            d, edges = read_edge_list(
                os.path.join(pipeline["pred"], f"pred_{k:04d}.txt"))
            assert d == 5
            assert not has_cycle_dfs(d, edges)

    def test_probs_files_valid(self, pipeline):
        p = load_edge_probabilities(
            os.path.join(pipeline["pred"], f"probs_0000.txt"))
        assert p.d == 5
        assert np.allclose(p.table.sum(axis=1), 1.0, atol=1e-9)

    def test_report_contents(self, pipeline):
        text = open(pipeline["report"]).read()
        assert text.count("id=") == 4
        assert "aggregate[all] shd mean=" in text
        assert "aggregate[ER]" in text


class TestSampledInference:
    def test_pg_writes_sample_files(self, pipeline, tmp_path):
        out = str(tmp_path / "pg")
        assert _run("infer", "--model", pipeline["model"],
                    "--features", pipeline["feats"], "--method", "pg",
                    "--samples", "7", "--out", out, "--seed", "1") == 0
        names = [n for n in os.listdir(out) if n.startswith("pred_0000_s")]
        assert len(names) == 7
        report = str(tmp_path / "rep.txt")
        assert _run("eval", "--pred", out, "--truth", pipeline["corpus"],
                    "--out", report) == 0
        line = open(report).read().splitlines()[0]
        assert "samples=7" in line

    def test_pdag_samples_acyclic(self, pipeline, tmp_path):
        out = str(tmp_path / "pdag")
        assert _run("infer", "--model", pipeline["model"],
                    "--features", pipeline["feats"], "--method", "pdag",
                    "--samples", "20", "--out", out, "--seed", "2") == 0
        for name in os.listdir(out):
            if name.startswith("pred_"):
                d, edges = read_edge_list(os.path.join(out, name))
                assert not has_cycle_dfs(d, edges)


class TestConfigFile:
    def test_config_defaults_and_override(self, tmp_path):
        cfg = tmp_path / "conf.txt"
        cfg.write_text("# corpus settings\nnodes = 4\ngraphs-total = 2\n"
                       "samples = 60\nmodels = ER\nedge-mults = 1\n")
        out = str(tmp_path / "corpus")
        assert _run("synth", "--config", str(cfg), "--out", out) == 0
        recs = read_manifest(os.path.join(out, "manifest.csv"))
        assert len(recs) == 2 and recs[0]["d"] == 4

        out2 = str(tmp_path / "corpus2")
        assert _run("synth", "--config", str(cfg), "--out", out2,
                    "--graphs-total", "3") == 0
        assert len(read_manifest(os.path.join(out2, "manifest.csv"))) == 3

    def test_malformed_config(self, tmp_path):
        cfg = tmp_path / "conf.txt"
        cfg.write_text("this line has no equals sign\n")
        assert _run("synth", "--config", str(cfg),
                    "--out", str(tmp_path / "x")) == 1


class TestErrors:
    def test_missing_data_dir(self, tmp_path):
        assert _run("featurize", "--data", str(tmp_path / "nope"),
                    "--out", str(tmp_path / "o")) == 2

    def test_logistic_prior_requires_corpus(self, tmp_path):
        assert _run("featurize", "--data", str(tmp_path),
                    "--out", str(tmp_path / "o"), "--prior", "logistic") == 2

    def test_bad_model_file(self, tmp_path):
        bad = tmp_path / "model.txt"
        bad.write_text("garbage\n")
        assert _run("infer", "--model", str(bad), "--features", str(tmp_path),
                    "--method", "mlg", "--out", str(tmp_path / "o")) == 1


class TestBenchmark:
    def test_tiny_benchmark_deterministic(self, tmp_path):
        # byte-for-byte reproducibility oracle: two runs with the same seed
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        run_benchmark(a, seed=5, preset="tiny", n_infer_samples=10)
        run_benchmark(b, seed=5, preset="tiny", n_infer_samples=10)

        def _snapshot(root):
            out = {}
            for dirpath, _, names in os.walk(root):
                for name in names:
                    p = os.path.join(dirpath, name)
                    out[os.path.relpath(p, root)] = open(p, "rb").read()
            return out

        sa, sb = _snapshot(a), _snapshot(b)
        assert sa.keys() == sb.keys()
        assert all(sa[k] == sb[k] for k in sa)
        assert "summary.txt" in sa
        text = sa["summary.txt"].decode()
        for method in ("GNN-PG", "GNN-MLG", "GNN-PDAG", "GNN-MLDAG"):
            assert method in text
