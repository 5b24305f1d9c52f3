import csv

import pytest
from click.testing import CliRunner

from nnkrel.cli import main, read_config_file


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    res = CliRunner().invoke(main, ["gen-synthetic", "--classes", "3", "--per-class", "30", "--dim", "6", "--seed", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    return out


def files(d):
    return ["--embeddings", str(d / "train.emb"), "--labels", str(d / "train.labels")]


def test_gen_synthetic_csv(tmp_path):
    res = CliRunner().invoke(main, ["gen-synthetic", "--classes", "2", "--per-class", "4", "--format", "csv", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    rows = (tmp_path / "train.csv").read_text().splitlines()
    assert len(rows) == 4 and len(rows[0].split(",")) == 33


def test_inject_noise(data_dir, tmp_path):
    out, mask = tmp_path / "noisy.labels", tmp_path / "mask.csv"
    res = CliRunner().invoke(main, ["inject-noise", *files(data_dir), "--rate", "0.4", "--seed", "1", "--out", str(out), "--mask-out", str(mask)])
    assert res.exit_code == 0, res.output
    assert "flipped 18 of 45" in res.output
    flags = [r["flipped"] for r in csv.DictReader(open(mask))]
    assert flags.count("1") == 18


def test_inject_asymmetric(data_dir, tmp_path):
    out = tmp_path / "noisy.labels"
    res = CliRunner().invoke(main, ["inject-noise", *files(data_dir), "--noise", "asym", "--mapping", "0:1", "--rate", "0.2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "flipped 3 of 45" in res.output


def test_score_and_classify(data_dir, tmp_path):
    scores, preds = tmp_path / "s.csv", tmp_path / "p.csv"
    r = CliRunner()
    res = r.invoke(main, ["score", *files(data_dir), "--method", "nnk_weights", "--k-init", "10", "--out", str(scores)])
    assert res.exit_code == 0, res.output
    assert scores.read_text().splitlines()[0] == "id,score,method"
    res = r.invoke(main, ["classify", *files(data_dir), "--test-embeddings", str(data_dir / "test.emb"),
                          "--test-labels", str(data_dir / "test.labels"), "--scores", str(scores),
                          "--voting", "uw", "--k-init", "10", "--out", str(preds)])
    assert res.exit_code == 0, res.output
    assert "accuracy 1.0000" in res.output
    res = r.invoke(main, ["classify", *files(data_dir), "--test-embeddings", str(data_dir / "test.emb"),
                          "--test-labels", str(data_dir / "test.labels"), "--knn-k", "5", "--out", str(preds)])
    assert "knn_baseline" in res.output and res.exit_code == 0


def test_bench_with_config_file(data_dir, tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        f"# tiny sweep\nembeddings={data_dir / 'train.emb'}\nlabels={data_dir / 'train.labels'}\n"
        f"test-embeddings={data_dir / 'test.emb'}\ntest_labels={data_dir / 'test.labels'}\n"
        "runs=1\nk-init=10\nknn-k=10\nrates=0,0.4\nmethods=knn,knn_baseline\nformats=csv\n"
    )
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["bench", "--config", str(cfg), "--voting", "w", "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(open(out / "report.csv")))
    assert [(r["method"], r["voting"], r["rate"]) for r in rows] == [
        ("knn", "weighted", "0"), ("knn_baseline", "none", "0"), ("knn", "weighted", "0.4"), ("knn_baseline", "none", "0.4")
    ]


def test_bench_bad_format(data_dir, tmp_path):
    res = CliRunner().invoke(main, ["bench", *files(data_dir), "--test-embeddings", str(data_dir / "test.emb"),
                                    "--test-labels", str(data_dir / "test.labels"), "--formats", "pdf", "--out", str(tmp_path)])
    assert res.exit_code != 0


def test_report_rerender(data_dir, tmp_path):
    out = tmp_path / "b"
    r = CliRunner()
    res = r.invoke(main, ["bench", *files(data_dir), "--test-embeddings", str(data_dir / "test.emb"),
                          "--test-labels", str(data_dir / "test.labels"), "--runs", "1", "--k-init", "10",
                          "--knn-k", "10", "--rates", "0", "--methods", "nnk_weights", "--formats", "json", "--out", str(out)])
    assert res.exit_code == 0, res.output
    res = r.invoke(main, ["report", "--from", str(out / "report.json"), "--out", str(tmp_path / "r")])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "r" / "report.csv").exists()
    assert (tmp_path / "r" / "accuracy_symmetric.svg").exists()


def test_load_error_is_reported(tmp_path):
    emb = tmp_path / "x.emb"
    emb.write_bytes(b"BAD!")
    lab = tmp_path / "x.labels"
    lab.write_text("0\n")
    res = CliRunner().invoke(main, ["score", "--embeddings", str(emb), "--labels", str(lab), "--method", "knn", "--out", str(tmp_path / "o")])
    assert res.exit_code != 0 and "Error" in res.output


def test_config_file_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("k-init = 20\n# comment\nformat=csv  # trailing\n\n")
    assert read_config_file(p) == {"k_init": "20", "fmt": "csv"}
