import json
from pathlib import Path

import pytest

from dccf.cli import main
from dccf.data import load_interactions, read_split


def run(*argv):
    return main([str(a) for a in argv])


TINY = ["--users", 25, "--items", 40, "--train-per-user", 5, "--test-per-user", 2,
        "--feature-dim", 5, "--latent-dim", 5]
FAST_TRAIN = ["--epochs", 2, "--exposure-epochs", 2, "--n-samples", 3, "--dim", 8,
              "--mlp-hidden", "8", "--exposure-dim", 8]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "sd"
    assert run("synth", "--preset", "sd1", *TINY, "--seed", 3, "--out", out) == 0
    return out


class TestSynth:
    def test_outputs_and_counts(self, dataset):
        assert (dataset / "manifest.json").exists()
        train_rows = (dataset / "train.tsv").read_text().splitlines()
        test_rows = (dataset / "test.tsv").read_text().splitlines()
        assert len(train_rows) == 25 * 5
        assert len(test_rows) == 25 * 2

    def test_manifest_records_config(self, dataset, tmp_path):
        manifest = json.loads((dataset / "manifest.json").read_text())
        assert manifest["config"]["direct_effect_scale"] == 0.0
        out2 = tmp_path / "sd2"
        assert run("synth", "--preset", "sd2", *TINY, "--seed", 3, "--out", out2) == 0
        manifest2 = json.loads((out2 / "manifest.json").read_text())
        assert manifest2["config"]["direct_effect_scale"] == 0.1

    def test_rerun_is_byte_identical(self, dataset, tmp_path):
        out2 = tmp_path / "again"
        assert run("synth", "--preset", "sd1", *TINY, "--seed", 3, "--out", out2) == 0
        for name in ("interactions.tsv", "features.tsv", "train.tsv", "test.tsv",
                     "manifest.json"):
            assert (dataset / name).read_bytes() == (out2 / name).read_bytes(), name


class TestSplit:
    def test_rand_split_files(self, dataset, tmp_path):
        out = tmp_path / "rand"
        assert run("split", "--interactions", dataset / "interactions.tsv",
                   "--strategy", "rand", "--seed", 1, "--out", out) == 0
        table = load_interactions(dataset / "interactions.tsv", 4.0)
        split = read_split(table, out / "train.tsv", out / "validation.tsv",
                           out / "test.tsv")
        buckets = split.train + split.validation + split.test
        assert len(set(buckets)) == len(buckets)  # disjoint

    def test_skew_split_records_cap(self, dataset, tmp_path):
        out = tmp_path / "skew"
        assert run("split", "--interactions", dataset / "interactions.tsv",
                   "--strategy", "skew", "--cap", 0.9, "--seed", 1, "--out", out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["params"]["cap"] == 0.9
        assert manifest["strategy"] == "skew"

    def test_bad_strategy_is_usage_error(self, dataset, tmp_path):
        rc = run("split", "--interactions", dataset / "interactions.tsv",
                 "--strategy", "sideways", "--out", tmp_path / "x")
        assert rc == 1

    def test_missing_file_is_data_error(self, tmp_path):
        rc = run("split", "--interactions", tmp_path / "nope.tsv",
                 "--strategy", "rand", "--out", tmp_path / "x")
        assert rc == 2


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "dccf"
    rc = run("train", "--data-dir", dataset, "--model", "dccf", "--exposure",
             "unbias", *FAST_TRAIN, "--seed", 5, "--out", out)
    assert rc == 0
    return out


class TestTrain:
    def test_outputs(self, trained):
        assert (trained / "model.ckpt").exists()
        manifest = json.loads((trained / "manifest.json").read_text())
        assert manifest["model"]["name"] == "dccf"
        assert manifest["exposure"]["variant"] == "unbias"
        losses = (trained / "losses.ndjson").read_text().splitlines()
        assert len(losses) == 2
        assert {"epoch", "mean_loss", "wall_time_s"} <= set(json.loads(losses[0]))

    def test_replay_reproduces_checkpoint(self, trained, tmp_path):
        out2 = tmp_path / "replayed"
        assert run("train", "--replay", trained / "manifest.json", "--out", out2) == 0
        assert (trained / "model.ckpt").read_bytes() == (out2 / "model.ckpt").read_bytes()
        assert (trained / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()

    def test_mf_needs_no_features(self, dataset, tmp_path):
        out = tmp_path / "mf"
        rc = run("train", "--interactions", dataset / "interactions.tsv",
                 "--split-dir", dataset, "--model", "mf", "--epochs", 2,
                 "--dim", 8, "--seed", 5, "--out", out)
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert "exposure" not in manifest

    def test_missing_data_args_is_usage_error(self, tmp_path):
        assert run("train", "--model", "mf", "--out", tmp_path / "x") == 1

    def test_ablation_variants_recorded(self, dataset, tmp_path):
        out = tmp_path / "nd"
        rc = run("train", "--data-dir", dataset, "--model", "dccf_nd",
                 *FAST_TRAIN, "--seed", 5, "--out", out)
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["model"]["variant"] == "nd"


class TestEval:
    def test_report_and_determinism(self, trained, tmp_path):
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        for out in (out1, out2):
            rc = run("eval", "--run", trained, "--k", 5, "--negatives", 20,
                     "--seed", 11, "--out", out)
            assert rc == 0
        assert (out1 / "report.ndjson").read_bytes() == (out2 / "report.ndjson").read_bytes()
        record = json.loads((out1 / "report.ndjson").read_text())
        assert {"ndcg", "recall", "precision"} <= set(record)
        assert record["split_strategy"] == "synthetic"
        assert record["k"] == 5 and record["n_negatives"] == 20

    def test_eval_replay(self, trained, tmp_path):
        out1 = tmp_path / "e1"
        assert run("eval", "--run", trained, "--k", 3, "--negatives", 15,
                   "--seed", 2, "--per-user", "--out", out1) == 0
        out2 = tmp_path / "replay"
        assert run("eval", "--replay", out1 / "manifest.json", "--out", out2) == 0
        assert (out1 / "report.ndjson").read_bytes() == (out2 / "report.ndjson").read_bytes()
        assert (out1 / "per_user.tsv").read_bytes() == (out2 / "per_user.tsv").read_bytes()

    def test_corrupted_checkpoint_detected(self, trained, tmp_path):
        import shutil

        clone = tmp_path / "clone"
        shutil.copytree(trained, clone)
        blob = bytearray((clone / "model.ckpt").read_bytes())
        blob[-1] ^= 0xFF
        (clone / "model.ckpt").write_bytes(bytes(blob))
        rc = run("eval", "--run", clone, "--k", 3, "--negatives", 10,
                 "--out", tmp_path / "x")
        assert rc == 2


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, dataset, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs = 2\nexposure-epochs = 1\ndim = 8\nmlp-hidden = 8\n"
                       "n-samples = 4\nexposure-dim = 8\n")
        out = tmp_path / "cfgrun"
        rc = run("train", "--data-dir", dataset, "--model", "dccf", "--config", cfg,
                 "--n-samples", 2, "--seed", 5, "--out", out)
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["training"]["epochs"] == 2       # from config file
        assert manifest["model"]["n_sampled_items"] == 2  # flag wins

    def test_malformed_config_is_usage_error(self, dataset, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this is not a key value line\n")
        rc = run("train", "--data-dir", dataset, "--model", "mf", "--config", cfg,
                 "--out", tmp_path / "x")
        assert rc == 1


class TestGrid:
    def test_sweep_and_resume(self, dataset, tmp_path):
        out = tmp_path / "grid"
        args = ("grid", "--data-dir", dataset, "--models", "dccf,mf",
                "--exposures", "uniform,random", "--n-values", "0,2",
                "--seeds", "1", "--epochs", 1, "--exposure-epochs", 1,
                "--dim", 8, "--mlp-hidden", "8", "--exposure-dim", 8,
                "--negatives", 10, "--out", out)
        assert run(*args) == 0
        rows = [json.loads(line) for line in
                (out / "grid.ndjson").read_text().splitlines()]
        assert len(rows) == 5  # 2 exposures x 2 n-values + mf
        cells = {r["cell"] for r in rows}
        assert "mf-seed1" in cells
        first = (out / "grid.ndjson").read_bytes()
        # resume: all cells complete, so the rerun only re-reads reports
        assert run(*args) == 0
        assert (out / "grid.ndjson").read_bytes() == first
