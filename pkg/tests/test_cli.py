import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dsrl import cli
from dsrl.data_eval import load_split
from dsrl.pipeline import evaluate, load_checkpoint
from dsrl.pipeline.train import DetectionScores


def write_config(tmp_path, **sections):
    base = {"model": {"d": 8, "batch": 4}, "synth": {"num_videos": 20, "t_min": 8, "t_max": 12}}
    for k, v in sections.items():
        base.setdefault(k, {}).update(v)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base))
    return str(path)


@pytest.fixture
def run_dir(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["gen", "--config", cfg, "--out", str(out), "--seed", "1"]) == 0
    return cfg, out


@pytest.fixture
def trained(run_dir):
    cfg, out = run_dir
    assert cli.main(["train", "--config", cfg, "--out", str(out), "--seed", "1", "--epochs", "1"]) == 0
    return cfg, out


class TestGen:
    def test_default_split_fractions(self, run_dir, capsys):
        _, out = run_dir
        entries = json.loads((out / "manifest.json").read_text())
        counts = {s: sum(e["split"] == s for e in entries) for s in ("train", "val", "test")}
        assert counts == {"train": 14, "val": 3, "test": 3}
        assert all(not e["path"].startswith("/") for e in entries)
        assert len(list((out / "features").glob("*.dsrf"))) == 20

    def test_prints_counts(self, tmp_path, capsys):
        cli.main(["gen", "--config", write_config(tmp_path), "--out", str(tmp_path / "o")])
        text = capsys.readouterr().out
        assert "generated 20 videos" in text and "train=14 val=3 test=3" in text

    def test_same_seed_same_manifest(self, tmp_path):
        cfg = write_config(tmp_path)
        for name in ("a", "b"):
            assert cli.main(["gen", "--config", cfg, "--seed", "7", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()
        for f in (tmp_path / "a/features").iterdir():
            assert f.read_bytes() == (tmp_path / "b/features" / f.name).read_bytes()

    def test_zero_videos_is_validation_error(self, tmp_path):
        assert cli.main(["gen", "--videos", "0", "--out", str(tmp_path)]) == 1

    def test_flags_override_file(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli.main(["gen", "--config", cfg, "--videos", "10", "--out", str(tmp_path / "o")]) == 0
        assert len(json.loads((tmp_path / "o/manifest.json").read_text())) == 10

    @pytest.mark.parametrize(
        "payload",
        ['{"modle": {}}', '{"model": {"depth": 2}}', "[1, 2]", "{not json", '{"split": {"train": 0.9, "val": 0.2}}'],
    )
    def test_bad_config(self, tmp_path, payload):
        p = tmp_path / "bad.json"
        p.write_text(payload)
        assert cli.main(["gen", "--config", str(p), "--out", str(tmp_path)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["gen", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


class TestTrain:
    def test_one_epoch_one_log_entry(self, trained):
        _, out = trained
        log = json.loads((out / "train_log.json").read_text())
        assert len(log["epochs"]) == 1
        assert log["config"]["d"] == 8
        assert (out / "checkpoint.dsrk").exists()

    def test_deterministic_bytes(self, run_dir, tmp_path):
        cfg, out = run_dir
        blobs = []
        for name in ("x", "y"):
            ck, lg = tmp_path / f"{name}.dsrk", tmp_path / f"{name}.json"
            paths = write_config(tmp_path, paths={"log": str(lg)})
            args = ["train", "--config", paths, "--out", str(out), "--seed", "1", "--epochs", "1", "--checkpoint", str(ck)]
            assert cli.main(args) == 0
            blobs.append((ck.read_bytes(), lg.read_bytes()))
        assert blobs[0] == blobs[1]

    @pytest.mark.parametrize("ablate, hyp, dsi", [("euclidean-only", False, False), ("no-dsi", True, False)])
    def test_ablations(self, run_dir, ablate, hyp, dsi):
        cfg, out = run_dir
        assert cli.main(["train", "--config", cfg, "--out", str(out), "--epochs", "1", "--ablate", ablate]) == 0
        m = load_checkpoint(out / "checkpoint.dsrk")
        assert m.cfg.ablate == ablate
        assert any(n.startswith("hyp.") for n in m.params) is hyp
        assert any(n.startswith("dsi.") for n in m.params) is dsi

    def test_bad_ablation_choice(self, run_dir):
        cfg, out = run_dir
        assert cli.main(["train", "--config", cfg, "--out", str(out), "--ablate", "everything"]) == 1

    def test_missing_manifest_is_runtime_error(self, tmp_path):
        assert cli.main(["train", "--out", str(tmp_path / "empty")]) == 2


class TestEval:
    def test_outputs(self, trained):
        cfg, out = trained
        assert cli.main(["eval", "--config", cfg, "--out", str(out)]) == 0
        test = load_split(out / "manifest.json", "test")
        for f in test:
            with open(out / "curves" / f"{f.id}.csv") as fh:
                rows = list(csv.reader(fh))
            assert rows[0] == ["snippet", "score", "label"]
            assert len(rows) - 1 == f.T
            assert [int(r[2]) for r in rows[1:]] == f.frame_labels.tolist()
        metrics = json.loads((out / "metrics.json").read_text())
        ref = evaluate(test, load_checkpoint(out / "checkpoint.dsrk"))
        assert metrics["ap"] == ref["ap"] and metrics["auc"] == ref["auc"]
        assert metrics["split"] == "test"

    def test_perfect_oracle_stub(self, trained, monkeypatch):
        cfg, out = trained

        def oracle(videos, model, workers=None):
            ordered = sorted(videos, key=lambda f: f.id)
            return [(f, DetectionScores(f.frame_labels.astype(float), float(f.video_label), 1)) for f in ordered]

        monkeypatch.setattr(cli, "score_videos", oracle)
        assert cli.main(["eval", "--config", cfg, "--out", str(out), "--split", "train"]) == 0
        assert json.loads((out / "metrics.json").read_text())["ap"] == 1.0

    def test_dimension_mismatch(self, trained, tmp_path):
        cfg, out = trained
        other = tmp_path / "other"
        cfg2 = write_config(tmp_path, synth={"d_v": 10})
        assert cli.main(["gen", "--config", cfg2, "--out", str(other)]) == 0
        args = ["eval", "--out", str(other), "--checkpoint", str(out / "checkpoint.dsrk")]
        assert cli.main(args) == 2

    def test_corrupt_checkpoint(self, trained):
        cfg, out = trained
        ck = out / "checkpoint.dsrk"
        ck.write_bytes(ck.read_bytes()[:-7])
        assert cli.main(["eval", "--config", cfg, "--out", str(out)]) == 2

    def test_thread_cap_does_not_change_metrics(self, trained, monkeypatch):
        cfg, out = trained
        texts = []
        for n in ("1", "3"):
            monkeypatch.setenv("DSRL_THREADS", n)
            assert cli.main(["eval", "--config", cfg, "--out", str(out)]) == 0
            texts.append((out / "metrics.json").read_text())
        assert texts[0] == texts[1]


class TestSelftest:
    def test_quick_passes(self, capsys):
        assert cli.main(["selftest", "--quick"]) == 0
        out = capsys.readouterr().out
        assert "suites passed" in out and "worst=" in out and "checks=" in out

    def test_injected_fault_exits_3(self, capsys):
        assert cli.main(["selftest", "--quick", "--inject-fault", "exp_map"]) == 3
        out = capsys.readouterr().out
        assert "[FAIL] membership" in out and "exp_map" in out

    def test_unknown_fault_is_validation(self):
        assert cli.main(["selftest", "--inject-fault", "graphs"]) == 1


class TestEntryPoints:
    def test_usage_errors(self):
        assert cli.main([]) == 1
        assert cli.main(["--help"]) == 0

    def test_module_entry(self):
        res = subprocess.run([sys.executable, "-m", "dsrl", "gen", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "--videos" in res.stdout

    def test_split_counts(self):
        assert cli.split_counts(200, cli.DEFAULT_SPLIT) == (140, 30, 30)
        assert sum(cli.split_counts(7, cli.DEFAULT_SPLIT)) == 7
        assert np.isclose(cli.DEFAULT_SPLIT["train"], 0.7)
