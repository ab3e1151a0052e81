import csv

import numpy as np
import pytest

from triforge import GeneratorConfig, Triplet, load_manifest, make_synthetic_dataset
from triforge.cli import main
from triforge.records import SampleRecord
from triforge.training import load_checkpoint, read_loss_log


@pytest.fixture
def dataset(tmp_path):
    """A small on-disk dataset the CLI verbs can chew on."""
    gen = GeneratorConfig(identities=3, frames=4, image_size=16,
                          families=("famA", "famB"), seed=2)
    man = make_synthetic_dataset(gen, tmp_path / "ds")
    return tmp_path / "ds" / "manifest.jsonl", man


@pytest.fixture
def train_yaml(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("""
model:
  image_size: 16
  channels: [3, 4, 5]
  embed_dim: 8
  disc_hidden: 6
train:
  epochs: 1
  batch_size: 8
  learning_rate: 0.001
""")
    return p


def run_cli(*argv):
    return main(list(argv))


class TestUsageErrors:
    def test_no_verb_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            run_cli()
        assert exc.value.code == 1

    def test_unknown_verb_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("frobnicate")
        assert exc.value.code == 1

    def test_bad_flag_value_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("synth", "--identities", "many")
        assert exc.value.code == 1

    def test_help_exits_0(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("--help")
        assert exc.value.code == 0
        assert "synth" in capsys.readouterr().out


class TestSynth:
    def test_writes_dataset(self, tmp_path, capsys):
        rc = run_cli("synth", "--identities", "2", "--frames", "3",
                     "--image-size", "16", "--out", str(tmp_path / "o"))
        assert rc == 0
        man = load_manifest(tmp_path / "o" / "dataset" / "manifest.jsonl")
        assert len(man) == 2 * 3 * 3
        assert "18 records" in capsys.readouterr().out

    def test_dry_run_writes_nothing(self, tmp_path, capsys):
        rc = run_cli("synth", "--identities", "2", "--frames", "3",
                     "--dry-run", "--out", str(tmp_path / "o"))
        assert rc == 0
        assert not (tmp_path / "o").exists()
        assert "dry run" in capsys.readouterr().out

    def test_families_flag(self, tmp_path):
        rc = run_cli("synth", "--identities", "1", "--frames", "2",
                     "--families", "x,y,z", "--out", str(tmp_path / "o"))
        assert rc == 0
        man = load_manifest(tmp_path / "o" / "dataset" / "manifest.jsonl")
        assert set(r.forgery_category for r in man.records) == {"real", "x", "y", "z"}

    def test_identities_zero_is_validation_failure(self, tmp_path, capsys):
        rc = run_cli("synth", "--identities", "0", "--out", str(tmp_path / "o"))
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRIFORGE_OUT_DIR", str(tmp_path / "envout"))
        rc = run_cli("synth", "--identities", "1", "--frames", "2")
        assert rc == 0
        assert (tmp_path / "envout" / "dataset" / "manifest.jsonl").is_file()

    def test_reruns_byte_identical(self, tmp_path):
        run_cli("synth", "--identities", "1", "--frames", "2", "--out", str(tmp_path / "a"))
        run_cli("synth", "--identities", "1", "--frames", "2", "--out", str(tmp_path / "b"))
        a_dir, b_dir = tmp_path / "a" / "dataset", tmp_path / "b" / "dataset"
        for p in sorted(a_dir.iterdir()):
            assert p.read_bytes() == (b_dir / p.name).read_bytes()


class TestTriplets:
    def test_writes_table(self, dataset, tmp_path, capsys):
        manifest_path, man = dataset
        rc = run_cli("triplets", "--manifest", str(manifest_path),
                     "--out", str(tmp_path / "o"))
        assert rc == 0
        with (tmp_path / "o" / "triplets.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        # 3 ids x 2 families x 4*(4//2) = 48 triplets.
        assert len(rows) == 48
        # Every row reconstructs into a valid triplet against the manifest.
        by_ref = {r.payload_ref: r for r in man.records}
        for row in rows:
            rec = lambda ref: by_ref[ref]
            Triplet(rec(row["anchor_ref"]), rec(row["positive_ref"]),
                    rec(row["negative_ref"]),
                    (int(row["l_a"]), int(row["l_p"]), int(row["l_n"])))

    def test_missing_manifest_flag(self, capsys):
        rc = run_cli("triplets")
        assert rc == 1
        assert "--manifest" in capsys.readouterr().err

    def test_nonexistent_manifest(self, tmp_path, capsys):
        rc = run_cli("triplets", "--manifest", str(tmp_path / "nope.jsonl"))
        assert rc == 1
        assert "not found" in capsys.readouterr().err

    def test_dry_run_counts(self, dataset, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("triplets", "--manifest", str(manifest_path),
                     "--dry-run", "--out", str(tmp_path / "o"))
        assert rc == 0
        assert "48 triplets" in capsys.readouterr().out
        assert not (tmp_path / "o").exists()


class TestTrain:
    def test_trains_and_reports(self, dataset, train_yaml, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("train", "--config", str(train_yaml),
                     "--manifest", str(manifest_path), "--out", str(tmp_path / "run"))
        assert rc == 0
        out = capsys.readouterr().out
        assert "final losses" in out and "wrote checkpoint" in out
        state = load_checkpoint(tmp_path / "run" / "model.ckpt")
        assert state.epoch == 1
        assert read_loss_log(tmp_path / "run" / "loss_log.csv")

    def test_dry_run_prints_plan(self, dataset, train_yaml, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("train", "--config", str(train_yaml), "--dry-run",
                     "--manifest", str(manifest_path), "--out", str(tmp_path / "run"))
        assert rc == 0
        out = capsys.readouterr().out
        assert "48 triplets" in out
        assert "6 batches/epoch" in out
        assert not (tmp_path / "run").exists()

    def test_preset_flag_changes_wiring(self, dataset, train_yaml, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("train", "--config", str(train_yaml), "--preset", "TL",
                     "--dry-run", "--manifest", str(manifest_path),
                     "--out", str(tmp_path / "run"))
        assert rc == 0
        out = capsys.readouterr().out
        assert "beta=0.0" in out and "detach_head=False" in out

    def test_switch_flags(self, dataset, train_yaml, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("train", "--config", str(train_yaml), "--no-grl", "--no-triplet",
                     "--no-detach", "--dry-run", "--manifest", str(manifest_path),
                     "--out", str(tmp_path / "run"))
        assert rc == 0
        out = capsys.readouterr().out
        assert "grl_lambda=0.0" in out and "alpha=0.0" in out and "detach_head=False" in out

    def test_resume_continues(self, dataset, train_yaml, tmp_path):
        manifest_path, _ = dataset
        run_cli("train", "--config", str(train_yaml),
                "--manifest", str(manifest_path), "--out", str(tmp_path / "run"))
        rc = run_cli("train", "--config", str(train_yaml), "--epochs", "2",
                     "--resume", str(tmp_path / "run" / "model.ckpt"),
                     "--manifest", str(manifest_path), "--out", str(tmp_path / "run2"))
        assert rc == 0
        assert load_checkpoint(tmp_path / "run2" / "model.ckpt").epoch == 2

    def test_no_triplet_manifest_fails_validation(self, tmp_path, train_yaml, capsys):
        # Manifest with reals only: nothing to pair, exit 1 before training.
        from triforge.records import Manifest, save_manifest

        recs = [SampleRecord("id0", f, "real", "real", f"r{f}.png") for f in range(4)]
        path = save_manifest(Manifest.from_records(recs), tmp_path / "reals.jsonl")
        rc = run_cli("train", "--config", str(train_yaml), "--manifest", str(path),
                     "--out", str(tmp_path / "run"))
        assert rc == 1
        assert "no triplets" in capsys.readouterr().err

    def test_seed_flag_changes_run(self, dataset, train_yaml, tmp_path):
        manifest_path, _ = dataset
        run_cli("train", "--config", str(train_yaml), "--seed", "0",
                "--manifest", str(manifest_path), "--out", str(tmp_path / "a"))
        run_cli("train", "--config", str(train_yaml), "--seed", "1",
                "--manifest", str(manifest_path), "--out", str(tmp_path / "b"))
        a = (tmp_path / "a" / "model.ckpt").read_bytes()
        b = (tmp_path / "b" / "model.ckpt").read_bytes()
        assert a != b


class TestEvalAndTsne:
    @pytest.fixture
    def trained(self, dataset, train_yaml, tmp_path):
        manifest_path, _ = dataset
        run_cli("train", "--config", str(train_yaml),
                "--manifest", str(manifest_path), "--out", str(tmp_path / "run"))
        return manifest_path, tmp_path / "run" / "model.ckpt"

    def test_eval_writes_report(self, trained, tmp_path, capsys):
        manifest_path, ckpt = trained
        rc = run_cli("eval", "--manifest", str(manifest_path), "--checkpoint", str(ckpt),
                     "--granularity", "both", "--out", str(tmp_path / "ev"))
        assert rc == 0
        out = capsys.readouterr().out
        assert "frame: auc=" in out and "video: auc=" in out
        assert "famA: auc=" in out
        from triforge import read_report

        rows = read_report(tmp_path / "ev" / "report.csv")
        assert [r["granularity"] for r in rows] == ["frame", "video"]

    def test_eval_requires_checkpoint(self, dataset, capsys):
        manifest_path, _ = dataset
        rc = run_cli("eval", "--manifest", str(manifest_path))
        assert rc == 1
        assert "--checkpoint" in capsys.readouterr().err

    def test_eval_dimension_mismatch_is_validation_failure(self, trained, tmp_path, capsys):
        _, ckpt = trained
        other = GeneratorConfig(identities=2, frames=2, image_size=32, seed=0)
        make_synthetic_dataset(other, tmp_path / "big")
        rc = run_cli("eval", "--manifest", str(tmp_path / "big" / "manifest.jsonl"),
                     "--checkpoint", str(ckpt), "--out", str(tmp_path / "ev"))
        assert rc == 1
        err = capsys.readouterr().err
        assert "16" in err and "32" in err

    def test_eval_manifest_list_from_config(self, trained, tmp_path, capsys):
        manifest_path, ckpt = trained
        cfg = tmp_path / "eval.yaml"
        cfg.write_text(f"""
eval:
  checkpoint: {ckpt}
  manifests: [{manifest_path}, {manifest_path}]
""")
        rc = run_cli("eval", "--config", str(cfg), "--out", str(tmp_path / "ev"))
        assert rc == 0
        from triforge import read_report

        assert len(read_report(tmp_path / "ev" / "report.csv")) == 2

    def test_tsne_writes_csv(self, trained, tmp_path, capsys):
        manifest_path, ckpt = trained
        rc = run_cli("tsne", "--manifest", str(manifest_path), "--checkpoint", str(ckpt),
                     "--out", str(tmp_path / "proj"))
        assert rc == 0
        csv_path = tmp_path / "proj" / "tsne.csv"
        assert csv_path.is_file()
        assert not (tmp_path / "proj" / "tsne.png").exists()

    def test_tsne_plot_flag_default_path(self, trained, tmp_path):
        manifest_path, ckpt = trained
        rc = run_cli("tsne", "--manifest", str(manifest_path), "--checkpoint", str(ckpt),
                     "--plot", "--out", str(tmp_path / "proj"))
        assert rc == 0
        assert (tmp_path / "proj" / "tsne.png").stat().st_size > 0

    def test_missing_checkpoint_file(self, dataset, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("eval", "--manifest", str(manifest_path),
                     "--checkpoint", str(tmp_path / "nope.ckpt"))
        assert rc == 1
        assert "not found" in capsys.readouterr().err


class TestConfigPrecedence:
    def test_flag_epochs_beat_config(self, dataset, train_yaml, tmp_path, capsys):
        manifest_path, _ = dataset
        rc = run_cli("train", "--config", str(train_yaml), "--epochs", "3",
                     "--dry-run", "--manifest", str(manifest_path),
                     "--out", str(tmp_path / "run"))
        assert rc == 0
        assert "x 3 epochs" in capsys.readouterr().out

    def test_unknown_config_key_is_validation_failure(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("train:\n  warmup: 5\n")
        rc = run_cli("train", "--config", str(bad), "--manifest", "x.jsonl")
        assert rc == 1
        assert "train.warmup" in capsys.readouterr().err
