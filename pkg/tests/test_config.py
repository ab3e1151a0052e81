import pytest

from triforge import ConfigError, load_run_config
from triforge.config import (
    DEFAULT_OUT_DIR,
    OUT_DIR_ENV,
    PRESETS,
    RunConfig,
    build_generator_config,
    build_train_config,
    resolve_out_dir,
    resolve_seed,
)


def write_config(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadRunConfig:
    def test_full_config(self, tmp_path):
        p = write_config(tmp_path, """
output_dir: out/here
seed: 7
synth:
  identities: 4
  families: [famA, famB]
data:
  manifest: ds/manifest.jsonl
  included_categories: [famA]
model:
  embed_dim: 16
  channels: [4, 8, 12]
train:
  mode: bitfit
  learning_rate: 0.001
  optimizer: adam
eval:
  granularity: video
  manifests: [a.jsonl, b.jsonl]
tsne:
  plot: proj.png
""")
        cfg = load_run_config(p)
        assert cfg.output_dir == "out/here"
        assert cfg.seed == 7
        assert cfg.synth == {"identities": 4, "families": ["famA", "famB"]}
        assert cfg.data["manifest"] == "ds/manifest.jsonl"
        assert cfg.model == {"embed_dim": 16, "channels": [4, 8, 12]}
        assert cfg.train == {"mode": "bitfit", "learning_rate": 0.001, "optimizer": "adam"}
        assert cfg.eval == {"granularity": "video", "manifests": ["a.jsonl", "b.jsonl"]}
        assert cfg.tsne == {"plot": "proj.png"}
        assert cfg.source == p

    def test_empty_file_is_default_config(self, tmp_path):
        cfg = load_run_config(write_config(tmp_path, ""))
        assert cfg.seed is None and cfg.output_dir is None
        assert cfg.train == {} and cfg.synth == {}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_run_config(write_config(tmp_path, "train: [unclosed"))

    def test_non_mapping_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="mapping"):
            load_run_config(write_config(tmp_path, "- just\n- a\n- list\n"))

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ConfigError, match="trainn"):
            load_run_config(write_config(tmp_path, "trainn:\n  epochs: 3\n"))

    def test_unknown_section_key_reports_dotted_path(self, tmp_path):
        with pytest.raises(ConfigError, match=r"train\.learning_ratee"):
            load_run_config(write_config(tmp_path, "train:\n  learning_ratee: 0.1\n"))

    def test_section_must_be_mapping(self, tmp_path):
        with pytest.raises(ConfigError, match="mapping"):
            load_run_config(write_config(tmp_path, "train: 3\n"))

    def test_seed_type_checked(self, tmp_path):
        with pytest.raises(ConfigError, match="seed"):
            load_run_config(write_config(tmp_path, "seed: high\n"))
        with pytest.raises(ConfigError, match="seed"):
            load_run_config(write_config(tmp_path, "seed: true\n"))


class TestResolvers:
    def test_seed_precedence(self):
        cfg = RunConfig(seed=9)
        assert resolve_seed(cfg, 4) == 4
        assert resolve_seed(cfg, None) == 9
        assert resolve_seed(RunConfig(), None) == 0

    def test_out_dir_flag_beats_env_beats_config(self, monkeypatch):
        cfg = RunConfig(output_dir="from_config")
        monkeypatch.setenv(OUT_DIR_ENV, "from_env")
        assert str(resolve_out_dir(cfg, "from_flag")) == "from_flag"
        assert str(resolve_out_dir(cfg, None)) == "from_env"
        monkeypatch.delenv(OUT_DIR_ENV)
        assert str(resolve_out_dir(cfg, None)) == "from_config"
        assert str(resolve_out_dir(RunConfig(), None)) == DEFAULT_OUT_DIR

    def test_empty_env_var_ignored(self, monkeypatch):
        monkeypatch.setenv(OUT_DIR_ENV, "")
        assert str(resolve_out_dir(RunConfig(), None)) == DEFAULT_OUT_DIR


class TestBuildGeneratorConfig:
    def test_from_sections_and_overrides(self):
        cfg = RunConfig(synth={"identities": 3, "families": ["x", "y"]})
        gen = build_generator_config(cfg, seed=5, overrides={"frames": 2, "image_size": None})
        assert gen.identities == 3
        assert gen.families == ("x", "y")
        assert gen.frames == 2
        assert gen.image_size == 32  # None override must not clobber the default
        assert gen.seed == 5

    def test_bad_value_is_config_error(self):
        with pytest.raises(ConfigError):
            build_generator_config(RunConfig(synth={"identities": 0}), seed=0)


class TestBuildTrainConfig:
    def test_mode_defaults_from_file_mode(self):
        cfg = RunConfig(train={"mode": "bitfit"})
        tc = build_train_config(cfg, seed=0)
        assert tc.finetune_mode == "bitfit"
        assert (tc.learning_rate, tc.batch_size, tc.beta, tc.epochs) == (2e-5, 8, 0.5, 7)

    def test_file_overrides_mode_defaults(self):
        cfg = RunConfig(train={"mode": "bitfit", "learning_rate": 0.01})
        assert build_train_config(cfg, seed=0).learning_rate == 0.01

    def test_preset_overrides_file(self):
        cfg = RunConfig(train={"alpha": 0.7, "beta": 0.9})
        tc = build_train_config(cfg, seed=0, preset="TL")
        assert tc.beta == 0.0  # preset wins over the file
        assert tc.alpha == 0.7  # untouched by the preset
        assert tc.detach_head is False

    def test_flags_override_preset(self):
        cfg = RunConfig()
        tc = build_train_config(cfg, seed=0, preset="TL",
                                flag_overrides={"beta": 0.4, "epochs": None})
        assert tc.beta == 0.4
        assert tc.epochs == 30  # None flag falls through to the mode default

    def test_model_section_maps_field_names(self):
        cfg = RunConfig(model={"backbone": "toy_cnn", "channels": [2, 3, 4],
                               "embed_dim": 6, "normalize_embeddings": True})
        tc = build_train_config(cfg, seed=1)
        assert tc.backbone_kind == "toy_cnn"
        assert tc.channels == (2, 3, 4)
        assert tc.embed_dim == 6
        assert tc.normalize_embeddings is True

    def test_included_categories_from_data_section(self):
        cfg = RunConfig(data={"included_categories": ["famB"]})
        assert build_train_config(cfg, seed=0).included_categories == ("famB",)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            build_train_config(RunConfig(), seed=0, preset="TL+NOPE")

    def test_seed_is_threaded_through(self):
        assert build_train_config(RunConfig(), seed=42).seed == 42

    def test_bad_value_is_config_error(self):
        with pytest.raises(ConfigError):
            build_train_config(RunConfig(train={"epochs": 0}), seed=0)

    def test_bad_type_is_config_error(self):
        # A value of the wrong kind surfaces as ConfigError, not a TypeError.
        with pytest.raises(ConfigError):
            build_train_config(RunConfig(train={"learning_rate": "fast"}), seed=0)


class TestPresets:
    def test_expected_preset_names(self):
        assert set(PRESETS) == {"B", "TL", "TL+Adv", "TL+GRL", "TL+GRL+DH"}

    def test_wiring_progression(self):
        combos = {name: build_train_config(RunConfig(), 0, preset=name)
                  for name in PRESETS}
        b = combos["B"]
        assert (b.alpha, b.beta, b.detach_head) == (0.0, 0.0, False)
        tl = combos["TL"]
        assert (tl.alpha, tl.beta, tl.detach_head) == (1.0, 0.0, False)
        adv = combos["TL+Adv"]
        assert adv.beta > 0 and not adv.reverse_gradient and not adv.detach_head
        grl = combos["TL+GRL"]
        assert grl.beta > 0 and grl.reverse_gradient and not grl.detach_head
        full = combos["TL+GRL+DH"]
        assert full.beta > 0 and full.reverse_gradient and full.detach_head
