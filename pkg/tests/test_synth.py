import numpy as np
import pytest

from triforge import (
    ConfigError,
    GeneratorConfig,
    Manifest,
    ManifestError,
    TriforgeError,
    artifact_mask,
    in_memory_manifest,
    load_manifest,
    make_synthetic_dataset,
    render_fake_frame,
    render_real_frame,
)
from triforge.synth import ImageStore, generate_records, to_uint8


class TestGeneratorConfig:
    def test_defaults(self):
        cfg = GeneratorConfig()
        assert (cfg.identities, cfg.frames, cfg.image_size) == (10, 8, 32)
        assert cfg.families == ("famA", "famB")

    def test_families_coerced_to_tuple(self):
        assert GeneratorConfig(families=["x", "y"]).families == ("x", "y")

    @pytest.mark.parametrize("kwargs", [
        {"identities": 0}, {"frames": 0}, {"image_size": 7},
        {"families": ()}, {"families": ("a", "a")}, {"families": ("real",)},
    ])
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            GeneratorConfig(**kwargs)

    def test_identity_name(self):
        assert GeneratorConfig().identity_name(7) == "id007"


class TestRendering:
    def test_real_frame_shape_and_range(self, tiny_gen):
        img = render_real_frame(tiny_gen, 0, 0)
        assert img.shape == (16, 16, 3)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_rendering_is_deterministic(self, tiny_gen):
        a = render_real_frame(tiny_gen, 1, 3)
        b = render_real_frame(tiny_gen, 1, 3)
        np.testing.assert_array_equal(a, b)

    def test_identities_differ(self, tiny_gen):
        a = render_real_frame(tiny_gen, 0, 0)
        b = render_real_frame(tiny_gen, 1, 0)
        assert not np.array_equal(a, b)

    def test_frames_drift(self, tiny_gen):
        a = render_real_frame(tiny_gen, 0, 0)
        b = render_real_frame(tiny_gen, 0, 1)
        assert not np.array_equal(a, b)

    def test_fake_differs_only_inside_artifact_mask(self, tiny_gen):
        """The forgery must be local: outside the mask, fake == real."""
        for family in tiny_gen.families:
            mask = artifact_mask(tiny_gen, 0, family)
            real = render_real_frame(tiny_gen, 0, 2)
            fake = render_fake_frame(tiny_gen, 0, family, 2)
            np.testing.assert_array_equal(real[~mask], fake[~mask])
            assert np.abs(real[mask] - fake[mask]).max() > 0.0

    def test_families_use_distinct_sites(self, tiny_gen):
        a = artifact_mask(tiny_gen, 0, "famA")
        b = artifact_mask(tiny_gen, 0, "famB")
        assert a.any() and b.any()
        assert not np.array_equal(a, b)

    def test_unknown_family_rejected(self, tiny_gen):
        with pytest.raises(TriforgeError, match="famZ"):
            render_fake_frame(tiny_gen, 0, "famZ", 0)

    def test_to_uint8_rounding(self):
        arr = np.array([[[0.0, 0.5, 1.0]]])
        np.testing.assert_array_equal(to_uint8(arr), [[[0, 128, 255]]])


class TestGenerateRecords:
    def test_counts_and_order(self, tiny_gen):
        pairs = list(generate_records(tiny_gen))
        # identities x (real + 2 families) x frames
        assert len(pairs) == 4 * 3 * 6
        # Keys are unique, so the canonical manifest keeps every record.
        man = Manifest.from_records([rec for rec, _ in pairs])
        assert len(man) == len(pairs)

    def test_payload_refs_are_unique_filenames(self, tiny_gen):
        refs = [rec.payload_ref for rec, _ in generate_records(tiny_gen)]
        assert len(set(refs)) == len(refs)
        assert all(ref.endswith(".png") for ref in refs)


class TestInMemoryManifest:
    def test_shape_and_scale(self, tiny_manifest):
        assert len(tiny_manifest) == 72
        img = tiny_manifest.records[0].payload_ref
        assert img.shape == (16, 16, 3)
        assert img.dtype == np.float64
        assert img.max() <= 1.0

    def test_label_balance(self, tiny_manifest):
        labels = [r.label for r in tiny_manifest.records]
        assert labels.count(0) == 24 and labels.count(1) == 48


class TestMakeSyntheticDataset:
    def test_disk_matches_memory_exactly(self, tiny_gen, tmp_path):
        """PNG round-trip must not perturb pixels versus the in-memory path."""
        man_disk = make_synthetic_dataset(tiny_gen, tmp_path / "ds")
        man_mem = in_memory_manifest(tiny_gen)
        store = ImageStore(root=man_disk.root)
        for on_disk, in_mem in zip(man_disk.records, man_mem.records):
            assert on_disk.key == in_mem.key
            np.testing.assert_array_equal(store.get(on_disk), in_mem.payload_ref)

    def test_reruns_are_byte_identical(self, tiny_gen, tmp_path):
        make_synthetic_dataset(tiny_gen, tmp_path / "a")
        make_synthetic_dataset(tiny_gen, tmp_path / "b")
        files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
        files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_pixels(self, tmp_path):
        cfg_a = GeneratorConfig(identities=1, frames=1, image_size=16, seed=0)
        cfg_b = GeneratorConfig(identities=1, frames=1, image_size=16, seed=1)
        assert not np.array_equal(render_real_frame(cfg_a, 0, 0),
                                  render_real_frame(cfg_b, 0, 0))

    def test_manifest_file_loads_back(self, tiny_gen, tmp_path):
        man = make_synthetic_dataset(tiny_gen, tmp_path / "ds")
        back = load_manifest(tmp_path / "ds" / "manifest.jsonl",
                             dataset_name=man.dataset_name)
        assert [r.key for r in back.records] == [r.key for r in man.records]
        assert back.root == tmp_path / "ds"


class TestImageStore:
    def test_in_memory_passthrough(self, tiny_manifest, store):
        rec = tiny_manifest.records[0]
        np.testing.assert_array_equal(store.get(rec), rec.payload_ref)

    def test_relative_ref_without_root_rejected(self, store):
        from conftest import make_record
        with pytest.raises(ManifestError, match="root"):
            store.get(make_record())

    def test_missing_file_rejected(self, tmp_path):
        from conftest import make_record
        store = ImageStore(root=tmp_path)
        with pytest.raises(ManifestError, match="not found"):
            store.get(make_record(ref="absent.png"))

    def test_batch_stacks(self, tiny_manifest, store):
        batch = store.batch(tiny_manifest.records[:5])
        assert batch.shape == (5, 16, 16, 3)

    def test_cache_returns_same_array(self, tiny_gen, tmp_path):
        man = make_synthetic_dataset(tiny_gen, tmp_path / "ds")
        store = ImageStore(root=man.root)
        assert store.get(man.records[0]) is store.get(man.records[0])
