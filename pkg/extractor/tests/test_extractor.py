import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from nadf_extractor import (
    Extractor,
    HookError,
    RecipeError,
    builtin_recipe,
    load_recipe,
    preprocess,
    tensor_checksums,
)
from nadf_extractor.cli import main as cli_main
from nadf_extractor.nmi import attention_nmi as extractor_nmi

# the analysis toolkit is consumed only through its public bundle interface
from ssl_vit_lens import attention_nmi as primary_nmi
from ssl_vit_lens.bundle import read_bundle_file
from ssl_vit_lens.nadf import read_nadf_file


@pytest.fixture(scope="module")
def image_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("imgs")
    rng = np.random.default_rng(0)
    for i in range(3):
        arr = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        Image.fromarray(arr).save(d / f"img_{i}.png")
    return d


@pytest.fixture(scope="module")
def extracted(image_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    written = Extractor(builtin_recipe(seed=0)).extract_directory(image_dir, out)
    assert len(written) == 3
    return out


class TestBundleCompatibility:
    def test_primary_reader_validates_bundles(self, extracted):
        for path in sorted(extracted.glob("*.nad")):
            bundle = read_bundle_file(path)   # validates on read
            cfg = bundle.config
            assert cfg.depth == 2 and cfg.dim == 8
            assert len(bundle.attention) == 2
            assert len(bundle.representations) == 3

    def test_attention_rows_stochastic(self, extracted):
        for path in sorted(extracted.glob("*.nad")):
            bundle = read_bundle_file(path)
            for a in bundle.attention:
                assert np.max(np.abs(a.sum(axis=-1) - 1.0)) <= 1e-4

    def test_preprocessing_recorded_in_header(self, extracted):
        path = sorted(extracted.glob("*.nad"))[0]
        meta, _ = read_nadf_file(path)
        pre = meta["preprocessing"]
        assert pre["resize"] == 8 and pre["crop"] == 8
        assert len(pre["mean"]) == 3 and len(pre["std"]) == 3

    def test_checksums_match_primary_read(self, extracted):
        for path in sorted(extracted.glob("*.nad")):
            published = json.loads(
                (path.with_suffix("").parent / f"{path.stem}.checksums.json")
                .read_text())
            _, tensors = read_nadf_file(path)
            assert tensor_checksums(tensors) == published


class TestDeterminism:
    def test_same_image_twice_identical_bytes(self, image_dir, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            Extractor(builtin_recipe(seed=0)).extract_directory(image_dir, out)
        for pa in sorted(out_a.glob("*.nad")):
            pb = out_b / pa.name
            ha = hashlib.sha256(pa.read_bytes()).hexdigest()
            hb = hashlib.sha256(pb.read_bytes()).hexdigest()
            assert ha == hb

    def test_different_seed_different_capture(self, image_dir, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        Extractor(builtin_recipe(seed=0)).extract_directory(image_dir, out_a)
        Extractor(builtin_recipe(seed=1)).extract_directory(image_dir, out_b)
        name = sorted(out_a.glob("*.nad"))[0].name
        assert (out_a / name).read_bytes() != (out_b / name).read_bytes()


class TestCrossComponentNmi:
    def test_nmi_agreement_within_1e5(self, extracted):
        for path in sorted(extracted.glob("*.nad")):
            bundle = read_bundle_file(path)
            for a in bundle.attention:
                ours = extractor_nmi(a)
                theirs, _ = primary_nmi(a)
                assert np.max(np.abs(ours - theirs)) < 1e-5


class TestRecipes:
    def test_missing_tensor_rejected(self, tmp_path):
        recipe = {
            "checkpoint": "builtin:toy",
            "mapping": {"embed": "repr/0",
                        "blocks.0.attn.softmax": "attention/0",
                        "blocks.0": "repr/1"},
        }
        path = tmp_path / "r.json"
        path.write_text(json.dumps(recipe))
        with pytest.raises(RecipeError, match="missing tensors"):
            load_recipe(path)

    def test_unknown_layer_rejected(self, tmp_path):
        doc = {
            "checkpoint": "builtin:toy",
            "mapping": {"embed": "repr/0",
                        "blocks.0.attn.softmax": "attention/0",
                        "blocks.0": "repr/1",
                        "blocks.7.attn.softmax": "attention/1",
                        "blocks.1": "repr/2"},
        }
        path = tmp_path / "r.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(RecipeError, match="missing layer"):
            Extractor(load_recipe(path))

    def test_misplaced_hook_names_layer(self, image_dir):
        # point the attention capture before the softmax: raw scores are
        # not row-stochastic and the error must say where the hook sat
        recipe = builtin_recipe(seed=0)
        mapping = dict(recipe.mapping)
        mapping.pop("blocks.0.attn.softmax")
        mapping["blocks.0.attn.qkv"] = "attention/0"
        bad = type(recipe)(
            checkpoint=recipe.checkpoint, config=recipe.config,
            preprocessing=recipe.preprocessing, mapping=mapping)
        ex = Extractor(bad)
        img = preprocess(sorted(image_dir.iterdir())[0], recipe.preprocessing)
        with pytest.raises(HookError, match="blocks.0.attn.qkv"):
            ex.capture(img)


class TestCli:
    def test_end_to_end(self, image_dir, tmp_path):
        out = tmp_path / "cli_out"
        assert cli_main(["--images", str(image_dir), "--out", str(out)]) == 0
        assert len(list(out.glob("*.nad"))) == 3

    def test_empty_dir_exit_3(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert cli_main(["--images", str(empty),
                         "--out", str(tmp_path / "o")]) == 3

    def test_bad_recipe_exit_2(self, image_dir, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli_main(["--recipe", str(bad), "--images", str(image_dir),
                         "--out", str(tmp_path / "o")]) == 2
