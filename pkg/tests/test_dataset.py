import json
import os

import numpy as np
import pytest

from iqabench.dataset import (
    build_dataset,
    derive_seed,
    lambda_dirname,
    load_labels,
    load_manifest,
    validate_manifest,
)
from iqabench.images import NoiseSpec, save_image

from .conftest import random_int_image

NOISE = NoiseSpec(variance=200.0, seed=424242, clip=True)


def make_refs(tmp_path, rng, count=2, size=24):
    ref_dir = tmp_path / "refs"
    ref_dir.mkdir()
    for i in range(count):
        img = random_int_image(rng, size, size, 20, 230)
        save_image(img, str(ref_dir / f"tex{i:02d}.png"))
    return str(ref_dir)


def tree_bytes(root):
    out = {}
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_build_single_reference_file_count(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=1)
    out = tmp_path / "ds"
    manifest = build_dataset(refs, str(out), NOISE, [1.6, 2.0, 2.4, 2.8])
    assert len(manifest.entries) == 1
    entry = manifest.entries[0]
    assert len(entry.distorted) == 4
    files = [p for p in tree_bytes(str(out))]
    # noisy + 4 distorted + manifest.json
    assert len(files) == 6
    assert "manifest.json" in files


def test_build_rebuild_is_byte_identical(tmp_path, rng):
    refs = make_refs(tmp_path, rng)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    build_dataset(refs, str(out_a), NOISE, [1.6, 2.8])
    build_dataset(refs, str(out_b), NOISE, [1.6, 2.8])
    bytes_a = tree_bytes(str(out_a))
    bytes_b = tree_bytes(str(out_b))
    assert bytes_a == bytes_b


def test_build_empty_lambdas_writes_nothing(tmp_path, rng):
    refs = make_refs(tmp_path, rng)
    out = tmp_path / "ds"
    with pytest.raises(ValueError, match="lambdas"):
        build_dataset(refs, str(out), NOISE, [])
    assert not out.exists()


def test_build_rejects_unsorted_lambdas(tmp_path, rng):
    refs = make_refs(tmp_path, rng)
    with pytest.raises(ValueError, match="increasing"):
        build_dataset(refs, str(tmp_path / "ds"), NOISE, [2.0, 1.6])


def test_build_collision_requires_force(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=1)
    out = tmp_path / "ds"
    build_dataset(refs, str(out), NOISE, [2.0])
    with pytest.raises(FileExistsError, match="force"):
        build_dataset(refs, str(out), NOISE, [2.0])
    build_dataset(refs, str(out), NOISE, [2.0], force=True)


def test_build_applies_labels(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=2)
    labels = tmp_path / "labels.txt"
    labels.write_text("tex00,noise_like\n")
    manifest = build_dataset(refs, str(tmp_path / "ds"), NOISE, [2.0], labels_path=str(labels))
    by_id = {e.id: e.subset for e in manifest.entries}
    assert by_id == {"tex00": "noise_like", "tex01": "unlabeled"}


def test_build_unknown_label_id_rejected(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=1)
    labels = tmp_path / "labels.txt"
    labels.write_text("nosuch,regular\n")
    with pytest.raises(ValueError, match="nosuch"):
        build_dataset(refs, str(tmp_path / "ds"), NOISE, [2.0], labels_path=str(labels))


def test_load_labels_validates_closed_set(tmp_path):
    labels = tmp_path / "labels.txt"
    labels.write_text("a,weird\n")
    with pytest.raises(ValueError, match="weird"):
        load_labels(str(labels))


def test_manifest_roundtrip(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=2)
    out = tmp_path / "ds"
    built = build_dataset(refs, str(out), NOISE, [1.6, 2.8])
    loaded = load_manifest(str(out / "manifest.json"))
    assert loaded.schema_version == 1
    assert loaded.prng_name == built.prng_name
    assert loaded.lambdas == [1.6, 2.8]
    assert [e.id for e in loaded.entries] == ["tex00", "tex01"]
    for entry in loaded.entries:
        assert os.path.isfile(loaded.resolve(entry.noisy_path))
        assert entry.seed == derive_seed(NOISE.seed, entry.id)


def test_validate_fresh_dataset_is_clean(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=2)
    out = tmp_path / "ds"
    build_dataset(refs, str(out), NOISE, [1.6, 2.8])
    report = validate_manifest(str(out / "manifest.json"))
    assert report.ok
    assert report.violations == []


def test_validate_missing_file_single_violation(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=2)
    out = tmp_path / "ds"
    build_dataset(refs, str(out), NOISE, [1.6, 2.8])
    victim = out / lambda_dirname(2.8) / "tex01.png"
    victim.unlink()
    report = validate_manifest(str(out / "manifest.json"))
    assert len(report.violations) == 1
    assert str(victim) in report.violations[0]


def test_validate_bad_subset_label(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=1)
    out = tmp_path / "ds"
    build_dataset(refs, str(out), NOISE, [2.0])
    doc = json.loads((out / "manifest.json").read_text())
    doc["entries"][0]["subset"] = "weird"
    (out / "manifest.json").write_text(json.dumps(doc))
    report = validate_manifest(str(out / "manifest.json"))
    assert any("weird" in v for v in report.violations)


def test_validate_dimension_mismatch(tmp_path, rng):
    refs = make_refs(tmp_path, rng, count=1)
    out = tmp_path / "ds"
    build_dataset(refs, str(out), NOISE, [2.0])
    save_image(random_int_image(rng, 10, 10), str(out / "noisy" / "tex00.png"))
    report = validate_manifest(str(out / "manifest.json"))
    assert any("shape" in v for v in report.violations)


def test_derive_seed_mixing():
    assert derive_seed(0, "abc") == derive_seed(0, "abc")
    assert derive_seed(0, "abc") != derive_seed(0, "abd")
    assert derive_seed(1, "abc") != derive_seed(2, "abc")
    assert 0 <= derive_seed(-5, "abc") < 2**64


def test_noisy_images_are_quantized_before_filtering(tmp_path, rng):
    # the stored noisy file is the filter input: integers in [0, 255]
    refs = make_refs(tmp_path, rng, count=1)
    out = tmp_path / "ds"
    manifest = build_dataset(refs, str(out), NOISE, [2.0])
    from iqabench.images import load_image

    noisy = load_image(manifest.resolve(manifest.entries[0].noisy_path))
    assert np.array_equal(noisy, np.round(noisy))
    assert noisy.min() >= 0 and noisy.max() <= 255
