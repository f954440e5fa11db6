import json
import shutil
from collections import Counter

import numpy as np
import pytest
import torch

from lsafnet.data import (
    SECOND_PALETTE,
    Palette,
    SCDDataset,
    Sample,
    apply_geometric,
    augment,
    gen_synthetic,
    load_dataset,
    make_synthetic_sample,
    read_rgb,
    synthetic_palette,
    write_rgb,
)
from lsafnet.errors import (
    ConfigError,
    ConsistencyError,
    IngestionError,
    PaletteError,
)


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    return gen_synthetic(root, seed=3, count=6, size=64, num_classes=3)


def test_round_trip_valid(synth):
    samples = load_dataset(synth)
    assert [s.stem for s in samples] == sorted(s.stem for s in samples)
    assert len(samples) == 6
    for s in samples:
        s.validate()
        assert s.t1.shape == (64, 64, 3) and s.t1.dtype == np.uint8
        assert set(np.unique(s.gt1)) <= {0, 1, 2, 3}
        assert np.array_equal(s.change, (s.gt2 != 0).astype(np.int64))


def test_same_seed_bit_identical(tmp_path):
    a = gen_synthetic(tmp_path / "a", seed=11, count=3, size=32, num_classes=4)
    b = gen_synthetic(tmp_path / "b", seed=11, count=3, size=32, num_classes=4)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_different_seed_differs(tmp_path):
    a = gen_synthetic(tmp_path / "a", seed=1, count=1, size=32)
    b = gen_synthetic(tmp_path / "b", seed=2, count=1, size=32)
    assert (a / "im1" / "00000.png").read_bytes() != (b / "im1" / "00000.png").read_bytes()


def test_change_fraction_measured(tmp_path):
    root = gen_synthetic(tmp_path, seed=0, count=100, size=64, change_fraction=0.2)
    fractions = [s.change.mean() for s in load_dataset(root)]
    assert 0.1 <= np.mean(fractions) <= 0.3


def test_changed_pixels_change_class_and_appearance(synth):
    for s in load_dataset(synth):
        changed = s.gt1 != 0
        assert np.all(s.gt1[changed] != s.gt2[changed])
        diff = np.abs(s.t1.astype(int) - s.t2.astype(int)).sum(axis=2)
        if changed.any():
            assert diff[changed].mean() > diff[~changed].mean()


@pytest.mark.parametrize(
    "kwargs",
    [{"size": 48}, {"change_fraction": 0.0}, {"change_fraction": 1.0}, {"num_classes": 1}, {"count": 0}],
)
def test_invalid_generator_parameters(tmp_path, kwargs):
    with pytest.raises(ConfigError):
        gen_synthetic(tmp_path, **kwargs)


def test_unknown_label_color(synth, tmp_path):
    root = tmp_path / "bad"
    shutil.copytree(synth, root)
    lab = read_rgb(root / "label1" / "00002.png")
    lab[5, 7] = (1, 2, 3)
    write_rgb(root / "label1" / "00002.png", lab)
    with pytest.raises(PaletteError, match=r"\(5, 7\)"):
        load_dataset(root)


def test_inconsistent_change_masks(synth, tmp_path):
    root = tmp_path / "bad"
    shutil.copytree(synth, root)
    palette = Palette.from_json(root / "palette.json")
    s = load_dataset(root)[0]
    gt2 = s.gt2.copy()
    y, x = np.argwhere(s.gt1 == 0)[0]
    gt2[y, x] = 1
    write_rgb(root / "label2" / f"{s.stem}.png", palette.encode(gt2))
    with pytest.raises(ConsistencyError):
        load_dataset(root)


def test_missing_counterpart_names_stem(synth, tmp_path):
    root = tmp_path / "bad"
    shutil.copytree(synth, root)
    (root / "im2" / "00004.png").unlink()
    with pytest.raises(IngestionError, match="00004"):
        load_dataset(root)


def test_palette_json_round_trip(tmp_path):
    SECOND_PALETTE.to_json(tmp_path / "p.json")
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["classes"][0]["name"] == "no-change"
    assert Palette.from_json(tmp_path / "p.json") == SECOND_PALETTE


def test_palette_encode_decode_identity():
    rng = np.random.default_rng(0)
    lab = rng.integers(0, 7, (9, 11))
    assert np.array_equal(SECOND_PALETTE.decode(SECOND_PALETTE.encode(lab)), lab)


def test_palette_rejects_duplicate_colors():
    with pytest.raises(PaletteError):
        Palette(("a", "b", "c"), ((0, 0, 0), (1, 1, 1), (0, 0, 0)))


@pytest.mark.parametrize("n", [2, 3, 6, 12])
def test_synthetic_palette_unique(n):
    p = synthetic_palette(n)
    assert p.num_classes == n and len(set(p.colors)) == n + 1


# --------------------------------------------------------------------------
# augmentation


def _sample(seed=0):
    return make_synthetic_sample(np.random.default_rng(seed), 32, 4, 0.3, "x")


def _equal(a, b):
    return all(np.array_equal(getattr(a, k), getattr(b, k)) for k in ("t1", "t2", "gt1", "gt2"))


def test_identity_draw_unchanged():
    s = _sample()
    assert _equal(apply_geometric(s), s)


def test_four_rotations_identity():
    s = _sample(1)
    r = s
    for _ in range(4):
        r = apply_geometric(r, rot90=1)
    assert _equal(r, s)
    assert not _equal(apply_geometric(s, rot90=1), s)


@pytest.mark.parametrize("seed", range(20))
def test_augment_preserves_invariants(seed):
    s = _sample(seed)
    a = augment(s, np.random.default_rng(seed))
    a.validate()
    before = Counter(zip(s.gt1.ravel().tolist(), s.gt2.ravel().tolist()))
    after = Counter(zip(a.gt1.ravel().tolist(), a.gt2.ravel().tolist()))
    assert before == after


def test_flips_are_involutions():
    s = _sample(2)
    assert _equal(apply_geometric(apply_geometric(s, hflip=True), hflip=True), s)
    assert _equal(apply_geometric(apply_geometric(s, vflip=True), vflip=True), s)


def test_same_transform_on_all_grids():
    s = _sample(3)
    s = Sample(s.t1, s.t2, s.gt1, s.gt2, "x")
    a = apply_geometric(s, rot90=3, hflip=True)
    ref = np.rot90(s.gt1[:, ::-1], 3)
    assert np.array_equal(a.gt1, ref)
    assert np.array_equal(a.t2, np.rot90(s.t2[:, ::-1], 3, axes=(0, 1)))


def test_dataset_augmentation_keyed_by_epoch_and_index():
    samples = [_sample(k) for k in range(4)]
    ds = SCDDataset(samples, augment=True, seed=5)
    ds.set_epoch(1)
    first = [ds[i] for i in range(4)]
    again = [ds[i] for i in reversed(range(4))][::-1]
    for a, b in zip(first, again):
        assert all(torch.equal(x, y) for x, y in zip(a, b))
    ds.set_epoch(2)
    assert any(not torch.equal(first[i][2], ds[i][2]) for i in range(4))


def test_dataset_tensors():
    t1, t2, g1, g2 = SCDDataset([_sample()])[0]
    assert t1.shape == (3, 32, 32) and t1.dtype == torch.float32
    assert -1.0 <= t1.min() and t1.max() <= 1.0
    assert g1.dtype == torch.int64 and g1.shape == (32, 32)
