"""Bitemporal dataset I/O, synthetic scene generation and paired augmentation."""

from dataclasses import dataclass, replace
import colorsys
import json
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image
import torch
from torch.utils.data import Dataset

from .backbone import normalize_image
from .errors import ConfigError, ConsistencyError, IngestionError, PaletteError, ShapeError

SUBDIRS = ("im1", "im2", "label1", "label2")
PALETTE_FILE = "palette.json"


@dataclass(frozen=True)
class Palette:
    names: Tuple[str, ...]
    colors: Tuple[Tuple[int, int, int], ...]

    def __post_init__(self):
        if len(self.names) != len(self.colors):
            raise PaletteError("palette names and colors differ in length")
        if len(self.colors) < 3:
            raise PaletteError("palette needs no-change plus at least two classes")
        if len(set(self.colors)) != len(self.colors):
            raise PaletteError("palette colors must be unique")

    @property
    def num_classes(self):
        return len(self.colors) - 1

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        entries = doc["classes"]
        return cls(
            tuple(e["name"] for e in entries),
            tuple(tuple(int(v) for v in e["rgb"]) for e in entries),
        )

    def to_json(self, path):
        doc = {"classes": [{"name": n, "rgb": list(c)} for n, c in zip(self.names, self.colors)]}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)

    def encode(self, labels):
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() > self.num_classes):
            bad = np.argwhere((labels < 0) | (labels > self.num_classes))[0]
            raise PaletteError(
                f"label {labels[tuple(bad)]} at {tuple(int(v) for v in bad)} is not in the palette"
            )
        lut = np.array(self.colors, dtype=np.uint8)
        return lut[labels]

    def decode(self, rgb):
        rgb = np.asarray(rgb, dtype=np.uint8)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ShapeError(f"label raster must be (H, W, 3), got {rgb.shape}")
        key = (rgb[..., 0].astype(np.int64) << 16) | (rgb[..., 1].astype(np.int64) << 8) | rgb[..., 2]
        table = {(r << 16) | (g << 8) | b: i for i, (r, g, b) in enumerate(self.colors)}
        known = np.array(sorted(table), dtype=np.int64)
        pos = np.searchsorted(known, key)
        pos = np.clip(pos, 0, len(known) - 1)
        hit = known[pos] == key
        if not hit.all():
            y, x = np.argwhere(~hit)[0]
            raise PaletteError(f"unknown label color {tuple(int(v) for v in rgb[y, x])} at pixel ({y}, {x})")
        lookup = np.array([table[k] for k in known], dtype=np.int64)
        return lookup[pos]


SECOND_PALETTE = Palette(
    ("no-change", "water", "ground", "low vegetation", "tree", "building", "playground"),
    ((255, 255, 255), (0, 0, 255), (128, 128, 128), (0, 128, 0), (0, 255, 0), (128, 0, 0), (255, 0, 0)),
)


def synthetic_palette(num_classes):
    colors = [(255, 255, 255)]
    for k in range(num_classes):
        r, g, b = colorsys.hsv_to_rgb(k / num_classes, 0.85, 0.45 + 0.4 * (k % 2))
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    names = ["no-change"] + [f"class{k + 1}" for k in range(num_classes)]
    return Palette(tuple(names), tuple(colors))


@dataclass
class Sample:
    t1: np.ndarray   # (H, W, 3) uint8
    t2: np.ndarray
    gt1: np.ndarray  # (H, W) int64, 0 = no-change
    gt2: np.ndarray
    stem: str = ""

    @property
    def change(self):
        return (self.gt1 != 0).astype(np.int64)

    def validate(self):
        if self.t1.shape != self.t2.shape or self.t1.shape[:2] != self.gt1.shape or self.gt1.shape != self.gt2.shape:
            raise ShapeError(f"sample {self.stem!r}: image and label sizes disagree")
        bad = (self.gt1 != 0) != (self.gt2 != 0)
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise ConsistencyError(
                f"sample {self.stem!r}: change masks of label1/label2 disagree at pixel ({y}, {x})"
            )
        return self


def read_rgb(path):
    with Image.open(path) as im:
        return np.array(im.convert("RGB"))


def write_rgb(path, arr):
    Image.fromarray(np.ascontiguousarray(arr, dtype=np.uint8), mode="RGB").save(path)


def load_dataset(root, palette: Palette = None) -> List[Sample]:
    root = Path(root)
    if palette is None:
        if not (root / PALETTE_FILE).exists():
            raise IngestionError(f"no palette given and {root / PALETTE_FILE} does not exist")
        palette = Palette.from_json(root / PALETTE_FILE)
    for sub in SUBDIRS:
        if not (root / sub).is_dir():
            raise IngestionError(f"dataset root {root} lacks the {sub}/ directory")
    stems = {sub: {p.stem: p for p in (root / sub).iterdir() if p.suffix.lower() == ".png"} for sub in SUBDIRS}
    all_stems = sorted(set().union(*stems.values()))
    samples = []
    for stem in all_stems:
        for sub in SUBDIRS:
            if stem not in stems[sub]:
                raise IngestionError(f"stem {stem!r} has no counterpart in {sub}/")
        try:
            gt1 = palette.decode(read_rgb(stems["label1"][stem]))
            gt2 = palette.decode(read_rgb(stems["label2"][stem]))
        except PaletteError as exc:
            raise PaletteError(f"sample {stem!r}: {exc}") from None
        sample = Sample(
            t1=read_rgb(stems["im1"][stem]),
            t2=read_rgb(stems["im2"][stem]),
            gt1=gt1,
            gt2=gt2,
            stem=stem,
        )
        samples.append(sample.validate())
    return samples


LAYOUT_CELL = 2  # region boundaries fall on this pixel grid (the decoder's output stride)


def _scene(rng, n, num_classes):
    """Class layout on an n x n grid of layout cells."""
    block = n // 8
    coarse = rng.integers(0, num_classes, size=(8, 8))
    classes = np.kron(coarse, np.ones((block, block), dtype=np.int64))
    yy, xx = np.mgrid[:n, :n]
    for _ in range(rng.integers(2, 5)):
        k = rng.integers(num_classes)
        cy, cx = rng.integers(0, n, 2)
        if rng.random() < 0.5:
            radius = rng.integers(max(n // 10, 1), max(n // 4, 2))
            classes[(yy - cy) ** 2 + (xx - cx) ** 2 < radius**2] = k
        else:
            h, w = rng.integers(max(n // 8, 1), max(n // 3, 2), 2)
            classes[cy : cy + h, cx : cx + w] = k
    return classes


def make_synthetic_sample(rng, size, num_classes, change_fraction, stem=""):
    n = size // LAYOUT_CELL
    classes1 = _scene(rng, n, num_classes)
    classes2 = classes1.copy()
    changed = np.zeros((n, n), dtype=bool)
    target = change_fraction * n * n
    while changed.sum() < target:
        h, w = rng.integers(max(n // 8, 1), n // 4 + 1, 2)
        y, x = rng.integers(0, n - h + 1), rng.integers(0, n - w + 1)
        shift = rng.integers(1, num_classes)
        region = (slice(y, y + h), slice(x, x + w))
        classes2[region] = (classes1[region] + shift) % num_classes
        changed[region] = True

    def up(a):
        return np.repeat(np.repeat(a, LAYOUT_CELL, axis=0), LAYOUT_CELL, axis=1)

    classes1, classes2, changed = up(classes1), up(classes2), up(changed)

    palette_rgb = np.array(synthetic_palette(num_classes).colors[1:], dtype=np.float64)
    colors = np.clip(palette_rgb * 0.8 + 30, 0, 255)
    # isotropic per-class texture: noise whose strength depends on the class
    texture_std = 4.0 + 10.0 * np.arange(num_classes) / max(num_classes - 1, 1)

    def render(cls):
        base = colors[cls]
        gain = rng.uniform(0.85, 1.15)
        offset = rng.uniform(-15, 15, size=3)
        tex = rng.normal(0.0, 1.0, size=cls.shape) * texture_std[cls]
        img = base * gain + offset + tex[..., None] + rng.normal(0, 4, size=base.shape)
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)

    gt1 = np.where(changed, classes1 + 1, 0).astype(np.int64)
    gt2 = np.where(changed, classes2 + 1, 0).astype(np.int64)
    return Sample(render(classes1), render(classes2), gt1, gt2, stem)


def gen_synthetic(out_dir, seed=0, count=8, size=64, num_classes=6, change_fraction=0.2) -> Path:
    if size <= 0 or size % 32:
        raise ConfigError(f"size must be a positive multiple of 32, got {size}")
    if not 0.0 < change_fraction < 1.0:
        raise ConfigError(f"change_fraction must lie in (0, 1), got {change_fraction}")
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
    if count < 1:
        raise ConfigError(f"count must be positive, got {count}")
    out = Path(out_dir)
    for sub in SUBDIRS:
        (out / sub).mkdir(parents=True, exist_ok=True)
    palette = synthetic_palette(num_classes)
    palette.to_json(out / PALETTE_FILE)
    children = np.random.SeedSequence(seed).spawn(count)
    for i, ss in enumerate(children):
        stem = f"{i:05d}"
        s = make_synthetic_sample(np.random.default_rng(ss), size, num_classes, change_fraction, stem)
        write_rgb(out / "im1" / f"{stem}.png", s.t1)
        write_rgb(out / "im2" / f"{stem}.png", s.t2)
        write_rgb(out / "label1" / f"{stem}.png", palette.encode(s.gt1))
        write_rgb(out / "label2" / f"{stem}.png", palette.encode(s.gt2))
    return out


def apply_geometric(sample: Sample, rot90=0, hflip=False, vflip=False) -> Sample:
    def tf(a):
        if hflip:
            a = a[:, ::-1]
        if vflip:
            a = a[::-1, :]
        return np.ascontiguousarray(np.rot90(a, rot90, axes=(0, 1)))

    return replace(sample, t1=tf(sample.t1), t2=tf(sample.t2), gt1=tf(sample.gt1), gt2=tf(sample.gt2))


def augment(sample: Sample, rng: np.random.Generator) -> Sample:
    """Random flips and right-angle rotation, applied identically to all four grids."""
    rot90 = int(rng.integers(4))
    hflip = bool(rng.random() < 0.5)
    vflip = bool(rng.random() < 0.5)
    return apply_geometric(sample, rot90, hflip, vflip)


def to_tensors(sample: Sample):
    t1 = normalize_image(torch.from_numpy(sample.t1).permute(2, 0, 1))
    t2 = normalize_image(torch.from_numpy(sample.t2).permute(2, 0, 1))
    return t1, t2, torch.from_numpy(sample.gt1), torch.from_numpy(sample.gt2)


class SCDDataset(Dataset):
    """Torch view over samples; augmentation rng is keyed by (seed, epoch, index)."""

    def __init__(self, samples: Sequence[Sample], augment=False, seed=0):
        self.samples = list(samples)
        self.augment = augment
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch):
        self.epoch = epoch

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, index):
        sample = self.samples[index]
        if self.augment:
            rng = np.random.default_rng([self.seed, self.epoch, index])
            sample = augment(sample, rng)
        return to_tensors(sample)
