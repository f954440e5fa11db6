"""Color-mapped PNG output for semantic change maps."""

from pathlib import Path

import numpy as np
from PIL import Image

from ..data import Palette, read_rgb, write_rgb
from ..errors import ShapeError


def render(map1, map2, mask, palette: Palette, out_dir, stem="pred"):
    """Writes ``<stem>_t1.png``, ``<stem>_t2.png`` and ``<stem>_change.png``."""
    map1, map2, mask = (np.asarray(a) for a in (map1, map2, mask))
    if not map1.shape == map2.shape == mask.shape:
        raise ShapeError("maps and mask must share one shape")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = (out / f"{stem}_t1.png", out / f"{stem}_t2.png", out / f"{stem}_change.png")
    write_rgb(paths[0], palette.encode(map1))
    write_rgb(paths[1], palette.encode(map2))
    Image.fromarray(((mask != 0) * 255).astype(np.uint8), mode="L").save(paths[2])
    return paths


def parse_label_png(path, palette: Palette):
    return palette.decode(read_rgb(path))


def parse_mask_png(path):
    with Image.open(path) as im:
        return (np.array(im.convert("L")) > 127).astype(np.int64)
