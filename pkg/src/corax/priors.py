"""Anatomical prior masks: where each abnormality class plausibly appears.

The atlas is the deterministic grounder's stand-in for learned spatial
attention. Masks are coarse geometric fixtures, not clinical claims: a
heart ellipse for cardiomegaly, basal bands for effusion, bands above
them for atelectasis, mid/upper lung bands for opacity, a central
perihilar box for edema, and an upper-right patch for consolidation.
Shipped as editable 128x128 PGM files plus a manifest; the geometry
below regenerates them bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from corax.errors import ConfigurationError, IOFailure
from corax.gaze import BinaryMask
from corax.images import mask_to_u8, read_pgm, write_pgm
from corax.labeling import Abnormality

CANONICAL_RESOLUTION = 128


@dataclass(frozen=True)
class AnatomicalPrior:
    abnormality: Abnormality
    mask: BinaryMask

    def value_at(self, x_norm: float, y_norm: float) -> float:
        px = min(int(x_norm * self.mask.width), self.mask.width - 1)
        py = min(int(y_norm * self.mask.height), self.mask.height - 1)
        return 1.0 if self.mask.mask[py, px] else 0.0


PriorAtlas = dict[Abnormality, AnatomicalPrior]


def _ellipse(size: int, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    ys = (np.arange(size) + 0.5) / size
    xs = (np.arange(size) + 0.5) / size
    gx, gy = np.meshgrid(xs, ys)
    return ((gx - cx) / rx) ** 2 + ((gy - cy) / ry) ** 2 <= 1.0


def _box(size: int, x0: float, x1: float, y0: float, y1: float) -> np.ndarray:
    ys = (np.arange(size) + 0.5) / size
    xs = (np.arange(size) + 0.5) / size
    gx, gy = np.meshgrid(xs, ys)
    return (gx >= x0) & (gx <= x1) & (gy >= y0) & (gy <= y1)


def build_default_masks(size: int = CANONICAL_RESOLUTION) -> dict[Abnormality, np.ndarray]:
    heart = _ellipse(size, 0.55, 0.70, 0.15, 0.13)
    effusion = _box(size, 0.10, 0.40, 0.74, 0.92) | _box(size, 0.60, 0.90, 0.74, 0.92)
    atelectasis = _box(size, 0.10, 0.40, 0.58, 0.74) | _box(size, 0.60, 0.90, 0.58, 0.74)
    opacity = _box(size, 0.08, 0.44, 0.14, 0.56) | _box(size, 0.56, 0.92, 0.14, 0.56)
    edema = _box(size, 0.30, 0.70, 0.26, 0.56)
    consolidation = _ellipse(size, 0.74, 0.30, 0.12, 0.10)
    return {
        Abnormality.CARDIOMEGALY: heart,
        Abnormality.PLEURAL_EFFUSION: effusion,
        Abnormality.ATELECTASIS: atelectasis,
        Abnormality.LUNG_OPACITY: opacity,
        Abnormality.EDEMA: edema,
        Abnormality.CONSOLIDATION: consolidation,
    }


def save_atlas(directory: str | Path, masks: dict[Abnormality, np.ndarray]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"resolution": None, "masks": {}}
    for abn, mask in sorted(masks.items(), key=lambda kv: kv[0].value):
        if manifest["resolution"] is None:
            manifest["resolution"] = [mask.shape[1], mask.shape[0]]
        name = f"{abn.value}.pgm"
        binary = BinaryMask(width=mask.shape[1], height=mask.shape[0], mask=mask)
        (directory / name).write_bytes(write_pgm(mask_to_u8(binary)))
        manifest["masks"][abn.value] = name
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_atlas(directory: str | Path) -> PriorAtlas:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise IOFailure(f"prior atlas manifest not found at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    atlas: PriorAtlas = {}
    for name, filename in manifest["masks"].items():
        abn = Abnormality(name)
        pixels = read_pgm((directory / filename).read_bytes())
        mask = BinaryMask(width=pixels.shape[1], height=pixels.shape[0], mask=pixels > 127)
        if mask.pixel_count == 0:
            raise ConfigurationError(f"prior mask for {name} is empty")
        atlas[abn] = AnatomicalPrior(abnormality=abn, mask=mask)
    return atlas


@lru_cache(maxsize=1)
def default_atlas() -> PriorAtlas:
    """The atlas shipped as package data."""
    base = resources.files("corax").joinpath("data/priors")
    manifest = json.loads(base.joinpath("manifest.json").read_text("utf-8"))
    atlas: PriorAtlas = {}
    for name, filename in manifest["masks"].items():
        abn = Abnormality(name)
        pixels = read_pgm(base.joinpath(filename).read_bytes())
        mask = BinaryMask(width=pixels.shape[1], height=pixels.shape[0], mask=pixels > 127)
        atlas[abn] = AnatomicalPrior(abnormality=abn, mask=mask)
    return atlas
