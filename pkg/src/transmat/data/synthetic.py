"""
Synthetic dataset
-----------------
Self-contained, seeded foregrounds and backgrounds in the on-disk dataset
layout, for tests and desk-scale training runs.

Two object categories are produced:
 - TP (partially transparent): an opaque core with a soft, blurred rim
 - TT (totally transparent): a translucent body that never reaches alpha 1
"""

from __future__ import annotations

from pathlib import Path
from typing import Tuple

import cv2
import numpy as np

from transmat.core.errors import DatasetError
from transmat.data.composition import composite
from transmat.data.dataset import sample_rng
from transmat.data.trimap import generate_trimap
from transmat.matting.imageio import write_alpha, write_image, write_trimap
from transmat.matting.types import MattingSample


def _smooth_colour_field(rng: np.random.Generator, size: int) -> np.ndarray:
    """Low-frequency RGB field in [0, 1]."""
    coarse = rng.random((4, 4, 3)).astype(np.float32)
    field = cv2.resize(coarse, (size, size), interpolation=cv2.INTER_CUBIC)
    return np.clip(field, 0.0, 1.0)


def synthetic_background(rng: np.random.Generator, size: int) -> np.ndarray:
    background = _smooth_colour_field(rng, size)
    for _ in range(int(rng.integers(2, 6))):
        x0, y0 = (int(v) for v in rng.integers(0, size, 2))
        x1, y1 = (int(v) for v in rng.integers(0, size, 2))
        colour = tuple(float(c) for c in rng.random(3))
        cv2.rectangle(background, (x0, y0), (x1, y1), colour, thickness=-1)
    return np.clip(cv2.GaussianBlur(background, (3, 3), 0), 0.0, 1.0).astype(np.float32)


def synthetic_alpha(rng: np.random.Generator, size: int, category: str) -> np.ndarray:
    """Elliptical blob with a blurred rim, kept clear of the border."""
    center = (int(rng.integers(size // 3, 2 * size // 3 + 1)), int(rng.integers(size // 3, 2 * size // 3 + 1)))
    axes = (int(rng.integers(size // 8 + 1, size // 4 + 1)), int(rng.integers(size // 8 + 1, size // 4 + 1)))
    angle = float(rng.uniform(0, 180))

    plane = np.zeros((size, size), np.float32)
    cv2.ellipse(plane, center, axes, angle, 0, 360, 1.0, thickness=-1)
    blur = 2 * int(rng.integers(1, 3)) + 1
    plane = cv2.GaussianBlur(plane, (blur, blur), 0)
    if category == "TT":
        plane *= float(rng.uniform(0.2, 0.7))
    else:
        plane[plane >= 0.999] = 1.0
    # the blur leaves round-off far from the blob; background must be exactly 0
    plane[plane < 1e-4] = 0.0
    return np.clip(plane, 0.0, 1.0).astype(np.float32)


def synthetic_sample(
    rng: np.random.Generator,
    size: int = 64,
    category: str = "TP",
    radius: int = 3,
    sample_id: str = "",
) -> MattingSample:
    """One composited sample, fully in memory."""
    alpha = synthetic_alpha(rng, size, category)
    fg = _smooth_colour_field(rng, size)
    bg = synthetic_background(rng, size)
    return MattingSample(
        image=composite(fg, bg, alpha),
        trimap=generate_trimap(alpha, radius, radius),
        gt_alpha=alpha,
        gt_foreground=fg,
        gt_background=bg,
        sample_id=sample_id,
        category=category,
    )


def make_synthetic_dataset(
    root: Path,
    count: int = 8,
    size: int = 64,
    backgrounds: int = 4,
    seed: int = 0,
    with_trimaps: bool = False,
    radius: int = 3,
    tt_fraction: float = 0.5,
) -> Tuple[int, int]:
    """
    Write fg/, alpha/, bg/ and categories.txt under root (plus trimap/ when
    requested). Returns (foregrounds, backgrounds) written.
    """
    if count < 1 or backgrounds < 1:
        raise DatasetError("A synthetic dataset needs at least one foreground and one background.")
    root = Path(root)
    n_tt = int(round(count * tt_fraction))
    categories = []
    for i in range(count):
        rng = sample_rng(seed, 0, i)
        category = "TT" if i < n_tt else "TP"
        name = f"obj_{i:04d}"
        write_image(root / "fg" / f"{name}.png", _smooth_colour_field(rng, size))
        alpha = synthetic_alpha(rng, size, category)
        write_alpha(root / "alpha" / f"{name}.png", alpha)
        if with_trimaps:
            # regenerate from the quantized alpha as it will be read back
            stored = np.round(alpha * 65535.0) / 65535.0
            write_trimap(root / "trimap" / f"{name}.png", generate_trimap(stored, radius, radius))
        categories.append(f"{name} {category}")
    for j in range(backgrounds):
        write_image(root / "bg" / f"bg_{j:04d}.png", synthetic_background(sample_rng(seed, 1, j), size))
    (root / "categories.txt").write_text("\n".join(categories) + "\n", encoding="utf-8")
    return count, backgrounds
