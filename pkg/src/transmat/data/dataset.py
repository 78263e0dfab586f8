"""
Dataset ingestion
-----------------
Directory layout:

  root/
    fg/            foreground images (PNG)
    alpha/         alpha mattes, same basenames as fg/
    bg/            background images
    trimap/        optional fixed trimaps, same basenames as fg/
    categories.txt optional "<basename> <TT|TP>" lines

`load_manifest` pairs fg/alpha files by basename; `sample_stream` turns a
manifest into a deterministic stream of composited samples. Every sample is
a pure function of (manifest, config, seed, index), so the stream is the
same for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import torch

from transmat.core.concurrency import parallel_map, prefetch_map
from transmat.core.config import AugmentationConfig
from transmat.core.errors import DataError, DatasetError, NoUnknownRegionError
from transmat.core.logger import log
from transmat.core.notifier import warning
from transmat.data.augment import apply_augmentation, draw_params
from transmat.data.composition import compose_backgrounds, composite, fit_background
from transmat.data.trimap import generate_trimap, unknown_centered_crop
from transmat.matting.imageio import read_alpha, read_image, read_trimap
from transmat.matting.types import UNK, MattingSample

IMAGE_SUFFIXES = {".png"}
CATEGORIES = ("TT", "TP")
SPLITS = ("train", "eval")
INDEX_HEADER = "# transmat index v1"
# consecutive samples without an unknown region tolerated before giving up
MAX_CONSECUTIVE_SKIPS = 100


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    foreground: Path
    alpha: Path
    trimap: Optional[Path] = None
    category: Optional[str] = None


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: Tuple[ManifestEntry, ...]
    backgrounds: Tuple[Path, ...]
    warnings: Tuple[str, ...] = field(default_factory=tuple)


def _list_images(directory: Path) -> Dict[str, Path]:
    return {
        p.stem: p
        for p in sorted(directory.iterdir())
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    }


def _read_categories(path: Path, notes: List[str]) -> Dict[str, str]:
    categories: Dict[str, str] = {}
    if not path.exists():
        return categories
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1].upper() not in CATEGORIES:
            notes.append(f"categories.txt:{lineno}: expected '<basename> <TT|TP>', got '{line}'")
            continue
        categories[parts[0]] = parts[1].upper()
    return categories


def _verify_entry(entry: ManifestEntry) -> Optional[str]:
    try:
        fg = read_image(entry.foreground)
        alpha = read_alpha(entry.alpha)
        if fg.shape[:2] != alpha.shape:
            return f"{entry.name}: foreground {fg.shape[:2]} and alpha {alpha.shape} differ in shape"
        if entry.trimap is not None:
            trimap = read_trimap(entry.trimap)
            if trimap.shape != alpha.shape:
                return f"{entry.name}: trimap {trimap.shape} and alpha {alpha.shape} differ in shape"
    except DataError as exc:
        return f"{entry.name}: {exc}"
    return None


def load_manifest(
    root: Path,
    require_backgrounds: bool = True,
    verify: bool = True,
    workers: Optional[int] = None,
) -> DatasetManifest:
    """
    Pair fg/ and alpha/ files by basename. Unmatched or unreadable files are
    skipped with a warning recorded on the manifest.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"Dataset root not found: {root}")
    for sub in ("fg", "alpha") + (("bg",) if require_backgrounds else ()):
        if not (root / sub).is_dir():
            raise DatasetError(f"Missing directory: {root / sub}")

    notes: List[str] = []
    foregrounds = _list_images(root / "fg")
    alphas = _list_images(root / "alpha")
    trimaps = _list_images(root / "trimap") if (root / "trimap").is_dir() else {}
    categories = _read_categories(root / "categories.txt", notes)

    for name in sorted(set(foregrounds) - set(alphas)):
        notes.append(f"fg/{foregrounds[name].name} has no alpha/ counterpart; skipped")
    for name in sorted(set(alphas) - set(foregrounds)):
        notes.append(f"alpha/{alphas[name].name} has no fg/ counterpart; skipped")

    entries = [
        ManifestEntry(name, foregrounds[name], alphas[name], trimaps.get(name), categories.get(name))
        for name in sorted(set(foregrounds) & set(alphas))
    ]

    if verify and entries:
        problems = parallel_map(_verify_entry, entries, workers=workers)
        kept = []
        for entry, problem in zip(entries, problems):
            if problem:
                notes.append(f"{problem}; skipped")
            else:
                kept.append(entry)
        entries = kept

    backgrounds = tuple(_list_images(root / "bg").values()) if (root / "bg").is_dir() else ()

    for note in notes:
        log(note, style="yellow", verbose_only=True)
    if not entries:
        raise DatasetError(f"No valid foreground/alpha pairs under {root}")
    if require_backgrounds and not backgrounds:
        raise DatasetError(f"Zero backgrounds in {root / 'bg'}; training needs at least one")
    return DatasetManifest(root=root, entries=tuple(entries), backgrounds=backgrounds, warnings=tuple(notes))


def _rel(path: Optional[Path], root: Path) -> str:
    if path is None:
        return "-"
    try:
        return path.relative_to(root).as_posix()
    except ValueError:
        return str(path)


def write_index(manifest: DatasetManifest, path: Path):
    """Plain-text manifest cache, one tab-separated entry per line."""
    lines = [INDEX_HEADER, f"root\t{manifest.root}"]
    for entry in manifest.entries:
        lines.append(
            "\t".join([
                "pair",
                entry.name,
                _rel(entry.foreground, manifest.root),
                _rel(entry.alpha, manifest.root),
                _rel(entry.trimap, manifest.root),
                entry.category or "-",
            ])
        )
    for bg in manifest.backgrounds:
        lines.append(f"bg\t{_rel(bg, manifest.root)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_index(path: Path) -> DatasetManifest:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise DatasetError(f"Index file not found: {path}")
    if not lines or lines[0] != INDEX_HEADER:
        raise DatasetError(f"{path}: not a transmat index file")

    root: Optional[Path] = None
    entries: List[ManifestEntry] = []
    backgrounds: List[Path] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        kind = parts[0]
        if kind == "root" and len(parts) == 2:
            root = Path(parts[1])
        elif kind == "pair" and len(parts) == 6 and root is not None:
            _, name, fg, alpha, trimap, category = parts
            entries.append(
                ManifestEntry(
                    name,
                    root / fg,
                    root / alpha,
                    None if trimap == "-" else root / trimap,
                    None if category == "-" else category,
                )
            )
        elif kind == "bg" and len(parts) == 2 and root is not None:
            backgrounds.append(root / parts[1])
        else:
            raise DatasetError(f"{path}:{lineno}: malformed index line '{line}'")
    if root is None or not entries:
        raise DatasetError(f"{path}: index lists no entries")
    return DatasetManifest(root=root, entries=tuple(entries), backgrounds=tuple(backgrounds))


def open_dataset(path: Path, require_backgrounds: bool = True, workers: Optional[int] = None) -> DatasetManifest:
    """A dataset directory, or an index file written by write_index."""
    path = Path(path)
    if path.is_file():
        return read_index(path)
    return load_manifest(path, require_backgrounds=require_backgrounds, workers=workers)


def sample_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def _load_pair(entry: ManifestEntry) -> Tuple[np.ndarray, np.ndarray]:
    return read_image(entry.foreground), read_alpha(entry.alpha)


def _build_sample(entry: ManifestEntry, fg, alpha, bg, trimap, sample_id: str) -> MattingSample:
    bg = fit_background(bg, *alpha.shape)
    return MattingSample(
        image=composite(fg, bg, alpha),
        trimap=trimap,
        gt_alpha=alpha,
        gt_foreground=fg,
        gt_background=bg,
        sample_id=sample_id,
        category=entry.category,
    )


def train_sample(manifest: DatasetManifest, cfg: AugmentationConfig, index: int) -> MattingSample:
    """The index-th training sample: random pairing, augmentation and crop."""
    entries = manifest.entries
    epoch, position = divmod(index, len(entries))
    order = sample_rng(cfg.seed, epoch).permutation(len(entries))
    entry = entries[int(order[position])]
    rng = sample_rng(cfg.seed, epoch, position)

    fg, alpha = _load_pair(entry)
    bg = read_image(manifest.backgrounds[int(rng.integers(len(manifest.backgrounds)))])
    params = draw_params(cfg, rng)
    trimap = generate_trimap(alpha, params.erode_radius, params.dilate_radius)
    sample = _build_sample(entry, fg, alpha, bg, trimap, f"{entry.name}@{index}")
    sample = apply_augmentation(sample, params)
    return unknown_centered_crop(sample, cfg.crop_size, rng)


def eval_samples(manifest: DatasetManifest, cfg: AugmentationConfig) -> List[Tuple[int, int]]:
    return compose_backgrounds(len(manifest.entries), len(manifest.backgrounds), cfg.eval_backgrounds_per_fg)


def eval_sample(manifest: DatasetManifest, cfg: AugmentationConfig, pair: Tuple[int, int], repeat: int) -> MattingSample:
    """Fixed composition, dataset trimap when shipped, else a trimap at the eval radius."""
    fg_index, bg_index = pair
    entry = manifest.entries[fg_index]
    fg, alpha = _load_pair(entry)
    if entry.trimap is not None:
        trimap = read_trimap(entry.trimap)
    else:
        trimap = generate_trimap(alpha, cfg.eval_radius, cfg.eval_radius)
    sample_id = entry.name if cfg.eval_backgrounds_per_fg == 1 else f"{entry.name}#{repeat}"
    return _build_sample(entry, fg, alpha, read_image(manifest.backgrounds[bg_index]), trimap, sample_id)


def _or_skip(func, *args) -> Tuple[Optional[MattingSample], Optional[str]]:
    try:
        return func(*args), None
    except NoUnknownRegionError as exc:
        return None, str(exc)


def sample_stream(
    manifest: DatasetManifest,
    cfg: AugmentationConfig,
    split: str = "train",
    workers: Optional[int] = None,
    limit: Optional[int] = None,
) -> Iterator[MattingSample]:
    """
    Deterministic stream of samples. `train` is infinite unless `limit` is
    given; `eval` yields every fixed composition once. Samples without an
    unknown region are skipped with a warning.
    """
    if split not in SPLITS:
        raise DatasetError(f"Unknown split '{split}'. Allowed: {', '.join(SPLITS)}")
    if not manifest.backgrounds:
        raise DatasetError("The sample stream needs at least one background image.")

    if split == "train":
        items: Iterable = count()
        job = lambda i: _or_skip(train_sample, manifest, cfg, i)
    else:
        per_fg = cfg.eval_backgrounds_per_fg
        items = list(enumerate(eval_samples(manifest, cfg)))
        job = lambda item: _or_skip(eval_sample, manifest, cfg, item[1], item[0] % per_fg)

    emitted = 0
    consecutive_skips = 0
    for sample, reason in prefetch_map(job, items, workers=workers):
        if sample is None:
            warning(f"Skipping sample: {reason}")
            consecutive_skips += 1
            if consecutive_skips >= MAX_CONSECUTIVE_SKIPS:
                raise DatasetError(f"{consecutive_skips} consecutive samples had no unknown region; check the alphas")
            continue
        consecutive_skips = 0
        yield sample
        emitted += 1
        if limit is not None and emitted >= limit:
            return


@dataclass
class MattingBatch:
    """Channel-first float tensors of a batch; trimap holds label indices."""

    image: torch.Tensor
    trimap: torch.Tensor
    alpha: torch.Tensor
    foreground: torch.Tensor
    background: torch.Tensor
    sample_ids: List[str]

    @property
    def unknown(self) -> torch.Tensor:
        return (self.trimap == UNK).unsqueeze(1)

    def to(self, dtype: torch.dtype) -> "MattingBatch":
        return MattingBatch(
            self.image.to(dtype), self.trimap, self.alpha.to(dtype),
            self.foreground.to(dtype), self.background.to(dtype), self.sample_ids,
        )


def _rgb(planes: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack([np.ascontiguousarray(p.transpose(2, 0, 1)) for p in planes]).astype(np.float32))


def collate(samples: Sequence[MattingSample]) -> MattingBatch:
    shapes = {s.shape for s in samples}
    if len(shapes) != 1:
        raise DatasetError(f"Cannot batch samples of different shapes: {sorted(shapes)}")
    return MattingBatch(
        image=_rgb([s.image for s in samples]),
        trimap=torch.from_numpy(np.stack([s.trimap for s in samples]).astype(np.int64)),
        alpha=torch.from_numpy(np.stack([s.gt_alpha for s in samples]).astype(np.float32)).unsqueeze(1),
        foreground=_rgb([s.gt_foreground for s in samples]),
        background=_rgb([s.gt_background for s in samples]),
        sample_ids=[s.sample_id for s in samples],
    )


def batches(stream: Iterator[MattingSample], batch_size: int) -> Iterator[MattingBatch]:
    chunk: List[MattingSample] = []
    for sample in stream:
        chunk.append(sample)
        if len(chunk) == batch_size:
            yield collate(chunk)
            chunk = []
    if chunk:
        yield collate(chunk)
