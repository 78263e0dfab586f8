# transmat/commands/synthetic.py
"""
Make-Synthetic Command Module
-----------------------------
Write a small self-contained dataset of seeded blobs and backgrounds.
"""

import time
from pathlib import Path

import typer

from transmat.core.errors import TransmatError
from transmat.core.notifier import fail, success, timed_summary
from transmat.data.dataset import load_manifest, write_index
from transmat.data.synthetic import make_synthetic_dataset

INDEX_NAME = "index.txt"


def make_synthetic_command(
    out: Path = typer.Option(..., "--out", "-o", help="Dataset directory to create."),
    count: int = typer.Option(8, "--count", "-n", help="Number of foregrounds."),
    size: int = typer.Option(64, "--size", help="Side of every image."),
    backgrounds: int = typer.Option(4, "--backgrounds", help="Number of background images."),
    seed: int = typer.Option(0, "--seed", help="Generator seed."),
    with_trimaps: bool = typer.Option(False, "--with-trimaps", help="Also write trimap/ from the alphas."),
    radius: int = typer.Option(3, "--radius", help="Erosion/dilation radius of written trimaps."),
    tt_fraction: float = typer.Option(0.5, "--tt-fraction", help="Share of totally transparent objects."),
):
    """
    Create fg/, alpha/, bg/, categories.txt and index.txt under OUT.
    """
    started_at = time.perf_counter()
    try:
        fgs, bgs = make_synthetic_dataset(out, count, size, backgrounds, seed, with_trimaps, radius, tt_fraction)
        write_index(load_manifest(out), out / INDEX_NAME)
    except TransmatError as exc:
        fail(exc)

    success(f"Synthetic dataset written to {out}")
    timed_summary(f"Generated {fgs} foreground(s) and {bgs} background(s)", time.perf_counter() - started_at)
