"""
Matting metrics
---------------
SAD, MSE, gradient and connectivity errors over a region (the trimap's
unknown pixels unless --whole-image). Inputs are alphas in [0, 1]; all
arithmetic is float64.

Display units: SAD, Grad and Conn are divided by 1000, MSE is in 1e-3.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import cv2
import numpy as np

from transmat.core.config import EvalConfig
from transmat.core.errors import EmptyRegionError, ShapeMismatchError
from transmat.matting.types import MattingSample, unknown_mask

GRAD_SIGMA = 1.4
CONN_STEP = 0.1
CONN_PHI = 0.15
MEAN_ID = "mean"
REPORT_FIELDS = ("sample_id", "sad", "mse", "grad", "conn", "region_pixels")


@dataclass(frozen=True)
class MetricReport:
    sample_id: str
    sad: float
    mse: float
    grad: float
    conn: float
    region_pixels: int
    category: Optional[str] = None

    def to_record(self) -> Dict[str, object]:
        record = {name: getattr(self, name) for name in REPORT_FIELDS}
        if self.category is not None:
            record["category"] = self.category
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    @classmethod
    def from_record(cls, record: Dict[str, object]) -> "MetricReport":
        return cls(
            sample_id=str(record["sample_id"]),
            sad=float(record["sad"]),
            mse=float(record["mse"]),
            grad=float(record["grad"]),
            conn=float(record["conn"]),
            region_pixels=int(record["region_pixels"]),
            category=record.get("category"),
        )


def _prepare(pred: np.ndarray, gt: np.ndarray, region: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    region = np.asarray(region, dtype=bool)
    if not (pred.shape == gt.shape == region.shape):
        raise ShapeMismatchError(
            f"Metric inputs disagree in shape: pred {pred.shape}, gt {gt.shape}, region {region.shape}"
        )
    if not region.any():
        raise EmptyRegionError("Metric region is empty.")
    return pred, gt, region


def sad(pred: np.ndarray, gt: np.ndarray, region: np.ndarray) -> float:
    pred, gt, region = _prepare(pred, gt, region)
    return float(np.abs(pred - gt)[region].sum() / 1000.0)


def mse(pred: np.ndarray, gt: np.ndarray, region: np.ndarray) -> float:
    pred, gt, region = _prepare(pred, gt, region)
    return float(((pred - gt) ** 2)[region].mean() * 1000.0)


@lru_cache(maxsize=8)
def gaussian_derivative_kernels(sigma: float = GRAD_SIGMA) -> Tuple[np.ndarray, np.ndarray]:
    """
    (hx, hy) first-order Gaussian derivative filters, truncated where the
    Gaussian falls below 1% of its peak and normalized to unit L2 norm.
    """
    epsilon = 1e-2
    half = int(np.ceil(sigma * np.sqrt(-2.0 * np.log(np.sqrt(2.0 * np.pi) * sigma * epsilon))))
    u = np.arange(-half, half + 1, dtype=np.float64)
    gauss = np.exp(-(u ** 2) / (2.0 * sigma ** 2)) / (sigma * np.sqrt(2.0 * np.pi))
    dgauss = -u * gauss / sigma ** 2
    hx = np.outer(gauss, dgauss)
    hx /= np.sqrt(np.sum(hx * hx))
    return hx, np.ascontiguousarray(hx.T)


def gradient_magnitude(plane: np.ndarray, sigma: float = GRAD_SIGMA) -> np.ndarray:
    plane = np.ascontiguousarray(plane, dtype=np.float64)
    hx, hy = gaussian_derivative_kernels(float(sigma))
    gx = cv2.filter2D(plane, cv2.CV_64F, hx, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.filter2D(plane, cv2.CV_64F, hy, borderType=cv2.BORDER_REPLICATE)
    return np.sqrt(gx ** 2 + gy ** 2)


def grad_error(pred: np.ndarray, gt: np.ndarray, region: np.ndarray, sigma: float = GRAD_SIGMA) -> float:
    pred, gt, region = _prepare(pred, gt, region)
    error = (gradient_magnitude(pred, sigma) - gradient_magnitude(gt, sigma)) ** 2
    return float(error[region].sum() / 1000.0)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest 4-connected foreground component; all False when mask is empty."""
    count, labels, stats, _ = cv2.connectedComponentsWithStats(mask.astype(np.uint8), connectivity=4)
    if count <= 1:
        return np.zeros(mask.shape, dtype=bool)
    biggest = 1 + int(np.argmax(stats[1:, cv2.CC_STAT_AREA]))
    return labels == biggest


def conn_thresholds(step: float = CONN_STEP) -> List[float]:
    """step, 2*step, ... below 1 (0.1 .. 0.9 for the default step)."""
    count = int(round(1.0 / step))
    return [round(i * step, 10) for i in range(1, count)]


def connectivity_levels(pred: np.ndarray, gt: np.ndarray, step: float = CONN_STEP) -> np.ndarray:
    """Per pixel, the last threshold at which it still belonged to the shared largest component."""
    levels = np.full(pred.shape, -1.0)
    previous = 0.0
    for threshold in conn_thresholds(step):
        omega = largest_component((pred >= threshold) & (gt >= threshold))
        levels[(levels == -1.0) & ~omega] = previous
        previous = threshold
    levels[levels == -1.0] = 1.0
    return levels


def conn_error(pred: np.ndarray, gt: np.ndarray, region: np.ndarray, step: float = CONN_STEP) -> float:
    pred, gt, region = _prepare(pred, gt, region)
    levels = connectivity_levels(pred, gt, step)
    pred_d = pred - levels
    gt_d = gt - levels
    pred_phi = 1.0 - pred_d * (pred_d >= CONN_PHI)
    gt_phi = 1.0 - gt_d * (gt_d >= CONN_PHI)
    return float(np.abs(pred_phi - gt_phi)[region].sum() / 1000.0)


def metric_region(sample: MattingSample, whole_image: bool = False) -> np.ndarray:
    if whole_image:
        return np.ones(sample.shape, dtype=bool)
    return unknown_mask(sample.trimap)


def split_evaluable(
    samples: Sequence[MattingSample], whole_image: bool = False
) -> Tuple[List[MattingSample], List[MattingSample]]:
    """(samples with a non-empty metric region, samples without one), order kept."""
    kept: List[MattingSample] = []
    empty: List[MattingSample] = []
    for sample in samples:
        (kept if metric_region(sample, whole_image).any() else empty).append(sample)
    return kept, empty


def evaluate(pred: np.ndarray, sample: MattingSample, cfg: Optional[EvalConfig] = None) -> MetricReport:
    cfg = cfg or EvalConfig()
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != sample.shape:
        raise ShapeMismatchError(f"Prediction {pred.shape} does not match sample {sample.sample_id} {sample.shape}")
    gt = sample.gt_alpha
    region = metric_region(sample, cfg.whole_image)
    return MetricReport(
        sample_id=sample.sample_id,
        sad=sad(pred, gt, region),
        mse=mse(pred, gt, region),
        grad=grad_error(pred, gt, region, cfg.grad_sigma),
        conn=conn_error(pred, gt, region, cfg.conn_step),
        region_pixels=int(region.sum()),
        category=sample.category,
    )


def mean_report(reports: Sequence[MetricReport], sample_id: str = MEAN_ID, category: Optional[str] = None) -> MetricReport:
    if not reports:
        raise EmptyRegionError("Cannot average an empty list of metric reports.")
    n = len(reports)
    return MetricReport(
        sample_id=sample_id,
        sad=float(sum(r.sad for r in reports) / n),
        mse=float(sum(r.mse for r in reports) / n),
        grad=float(sum(r.grad for r in reports) / n),
        conn=float(sum(r.conn for r in reports) / n),
        region_pixels=int(sum(r.region_pixels for r in reports)),
        category=category,
    )


def category_means(reports: Sequence[MetricReport]) -> List[MetricReport]:
    """One mean row per object category present, in sorted category order."""
    categories = sorted({r.category for r in reports if r.category is not None})
    return [
        mean_report([r for r in reports if r.category == c], sample_id=f"{MEAN_ID}:{c}", category=c)
        for c in categories
    ]


def summary_reports(reports: Sequence[MetricReport]) -> List[MetricReport]:
    return [mean_report(reports)] + category_means(reports)


def report_lines(reports: Iterable[MetricReport]) -> List[str]:
    return [r.to_json() for r in reports]


def read_reports(lines: Iterable[str]) -> List[MetricReport]:
    return [MetricReport.from_record(json.loads(line)) for line in lines if line.strip()]


def report_rows(reports: Iterable[MetricReport]) -> List[Dict[str, object]]:
    return [dict(asdict(r)) for r in reports]
