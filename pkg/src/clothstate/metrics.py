"""Curve comparison and the fold-prediction evaluation harness."""

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .disk import compute_disk
from .errors import DimensionMismatch, ExtractionError, InvalidFold
from .extract import DEFAULT_REL_THRESHOLD, FitParams, extract_close
from .geometry import DEFAULT_EPS, BorderCurve, reflect_points_2d, resample_border, wrap_angle
from .synth import DEFAULT_LAYER_HEIGHT

TWO_PI = 2 * np.pi
_ARC_TOL = 1e-9


def point_at_angle(border, angle):
    """Border point whose arc-length fraction is ``angle / 2 pi``."""
    total = border.arc_length()
    pos = np.mod(angle, TWO_PI) / TWO_PI * total
    cum = np.concatenate([border.cumulative_arc_length(), [total]])
    k = int(np.clip(np.searchsorted(cum, pos, side="right") - 1, 0, border.n - 1))
    starts, ends = border.segment_endpoints()
    t = (pos - cum[k]) / (cum[k + 1] - cum[k])
    return starts[k] + t * (ends[k] - starts[k])


def folded_mask(border, f1, f2):
    """Vertices strictly inside the anticlockwise arc from ``f1`` to ``f2``."""
    total = border.arc_length()
    angle = TWO_PI * border.cumulative_arc_length() / total
    span = np.mod(f2 - f1, TWO_PI)
    rel = np.mod(angle - f1, TWO_PI)
    return (rel > _ARC_TOL) & (rel < span - _ARC_TOL)


def predict_end_border(start, close, layer_height=DEFAULT_LAYER_HEIGHT):
    """Fold ``start`` along the single fold of ``close``.

    The fold line joins the two border points at ``f1`` and ``f2``; vertices
    on the anticlockwise arc between them are mirrored across it and lifted.
    """
    if len(close.folds) != 1:
        raise InvalidFold(f"prediction needs exactly one fold, got {len(close.folds)}")
    f1, f2 = close.folds[0]
    if np.isclose(wrap_angle(f1 - f2), 0.0, atol=1e-12):
        raise InvalidFold("fold endpoints coincide")
    p1, p2 = point_at_angle(start, f1), point_at_angle(start, f2)
    direction = p2 - p1
    if np.hypot(direction[0], direction[1]) <= 1e-12:
        raise InvalidFold("fold endpoints map to the same border point")
    mask = folded_mask(start, f1, f2)
    v = start.vertices.copy()
    v[mask] = reflect_points_2d(v[mask], p1, direction)
    v[mask, 2] += layer_height
    return BorderCurve(v)


def _aligned_copies(b):
    """All cyclic shifts of ``b`` in both traversal directions, keeping the
    shifted start vertex first: shape ``(2n, n, 3)``."""
    v = b.vertices
    n = len(v)
    idx = (np.arange(n)[None, :] + np.arange(n)[:, None]) % n
    fwd = v[idx]
    rev = v[(np.arange(n)[:, None] - np.arange(n)[None, :]) % n]
    return np.concatenate([fwd, rev])


def rmse_curves(a, b):
    """Index-matched RMSE after uniform resampling, minimised over cyclic
    shift and direction."""
    if a.n != b.n:
        raise DimensionMismatch(f"curves have {a.n} and {b.n} vertices")
    ra, rb = resample_border(a, a.n), resample_border(b, b.n)
    copies = _aligned_copies(rb)
    sq = np.sum((copies - ra.vertices[None]) ** 2, axis=2).mean(axis=1)
    return float(np.sqrt(sq.min()))


@njit(cache=True)
def _frechet_table(dist):
    p, q = dist.shape
    ret = np.empty((p, q))
    ret[0, 0] = dist[0, 0]
    for i in range(1, p):
        ret[i, 0] = max(ret[i - 1, 0], dist[i, 0])
    for j in range(1, q):
        ret[0, j] = max(ret[0, j - 1], dist[0, j])
    for i in range(1, p):
        for j in range(1, q):
            ret[i, j] = max(min(ret[i - 1, j], ret[i, j - 1], ret[i - 1, j - 1]), dist[i, j])
    return ret[p - 1, q - 1]


def frechet_open(p, q):
    """Discrete Frechet distance between two point sequences."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(p) == 0 or len(q) == 0:
        raise ValueError("curves must be non-empty")
    dist = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
    return float(_frechet_table(dist))


def frechet_discrete(a, b, closed=True):
    """Discrete Frechet distance.

    For closed curves each traversal returns to its start vertex, and the
    distance is minimised over the start vertex and direction of ``b``.
    Accepts :class:`BorderCurve` or plain point arrays.
    """
    pa = a.vertices if isinstance(a, BorderCurve) else np.asarray(a, dtype=float)
    pb = b.vertices if isinstance(b, BorderCurve) else np.asarray(b, dtype=float)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("curves must be non-empty")
    if not closed:
        return frechet_open(pa, pb)
    m = len(pb)
    loop_a = np.vstack([pa, pa[:1]])
    best = np.inf
    for order in (pb, pb[::-1]):
        for s in range(m):
            rolled = np.roll(order, -s, axis=0)
            best = min(best, frechet_open(loop_a, np.vstack([rolled, rolled[:1]])))
    return float(best)


@dataclass
class SampleResult:
    sample_id: int
    shape: str
    status: str
    rmse: float = float("nan")
    frechet: float = float("nan")
    fold_error: float = float("nan")
    oriented: bool = False
    close: dict = None

    def to_dict(self):
        d = dict(self.__dict__)
        for k in ("rmse", "frechet", "fold_error"):
            if not np.isfinite(d[k]):
                d[k] = None
        return d


@dataclass
class EvalReport:
    samples: list
    config: dict = field(default_factory=dict)

    @property
    def successes(self):
        return [s for s in self.samples if s.status == "ok"]

    def failure_counts(self):
        counts = {}
        for s in self.samples:
            if s.status != "ok":
                counts[s.status] = counts.get(s.status, 0) + 1
        return dict(sorted(counts.items()))

    def failure_rate(self):
        return 1.0 - len(self.successes) / len(self.samples) if self.samples else 0.0

    def _stat(self, attr):
        vals = np.array([getattr(s, attr) for s in self.successes], dtype=float)
        if len(vals) == 0:
            return {"mean": None, "var": None}
        return {"mean": float(vals.mean()), "var": float(vals.var())}

    def summary(self):
        ok = self.successes
        return {
            "n_samples": len(self.samples),
            "n_ok": len(ok),
            "failure_rate": self.failure_rate(),
            "failures": self.failure_counts(),
            "rmse": self._stat("rmse"),
            "frechet": self._stat("frechet"),
            "fold_error": self._stat("fold_error"),
            "orientation_accuracy": (float(np.mean([s.oriented for s in ok])) if ok else None),
        }

    def to_json(self):
        return json.dumps({
            "config": self.config,
            "summary": self.summary(),
            "samples": [s.to_dict() for s in self.samples],
        }, indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample_id", "shape", "rmse", "frechet", "status"])
        for s in self.samples:
            w.writerow([s.sample_id, s.shape,
                        "" if not np.isfinite(s.rmse) else repr(s.rmse),
                        "" if not np.isfinite(s.frechet) else repr(s.frechet),
                        s.status])
        return buf.getvalue()


def fold_endpoint_error(pred, gt):
    """Mean angular error of the two ordered fold endpoints."""
    return float(np.mean([abs(wrap_angle(pred[0] - gt[0])), abs(wrap_angle(pred[1] - gt[1]))]))


def is_oriented(pred, gt):
    """True when ``pred`` is closer to ``gt`` in its given order than swapped."""
    straight = fold_endpoint_error(pred, gt)
    swapped = fold_endpoint_error((pred[1], pred[0]), gt)
    return straight < swapped


def evaluate_sample(sample_id, sample, p=FitParams(), eps=DEFAULT_EPS,
                    rel_threshold=DEFAULT_REL_THRESHOLD, layer_height=DEFAULT_LAYER_HEIGHT):
    shape = sample.meta.get("shape", "")
    try:
        d0, d1 = compute_disk(sample.start, eps), compute_disk(sample.end, eps)
        close = extract_close(d0, d1, p, rel_threshold)
        predicted = predict_end_border(sample.start, close, layer_height)
    except ExtractionError as exc:
        return SampleResult(sample_id, shape, type(exc).__name__)
    pred = close.folds[0]
    return SampleResult(
        sample_id, shape, "ok",
        rmse=rmse_curves(predicted, sample.end),
        frechet=frechet_discrete(predicted, sample.end),
        fold_error=fold_endpoint_error(pred, sample.gt_fold),
        oriented=is_oriented(pred, sample.gt_fold),
        close=close.to_dict(),
    )


def _evaluate_star(args):
    return evaluate_sample(*args)


def worker_count(threads=None):
    if threads is None:
        threads = int(os.environ.get("CLOSE_THREADS", "1") or 1)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def evaluate(dataset, p=FitParams(), eps=DEFAULT_EPS, rel_threshold=DEFAULT_REL_THRESHOLD,
             layer_height=DEFAULT_LAYER_HEIGHT, threads=None):
    """Score every sample; extraction errors are recorded as failures.

    Results are ordered by sample index whatever the degree of parallelism.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    jobs = [(k, s, p, eps, rel_threshold, layer_height) for k, s in enumerate(dataset)]
    workers = min(worker_count(threads), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_star, jobs, chunksize=1))
    else:
        results = [_evaluate_star(j) for j in jobs]
    return EvalReport(results, config={
        "eps": eps, "rel_threshold": rel_threshold, "layer_height": layer_height,
        "fit": {"k1": p.k1, "k2": p.k2, "k3": p.k3, "tau": p.tau, "n_inits": p.n_inits,
                "max_sweep": p.max_sweep},
    })
