"""Reading the CloSE descriptor off a pair of dGLI disks.

Corners come from bright cells of the outer ring of the start disk. Folds
are half-curves ``theta = a0 + a1 * r`` fitted to the absolute-difference
disk by multi-start local minimisation; evaluating a curve at ``r = 1``
gives a fold coordinate on the border circle. The signed-difference disk
decides which side of the fold was lifted.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .disk import DiskDiff, cell_angle, disk_abs_diff, disk_signed_diff, layer_radius
from .errors import (
    AmbiguousOrientation,
    CornerMismatch,
    DimensionMismatch,
    EmptyDisk,
    MalformedClose,
    MultiFoldUnpaired,
    NoFoldFound,
)
from .geometry import wrap_angle

TWO_PI = 2 * np.pi
DEFAULT_REL_THRESHOLD = 0.5
# A corner cell must also beat this multiple of the median |value| of the ring.
MEDIAN_FLOOR = 10.0
# A crease must reach this fraction of the brightest outer-ring difference.
CREASE_FLOOR = 1e-3


@dataclass(frozen=True)
class FitParams:
    k1: float = 0.1
    k2: float = 0.05
    k3: float = 0.1
    tau: float = np.pi / 4
    n_inits: int = 20
    max_sweep: float = np.pi / 2
    clip_quantile: float = 0.99
    rim_window: float = 0.2

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3, self.tau) <= 0 or self.n_inits < 1:
            raise ValueError("fit parameters must be positive")
        if self.rim_window < 0:
            raise ValueError("rim_window must be non-negative")
        if not 0 < self.clip_quantile <= 1:
            raise ValueError("clip_quantile must lie in (0, 1]")


@dataclass(frozen=True)
class FoldCurve:
    a0: float
    a1: float
    loss: float

    @property
    def f(self):
        """Fold coordinate: the curve evaluated on the rim (r = 1)."""
        return float(np.mod(self.a0 + self.a1, TWO_PI))

    def theta(self, r):
        return self.a0 + self.a1 * np.asarray(r)


@dataclass
class CloSE:
    """Corner angles and ordered fold pairs on the border circle.

    For a fold ``(f1, f2)`` the border met going anticlockwise from ``f1``
    to ``f2`` is the folded part.
    """

    corners: list
    folds: list = field(default_factory=list)
    n_segments: int = 0

    def __post_init__(self):
        try:
            corners = [float(np.mod(c, TWO_PI)) for c in self.corners]
            folds = [(float(np.mod(a, TWO_PI)), float(np.mod(b, TWO_PI))) for a, b in self.folds]
        except (TypeError, ValueError) as exc:
            raise MalformedClose(f"corners and folds must be angles: {exc}") from None
        if not all(np.isfinite(corners)) or not all(np.isfinite(np.ravel(folds))):
            raise MalformedClose("angles must be finite")
        self.corners = sorted(corners)
        if len(set(self.corners)) != len(self.corners):
            raise MalformedClose("corner angles must be distinct")
        for a, b in folds:
            if a == b:
                raise MalformedClose("fold endpoints must differ")
        self.folds = folds

    def to_dict(self):
        return {
            "corners": list(self.corners),
            "folds": [list(f) for f in self.folds],
            "n_segments": int(self.n_segments),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "corners" not in d:
            raise MalformedClose("expected an object with 'corners' and 'folds'")
        folds = d.get("folds", [])
        if any(len(f) != 2 for f in folds):
            raise MalformedClose("each fold must be a pair of angles")
        return cls(list(d["corners"]), [tuple(f) for f in folds], int(d.get("n_segments", 0)))

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedClose(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)


def extract_corners(d, rel_threshold=DEFAULT_REL_THRESHOLD):
    """Angles of outer-ring cells whose magnitude passes both the relative
    threshold and the median floor. Adjacent bright cells are kept apart."""
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    ring = np.abs(d.first_layer())
    peak = ring.max()
    if peak == 0:
        raise EmptyDisk("first layer of the disk is all zeros")
    keep = (ring >= rel_threshold * peak) & (ring > MEDIAN_FLOOR * np.median(ring))
    i = np.nonzero(keep)[0]
    anchors = 2 * i + 1
    angles = np.mod(np.pi * (anchors + 1) / d.n_segments, TWO_PI)
    return sorted(float(a) for a in angles)


def _fit_data(diff, clip_quantile=1.0):
    _, _, radius, angle, value = diff.cells()
    if value.max() <= 0:
        raise NoFoldFound("difference disk is identically zero")
    scale = np.quantile(value[value > 0], clip_quantile)
    return angle, radius, np.minimum(value / scale, 1.0)


def fold_loss(a, theta, radius, g, p):
    """Curve-fitting loss and its gradient with respect to ``(a0, a1)``."""
    a0, a1 = a
    w = wrap_angle(theta - a0 - a1 * radius)
    w2 = w * w
    p1 = np.exp(-w2 / (2 * p.tau ** 2))
    denom = p.k3 + w2
    sg = np.sqrt(g)
    loss = np.sum(p.k1 * w2 * p1 * sg - p.k2 * g / denom)
    dloss_dw = p.k1 * sg * p1 * (2 * w - w2 * w / p.tau ** 2) + 2 * p.k2 * g * w / denom ** 2
    grad = np.array([-np.sum(dloss_dw), -np.sum(dloss_dw * radius)])
    return float(loss), grad


def _circular_gap(a, b):
    return abs(wrap_angle(a - b))


def fit_fold_curves(diff, p=FitParams()):
    """Local minima of the fold loss with negative value, one per half-curve,
    sorted by their rim coordinate ``f``."""
    if getattr(diff, "kind", None) != "abs_diff":
        raise ValueError("fold curves are fitted on an abs_diff disk")
    theta, radius, g = _fit_data(diff, p.clip_quantile)
    found = []
    for m in range(p.n_inits):
        x0 = np.array([TWO_PI * m / p.n_inits, 0.0])
        res = minimize(fold_loss, x0, args=(theta, radius, g, p), jac=True,
                       method="L-BFGS-B", bounds=[(None, None), (-p.max_sweep, p.max_sweep)],
                       options={"maxiter": 500, "ftol": 1e-8})
        if res.fun < 0:
            a0 = float(np.mod(res.x[0], TWO_PI))
            found.append(FoldCurve(a0, float(res.x[1]), float(res.fun)))
    if not found:
        raise NoFoldFound("no local minimum with negative loss")

    found.sort(key=lambda c: (c.f, c.loss))
    tol = TWO_PI / diff.n_segments
    kept = []
    for c in found:
        dup = next((k for k, other in enumerate(kept) if _circular_gap(c.f, other.f) < tol), None)
        if dup is None:
            kept.append(c)
        elif c.loss < kept[dup].loss:
            kept[dup] = c
    return sorted(kept, key=lambda c: c.f)


def _in_ccw_arc(x, start, stop):
    """True where ``x`` lies on the anticlockwise arc from ``start`` to ``stop``."""
    span = np.mod(stop - start, TWO_PI)
    return np.mod(np.asarray(x) - start, TWO_PI) < span


def _as_curve(c):
    if isinstance(c, FoldCurve):
        return c
    return FoldCurve(float(np.mod(c, TWO_PI)), 0.0, 0.0)


def orient_fold(curve_pair, sdiff, min_contrast=0.05):
    """Order the two rim coordinates so the anticlockwise arc from ``f1`` to
    ``f2`` covers the side of the fold where the signed difference is
    heavier.

    The two fitted half-curves split every ring of the disk into two
    angular sectors; a cell belongs to the sector anticlockwise from curve
    ``a`` to curve ``b`` at its own radius or to the complementary one.
    Cells within one cell width of either curve are ignored. Plain angles
    are accepted in place of curves and act as radial lines.

    Raises
    ------
    AmbiguousOrientation
        If the two side sums differ by less than ``min_contrast``, relative.
    """
    ca, cb = (_as_curve(c) for c in curve_pair)
    return (ca.f, cb.f) if _a_to_b_folded(ca, cb, sdiff, min_contrast) else (cb.f, ca.f)


def _a_to_b_folded(ca, cb, sdiff, min_contrast):
    if getattr(sdiff, "kind", None) != "signed_diff":
        raise ValueError("orientation uses a signed_diff disk")
    _, _, radius, angle, value = sdiff.cells()
    ta, tb = ca.theta(radius), cb.theta(radius)
    guard = TWO_PI / sdiff.n_segments
    clear = (np.abs(wrap_angle(angle - ta)) > guard) & (np.abs(wrap_angle(angle - tb)) > guard)
    in_ab = _in_ccw_arc(angle, ta, tb)
    mass = np.abs(value)
    ab, ba = mass[clear & in_ab].sum(), mass[clear & ~in_ab].sum()
    if max(ab, ba) == 0 or abs(ab - ba) < min_contrast * max(ab, ba):
        raise AmbiguousOrientation(
            f"both sides of the fold carry similar weight ({ab:.4g} vs {ba:.4g})"
        )
    return ab > ba


@dataclass(frozen=True)
class RimHit:
    """A fitted half-curve with the crease it points at on the outer ring."""

    curve: FoldCurve
    f: float
    support: float


def refine_on_rim(diff, f, window):
    """Move a fold coordinate onto the crease it points at.

    Only segment pairs straddling the fold change, so on the outer ring the
    difference is concentrated on the cells at each crease. A straight
    half-curve follows a ridge that bends inside the disk and can meet the
    rim a few cells away, so the brightest ring cell within ``window``
    radians is taken as the crease and located to sub-cell precision with a
    parabola through it and its two neighbours.

    Returns
    -------
    f : float
        Refined coordinate, or the input when the ring is flat around it.
    support : float
        Ring value at the peak (0 when there is no crease nearby).
    """
    n = diff.n_segments
    ring = diff.values[:, 0]
    angles = cell_angle(2 * np.arange(n) + 1, n)
    near = np.nonzero(np.abs(wrap_angle(angles - f)) <= window)[0]
    if len(near) == 0:
        return float(np.mod(f, TWO_PI)), 0.0
    k = int(near[np.argmax(ring[near])])
    if ring[k] <= 0:
        return float(np.mod(f, TWO_PI)), 0.0
    y0, y1, y2 = ring[(k - 1) % n], ring[k], ring[(k + 1) % n]
    curv = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / curv if curv < 0 else 0.0
    peak = float(cell_angle(2 * k + 1, n)) + shift * TWO_PI / n
    return float(np.mod(peak, TWO_PI)), float(y1)


def rim_hits(diff, curves, window):
    """Refine every curve onto the rim. Curves reaching the same crease are
    merged, keeping the lowest loss; curves meeting no crease (ring value
    below ``CREASE_FLOOR`` of the ring maximum) are dropped."""
    hits = []
    floor = CREASE_FLOOR * diff.values[:, 0].max()
    for c in sorted(curves, key=lambda c: c.loss):
        f, support = refine_on_rim(diff, c.f, window)
        if support <= floor:
            continue
        if all(_circular_gap(f, h.f) >= TWO_PI / diff.n_segments for h in hits):
            hits.append(RimHit(c, f, support))
    return hits


def select_single_fold(hits, min_separation=np.pi / 4):
    """The pair with the lowest summed loss among pairs at least
    ``min_separation`` apart on the rim, in order of ``f``."""
    best = None
    for i in range(len(hits)):
        for j in range(i + 1, len(hits)):
            a, b = hits[i], hits[j]
            if _circular_gap(a.f, b.f) < min_separation:
                continue
            score = a.curve.loss + b.curve.loss
            if best is None or score < best[0]:
                best = (score, a, b)
    if best is None:
        raise NoFoldFound(f"no two separate creases among {len(hits)} fold curves")
    return sorted(best[1:], key=lambda h: h.f)


def pair_curves(curves, tol=np.pi / 8):
    """Group half-curves into folds.

    Two curves are one fold. With more, curves whose centre angles ``a0``
    are about pi apart are matched greedily, closest to pi first.
    """
    if len(curves) == 2:
        return [(curves[0], curves[1])]
    if len(curves) < 2:
        raise MultiFoldUnpaired("a single fold curve cannot be paired", [c.f for c in curves])
    cand = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            off = abs(abs(wrap_angle(curves[i].a0 - curves[j].a0)) - np.pi)
            if off <= tol:
                cand.append((off, i, j))
    cand.sort()
    used, pairs = set(), []
    for _, i, j in cand:
        if i not in used and j not in used:
            used.update((i, j))
            pairs.append((curves[i], curves[j]))
    if len(used) != len(curves):
        raise MultiFoldUnpaired(
            f"{len(curves) - len(used)} of {len(curves)} fold curves could not be paired",
            [c.f for c in curves],
        )
    return pairs


def _partner_hit(diff, lead, p):
    """Refit with the cells near ``lead`` cleared, for a second crease too
    faint to form a minimum next to a much brighter first one."""
    n, L = diff.n_segments, diff.n_layers
    i, l = np.meshgrid(np.arange(n), np.arange(1, L + 1), indexing="ij")
    angle = cell_angle(2 * i + l, n)
    near = np.abs(wrap_angle(angle - lead.curve.theta(layer_radius(l, n)))) < p.tau
    masked = DiskDiff(n, np.where(near, 0.0, diff.values), diff.occupied, kind="abs_diff")
    others = [h for h in rim_hits(diff, fit_fold_curves(masked, p), p.rim_window)
              if _circular_gap(h.f, lead.f) >= p.tau]
    if not others:
        raise NoFoldFound("only one side of the fold was found")
    return sorted([lead, others[0]], key=lambda h: h.f)


def extract_close(start, end, p=FitParams(), rel_threshold=DEFAULT_REL_THRESHOLD, n_folds=1):
    """CloSE of the end state relative to the flat start state.

    With ``n_folds=1`` (the default) the fitted curves are moved onto their
    creases (:func:`rim_hits`) and the fold is chosen by
    :func:`select_single_fold`. With ``n_folds=None`` every accepted curve
    must be paired, see :func:`pair_curves`, and ``f = a0 + a1`` is used as is.
    """
    if start.n_segments != end.n_segments:
        raise DimensionMismatch("start and end disks differ in size")
    try:
        corners = extract_corners(start, rel_threshold)
    except EmptyDisk:
        corners = []
    adiff = disk_abs_diff(start, end)
    curves = fit_fold_curves(adiff, p)
    if n_folds == 1:
        hits = rim_hits(adiff, curves, p.rim_window)
        try:
            pairs = [select_single_fold(hits, p.tau)]
        except NoFoldFound:
            if not hits:
                raise
            pairs = [_partner_hit(adiff, hits[0], p)]
    elif n_folds is None:
        pairs = [[RimHit(c, c.f, 0.0) for c in pair] for pair in pair_curves(curves)]
    else:
        raise ValueError("n_folds must be 1 or None")
    sdiff = disk_signed_diff(start, end)
    folds = []
    for ha, hb in pairs:
        folded = _a_to_b_folded(ha.curve, hb.curve, sdiff, 0.05)
        folds.append((ha.f, hb.f) if folded else (hb.f, ha.f))
    return CloSE(corners, folds, start.n_segments)


def lerp_angle(a, b, t):
    return float(np.mod(a + t * wrap_angle(b - a), TWO_PI))


def interpolate_close(a, b, t):
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    if len(a.corners) != len(b.corners) or not np.allclose(a.corners, b.corners):
        raise CornerMismatch("interpolated states must share their corners")
    if len(a.folds) != 1 or len(b.folds) != 1:
        raise ValueError("interpolation needs exactly one fold on each side")
    if t == 0:
        return CloSE(a.corners, a.folds, a.n_segments)
    if t == 1:
        return CloSE(b.corners, b.folds, b.n_segments)
    (a1, a2), (b1, b2) = a.folds[0], b.folds[0]
    return CloSE(a.corners, [(lerp_angle(a1, b1, t), lerp_angle(a2, b2, t))], a.n_segments)
