"""Synthetic fold oracle.

Parametric flat cloth outlines, an exact in-plane fold operator that knows
its own ground truth, vertex noise, and a silhouette-border extractor for
point samples of a cloth surface (occupancy mask, boundary trace and an
epsilon-cover clean-up).
"""

import json
from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import BadFoldLine, EmptyFold, InvalidPolygon, OpenChain, TooSparse
from .geometry import BorderCurve, normalize_border, reflect_points_2d, signed_side

DEFAULT_LAYER_HEIGHT = 0.02
DEFAULT_COVER_EPS = 0.04
_SIDE_TOL = 1e-9

# Anticlockwise corner lists. Vertex 0 of every border sits on the first corner.
SHAPES = {
    "square": [(-1, -1), (1, -1), (1, 1), (-1, 1)],
    "rectangle": [(-1.5, -0.9), (1.5, -0.9), (1.5, 0.9), (-1.5, 0.9)],
    "tshirt": [
        (-0.55, -1.0), (0.55, -1.0), (0.55, 0.25), (1.1, 0.25),
        (1.1, 0.85), (-1.1, 0.85), (-1.1, 0.25), (-0.55, 0.25),
    ],
    "trousers": [
        (-0.75, -1.2), (-0.2, -1.2), (0.0, -0.1), (0.2, -1.2),
        (0.75, -1.2), (0.6, 1.0), (-0.6, 1.0),
    ],
    "skirt_trapezoid": [(-1.0, -0.8), (1.0, -0.8), (0.55, 0.8), (-0.55, 0.8)],
    "circle": None,
}


@dataclass
class ClothShape:
    name: str
    polygon: np.ndarray = None

    def __post_init__(self):
        if self.name not in SHAPES:
            raise InvalidPolygon(f"unknown shape {self.name!r}; expected one of {sorted(SHAPES)}")
        if self.polygon is None and SHAPES[self.name] is not None:
            self.polygon = np.array(SHAPES[self.name], dtype=float)
        if self.polygon is not None:
            self.polygon = np.asarray(self.polygon, dtype=float)
            _check_polygon(self.polygon)


@dataclass
class FoldSpec:
    """A fold line ``point + t * direction`` in the xy plane.

    ``side`` names the half-plane that is lifted and flipped, relative to
    ``direction``: "left" is the half-plane with positive 2D cross product.
    """

    point: tuple
    direction: tuple
    side: str = "left"
    layer_height: float = DEFAULT_LAYER_HEIGHT

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self.layer_height <= 0:
            raise ValueError("layer_height must be positive")
        if np.hypot(*np.asarray(self.direction, dtype=float)[:2]) == 0:
            raise BadFoldLine("fold direction is zero")


@dataclass
class FoldSample:
    start: BorderCurve
    end: BorderCurve
    gt_fold: tuple
    gt_folded_corners: list
    corners: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({
            "start": self.start.to_list(),
            "end": self.end.to_list(),
            "gt_fold": [float(g) for g in self.gt_fold],
            "gt_folded_corners": [int(c) for c in self.gt_folded_corners],
            "corners": [int(c) for c in self.corners],
            "meta": self.meta,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(
            start=BorderCurve(d["start"]),
            end=BorderCurve(d["end"]),
            gt_fold=tuple(d["gt_fold"]),
            gt_folded_corners=list(d["gt_folded_corners"]),
            corners=list(d.get("corners", [])),
            meta=d.get("meta", {}),
        )


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _check_polygon(poly):
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise InvalidPolygon("polygon must be a list of at least three 2D points")
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area <= 0:
        raise InvalidPolygon("polygon must be listed anticlockwise with positive area")
    m = len(poly)
    for a in range(m):
        for b in range(a + 2, m):
            if a == 0 and b == m - 1:
                continue
            if _segments_intersect(poly[a], poly[(a + 1) % m], poly[b], poly[(b + 1) % m]):
                raise InvalidPolygon("polygon is self-intersecting")


def _polygon_border(poly, n):
    """Place ``n`` vertices on the polygon so that every corner is a vertex.

    Each edge receives a share of the vertices proportional to its length
    (largest remainder), spaced evenly along the edge.
    """
    m = len(poly)
    if n < m:
        raise InvalidPolygon(f"{m}-corner polygon needs at least {m} vertices")
    edges = np.roll(poly, -1, axis=0) - poly
    lengths = np.linalg.norm(edges, axis=1)
    quota = n * lengths / lengths.sum()
    counts = np.maximum(np.floor(quota).astype(int), 1)
    while counts.sum() < n:
        counts[np.argmax(quota - counts)] += 1
    while counts.sum() > n:
        counts[np.argmax(np.where(counts > 1, counts - quota, -np.inf))] -= 1
    pts, corner_idx = [], []
    for k in range(m):
        corner_idx.append(len(pts))
        t = np.arange(counts[k]) / counts[k]
        pts.extend(poly[k] + t[:, None] * edges[k])
    return np.array(pts), corner_idx


def build_shape(shape, n):
    """Border of ``shape`` with ``n`` segments plus the vertex indices of its corners."""
    if isinstance(shape, str):
        shape = ClothShape(shape)
    if n < BorderCurve.MIN_SEGMENTS:
        raise InvalidPolygon(f"n must be >= {BorderCurve.MIN_SEGMENTS}")
    if shape.polygon is None:
        t = 2 * np.pi * np.arange(n) / n
        xy, corners = np.column_stack([np.cos(t), np.sin(t)]), []
    else:
        xy, corners = _polygon_border(shape.polygon, n)
    border = normalize_border(BorderCurve(np.column_stack([xy, np.zeros(n)])))
    return border, corners


def make_shape(shape, n):
    return build_shape(shape, n)[0]


def fold_crossings(border, origin, direction):
    """Arc-length positions where the line crosses the border.

    A vertex lying on the line counts as one crossing when the border passes
    from one side to the other through it, and as none when it only touches.
    """
    v = border.vertices
    n = len(v)
    s = signed_side(v, origin, direction)
    label = np.where(np.abs(s) <= _SIDE_TOL, 0, np.sign(s)).astype(int)
    if np.all(label == 0):
        raise BadFoldLine("border lies on the fold line")
    cum = border.cumulative_arc_length()
    seglen = border.segment_lengths()
    crossings = []
    for k in range(n):
        a, b = label[k], label[(k + 1) % n]
        if a != 0 and b != 0 and a != b:
            t = s[k] / (s[k] - s[(k + 1) % n])
            crossings.append(cum[k] + t * seglen[k])
        elif a == 0:
            prev = k - 1
            while label[prev % n] == 0:
                prev -= 1
            nxt = k + 1
            while label[nxt % n] == 0:
                nxt += 1
            if nxt - prev > 2:
                raise BadFoldLine("a border edge lies on the fold line")
            if label[prev % n] != label[nxt % n]:
                crossings.append(cum[k])
    return np.array(crossings), label


def arc_to_angle(position, total):
    return float(np.mod(2 * np.pi * position / total, 2 * np.pi))


def apply_fold(border, fold, corners=()):
    """Fold ``border`` along ``fold``: vertices on the folded side are
    mirrored across the line and lifted by ``layer_height``.

    Returns a :class:`FoldSample` whose ``gt_fold`` is ordered so that the
    anticlockwise (increasing arc length) route from ``g1`` to ``g2`` is the
    folded part of the border.
    """
    crossings, label = fold_crossings(border, fold.point, fold.direction)
    if len(crossings) != 2:
        raise BadFoldLine(f"fold line crosses the border {len(crossings)} times, expected 2")
    folded_label = 1 if fold.side == "left" else -1
    folded = label == folded_label
    if not folded.any():
        raise EmptyFold("no vertex lies on the folded side")
    if folded.all():
        raise EmptyFold("every vertex lies on the folded side")

    total = border.arc_length()
    c0, c1 = crossings
    # Pick the crossing after which the border runs into the folded side.
    cum = border.cumulative_arc_length()
    mid = 0.5 * (c0 + c1)
    k = int(np.searchsorted(cum, mid, side="right") - 1)
    inside_is_folded = folded[k] or (label[k] == 0 and folded[(k + 1) % border.n])
    g1, g2 = (c0, c1) if inside_is_folded else (c1, c0)

    v = border.vertices.copy()
    v[folded] = reflect_points_2d(v[folded], fold.point, fold.direction)
    v[folded, 2] += fold.layer_height
    end = BorderCurve(v)
    folded_corners = sorted(int(c) for c in corners if folded[c])
    return FoldSample(
        start=border,
        end=end,
        gt_fold=(arc_to_angle(g1, total), arc_to_angle(g2, total)),
        gt_folded_corners=folded_corners,
        corners=list(corners),
    )


def add_noise(border, sigma, seed, renormalize=True):
    """Seeded isotropic Gaussian vertex displacement."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return border
    rng = np.random.default_rng(seed)
    v = border.vertices + rng.normal(scale=sigma, size=border.vertices.shape)
    out = BorderCurve(v)
    return normalize_border(out) if renormalize else out


def epsilon_cover(points, eps):
    """Greedy cover in input order: a point becomes a centre unless an
    existing centre is within ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        raise ValueError("points must be non-empty")
    centers = []
    for p in pts:
        if centers:
            d = np.linalg.norm(np.asarray(centers) - p, axis=1)
            if d.min() <= eps:
                continue
        centers.append(p)
    return np.array(centers)


_MOORE = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]


def _moore_trace(mask):
    """Outer boundary of the single component in ``mask`` as (row, col) cells,
    traced from the top-left cell (Moore neighbourhood, Jacob's stopping rule)."""
    rows, cols = np.nonzero(mask)
    order = np.lexsort((cols, rows))
    start = (int(rows[order[0]]), int(cols[order[0]]))
    h, w = mask.shape

    def filled(p):
        return 0 <= p[0] < h and 0 <= p[1] < w and mask[p]

    boundary = [start]
    p, back = start, (start[0], start[1] - 1)
    first = None
    for _ in range(8 * mask.size + 8):
        d0 = _MOORE.index((back[0] - p[0], back[1] - p[1]))
        for step in range(1, 9):
            d = (d0 + step) % 8
            c = (p[0] + _MOORE[d][0], p[1] + _MOORE[d][1])
            if filled(c):
                break
            back = c
        else:
            return boundary
        if first is None:
            first = (p, c)
        elif (p, c) == first:
            boundary.pop()
            return boundary
        p = c
        boundary.append(p)
    raise OpenChain("boundary trace did not terminate")


def extract_silhouette_border(mesh_vertices, grid_res=64, eps=DEFAULT_COVER_EPS):
    """Closed border of the zenithal silhouette of a sampled cloth surface.

    ``eps`` is in normalised units (fraction of the sample cloud's radius).
    The returned curve is in the input coordinates.
    """
    verts = np.asarray(mesh_vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 100:
        raise TooSparse("need at least 100 surface vertices")
    if grid_res < 32:
        raise ValueError("grid_res must be >= 32")
    xy = verts[:, :2]
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise TooSparse("vertices project to a single point")
    cell = extent / (grid_res - 4)
    origin = lo - 2 * cell
    ij = np.floor((xy - origin) / cell).astype(int)
    occ = np.zeros((grid_res, grid_res), dtype=bool)
    occ[ij[:, 1], ij[:, 0]] = True
    occ = ndimage.binary_dilation(occ, structure=np.ones((3, 3), dtype=bool))
    labels, count = ndimage.label(occ, structure=np.ones((3, 3), dtype=bool))
    sizes = ndimage.sum(occ, labels, index=np.arange(1, count + 1))
    main = labels == (int(np.argmax(sizes)) + 1)
    main = ndimage.binary_fill_holes(main)

    cells = np.array(_moore_trace(main), dtype=float)
    centres = origin + (cells[:, ::-1] + 0.5) * cell
    in_main = main[ij[:, 1], ij[:, 0]]
    candidates = verts[in_main]
    tree = cKDTree(candidates[:, :2])
    _, nearest = tree.query(centres)
    _, first = np.unique(nearest, return_index=True)
    traced = candidates[nearest[np.sort(first)]]

    radius = np.linalg.norm(xy - xy.mean(axis=0), axis=1).max()
    centers = epsilon_cover(traced, eps * radius)
    if len(centers) < BorderCurve.MIN_SEGMENTS:
        raise TooSparse(f"only {len(centers)} border vertices after the epsilon-cover")
    ordered = _nearest_neighbour_chain(centers, max_step=4 * max(eps * radius, cell))
    border = BorderCurve(ordered)
    # Trace runs clockwise in image rows; make it anticlockwise in xy.
    x, y = border.vertices[:, 0], border.vertices[:, 1]
    if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
        border = BorderCurve(np.vstack([ordered[:1], ordered[:0:-1]]))
    return border


def _nearest_neighbour_chain(points, max_step):
    n = len(points)
    remaining = list(range(1, n))
    chain = [0]
    while remaining:
        d = np.linalg.norm(points[remaining, :2] - points[chain[-1], :2], axis=1)
        k = int(np.argmin(d))
        if d[k] > max_step:
            raise OpenChain(f"border chain breaks after {len(chain)} of {n} vertices")
        chain.append(remaining.pop(k))
    if np.linalg.norm(points[chain[-1], :2] - points[0, :2]) > max_step:
        raise OpenChain("border chain does not close")
    return points[chain]


def sample_surface(border, density=40):
    """Uniform-ish point samples of the flat region bounded by ``border``
    (xy grid inside the polygon), useful as a stand-in cloth mesh."""
    poly = border.vertices[:, :2]
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    step = (hi - lo).max() / density
    gx = np.arange(lo[0], hi[0] + step / 2, step)
    gy = np.arange(lo[1], hi[1] + step / 2, step)
    x, y = np.meshgrid(gx, gy)
    pts = np.column_stack([x.ravel(), y.ravel()])
    inside = Path(poly).contains_points(pts, radius=1e-9)
    pts = np.vstack([pts[inside], poly])
    return np.column_stack([pts, np.zeros(len(pts))])


@dataclass(frozen=True)
class DatasetEntry:
    """One line of a dataset recipe.

    Fold lines pass through a uniformly drawn point of the disk of radius
    ``fold_radius`` around the centroid with a uniform direction and a random
    folded side. A line is kept when it crosses the border exactly twice and
    each side holds at least ``min_fraction`` of the border length.
    """

    shape: str
    sigma: float = 0.0
    fold_radius: float = 0.5
    min_fraction: float = 0.2

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidPolygon(f"unknown shape {self.shape!r}")
        if self.sigma < 0 or self.fold_radius < 0 or not 0 <= self.min_fraction < 0.5:
            raise ValueError("invalid dataset entry")


def random_fold(border, rng, fold_radius=0.5, min_fraction=0.2,
                layer_height=DEFAULT_LAYER_HEIGHT, max_tries=1000):
    """Draw a valid :class:`FoldSpec` for ``border``."""
    centre = border.vertices[:, :2].mean(axis=0)
    lengths = border.segment_lengths()
    total = lengths.sum()
    for _ in range(max_tries):
        r = fold_radius * np.sqrt(rng.uniform())
        phi, psi = rng.uniform(0, 2 * np.pi, size=2)
        side = "left" if rng.uniform() < 0.5 else "right"
        point = centre + r * np.array([np.cos(phi), np.sin(phi)])
        direction = np.array([np.cos(psi), np.sin(psi)])
        try:
            crossings, label = fold_crossings(border, point, direction)
        except BadFoldLine:
            continue
        if len(crossings) != 2:
            continue
        folded_len = abs(crossings[1] - crossings[0])
        frac = min(folded_len, total - folded_len) / total
        if frac < min_fraction or np.all(label != 1) or np.all(label != -1):
            continue
        return FoldSpec(tuple(point), tuple(direction), side, layer_height)
    raise BadFoldLine("could not draw a valid fold line")


def _rigid_motion(border, rng):
    angle = rng.uniform(0, 2 * np.pi)
    c, s = np.cos(angle), np.sin(angle)
    v = border.vertices.copy()
    v[:, :2] = v[:, :2] @ np.array([[c, s], [-s, c]]) + rng.uniform(-1, 1, size=2)
    return normalize_border(BorderCurve(v))


def make_sample(entry, n, seed, layer_height=DEFAULT_LAYER_HEIGHT, move_prob=0.4):
    """One seeded :class:`FoldSample` for ``entry``.

    With probability ``move_prob`` the flat shape is rotated and shifted in
    plane first. Noise is drawn separately for the start border and, after
    folding, for the end border, so the two observations are independent.
    """
    rng = np.random.default_rng(seed)
    start, corners = build_shape(entry.shape, n)
    moved = bool(rng.uniform() < move_prob)
    if moved:
        start = _rigid_motion(start, rng)
    noise_seeds = rng.integers(0, 2**63, size=2)
    start = add_noise(start, entry.sigma, int(noise_seeds[0]))
    fold = random_fold(start, rng, entry.fold_radius, entry.min_fraction, layer_height)
    sample = apply_fold(start, fold, corners)
    sample.end = add_noise(sample.end, entry.sigma, int(noise_seeds[1]), renormalize=False)
    sample.meta = {
        "shape": entry.shape,
        "sigma": float(entry.sigma),
        "seed": int(seed),
        "moved": moved,
        "fold": {"point": [float(x) for x in fold.point],
                 "direction": [float(x) for x in fold.direction],
                 "side": fold.side, "layer_height": float(layer_height)},
    }
    return sample


def sample_seeds(count, seed):
    return [int(s.generate_state(1, dtype=np.uint64)[0])
            for s in np.random.SeedSequence(seed).spawn(count)]


def generate_dataset(entries, count, seed, n=80, layer_height=DEFAULT_LAYER_HEIGHT):
    """``count`` samples cycling through ``entries``; sample ``k`` uses its own
    seed spawned from ``seed``, so the output does not depend on how the work
    is split."""
    if count < 1:
        raise ValueError("count must be >= 1")
    entries = [e if isinstance(e, DatasetEntry) else DatasetEntry(*e) if isinstance(e, tuple)
               else DatasetEntry(e) for e in entries]
    if not entries:
        raise ValueError("at least one dataset entry is required")
    seeds = sample_seeds(count, seed)
    return [make_sample(entries[k % len(entries)], n, seeds[k], layer_height)
            for k in range(count)]


def save_dataset(samples, path):
    with open(path, "w") as fh:
        for s in samples:
            fh.write(s.to_json())
            fh.write("\n")


def load_dataset(path):
    with open(path) as fh:
        return [FoldSample.from_json(line) for line in fh if line.strip()]
