"""The dGLI disk: all-pairs dGLI values of a border laid out on a circular grid.

Adjacent segments land on the outer ring (layer 1); pairs ``l`` segments
apart land on layer ``l``; diametral pairs sit next to the centre. A pair's
angular position is the midpoint of the shorter border arc joining the two
segments.

Storage is a dense ``(N, L)`` table indexed by the arc start ``i`` and layer
``l``: cell ``(i, l)`` holds the pair ``(i, i + l mod N)``. For even ``N`` the
diametral layer has only ``N / 2`` distinct pairs; cells ``i >= N / 2`` of
that layer are unoccupied and masked out.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, DimensionMismatch
from .geometry import DEFAULT_EPS, dgli_pairs


def n_layers(n):
    return n // 2


def map_to_disk(i, j, n):
    """Return ``(anchor_index, layer)`` for the unordered segment pair ``{i, j}``.

    ``anchor_index`` lives on a grid of ``2n`` angular positions so pairs with
    odd and even index sums never collide. When the two arcs are equally
    long (diametral pairs of even ``n``) the arc starting at the smaller index
    is used.
    """
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"segment indices must lie in [0, {n})")
    if i == j:
        raise ValueError("a segment is not paired with itself")
    lo, hi = min(i, j), max(i, j)
    gap = hi - lo
    layer = min(gap, n - gap)
    if gap <= n - gap:
        anchor = lo + hi
    else:
        anchor = lo + hi + n
    return anchor % (2 * n), layer


def arc_start(anchor, layer, n):
    """Inverse of :func:`map_to_disk` on the arc-start index."""
    return ((anchor - layer) // 2) % n


def cell_angle(anchor, n):
    """Angle of a disk cell.

    Segment ``k`` covers the arc-length angles ``[2 pi k / n, 2 pi (k+1) / n]``,
    so the pair midpoint of segments ``i`` and ``j`` is ``pi (i + j + 1) / n``.
    With this offset a corner at vertex ``k`` shows up at the same angle as
    its arc-length position ``2 pi k / n``.
    """
    return np.mod(np.pi * (np.asarray(anchor) + 1) / n, 2 * np.pi)


def layer_radius(layer, n):
    L = n_layers(n)
    return 1.0 - (np.asarray(layer, dtype=float) - 1.0) / L


@dataclass
class DGLIDisk:
    n_segments: int
    values: np.ndarray
    occupied: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n, L = self.n_segments, n_layers(self.n_segments)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (n, L):
            raise DimensionMismatch(f"values must have shape {(n, L)}, got {self.values.shape}")
        if self.occupied is None:
            self.occupied = occupancy_mask(n)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("disk values must be finite")

    @property
    def n_layers(self):
        return n_layers(self.n_segments)

    def first_layer(self):
        return self.values[:, 0]

    def cells(self):
        """Occupied cells as flat arrays ``(anchor, layer, radius, angle, value)``."""
        n, L = self.n_segments, self.n_layers
        i, l = np.meshgrid(np.arange(n), np.arange(1, L + 1), indexing="ij")
        mask = self.occupied
        i, l = i[mask], l[mask]
        anchor = (2 * i + l) % (2 * n)
        return anchor, l, layer_radius(l, n), cell_angle(anchor, n), self.values[mask]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["anchor_index", "layer", "radius", "angle", "value"])
        anchor, layer, radius, angle, value = self.cells()
        order = np.lexsort((anchor, layer))
        for k in order:
            writer.writerow([int(anchor[k]), int(layer[k]), repr(float(radius[k])),
                             repr(float(angle[k])), repr(float(value[k]))])
        return buf.getvalue()


@dataclass
class DiskDiff(DGLIDisk):
    kind: str = "abs_diff"

    def __post_init__(self):
        super().__post_init__()
        if self.kind not in ("abs_diff", "signed_diff"):
            raise ValueError(f"unknown diff kind {self.kind!r}")


def occupancy_mask(n):
    L = n_layers(n)
    mask = np.ones((n, L), dtype=bool)
    if n % 2 == 0:
        mask[n // 2:, L - 1] = False
    return mask


def compute_disk(border, eps=DEFAULT_EPS):
    """dGLI of every segment pair of ``border`` arranged on the disk."""
    n = border.n
    L = n_layers(n)
    starts, ends = border.segment_endpoints()
    i = np.repeat(np.arange(n)[:, None], L, axis=1)
    j = (i + np.arange(1, L + 1)[None, :]) % n
    try:
        values = dgli_pairs(starts[i], ends[i], starts[j], ends[j], eps)
    except DegenerateConfiguration:
        for a, b in zip(i.ravel(), j.ravel()):
            try:
                dgli_pairs(starts[a], ends[a], starts[b], ends[b], eps)
            except DegenerateConfiguration as exc:
                raise DegenerateConfiguration(f"segments {a} and {b}: {exc}") from None
        raise
    mask = occupancy_mask(n)
    values = np.where(mask, values, 0.0)
    return DGLIDisk(n, values, mask)


def _check_same(start, end):
    if start.n_segments != end.n_segments:
        raise DimensionMismatch(
            f"disks have different segment counts ({start.n_segments} vs {end.n_segments})"
        )


def disk_abs_diff(start, end):
    _check_same(start, end)
    values = np.abs(np.abs(end.values) - np.abs(start.values))
    return DiskDiff(start.n_segments, values, start.occupied.copy(), kind="abs_diff")


def disk_signed_diff(start, end):
    _check_same(start, end)
    return DiskDiff(start.n_segments, end.values - start.values, start.occupied.copy(),
                    kind="signed_diff")


WARM_RGB = np.array([230.0, 97.0, 1.0])
COOL_RGB = np.array([33.0, 102.0, 172.0])
WHITE_RGB = np.array([255.0, 255.0, 255.0])


def _diverging(t):
    """Map values in [-1, 1] to RGB: white at 0, warm above, cool below."""
    t = np.clip(t, -1.0, 1.0)[..., None]
    warm = WHITE_RGB + t * (WARM_RGB - WHITE_RGB)
    cool = WHITE_RGB - t * (COOL_RGB - WHITE_RGB)
    return np.where(t >= 0, warm, cool)


def rasterize_disk(d, size=256):
    """Render to an ``(size, size, 3)`` uint8 array. Each cell is an annular
    sector; pixels outside the disk are white."""
    if size < 64:
        raise ValueError("size must be >= 64")
    n, L = d.n_segments, d.n_layers
    c = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    x, y = np.meshgrid(c, -c)
    r = np.hypot(x, y)
    psi = np.mod(np.arctan2(y, x), 2 * np.pi)

    inside = r <= 1.0
    layer = np.clip(np.floor((1.0 - r) * L).astype(int) + 1, 1, L)
    anchor = psi * n / np.pi - 1.0
    start = np.mod(np.floor((anchor - layer) / 2.0 + 0.5).astype(int), n)
    # Unoccupied diametral cells repeat the value of the same pair.
    if n % 2 == 0:
        diam = (layer == L) & (start >= n // 2)
        start = np.where(diam, start - n // 2, start)

    values = d.values[start, layer - 1]
    vmax = np.abs(d.values[d.occupied]).max() if d.occupied.any() else 0.0
    t = values / vmax if vmax > 0 else np.zeros_like(values)
    rgb = _diverging(t)
    rgb = np.where(inside[..., None], rgb, WHITE_RGB)
    return np.rint(rgb).astype(np.uint8)


def render_disk(d, size=256):
    """Binary P6 pixmap bytes of :func:`rasterize_disk`."""
    img = rasterize_disk(d, size)
    header = f"P6\n{size} {size}\n255\n".encode("ascii")
    return header + img.tobytes()


def read_ppm(data):
    """Parse P6 bytes written by :func:`render_disk` into an array."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a P6 pixmap")
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
