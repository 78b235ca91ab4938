"""Border curves, the analytic Gauss linking integral between straight
segments and its zenithal derivative (dGLI).

All heavy functions have a vectorised ``*_pairs`` form operating on stacked
endpoint arrays of shape ``(..., 3)``; the scalar helpers wrap them.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, DegenerateInput

DEFAULT_EPS = 1e-3
_DEGENERATE_TOL = 1e-12
_ZHAT = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).reshape(3)
        end = np.asarray(self.end, dtype=float).reshape(3)
        if not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
            raise DegenerateInput("segment endpoints must be finite")
        if np.linalg.norm(end - start) <= _DEGENERATE_TOL:
            raise DegenerateInput("segment has zero length")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)


class BorderCurve:
    """Closed polyline; segment ``i`` runs from vertex ``i`` to ``i + 1 mod N``.

    The closing segment is implicit: the last vertex must not repeat the
    first one.
    """

    MIN_SEGMENTS = 8

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise DegenerateInput(f"expected an (N, 3) vertex array, got shape {v.shape}")
        if v.shape[1] == 2:
            v = np.column_stack([v, np.zeros(len(v))])
        if len(v) < self.MIN_SEGMENTS:
            raise DegenerateInput(f"border needs at least {self.MIN_SEGMENTS} vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise DegenerateInput("border vertices must be finite")
        lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        if np.any(lengths <= _DEGENERATE_TOL):
            bad = int(np.argmin(lengths))
            raise DegenerateInput(f"segment {bad} has zero length")
        v.setflags(write=False)
        self._vertices = v

    @property
    def vertices(self):
        return self._vertices

    @property
    def n(self):
        return len(self._vertices)

    def __len__(self):
        return len(self._vertices)

    def __repr__(self):
        return f"BorderCurve(n={self.n})"

    def segment_endpoints(self):
        """Return ``(starts, ends)``, both ``(N, 3)``."""
        return self._vertices, np.roll(self._vertices, -1, axis=0)

    def segment(self, i):
        starts, ends = self.segment_endpoints()
        return Segment(starts[i % self.n], ends[i % self.n])

    def segment_lengths(self):
        starts, ends = self.segment_endpoints()
        return np.linalg.norm(ends - starts, axis=1)

    def arc_length(self):
        return float(self.segment_lengths().sum())

    def cumulative_arc_length(self):
        """Arc length at each vertex, starting from 0 at vertex 0."""
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths())[:-1]])

    def to_list(self):
        return self._vertices.tolist()

    def to_json(self):
        return json.dumps(self.to_list())

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def _arcsin_dot(u, v):
    """arcsin(u . v) for unit vectors, accurate when u . v is close to +-1.

    Writes the angle between u and v through the chord lengths |u - v| and
    |u + v| so that nearly (anti)parallel normals, which are the rule for
    a flat cloth, do not lose half their digits in arcsin.
    """
    dot = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    minus = np.clip(np.linalg.norm(u - v, axis=-1) / 2.0, 0.0, 1.0)
    plus = np.clip(np.linalg.norm(u + v, axis=-1) / 2.0, 0.0, 1.0)
    return np.where(
        dot >= 0.0,
        np.pi / 2 - 2.0 * np.arcsin(minus),
        2.0 * np.arcsin(plus) - np.pi / 2,
    )


def _unit_normal(u, v):
    c = np.cross(u, v)
    norm = np.linalg.norm(c, axis=-1)
    return c, norm


def gli_pairs(a, b, c, d, check=True):
    """Analytic GLI between segments AB and CD, vectorised over leading axes.

    Uses the face normals of the tetrahedron ABCD; the summed arcsines give
    the unsigned solid angle, and the sign of ``(CD x AB) . AC`` orients it
    so the result equals the double integral over both segments.

    With ``check=False`` a vanishing face normal yields 0: three collinear
    points put all four in one plane, where the GLI vanishes.

    Raises
    ------
    DegenerateConfiguration
        If ``check`` and any of the four face normals vanishes (shared
        endpoints or three collinear points).
    """
    a, b, c, d = (np.asarray(x, dtype=float) for x in (a, b, c, d))
    r13, r14 = c - a, d - a
    r23, r24 = c - b, d - b
    r12, r34 = b - a, d - c

    crosses = [
        _unit_normal(r13, r14),
        _unit_normal(r14, r24),
        _unit_normal(r24, r23),
        _unit_normal(r23, r13),
    ]
    norms = np.stack([n for _, n in crosses])
    if check and np.any(norms < _DEGENERATE_TOL):
        bad = np.argwhere(np.any(norms < _DEGENERATE_TOL, axis=0))
        raise DegenerateConfiguration(
            f"degenerate segment pair (vanishing face normal) at index {bad[0].tolist() if bad.size else []}"
        )
    flat = np.any(norms < _DEGENERATE_TOL, axis=0)
    safe = np.where(norms < _DEGENERATE_TOL, 1.0, norms)
    n1, n2, n3, n4 = (cr / s[..., None] for (cr, _), s in zip(crosses, safe))

    total = _arcsin_dot(n1, n2) + _arcsin_dot(n2, n3) + _arcsin_dot(n3, n4) + _arcsin_dot(n4, n1)
    sign = np.sign(np.sum(np.cross(r34, r12) * r13, axis=-1))
    return np.where(flat, 0.0, sign * total / (4.0 * np.pi))


def gli_analytic(s1, s2):
    """GLI between two straight segments."""
    value = gli_pairs(s1.start, s1.end, s2.start, s2.end)
    return float(value)


def dgli_pairs(a, b, c, d, eps=DEFAULT_EPS):
    """Zenithal derivative of the GLI, vectorised.

    Only the end points ``b`` and ``d`` are lifted. The difference is taken
    between lifts of ``2 eps`` and ``eps`` so that consecutive segments, which
    share a vertex and have no GLI at zero lift, are still well defined.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    a, b, c, d = (np.asarray(x, dtype=float) for x in (a, b, c, d))
    lift = eps * _ZHAT
    for k in (1, 2):
        ends = (a, b + k * lift), (c, d + k * lift)
        gaps = [np.linalg.norm(p - q, axis=-1) for p in ends[0] for q in ends[1]]
        if np.any(np.min(gaps, axis=0) <= _DEGENERATE_TOL):
            raise DegenerateConfiguration("segment endpoints coincide even after the zenithal lift")
    g2 = gli_pairs(a, b + 2 * lift, c, d + 2 * lift, check=False)
    g1 = gli_pairs(a, b + lift, c, d + lift, check=False)
    return (g2 - g1) / eps


def dgli(s1, s2, eps=DEFAULT_EPS):
    return float(dgli_pairs(s1.start, s1.end, s2.start, s2.end, eps))


def normalize_border(border):
    """Centre the vertices on the origin and scale so the farthest vertex
    sits at distance 1. The z axis is scaled by the same factor."""
    v = border.vertices
    centred = v - v.mean(axis=0)
    radius = np.linalg.norm(centred, axis=1).max()
    if radius <= _DEGENERATE_TOL:
        raise DegenerateInput("all border vertices coincide")
    return BorderCurve(centred / radius)


def resample_border(border, n):
    """Resample to ``n`` vertices evenly spaced in arc length, starting at
    vertex 0."""
    if n < BorderCurve.MIN_SEGMENTS:
        raise ValueError(f"n must be >= {BorderCurve.MIN_SEGMENTS}")
    v = border.vertices
    closed = np.vstack([v, v[:1]])
    cum = np.concatenate([[0.0], np.cumsum(border.segment_lengths())])
    targets = np.arange(n) * (cum[-1] / n)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(v) - 1)
    t = (targets - cum[idx]) / (cum[idx + 1] - cum[idx])
    out = closed[idx] + t[:, None] * (closed[idx + 1] - closed[idx])
    return BorderCurve(out)


def reflect_points_2d(points, origin, direction):
    """Reflect the xy part of ``points`` across the line ``origin + t*direction``;
    z is left untouched."""
    points = np.array(points, dtype=float)
    d = np.asarray(direction, dtype=float)[:2]
    d = d / np.linalg.norm(d)
    rel = points[..., :2] - np.asarray(origin, dtype=float)[:2]
    along = rel @ d
    foot = np.outer(along, d).reshape(rel.shape)
    points[..., :2] = np.asarray(origin, dtype=float)[:2] + 2 * foot - rel
    return points


def signed_side(points, origin, direction):
    """2D cross product of ``direction`` with ``point - origin``; positive to the left."""
    p = np.asarray(points, dtype=float)[..., :2] - np.asarray(origin, dtype=float)[:2]
    d = np.asarray(direction, dtype=float)[:2]
    return d[0] * p[..., 1] - d[1] * p[..., 0]


def wrap_angle(x):
    """Map angle differences into (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return y if y.ndim else float(y)
