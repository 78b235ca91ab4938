"""Readable labels for a CloSE value, by interval reasoning on the circle."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedClose
from .extract import CloSE

TWO_PI = 2 * np.pi
# Used for the through-corner tolerance when a CloSE carries no segment count.
DEFAULT_SEGMENTS = 80
SYMMETRY_TOL = 0.05

TAGS = ("symmetric half fold", "diagonal fold", "corner fold", "unfolded")


def ccw_offset(x, start):
    """Anticlockwise angular distance from ``start`` to ``x`` in [0, 2 pi)."""
    return np.mod(np.asarray(x, dtype=float) - start, TWO_PI)


def corners_in_fold(corners, f1, f2, tol=0.0):
    """Indices of corners strictly inside the anticlockwise interval
    ``(f1, f2)``; corners within ``tol`` of either end are on the fold line
    and do not count."""
    span = ccw_offset(f2, f1)
    rel = ccw_offset(corners, f1)
    return [int(i) for i in np.nonzero((rel > tol) & (rel < span - tol))[0]]


def through_corner_tol(n_segments):
    return TWO_PI / (4 * (n_segments or DEFAULT_SEGMENTS))


def edge_position(corners, f, tol):
    """Edge ``j`` (from corner ``j`` to corner ``j + 1``) holding ``f`` and the
    fraction ``t`` along it. ``t`` snaps to 0 or 1 within ``tol`` of a corner.
    Returns ``None`` without corners."""
    m = len(corners)
    if m == 0:
        return None
    back = ccw_offset(f, np.asarray(corners))
    j = int(np.argmin(back))
    length = ccw_offset(corners[(j + 1) % m], corners[j]) if m > 1 else TWO_PI
    t = back[j] / length
    if back[j] < tol:
        t = 0.0
    elif length - back[j] < tol:
        t = 1.0
    return j, float(t)


@dataclass
class SemanticLabel:
    n_corners: int
    folded_corner_indices: list = field(default_factory=list)
    fold_edge_positions: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    sentence: str = ""

    def to_dict(self):
        return {
            "n_corners": self.n_corners,
            "folded_corner_indices": list(self.folded_corner_indices),
            "fold_edge_positions": [[list(p) if p else None for p in pair]
                                    for pair in self.fold_edge_positions],
            "tags": list(self.tags),
            "sentence": self.sentence,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _through(pos):
    return pos is not None and pos[1] in (0.0, 1.0)


def fold_tags(n_corners, folded, positions):
    tags = []
    pa, pb = positions
    if (pa is not None and pb is not None and n_corners % 2 == 0
            and len(folded) == n_corners // 2
            and abs(pa[1] - (1 - pb[1])) <= SYMMETRY_TOL):
        tags.append("symmetric half fold")
    if _through(pa) and _through(pb):
        tags.append("diagonal fold")
    if len(folded) == 1:
        tags.append("corner fold")
    return tags


def _describe(n_corners, folded, positions, tags):
    words = [f"{n_corners} corners" if n_corners != 1 else "1 corner"]
    if "unfolded" in tags:
        words.append("the cloth lies flat")
        return "; ".join(words) + "."
    if folded:
        names = ", ".join(str(i) for i in folded)
        words.append(f"corner{'s' if len(folded) > 1 else ''} {names} folded over")
    else:
        words.append("a stretch of border without corners folded over")
    for pa, pb in positions:
        ends = []
        for p in (pa, pb):
            if p is None:
                ends.append("the border")
            elif p[1] == 0.0:
                ends.append(f"corner {p[0]}")
            elif p[1] == 1.0:
                ends.append(f"corner {(p[0] + 1) % n_corners}")
            else:
                ends.append(f"edge {p[0]} at {p[1]:.2f}")
        words.append(f"fold from {ends[0]} to {ends[1]}")
    fold_tags_ = [t for t in tags if t != "unfolded"]
    if fold_tags_:
        words.append(" and ".join(fold_tags_))
    return "; ".join(words) + "."


def label(c):
    """Tags, folded corners and fold positions of a CloSE value.

    Accepts a :class:`CloSE` or its dict form. Folded corners are those in
    the open anticlockwise interval of each fold (united over folds); each
    fold end is located on the edge between consecutive corners.
    """
    if isinstance(c, dict):
        c = CloSE.from_dict(c)
    if not isinstance(c, CloSE):
        raise MalformedClose("expected a CloSE value")
    corners = np.asarray(c.corners, dtype=float)
    tol = through_corner_tol(c.n_segments)
    n = len(corners)
    if not c.folds:
        tags = ["unfolded"]
        return SemanticLabel(n, [], [], tags, _describe(n, [], [], tags))
    folded, positions, tags = set(), [], []
    for f1, f2 in c.folds:
        inside = corners_in_fold(corners, f1, f2, tol)
        pos = (edge_position(corners, f1, tol), edge_position(corners, f2, tol))
        folded.update(inside)
        positions.append(pos)
        for t in fold_tags(n, inside, pos):
            if t not in tags:
                tags.append(t)
    folded = sorted(folded)
    return SemanticLabel(n, folded, positions, tags, _describe(n, folded, positions, tags))
