"""Rule-based fold planning on top of CloSE.

A plan takes the cloth from its current state to a goal state, both given
as CloSE values over the same corners, and reads positions off the flat
(initial) border. When the goal folds the same corners as the current
state, or the cloth is flat, one step suffices. Otherwise the cloth is
unfolded first and then folded again.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CornerMismatch, PickOnFoldLine, UnsupportedMultiFold
from .geometry import reflect_points_2d, signed_side, wrap_angle
from .metrics import point_at_angle
from .semantics import corners_in_fold, through_corner_tol
from .synth import DEFAULT_LAYER_HEIGHT, FoldSpec, apply_fold

_TIE_TOL = 1e-12
_SAME_TOL = 1e-9


@dataclass
class PlanStep:
    action: str
    description: str
    picks: list
    places: list
    waypoints: list
    fold_line: tuple = None
    folded_corners: list = field(default_factory=list)

    def __post_init__(self):
        if self.action not in ("fold", "unfold"):
            raise ValueError(f"unknown action {self.action!r}")
        if len(self.picks) != len(self.places) or len(self.picks) not in (1, 2):
            raise ValueError("a step moves one or two picks")

    def to_dict(self):
        def pts(xs):
            return [[float(v) for v in x] for x in xs]

        return {
            "action": self.action,
            "description": self.description,
            "picks": pts(self.picks),
            "places": pts(self.places),
            "waypoints": [pts(w) for w in self.waypoints],
            "fold_line": (None if self.fold_line is None
                          else [pts([self.fold_line[0]])[0], pts([self.fold_line[1]])[0]]),
            "folded_corners": [int(i) for i in self.folded_corners],
        }


def plan_to_json(steps, config=None):
    doc = {"steps": [s.to_dict() for s in steps]}
    if config is not None:
        doc["config"] = config
    return json.dumps(doc, indent=2, sort_keys=True)


def fold_line_points(border, fold):
    """Border points at the two fold coordinates, as 2D points."""
    return point_at_angle(border, fold[0])[:2], point_at_angle(border, fold[1])[:2]


def _line(border, fold):
    p1, p2 = fold_line_points(border, fold)
    return p1, p2 - p1


def _foot(point, origin, direction):
    d = direction / np.linalg.norm(direction)
    return origin + np.dot(point - origin, d) * d


def trapezoid_area(a, b, origin, direction):
    """Area of the quadrilateral ``a, b, foot(b), foot(a)`` on the fold line."""
    a, b = np.asarray(a, dtype=float)[:2], np.asarray(b, dtype=float)[:2]
    quad = np.array([a, b, _foot(b, origin, direction), _foot(a, origin, direction)])
    x, y = quad[:, 0], quad[:, 1]
    return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def select_pick_corners(border, fold, folded_corners, corner_angles):
    """Corner indices to grasp for ``fold``.

    ``folded_corners`` indexes ``corner_angles``. Among all pairs the one
    spanning the largest trapezoid with the fold line wins; ties go to the
    lexicographically smaller pair. A single folded corner is returned
    alone and no folded corner gives an empty tuple.
    """
    folded = sorted(int(i) for i in folded_corners)
    if len(folded) <= 1:
        return tuple(folded)
    origin, direction = _line(border, fold)
    pos = {i: point_at_angle(border, corner_angles[i])[:2] for i in folded}
    best, best_area = None, -np.inf
    for i, j in itertools.combinations(folded, 2):
        area = trapezoid_area(pos[i], pos[j], origin, direction)
        if area > best_area + _TIE_TOL:
            best, best_area = (i, j), area
    return best


def _arc(pick, place):
    pick, place = np.asarray(pick, dtype=float), np.asarray(place, dtype=float)
    dist = np.linalg.norm(place - pick)
    mid = 0.5 * (pick + place)
    # Half the travel distance, kept above both ends for very short moves.
    mid[2] = max(0.5 * dist, 2 * max(pick[2], place[2]))
    return [pick, mid, place]


def make_trajectory(pick, fold_line, layer_height=DEFAULT_LAYER_HEIGHT):
    """Place point and waypoints for flipping ``pick`` over ``fold_line``.

    ``fold_line`` is ``(point, direction)`` in the xy plane. The place is the
    mirror image of ``pick`` raised to ``layer_height``; the middle waypoint
    is lifted by half the pick-place distance.
    """
    pick = np.asarray(pick, dtype=float).reshape(3)
    origin, direction = (np.asarray(x, dtype=float)[:2] for x in fold_line)
    d = direction / np.linalg.norm(direction)
    if abs(signed_side(pick, origin, d)) < 1e-9:
        raise PickOnFoldLine("pick lies on the fold line")
    place = reflect_points_2d(pick[None], origin, d)[0]
    place[2] = layer_height
    return place, _arc(pick, place)


def _flat_point(border, angle):
    p = point_at_angle(border, angle).copy()
    p[2] = 0.0
    return p


def _farthest_folded_point(border, fold):
    """Border vertex of the folded arc farthest from the fold line, used as
    the grasp when the folded part holds no corner."""
    origin, direction = _line(border, fold)
    total = border.arc_length()
    ang = 2 * np.pi * border.cumulative_arc_length() / total
    span = np.mod(fold[1] - fold[0], 2 * np.pi)
    inside = np.nonzero(np.mod(ang - fold[0], 2 * np.pi) < span)[0]
    dist = np.abs(signed_side(border.vertices[inside], origin, direction))
    p = border.vertices[inside[int(np.argmax(dist))]].copy()
    p[2] = 0.0
    return p


def _grasp(border, close, fold):
    tol = through_corner_tol(close.n_segments)
    folded = corners_in_fold(close.corners, fold[0], fold[1], tol)
    chosen = select_pick_corners(border, fold, folded, close.corners)
    if chosen:
        return folded, chosen, [_flat_point(border, close.corners[i]) for i in chosen]
    return folded, (), [_farthest_folded_point(border, fold)]


def _corner_names(chosen):
    if not chosen:
        return "the folded edge"
    if len(chosen) == 1:
        return f"corner {chosen[0]}"
    return f"corners {chosen[0]} and {chosen[1]}"


def fold_step(border, close, layer_height=DEFAULT_LAYER_HEIGHT):
    """Fold the flat cloth along the single fold of ``close``."""
    fold = close.folds[0]
    origin, direction = _line(border, fold)
    folded, chosen, picks = _grasp(border, close, fold)
    places, waypoints = [], []
    for pick in picks:
        place, wp = make_trajectory(pick, (origin, direction), layer_height)
        places.append(place)
        waypoints.append(wp)
    desc = f"Fold {_corner_names(chosen)} over the line from {fold[0]:.3f} to {fold[1]:.3f} rad."
    return PlanStep("fold", desc, picks, places, waypoints, (origin, direction), folded)


def unfold_step(border, close, layer_height=DEFAULT_LAYER_HEIGHT):
    """Undo the fold of ``close``: folded grasp points go back to their flat
    positions."""
    fold = close.folds[0]
    origin, direction = _line(border, fold)
    folded, chosen, flat = _grasp(border, close, fold)
    picks, waypoints = [], []
    for p in flat:
        pick, _ = make_trajectory(p, (origin, direction), layer_height)
        picks.append(pick)
        waypoints.append(_arc(pick, p))
    desc = f"Unfold {_corner_names(chosen)} back across the line from {fold[0]:.3f} to {fold[1]:.3f} rad."
    return PlanStep("unfold", desc, picks, flat, waypoints, (origin, direction), folded)


def refold_step(border, current, goal, layer_height=DEFAULT_LAYER_HEIGHT):
    """Move the corners folded in ``current`` straight to their positions
    under the fold of ``goal``, without unfolding."""
    cur_line = _line(border, current.folds[0])
    goal_line = _line(border, goal.folds[0])
    folded, chosen, flat = _grasp(border, goal, goal.folds[0])
    picks, places, waypoints = [], [], []
    for p in flat:
        pick, _ = make_trajectory(p, cur_line, layer_height)
        place, _ = make_trajectory(p, goal_line, layer_height)
        picks.append(pick)
        places.append(place)
        waypoints.append(_arc(pick, place))
    f1, f2 = goal.folds[0]
    desc = f"Move {_corner_names(chosen)} so the fold runs from {f1:.3f} to {f2:.3f} rad."
    return PlanStep("fold", desc, picks, places, waypoints, goal_line, folded)


def _same_fold(a, b):
    return all(abs(wrap_angle(x - y)) <= _SAME_TOL for x, y in zip(a, b))


def folded_set(close):
    if not close.folds:
        return set()
    f1, f2 = close.folds[0]
    return set(corners_in_fold(close.corners, f1, f2, through_corner_tol(close.n_segments)))


def plan_case(current, goal):
    """Which branch :func:`plan` takes: "none", "fold", "unfold", "refold"
    (Case 1 with the cloth already folded) or "unfold_fold" (Case 2)."""
    if len(current.corners) != len(goal.corners) or not np.allclose(
            current.corners, goal.corners, atol=1e-9):
        raise CornerMismatch("current and goal states have different corners")
    if len(current.folds) > 1 or len(goal.folds) > 1:
        raise UnsupportedMultiFold("planning handles at most one fold per state")
    if not current.folds and not goal.folds:
        return "none"
    if not goal.folds:
        return "unfold"
    if not current.folds:
        return "fold"
    if _same_fold(current.folds[0], goal.folds[0]):
        return "none"
    if folded_set(current) == folded_set(goal):
        return "refold"
    return "unfold_fold"


def plan(initial_border, current, goal, layer_height=DEFAULT_LAYER_HEIGHT):
    """Steps taking the cloth from ``current`` to ``goal``.

    ``initial_border`` is the flat cloth, on which all CloSE angles are
    located by arc length.
    """
    case = plan_case(current, goal)
    if case == "none":
        return []
    if case == "fold":
        return [fold_step(initial_border, goal, layer_height)]
    if case == "unfold":
        return [unfold_step(initial_border, current, layer_height)]
    if case == "refold":
        return [refold_step(initial_border, current, goal, layer_height)]
    return [unfold_step(initial_border, current, layer_height),
            fold_step(initial_border, goal, layer_height)]


def execute(initial_border, steps, layer_height=DEFAULT_LAYER_HEIGHT):
    """Border after carrying out ``steps`` on the flat cloth.

    An unfold step returns to the flat border; a fold step folds the flat
    border along its line, lifting the side that holds the picks.
    """
    border = initial_border
    for step in steps:
        if step.action == "unfold":
            border = initial_border
            continue
        origin, direction = step.fold_line
        flat_pick = reflect_points_2d(np.asarray(step.places[0])[None], origin, direction)[0]
        side = "left" if signed_side(flat_pick, origin, direction) > 0 else "right"
        spec = FoldSpec(tuple(origin), tuple(direction), side, layer_height)
        border = apply_fold(initial_border, spec).end
    return border
