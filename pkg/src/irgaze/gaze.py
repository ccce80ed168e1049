"""Training-based gaze estimation.

Calibration frames are grouped by the screen corner being gazed at; for an
input frame the closest head orientation per corner is selected (triangle
congruency of the marker triples, or summed marker distance), the chosen
vectors are translated so their middle markers coincide with the input's,
and the gaze point is linearly interpolated from the pupil position
relative to the four corner pupil positions:

    x_G = W  * (alpha * (x1 -> x2 span) + x1) + (1 - W)  * (beta  * (x3 -> x4 span) + x3)
    y_G = W' * (gamma * (y3 -> y1 span) + y3) + (1 - W') * (delta * (y4 -> y2 span) + y4)

alpha/beta/gamma/delta are per-edge interpolation coefficients from the
pupil coordinates (left unclamped, so off-screen gaze extrapolates); W and
W' blend the two parallel edges and are clamped to [0, 1].

Two W' conventions are implemented.  The raw formula grows left-to-right,
which would let the far edge dominate; the default "corrected" variant
flips it so the left-edge interpolation is weighted by proximity to the
left edge, mirroring how W favors the top edge when gazing up.  "literal"
keeps the unflipped weight for comparison runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .detection import FaceObservation, MarkerTriple
from .errors import (
    DegenerateTraining,
    DegenerateTriangle,
    EmptyCorner,
    EmptyInput,
    IncompleteObservation,
    NoUsableEye,
)
from .imaging import Point

CORNERS = (1, 2, 3, 4)  # 1 up-left, 2 up-right, 3 down-left, 4 down-right
METRICS = ("congruency", "euclidean")
WEIGHTINGS = ("corrected", "literal")

# Ten coordinate field names, in serialization order: markers right, middle,
# left, then pupils right, left.
COORD_KEYS = (
    "x_mr", "y_mr", "x_mm", "y_mm", "x_ml", "y_ml",
    "x_pr", "y_pr", "x_pl", "y_pl",
)

_EDGE_EPS = 1e-9
_DENOM_EPS = 1e-6


@dataclass(frozen=True)
class ScreenGeometry:
    """Target-plane geometry in centimeters, origin at the down-left screen
    corner with y pointing up.  ``corners`` holds the four training gaze
    targets indexed 1=up-left, 2=up-right, 3=down-left, 4=down-right."""

    width_cm: float
    height_cm: float
    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        if self.width_cm <= 0 or self.height_cm <= 0:
            raise ValueError("screen extents must be positive")
        c1, c2, c3, c4 = self.corners
        if not (c1.x < c2.x and c3.x < c4.x and c1.y > c3.y and c2.y > c4.y):
            raise ValueError("corner targets must be ordered up-left, up-right, "
                             "down-left, down-right")

    def corner(self, c: int) -> Point:
        return self.corners[c - 1]

    @classmethod
    def with_corner_targets(cls, width_cm: float = 60.0, height_cm: float = 60.0) -> "ScreenGeometry":
        """Training targets at the exact screen corners (the default)."""
        return cls(width_cm, height_cm, (
            Point(0.0, height_cm),
            Point(width_cm, height_cm),
            Point(0.0, 0.0),
            Point(width_cm, 0.0),
        ))

    @classmethod
    def with_cell_center_targets(
        cls, width_cm: float = 60.0, height_cm: float = 60.0, n: int = 5
    ) -> "ScreenGeometry":
        """Training targets at the centers of the four corner cells of an
        n-by-n grid (the alternative calibration protocol)."""
        dx = width_cm / n / 2.0
        dy = height_cm / n / 2.0
        return cls(width_cm, height_cm, (
            Point(dx, height_cm - dy),
            Point(width_cm - dx, height_cm - dy),
            Point(dx, dy),
            Point(width_cm - dx, dy),
        ))

    def to_dict(self) -> dict:
        return {
            "Lx": self.width_cm,
            "Ly": self.height_cm,
            "corners": [[p.x, p.y] for p in self.corners],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScreenGeometry":
        corners = tuple(Point(float(x), float(y)) for x, y in d["corners"])
        return cls(float(d["Lx"]), float(d["Ly"]), corners)


@dataclass(frozen=True)
class TrainingVector:
    """One calibration frame: the five feature points labeled with the
    corner that was being gazed at."""

    corner: int
    marker_right: Point
    marker_middle: Point
    marker_left: Point
    pupil_right: Point
    pupil_left: Point
    frame_id: str = ""

    @classmethod
    def from_observation(cls, obs: FaceObservation, corner: int) -> "TrainingVector":
        if obs.pupils.right is None or obs.pupils.left is None:
            raise IncompleteObservation(
                f"frame {obs.frame_id!r} is missing a pupil; training needs both"
            )
        return cls(
            corner=corner,
            marker_right=obs.markers.right,
            marker_middle=obs.markers.middle,
            marker_left=obs.markers.left,
            pupil_right=obs.pupils.right.point,
            pupil_left=obs.pupils.left.point,
            frame_id=obs.frame_id,
        )

    @property
    def marker_triple(self) -> MarkerTriple:
        return MarkerTriple(self.marker_right, self.marker_middle, self.marker_left)

    def pupil(self, eye: str) -> Point:
        return self.pupil_right if eye == "right" else self.pupil_left

    def as_row(self) -> tuple[float, ...]:
        return (
            self.marker_right.x, self.marker_right.y,
            self.marker_middle.x, self.marker_middle.y,
            self.marker_left.x, self.marker_left.y,
            self.pupil_right.x, self.pupil_right.y,
            self.pupil_left.x, self.pupil_left.y,
        )

    def to_dict(self) -> dict:
        d = {"frame": self.frame_id}
        d.update(zip(COORD_KEYS, self.as_row()))
        return d

    @classmethod
    def from_dict(cls, corner: int, d: dict) -> "TrainingVector":
        v = [float(d[k]) for k in COORD_KEYS]
        return cls(
            corner=corner,
            marker_right=Point(v[0], v[1]),
            marker_middle=Point(v[2], v[3]),
            marker_left=Point(v[4], v[5]),
            pupil_right=Point(v[6], v[7]),
            pupil_left=Point(v[8], v[9]),
            frame_id=str(d.get("frame", "")),
        )


@dataclass(frozen=True)
class TrainingSet:
    """Corner-indexed training vectors plus the screen they calibrate."""

    by_corner: dict[int, list[TrainingVector]]
    screen: ScreenGeometry
    metric: str = "congruency"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        for c in CORNERS:
            if not self.by_corner.get(c):
                raise EmptyCorner(c)

    def counts(self) -> dict[int, int]:
        return {c: len(self.by_corner[c]) for c in CORNERS}

    def to_dict(self) -> dict:
        return {
            "screen": self.screen.to_dict(),
            "metric": self.metric,
            "corners": {
                str(c): [v.to_dict() for v in self.by_corner[c]] for c in CORNERS
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingSet":
        by_corner = {
            c: [TrainingVector.from_dict(c, vd) for vd in d["corners"][str(c)]]
            for c in CORNERS
        }
        return cls(
            by_corner=by_corner,
            screen=ScreenGeometry.from_dict(d["screen"]),
            metric=d.get("metric", "congruency"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainingSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_training_set(
    labeled: Iterable[tuple[FaceObservation, int]],
    screen: ScreenGeometry,
    metric: str = "congruency",
) -> TrainingSet:
    """Group labeled observations by corner.  Every observation must carry
    both pupils and every corner must end up non-empty."""
    by_corner: dict[int, list[TrainingVector]] = {c: [] for c in CORNERS}
    for obs, corner in labeled:
        if corner not in CORNERS:
            raise ValueError(f"corner index must be 1..4, got {corner}")
        by_corner[corner].append(TrainingVector.from_observation(obs, corner))
    for c in CORNERS:
        if not by_corner[c]:
            raise EmptyCorner(c)
    return TrainingSet(by_corner=by_corner, screen=screen, metric=metric)


def _edges(t: MarkerTriple) -> tuple[float, float, float]:
    """Triangle edge lengths paired by role: right-middle, middle-left,
    left-right."""
    return (
        t.right.distance_to(t.middle),
        t.middle.distance_to(t.left),
        t.left.distance_to(t.right),
    )


def congruency(a: MarkerTriple, b: MarkerTriple) -> float:
    """Triangle-congruency measure 3 - (A/A' + B/B' + C/C'), with edges of
    ``a`` in the numerators.  Zero iff the triangles are congruent."""
    ea = _edges(a)
    eb = _edges(b)
    for name, length in zip(("a", "b"), (ea, eb)):
        if min(length) < _EDGE_EPS:
            raise DegenerateTriangle(f"triangle {name} has a near-zero edge")
    return 3.0 - sum(x / y for x, y in zip(ea, eb))


def select_closest(ts: TrainingSet, obs: FaceObservation) -> dict[int, TrainingVector]:
    """Per corner, the training vector whose head orientation best matches
    the input.  Congruency scores |M(vector, input)|; the euclidean metric
    sums the three marker-to-marker distances.  Ties fall to the smaller
    middle-marker distance, then the earlier vector."""
    input_triple = obs.markers

    def score(v: TrainingVector) -> float:
        if ts.metric == "congruency":
            return abs(congruency(v.marker_triple, input_triple))
        return sum(
            p.distance_to(q)
            for p, q in zip(v.marker_triple.points(), input_triple.points())
        )

    chosen = {}
    for c in CORNERS:
        ranked = [
            (score(v), v.marker_middle.distance_to(input_triple.middle), i, v)
            for i, v in enumerate(ts.by_corner[c])
        ]
        chosen[c] = min(ranked)[3]
    return chosen


def translate_to_middle(v: TrainingVector, target_middle: Point) -> TrainingVector:
    """Rigidly translate all five points so the middle marker lands on
    ``target_middle`` exactly."""
    dx = target_middle.x - v.marker_middle.x
    dy = target_middle.y - v.marker_middle.y
    return TrainingVector(
        corner=v.corner,
        marker_right=v.marker_right.shifted(dx, dy),
        marker_middle=Point(target_middle.x, target_middle.y),
        marker_left=v.marker_left.shifted(dx, dy),
        pupil_right=v.pupil_right.shifted(dx, dy),
        pupil_left=v.pupil_left.shifted(dx, dy),
        frame_id=v.frame_id,
    )


@dataclass(frozen=True)
class EyeWeights:
    alpha: float
    beta: float
    gamma: float
    delta: float
    w: float
    w_prime: float


@dataclass(frozen=True)
class EyeEstimate:
    point: Point
    weights: EyeWeights


@dataclass(frozen=True)
class GazeEstimate:
    """Screen-plane gaze point with the per-eye sub-estimates that built it.
    With both eyes, ``point`` is their exact arithmetic mean."""

    point: Point
    right: EyeEstimate | None
    left: EyeEstimate | None
    eyes_used: str  # "right" | "left" | "both"


def _checked_div(num: float, den: float, what: str) -> float:
    if abs(den) < _DENOM_EPS:
        raise DegenerateTraining(f"{what} denominator {den:.3g} below tolerance")
    return num / den


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def estimate_gaze_single_eye(
    pupil: Point,
    vectors: Mapping[int, TrainingVector],
    eye: str,
    screen: ScreenGeometry,
    weighting: str = "corrected",
) -> EyeEstimate:
    """Interpolate the gaze point from one eye's pupil position against the
    four (already translated) corner training vectors."""
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    p = {c: vectors[c].pupil(eye) for c in CORNERS}
    g = {c: screen.corner(c) for c in CORNERS}

    alpha = _checked_div(pupil.x - p[1].x, p[2].x - p[1].x, "alpha")
    beta = _checked_div(pupil.x - p[3].x, p[4].x - p[3].x, "beta")
    w = _clamp01(_checked_div(
        pupil.y - 0.5 * (p[3].y + p[4].y),
        0.5 * (p[1].y + p[2].y) - 0.5 * (p[3].y + p[4].y),
        "top/bottom blend",
    ))
    x_g = (
        w * (alpha * (g[2].x - g[1].x) + g[1].x)
        + (1.0 - w) * (beta * (g[4].x - g[3].x) + g[3].x)
    )

    gamma = _checked_div(pupil.y - p[3].y, p[1].y - p[3].y, "gamma")
    delta = _checked_div(pupil.y - p[4].y, p[2].y - p[4].y, "delta")
    w_prime_raw = _clamp01(_checked_div(
        pupil.x - 0.5 * (p[1].x + p[3].x),
        0.5 * (p[2].x + p[4].x) - 0.5 * (p[1].x + p[3].x),
        "left/right blend",
    ))
    w_prime = 1.0 - w_prime_raw if weighting == "corrected" else w_prime_raw
    y_g = (
        w_prime * (gamma * (g[1].y - g[3].y) + g[3].y)
        + (1.0 - w_prime) * (delta * (g[2].y - g[4].y) + g[4].y)
    )

    return EyeEstimate(
        point=Point(x_g, y_g),
        weights=EyeWeights(alpha=alpha, beta=beta, gamma=gamma, delta=delta,
                           w=w, w_prime=w_prime),
    )


def estimate_gaze(
    obs: FaceObservation, ts: TrainingSet, weighting: str = "corrected"
) -> GazeEstimate:
    """Full estimation for one observation: select the closest vectors,
    normalize them to the input's middle marker, interpolate per available
    eye, and average when both eyes succeed."""
    chosen = select_closest(ts, obs)
    translated = {
        c: translate_to_middle(v, obs.markers.middle) for c, v in chosen.items()
    }

    per_eye: dict[str, EyeEstimate | None] = {"right": None, "left": None}
    for side in ("right", "left"):
        detection = getattr(obs.pupils, side)
        if detection is None:
            continue
        try:
            per_eye[side] = estimate_gaze_single_eye(
                detection.point, translated, side, ts.screen, weighting
            )
        except DegenerateTraining:
            per_eye[side] = None

    right, left = per_eye["right"], per_eye["left"]
    if right is not None and left is not None:
        point = Point(
            0.5 * (right.point.x + left.point.x),
            0.5 * (right.point.y + left.point.y),
        )
        return GazeEstimate(point=point, right=right, left=left, eyes_used="both")
    if right is not None:
        return GazeEstimate(point=right.point, right=right, left=None, eyes_used="right")
    if left is not None:
        return GazeEstimate(point=left.point, right=None, left=left, eyes_used="left")
    raise NoUsableEye(f"no eye produced an estimate for frame {obs.frame_id!r}")


@dataclass(frozen=True)
class GridSpec:
    """n-by-n evaluation grid over the screen.  Cells are labeled 1-based,
    row-major from the top-left (cell 1 is up-left)."""

    n: int
    width_cm: float
    height_cm: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid resolution must be at least 2")
        if self.width_cm <= 0 or self.height_cm <= 0:
            raise ValueError("grid extents must be positive")

    def cell_center(self, label: int) -> Point:
        row_from_top = (label - 1) // self.n
        col = (label - 1) % self.n
        return Point(
            (col + 0.5) * self.width_cm / self.n,
            self.height_cm - (row_from_top + 0.5) * self.height_cm / self.n,
        )


def grid_cell(p: Point, grid: GridSpec) -> int:
    """Label of the grid cell containing ``p``; off-screen points clamp to
    the nearest cell."""
    col = min(grid.n - 1, max(0, math.floor(p.x / (grid.width_cm / grid.n))))
    row = min(grid.n - 1, max(0, math.floor((grid.height_cm - p.y) / (grid.height_cm / grid.n))))
    return row * grid.n + col + 1


def score_accuracy(
    pairs: Sequence[tuple[Point, Point]], grid: GridSpec
) -> float:
    """Fraction of (estimate, truth) pairs whose error is under half a cell
    in both axes (strict inequalities)."""
    if not pairs:
        raise EmptyInput("no estimate/truth pairs to score")
    half_x = grid.width_cm / (2.0 * grid.n)
    half_y = grid.height_cm / (2.0 * grid.n)
    correct = sum(
        1
        for est, truth in pairs
        if abs(est.x - truth.x) < half_x and abs(est.y - truth.y) < half_y
    )
    return correct / len(pairs)


def accuracy_table(
    pairs: Sequence[tuple[Point, Point]],
    width_cm: float,
    height_cm: float,
    n_values: Iterable[int] = range(2, 11),
) -> list[tuple[int, float]]:
    """Accuracy at each grid resolution; non-increasing in n by
    construction."""
    return [
        (n, score_accuracy(pairs, GridSpec(n=n, width_cm=width_cm, height_cm=height_cm)))
        for n in n_values
    ]
