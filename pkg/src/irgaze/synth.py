"""Deterministic synthetic IR scene generator.

Serves as the ground-truth oracle for the detection and estimation
pipeline: a parametric head pose (in-plane similarity transform) and a
normalized gaze point produce exact feature coordinates, and the renderer
paints the matching frame (face ellipse, bright pupils, brighter markers,
Gaussian blur, seeded Gaussian noise).  Identical inputs give bit-identical
images.

The pupil model is linear: the pupil sits at the eye center offset by
(s - 0.5) * gain in the head frame before the pose transform.  Under a
matched head orientation the gaze interpolation is then exact, so
end-to-end error measures the pipeline, not model mismatch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FeatureOutOfFrame
from .gaze import COORD_KEYS, GridSpec, ScreenGeometry
from .imaging import GrayImage, Point, encode_pgm

SCALE_RANGE = (0.5, 2.0)
MAX_ROTATION = 0.35  # radians
RENDER_MARGIN = 10  # minimum feature distance to the image border, px

# Training-sweep translation jitter, px (head drift between repeats).
_JITTER_PX = 12.0

FEATURE_NAMES = ("marker_right", "marker_middle", "marker_left",
                 "pupil_right", "pupil_left")


@dataclass(frozen=True)
class HeadPose:
    """In-plane similarity pose: translation (px), rotation (rad), and a
    scale factor standing in for head depth."""

    tx: float
    ty: float
    theta: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not SCALE_RANGE[0] <= self.scale <= SCALE_RANGE[1]:
            raise ValueError(f"scale must lie in {SCALE_RANGE}")
        if abs(self.theta) > MAX_ROTATION:
            raise ValueError(f"|theta| must be <= {MAX_ROTATION}")

    def apply(self, p: Point) -> Point:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Point(
            self.scale * (c * p.x - s * p.y) + self.tx,
            self.scale * (s * p.x + c * p.y) + self.ty,
        )

    def to_dict(self) -> dict:
        return {"tx": self.tx, "ty": self.ty, "theta": self.theta, "k": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "HeadPose":
        return cls(tx=float(d["tx"]), ty=float(d["ty"]),
                   theta=float(d["theta"]), scale=float(d["k"]))


@dataclass(frozen=True)
class FaceLayout:
    """Canonical face geometry in head-local coordinates (origin at the
    face center, pose scale 1, no rotation).  Outer markers sit above the
    eyebrows, the middle marker below the area between the eyes, so the
    rectangle spanned by an outer marker and the middle marker always
    contains its eye."""

    marker_right: Point = Point(90.0, 55.0)
    marker_left: Point = Point(-90.0, 55.0)
    marker_middle: Point = Point(0.0, 8.0)
    eye_right: Point = Point(45.0, 30.0)
    eye_left: Point = Point(-45.0, 30.0)
    marker_radius: float = 7.0
    pupil_radius: float = 5.0
    pupil_gain: tuple[float, float] = (12.0, 12.0)
    face_axes: tuple[float, float] = (130.0, 100.0)

    def __post_init__(self):
        for name in ("marker_right", "marker_left"):
            marker = getattr(self, name)
            eye = self.eye_right if name == "marker_right" else self.eye_left
            if marker.y <= eye.y:
                raise ValueError(f"{name} must sit above its eye center")
        if self.marker_middle.y >= min(self.marker_right.y, self.marker_left.y):
            raise ValueError("middle marker must sit below the outer markers")
        if not (self.marker_middle.x < self.eye_right.x < self.marker_right.x):
            raise ValueError("right eye must lie inside its marker rectangle")
        if not (self.marker_left.x < self.eye_left.x < self.marker_middle.x):
            raise ValueError("left eye must lie inside its marker rectangle")
        if min(self.marker_radius, self.pupil_radius, *self.pupil_gain,
               *self.face_axes) <= 0:
            raise ValueError("radii, gains, and face axes must be positive")


@dataclass(frozen=True)
class RenderConfig:
    """Paint levels and degradations.  The intensity ordering marker >
    pupil > face > background mirrors how retro-reflection ranks in real
    IR frames."""

    width: int = 640
    height: int = 480
    background: int = 30
    face: int = 80
    pupil: int = 180
    marker: int = 250
    blur_sigma: float = 0.8
    noise_sigma: float = 2.0

    def __post_init__(self):
        if not 0 <= self.background < self.face < self.pupil < self.marker <= 255:
            raise ValueError("need marker > pupil > face > background in [0, 255]")
        if self.width < 2 * RENDER_MARGIN or self.height < 2 * RENDER_MARGIN:
            raise ValueError("image too small for the feature margin")
        if self.blur_sigma < 0 or self.noise_sigma < 0:
            raise ValueError("sigmas must be >= 0")


class FeaturePoints(NamedTuple):
    """The five feature coordinates of one frame, image Cartesian."""

    marker_right: Point
    marker_middle: Point
    marker_left: Point
    pupil_right: Point
    pupil_left: Point


@dataclass(frozen=True)
class GroundTruth:
    """Exact feature coordinates a (pose, gaze) pair induces, plus the
    provenance needed to re-render the frame."""

    features: FeaturePoints
    gaze_cm: Point
    pose: HeadPose
    seed: int | None = None

    def coords_dict(self) -> dict[str, float]:
        row = (
            self.features.marker_right.x, self.features.marker_right.y,
            self.features.marker_middle.x, self.features.marker_middle.y,
            self.features.marker_left.x, self.features.marker_left.y,
            self.features.pupil_right.x, self.features.pupil_right.y,
            self.features.pupil_left.x, self.features.pupil_left.y,
        )
        return dict(zip(COORD_KEYS, row))

    @classmethod
    def from_manifest_entry(cls, entry: dict) -> "GroundTruth":
        t = entry["truth"]
        features = FeaturePoints(
            marker_right=Point(t["x_mr"], t["y_mr"]),
            marker_middle=Point(t["x_mm"], t["y_mm"]),
            marker_left=Point(t["x_ml"], t["y_ml"]),
            pupil_right=Point(t["x_pr"], t["y_pr"]),
            pupil_left=Point(t["x_pl"], t["y_pl"]),
        )
        return cls(
            features=features,
            gaze_cm=Point(*entry["gaze"]),
            pose=HeadPose.from_dict(entry["pose"]),
            seed=entry.get("seed"),
        )


def feature_model(pose: HeadPose, gaze_norm: tuple[float, float],
                  layout: FaceLayout = FaceLayout()) -> FeaturePoints:
    """Map a pose and a normalized gaze point to exact feature coordinates.

    Markers follow the similarity transform directly; pupils first shift by
    (s - 0.5) * gain in the head frame.  Linear in the gaze point for a
    fixed pose.
    """
    sx, sy = gaze_norm
    if not (0.0 <= sx <= 1.0 and 0.0 <= sy <= 1.0):
        raise ValueError(f"normalized gaze must lie in [0, 1]^2, got {gaze_norm}")
    dx = (sx - 0.5) * layout.pupil_gain[0]
    dy = (sy - 0.5) * layout.pupil_gain[1]
    return FeaturePoints(
        marker_right=pose.apply(layout.marker_right),
        marker_middle=pose.apply(layout.marker_middle),
        marker_left=pose.apply(layout.marker_left),
        pupil_right=pose.apply(layout.eye_right.shifted(dx, dy)),
        pupil_left=pose.apply(layout.eye_left.shifted(dx, dy)),
    )


def _gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return a
    r = int(math.ceil(3.0 * sigma))
    xs = np.arange(-r, r + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (xs / sigma) ** 2)
    kernel /= kernel.sum()

    out = np.zeros_like(a)
    padded = np.pad(a, ((0, 0), (r, r)), mode="edge")
    for i, k in enumerate(kernel):
        out += k * padded[:, i : i + a.shape[1]]
    a = out
    out = np.zeros_like(a)
    padded = np.pad(a, ((r, r), (0, 0)), mode="edge")
    for i, k in enumerate(kernel):
        out += k * padded[i : i + a.shape[0], :]
    return out


def render_scene(
    truth: GroundTruth,
    layout: FaceLayout = FaceLayout(),
    cfg: RenderConfig = RenderConfig(),
    seed: int | None = None,
) -> GrayImage:
    """Paint the frame for a ground-truth record.

    Every feature center must keep RENDER_MARGIN pixels to the border.
    Deterministic: the same (truth, layout, cfg, seed) give byte-identical
    images.
    """
    for name, p in zip(FEATURE_NAMES, truth.features):
        if not (RENDER_MARGIN <= p.x <= cfg.width - 1 - RENDER_MARGIN
                and RENDER_MARGIN <= p.y <= cfg.height - 1 - RENDER_MARGIN):
            raise FeatureOutOfFrame(
                f"{name} at ({p.x:.1f}, {p.y:.1f}) violates the "
                f"{RENDER_MARGIN} px margin in a {cfg.width}x{cfg.height} frame"
            )

    cols = np.arange(cfg.width, dtype=np.float64)
    ys = (cfg.height - 1) - np.arange(cfg.height, dtype=np.float64)
    gx, gy = np.meshgrid(cols, ys)

    canvas = np.full((cfg.height, cfg.width), float(cfg.background))

    # Face ellipse: invert the pose transform and test against the
    # axis-aligned canonical ellipse.
    k = truth.pose.scale
    c, s = math.cos(truth.pose.theta), math.sin(truth.pose.theta)
    rx = (gx - truth.pose.tx) / k
    ry = (gy - truth.pose.ty) / k
    local_x = c * rx + s * ry
    local_y = -s * rx + c * ry
    ax, ay = layout.face_axes
    canvas[(local_x / ax) ** 2 + (local_y / ay) ** 2 <= 1.0] = float(cfg.face)

    def paint_disk(center: Point, radius: float, level: int) -> None:
        mask = (gx - center.x) ** 2 + (gy - center.y) ** 2 <= radius * radius
        canvas[mask] = float(level)

    paint_disk(truth.features.pupil_right, layout.pupil_radius * k, cfg.pupil)
    paint_disk(truth.features.pupil_left, layout.pupil_radius * k, cfg.pupil)
    paint_disk(truth.features.marker_right, layout.marker_radius * k, cfg.marker)
    paint_disk(truth.features.marker_middle, layout.marker_radius * k, cfg.marker)
    paint_disk(truth.features.marker_left, layout.marker_radius * k, cfg.marker)

    canvas = _gaussian_blur(canvas, cfg.blur_sigma)

    if cfg.noise_sigma > 0:
        effective_seed = seed if seed is not None else truth.seed
        if effective_seed is None:
            raise ValueError("noisy rendering needs a seed")
        rng = np.random.default_rng(effective_seed)
        canvas = canvas + rng.normal(0.0, cfg.noise_sigma, canvas.shape)

    return GrayImage(np.floor(np.clip(canvas, 0, 255) + 0.5).astype(np.uint8))


def default_poses(width: int = 640, height: int = 480) -> tuple[HeadPose, ...]:
    """Six head poses spanning translation, small rotation, and depth,
    mirroring a subject facing six different screen cells.  Scales are
    pairwise distinct so orientation matching stays unambiguous."""
    cx, cy = width / 2.0, height / 2.0
    return (
        HeadPose(cx, cy, 0.00, 1.00),
        HeadPose(cx + 60, cy + 40, 0.05, 0.94),
        HeadPose(cx - 60, cy + 30, -0.04, 0.97),
        HeadPose(cx + 65, cy, 0.03, 1.03),
        HeadPose(cx - 40, cy - 35, -0.06, 1.06),
        HeadPose(cx + 15, cy - 45, 0.02, 0.90),
    )


@dataclass(frozen=True)
class DatasetSpec:
    """What to generate: evaluation frames cover ``eval_points`` cell
    centers of an ``eval_grid_n`` grid at every pose; training frames sweep
    the four corner targets at every pose, ``training_repeats`` times with
    a little translation jitter between repeats."""

    poses: tuple[HeadPose, ...] = field(default_factory=default_poses)
    eval_points: int = 25
    eval_grid_n: int = 5
    training_repeats: int = 2
    screen: ScreenGeometry = field(default_factory=ScreenGeometry.with_corner_targets)
    layout: FaceLayout = FaceLayout()
    render: RenderConfig = RenderConfig()
    master_seed: int = 1234

    def __post_init__(self):
        if self.eval_points < 0 or self.eval_points > self.eval_grid_n ** 2:
            raise ValueError("eval_points must lie in [0, eval_grid_n^2]")
        if self.training_repeats < 0:
            raise ValueError("training_repeats must be >= 0")


def _frame_seeds(master_seed: int, index: int) -> tuple[int, int]:
    state = np.random.SeedSequence([master_seed, index]).generate_state(2)
    return int(state[0]), int(state[1])


def generate_dataset(spec: DatasetSpec, out_dir: str | Path) -> dict:
    """Render the dataset into ``out_dir`` and return the manifest (also
    written as manifest.json).  Frames whose features would leave the frame
    are skipped and logged under "skipped"."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    grid = GridSpec(n=spec.eval_grid_n, width_cm=spec.screen.width_cm,
                    height_cm=spec.screen.height_cm)

    # (frame_id, role, corner_or_None, gaze_cm, base_pose, jitter?)
    plan: list[tuple[str, str, int | None, Point, HeadPose, bool]] = []
    for pi, pose in enumerate(spec.poses):
        for corner in (1, 2, 3, 4):
            for rep in range(spec.training_repeats):
                plan.append((
                    f"train_p{pi}_c{corner}_r{rep}",
                    "training", corner, spec.screen.corner(corner), pose, rep > 0,
                ))
    for pi, pose in enumerate(spec.poses):
        for label in range(1, spec.eval_points + 1):
            plan.append((
                f"eval_p{pi}_k{label:02d}",
                "evaluation", None, grid.cell_center(label), pose, False,
            ))

    frames = []
    skipped = []
    for index, (frame_id, role, corner, gaze, base_pose, jitter) in enumerate(plan):
        noise_seed, jitter_seed = _frame_seeds(spec.master_seed, index)
        pose = base_pose
        if jitter:
            drift = np.random.default_rng(jitter_seed).uniform(-_JITTER_PX, _JITTER_PX, 2)
            pose = HeadPose(base_pose.tx + float(drift[0]),
                            base_pose.ty + float(drift[1]),
                            base_pose.theta, base_pose.scale)
        gaze_norm = (gaze.x / spec.screen.width_cm, gaze.y / spec.screen.height_cm)
        truth = GroundTruth(
            features=feature_model(pose, gaze_norm, spec.layout),
            gaze_cm=gaze,
            pose=pose,
            seed=noise_seed,
        )
        file_name = frame_id + ".pgm"
        try:
            img = render_scene(truth, spec.layout, spec.render)
        except FeatureOutOfFrame as exc:
            skipped.append({"file": file_name, "role": role, "error": str(exc)})
            continue
        (out / file_name).write_bytes(encode_pgm(img))
        entry = {
            "file": file_name,
            "role": role,
            "gaze": [gaze.x, gaze.y],
            "pose": pose.to_dict(),
            "truth": truth.coords_dict(),
            "seed": noise_seed,
        }
        if corner is not None:
            entry["corner"] = corner
        frames.append(entry)

    manifest = {
        "screen": spec.screen.to_dict(),
        "frames": frames,
        "skipped": skipped,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest
