import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irgaze.detection import DetectConfig, observe_face
from irgaze.errors import FeatureOutOfFrame
from irgaze.gaze import congruency
from irgaze.imaging import Point, decode_pgm
from irgaze.synth import (
    DatasetSpec,
    FaceLayout,
    GroundTruth,
    HeadPose,
    RenderConfig,
    default_poses,
    feature_model,
    generate_dataset,
    render_scene,
)

LAYOUT = FaceLayout()


def truth_for(pose, s, seed=None):
    return GroundTruth(
        features=feature_model(pose, s, LAYOUT),
        gaze_cm=Point(s[0] * 60.0, s[1] * 60.0),
        pose=pose,
        seed=seed,
    )


# --- feature_model -----------------------------------------------------------

def test_identity_pose_center_gaze_is_canonical_layout():
    f = feature_model(HeadPose(0, 0), (0.5, 0.5), LAYOUT)
    assert f.marker_right == LAYOUT.marker_right
    assert f.marker_middle == LAYOUT.marker_middle
    assert f.marker_left == LAYOUT.marker_left
    assert f.pupil_right == LAYOUT.eye_right
    assert f.pupil_left == LAYOUT.eye_left


def test_gaze_extremes_differ_by_full_gain():
    hi = feature_model(HeadPose(0, 0), (1.0, 1.0), LAYOUT)
    lo = feature_model(HeadPose(0, 0), (0.0, 0.0), LAYOUT)
    gx, gy = LAYOUT.pupil_gain
    assert hi.pupil_right.x - lo.pupil_right.x == pytest.approx(gx)
    assert hi.pupil_right.y - lo.pupil_right.y == pytest.approx(gy)
    assert hi.marker_right == lo.marker_right  # markers ignore gaze


def test_pose_transform_matches_matrix_evaluation():
    pose = HeadPose(15.0, -10.0, 0.1, 1.2)
    f = feature_model(pose, (0.25, 0.75), LAYOUT)
    rot = np.array([
        [math.cos(0.1), -math.sin(0.1)],
        [math.sin(0.1), math.cos(0.1)],
    ])
    t = np.array([15.0, -10.0])
    for name, canonical in [
        ("marker_right", np.array(LAYOUT.marker_right)),
        ("marker_middle", np.array(LAYOUT.marker_middle)),
        ("marker_left", np.array(LAYOUT.marker_left)),
        ("pupil_right", np.array(LAYOUT.eye_right) + [(0.25 - 0.5) * 12, (0.75 - 0.5) * 12]),
        ("pupil_left", np.array(LAYOUT.eye_left) + [(0.25 - 0.5) * 12, (0.75 - 0.5) * 12]),
    ]:
        expected = 1.2 * rot @ canonical + t
        got = getattr(f, name)
        assert got.x == pytest.approx(expected[0], abs=1e-12)
        assert got.y == pytest.approx(expected[1], abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    tx=st.floats(-50, 50), ty=st.floats(-50, 50),
    theta=st.floats(-0.3, 0.3), k=st.floats(0.6, 1.8),
    sx=st.floats(0, 1), sy=st.floats(0, 1),
)
def test_model_is_linear_in_gaze(tx, ty, theta, k, sx, sy):
    pose = HeadPose(tx, ty, theta, k)
    lo = feature_model(pose, (0.0, 0.0), LAYOUT)
    hi = feature_model(pose, (sx, sy), LAYOUT)
    mid = feature_model(pose, (sx / 2, sy / 2), LAYOUT)
    assert mid.pupil_right.x == pytest.approx((lo.pupil_right.x + hi.pupil_right.x) / 2, abs=1e-9)
    assert mid.pupil_right.y == pytest.approx((lo.pupil_right.y + hi.pupil_right.y) / 2, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    tx=st.floats(-80, 80), ty=st.floats(-80, 80),
    theta=st.floats(-0.35, 0.35), k=st.floats(0.5, 2.0),
    sx=st.floats(0, 1), sy=st.floats(0, 1),
)
def test_model_marker_triple_is_always_valid(tx, ty, theta, k, sx, sy):
    f = feature_model(HeadPose(tx, ty, theta, k), (sx, sy), LAYOUT)
    assert f.marker_right.x >= f.marker_left.x
    assert f.marker_middle.y < 0.5 * (f.marker_right.y + f.marker_left.y)


def test_same_scale_zero_rotation_poses_are_congruent():
    a = feature_model(HeadPose(320, 240, 0.0, 1.0), (0.5, 0.5), LAYOUT)
    b = feature_model(HeadPose(400, 180, 0.0, 1.0), (0.2, 0.9), LAYOUT)
    from irgaze.detection import MarkerTriple
    ta = MarkerTriple(a.marker_right, a.marker_middle, a.marker_left)
    tb = MarkerTriple(b.marker_right, b.marker_middle, b.marker_left)
    assert congruency(ta, tb) == pytest.approx(0.0, abs=1e-12)


def test_gaze_outside_unit_square_rejected():
    with pytest.raises(ValueError):
        feature_model(HeadPose(0, 0), (1.2, 0.5), LAYOUT)


def test_pose_validation():
    with pytest.raises(ValueError):
        HeadPose(0, 0, 0.0, 0.4)
    with pytest.raises(ValueError):
        HeadPose(0, 0, 0.5, 1.0)


def test_layout_validation():
    with pytest.raises(ValueError):
        FaceLayout(marker_middle=Point(0.0, 80.0))  # above the outer markers
    with pytest.raises(ValueError):
        FaceLayout(eye_right=Point(95.0, 30.0))  # outside its marker rectangle


def test_render_config_validation():
    with pytest.raises(ValueError):
        RenderConfig(pupil=250, marker=250)


# --- render_scene -------------------------------------------------------------

def test_render_is_deterministic():
    truth = truth_for(HeadPose(320, 240, 0.02, 1.05), (0.3, 0.7), seed=42)
    a = render_scene(truth, LAYOUT, RenderConfig())
    b = render_scene(truth, LAYOUT, RenderConfig())
    assert a == b
    assert a.flat() == b.flat()


def test_render_different_seeds_differ():
    truth = truth_for(HeadPose(320, 240), (0.5, 0.5), seed=1)
    a = render_scene(truth, LAYOUT, RenderConfig())
    b = render_scene(truth, LAYOUT, RenderConfig(), seed=2)
    assert a != b


def test_render_clean_marker_centers_hit_paint_level():
    cfg = RenderConfig(blur_sigma=0.0, noise_sigma=0.0)
    truth = truth_for(HeadPose(320, 240), (0.5, 0.5))
    img = render_scene(truth, LAYOUT, cfg)
    for marker in (truth.features.marker_right, truth.features.marker_middle,
                   truth.features.marker_left):
        row = (img.height - 1) - round(marker.y)
        assert img.pixels[row, round(marker.x)] == 250
    row = (img.height - 1) - round(truth.features.pupil_right.y)
    assert img.pixels[row, round(truth.features.pupil_right.x)] == 180


def test_render_rejects_features_near_the_border():
    truth = truth_for(HeadPose(95, 240), (0.5, 0.5), seed=3)  # left marker at x=5
    with pytest.raises(FeatureOutOfFrame):
        render_scene(truth, LAYOUT, RenderConfig())


def test_render_feeds_back_through_detection():
    truth = truth_for(HeadPose(320, 240, -0.05, 0.95), (0.9, 0.1), seed=77)
    obs = observe_face(render_scene(truth, LAYOUT, RenderConfig()), DetectConfig())
    f = truth.features
    assert obs.markers.right.distance_to(f.marker_right) < 1.5
    assert obs.markers.middle.distance_to(f.marker_middle) < 1.5
    assert obs.markers.left.distance_to(f.marker_left) < 1.5
    assert obs.pupils.right.point.distance_to(f.pupil_right) < 1.5
    assert obs.pupils.left.point.distance_to(f.pupil_left) < 1.5


# --- generate_dataset -----------------------------------------------------------

def test_dataset_default_shape(tmp_path):
    spec = DatasetSpec(master_seed=5)
    manifest = generate_dataset(spec, tmp_path / "ds")
    frames = manifest["frames"]
    eval_frames = [f for f in frames if f["role"] == "evaluation"]
    train_frames = [f for f in frames if f["role"] == "training"]
    assert len(eval_frames) == 150  # 6 poses x 25 cell centers
    assert len(train_frames) == 6 * 4 * 2
    assert manifest["skipped"] == []
    assert all("corner" in f for f in train_frames)
    assert all("corner" not in f for f in eval_frames)
    listed = {f["file"] for f in frames}
    on_disk = {p.name for p in (tmp_path / "ds").glob("*.pgm")}
    assert listed == on_disk


def test_dataset_empty_spec(tmp_path):
    spec = DatasetSpec(poses=(), eval_points=0, training_repeats=0)
    manifest = generate_dataset(spec, tmp_path / "empty")
    assert manifest["frames"] == []
    assert list((tmp_path / "empty").glob("*.pgm")) == []


def test_dataset_fixed_seed_reproduces_bytes(tmp_path):
    spec = DatasetSpec(poses=default_poses()[:1], eval_points=3,
                       training_repeats=1, master_seed=99)
    m1 = generate_dataset(spec, tmp_path / "a")
    m2 = generate_dataset(spec, tmp_path / "b")
    assert m1 == m2
    for f in m1["frames"]:
        assert (tmp_path / "a" / f["file"]).read_bytes() == \
            (tmp_path / "b" / f["file"]).read_bytes()


def test_dataset_truth_matches_rendered_file(tmp_path):
    spec = DatasetSpec(poses=default_poses()[:1], eval_points=2,
                       training_repeats=0, master_seed=13)
    manifest = generate_dataset(spec, tmp_path / "ds")
    entry = manifest["frames"][0]
    truth = GroundTruth.from_manifest_entry(entry)
    rerendered = render_scene(truth, spec.layout, spec.render)
    stored = decode_pgm((tmp_path / "ds" / entry["file"]).read_bytes())
    assert rerendered == stored


def test_dataset_out_of_frame_pose_is_skipped_and_logged(tmp_path):
    bad = HeadPose(60.0, 240.0)  # face half out of the frame
    spec = DatasetSpec(poses=(bad,), eval_points=1, training_repeats=0, master_seed=1)
    manifest = generate_dataset(spec, tmp_path / "ds")
    assert manifest["frames"] == []
    assert len(manifest["skipped"]) == 1
    assert "margin" in manifest["skipped"][0]["error"]


def test_manifest_schema_fields(tmp_path):
    spec = DatasetSpec(poses=default_poses()[:1], eval_points=1,
                       training_repeats=1, master_seed=2)
    generate_dataset(spec, tmp_path / "ds")
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert set(manifest) == {"screen", "frames", "skipped"}
    assert set(manifest["screen"]) == {"Lx", "Ly", "corners"}
    train = next(f for f in manifest["frames"] if f["role"] == "training")
    assert set(train) == {"file", "role", "gaze", "pose", "truth", "seed", "corner"}
    assert set(train["pose"]) == {"tx", "ty", "theta", "k"}
    assert set(train["truth"]) == {"x_mr", "y_mr", "x_mm", "y_mm", "x_ml", "y_ml",
                                   "x_pr", "y_pr", "x_pl", "y_pl"}
