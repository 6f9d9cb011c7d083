import math

import numpy as np
import pytest

from autostory.backends import resolve_backends
from autostory.backends.contracts import PerceptionBundle
from autostory.conditions import (
    SubjectCondition,
    build_panel_condition,
    compose_conditions,
    extract_keypoints,
    extract_sketch,
    keypoints_to_panel,
    localize_and_mask,
    rasterize_keypoints,
)
from autostory.errors import AutoStoryError
from autostory.model import BoundingBox, CharacterProfile, ConditionMap, Joint, KeypointSet
from conftest import make_layout, small_config


class FakeDetector:
    name = "fake"

    def __init__(self, detections):
        self.detections = detections

    def detect(self, image, query):
        return self.detections


class FakeSegmenter:
    name = "fake"

    def __init__(self, mask=None):
        self.mask = mask

    def segment(self, image, box):
        if self.mask is not None:
            return self.mask
        return np.ones(image.shape[:2], dtype=bool)


class FakePose:
    name = "fake"

    def __init__(self, keypoints):
        self.keypoints = keypoints

    def estimate_pose(self, image, box):
        return self.keypoints


def bundle(detector=None, segmenter=None, pose=None):
    return PerceptionBundle(
        detector=detector or FakeDetector([(BoundingBox(0.2, 0.2, 0.8, 0.8), 0.9)]),
        segmenter=segmenter or FakeSegmenter(),
        pose=pose or FakePose(KeypointSet(joints=(), skeleton=())),
    )


class TestExtractSketch:
    def test_filled_rectangle_boundary_is_its_perimeter(self):
        mask = np.zeros((20, 20), dtype=bool)
        mask[5:15, 5:15] = True
        sketch = extract_sketch(mask)
        assert sketch.kind == "sketch"
        assert int(sketch.values.sum()) == 36
        assert sketch.values[5, 5] == 1.0 and sketch.values[10, 10] == 0.0

    def test_image_border_counts_as_outside(self):
        sketch = extract_sketch(np.ones((5, 5), dtype=bool))
        assert int(sketch.values.sum()) == 16
        assert sketch.values[2, 2] == 0.0 and sketch.values[0, 2] == 1.0

    def test_single_pixel_is_its_own_boundary(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = True
        assert int(extract_sketch(mask).values.sum()) == 1

    def test_crop_box_trims_to_its_pixel_rect(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:8, 2:8] = True
        box = BoundingBox(0.2, 0.2, 0.8, 0.8)
        sketch = extract_sketch(mask, crop_box=box)
        px0, py0, px1, py1 = box.pixel_rect(10, 10)
        assert sketch.values.shape == (py1 - py0, px1 - px0)
        assert int(sketch.values.sum()) == 20

    @pytest.mark.parametrize("mask", [np.zeros((6, 6), dtype=bool), np.zeros((0, 4), dtype=bool), np.ones(9, dtype=bool)])
    def test_unusable_masks_are_rejected(self, mask):
        with pytest.raises(AutoStoryError) as err:
            extract_sketch(mask)
        assert err.value.code == "EMPTY_MASK"


class TestLocalizeAndMask:
    def setup_method(self):
        self.image = np.zeros((10, 10, 3), dtype=np.uint8)

    def test_highest_score_wins(self):
        detector = FakeDetector(
            [(BoundingBox(0.0, 0.0, 1.0, 1.0), 0.2), (BoundingBox(0.1, 0.1, 0.3, 0.3), 0.9)]
        )
        box, _ = localize_and_mask(self.image, "a dog", bundle(detector=detector))
        assert box == BoundingBox(0.1, 0.1, 0.3, 0.3)

    def test_score_ties_break_to_larger_area_then_earlier(self):
        big = BoundingBox(0.0, 0.0, 0.9, 0.9)
        small = BoundingBox(0.0, 0.0, 0.2, 0.2)
        detector = FakeDetector([(small, 0.5), (big, 0.5)])
        box, _ = localize_and_mask(self.image, "a dog", bundle(detector=detector))
        assert box == big
        twin = BoundingBox(0.1, 0.1, 1.0, 1.0)  # same area as big
        detector = FakeDetector([(big, 0.5), (twin, 0.5)])
        box, _ = localize_and_mask(self.image, "a dog", bundle(detector=detector))
        assert box == big

    def test_mask_is_clipped_to_the_detected_box(self):
        detector = FakeDetector([(BoundingBox(0.2, 0.2, 0.8, 0.8), 0.9)])
        box, mask = localize_and_mask(self.image, "a dog", bundle(detector=detector))
        assert mask[5, 5] and not mask[0, 0] and not mask[9, 9]
        px0, py0, px1, py1 = box.pixel_rect(10, 10)
        assert mask.sum() == (px1 - px0) * (py1 - py0)

    def test_no_detection_falls_back_to_full_image_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            box, mask = localize_and_mask(self.image, "a dog", bundle(detector=FakeDetector([])))
        assert box == BoundingBox(0.0, 0.0, 1.0, 1.0)
        assert mask.all()
        assert any("falling back" in r.message for r in caplog.records)

    def test_no_detection_can_be_a_hard_error(self):
        with pytest.raises(AutoStoryError) as err:
            localize_and_mask(self.image, "a dog", bundle(detector=FakeDetector([])), fallback="error")
        assert err.value.code == "DETECTION_EMPTY"

    def test_backend_failures_are_wrapped(self):
        class Boom:
            name = "boom"

            def detect(self, image, query):
                raise RuntimeError("no weights")

        with pytest.raises(AutoStoryError) as err:
            localize_and_mask(self.image, "a dog", bundle(detector=Boom()))
        assert err.value.code == "BACKEND_FAILED"

    def test_bad_segmenter_shape_is_rejected(self):
        seg = FakeSegmenter(mask=np.ones((4, 4), dtype=bool))
        with pytest.raises(AutoStoryError) as err:
            localize_and_mask(self.image, "a dog", bundle(segmenter=seg))
        assert err.value.code == "BACKEND_FAILED"


class TestExtractKeypoints:
    def test_joints_become_box_relative(self):
        box = BoundingBox(0.25, 0.1, 0.75, 0.7)
        pose = FakePose(KeypointSet(joints=(Joint(name="head", x=0.5, y=0.3, visible=True),), skeleton=()))
        out = extract_keypoints(np.zeros((8, 8, 3), dtype=np.uint8), box, bundle(pose=pose))
        assert out.joints[0].x == pytest.approx(0.5, abs=1e-15)
        assert out.joints[0].y == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_out_of_box_joints_survive_with_a_warning(self, caplog):
        box = BoundingBox(0.0, 0.0, 0.5, 1.0)
        pose = FakePose(KeypointSet(joints=(Joint(name="tail", x=0.9, y=0.5, visible=True),), skeleton=()))
        with caplog.at_level("WARNING"):
            out = extract_keypoints(np.zeros((8, 8, 3), dtype=np.uint8), box, bundle(pose=pose))
        assert out.joints[0].x == pytest.approx(1.8)
        assert any("out_of_box" in r.message for r in caplog.records)

    def test_zero_area_box_fails(self):
        box = BoundingBox(0.5, 0.2, 0.5, 0.8)
        with pytest.raises(AutoStoryError) as err:
            extract_keypoints(np.zeros((8, 8, 3), dtype=np.uint8), box, bundle())
        assert err.value.code == "POSE_FAILED"

    def test_round_trip_through_panel_coordinates(self):
        box = BoundingBox(0.25, 0.1, 0.75, 0.7)
        rel = KeypointSet(joints=(Joint(name="head", x=0.5, y=1.0 / 3.0, visible=True),), skeleton=())
        panel = keypoints_to_panel(rel, box)
        assert panel.joints[0].x == pytest.approx(0.5, abs=1e-12)
        assert panel.joints[0].y == pytest.approx(0.3, abs=1e-12)


class TestRasterizeKeypoints:
    def test_straight_segment_is_one_pixel_wide(self):
        kp = KeypointSet(
            joints=(Joint(name="a", x=0.1, y=0.5, visible=True), Joint(name="b", x=0.9, y=0.5, visible=True)),
            skeleton=(("a", "b"),),
        )
        raster = rasterize_keypoints([kp], 20)
        assert raster.kind == "keypoint-raster"
        row = int(0.5 * 20)
        assert raster.values[row].sum() == raster.values.sum()
        assert raster.values[row, 2] == 1.0 and raster.values[row, 18] == 1.0

    def test_invisible_joints_draw_nothing(self):
        kp = KeypointSet(
            joints=(Joint(name="a", x=0.1, y=0.5, visible=True), Joint(name="b", x=0.9, y=0.5, visible=False)),
            skeleton=(("a", "b"),),
        )
        assert rasterize_keypoints([kp], 20).values.sum() == 0

    def test_clip_rect_bounds_the_strokes(self):
        kp = KeypointSet(
            joints=(Joint(name="a", x=0.0, y=0.5, visible=True), Joint(name="b", x=1.0, y=0.5, visible=True)),
            skeleton=(("a", "b"),),
        )
        raster = rasterize_keypoints([kp], 20, rect=(5, 0, 10, 20))
        ys, xs = np.nonzero(raster.values)
        assert xs.min() >= 5 and xs.max() <= 9

    def test_edges_naming_unknown_joints_are_skipped(self):
        kp = KeypointSet(joints=(Joint(name="a", x=0.5, y=0.5, visible=True),), skeleton=(("a", "ghost"),))
        assert rasterize_keypoints([kp], 10).values.sum() == 0


def nn_oracle(src, dst_h, dst_w):
    """Per-pixel nearest-neighbor rescale, written as plain loops."""
    src_h, src_w = src.shape
    out = np.zeros((dst_h, dst_w))
    for r in range(dst_h):
        for c in range(dst_w):
            sr = min(math.floor((r + 0.5) * src_h / dst_h), src_h - 1)
            sc = min(math.floor((c + 0.5) * src_w / dst_w), src_w - 1)
            out[r, c] = src[sr, sc]
    return out


class TestComposeConditions:
    def test_identity_box_is_pasted_bitwise(self):
        res = 32
        box = BoundingBox(0.25, 0.25, 0.75, 0.75)
        px0, py0, px1, py1 = box.pixel_rect(res, res)
        rng = np.random.default_rng(0)
        crop = (rng.random((py1 - py0, px1 - px0)) > 0.5).astype(np.float64)
        layout = make_layout((0.25, 0.25, 0.75, 0.75))
        subject = SubjectCondition(kind="sketch", sketch=ConditionMap(crop, kind="sketch"), source_box=box)
        composed, keypoints = compose_conditions(layout, [subject], resolution=res)
        assert keypoints == ()
        assert np.array_equal(composed.values[py0:py1, px0:px1], crop)
        assert composed.values.sum() == crop.sum()

    def test_rescale_matches_scalar_nearest_neighbor_oracle(self):
        res = 40
        source_box = BoundingBox(0.1, 0.1, 0.4, 0.5)
        target = BoundingBox(0.5, 0.2, 0.95, 0.9)
        sx0, sy0, sx1, sy1 = source_box.pixel_rect(res, res)
        rng = np.random.default_rng(1)
        crop = (rng.random((sy1 - sy0, sx1 - sx0)) > 0.6).astype(np.float64)
        layout = make_layout(target.to_list())
        subject = SubjectCondition(kind="sketch", sketch=ConditionMap(crop, kind="sketch"), source_box=source_box)
        composed, _ = compose_conditions(layout, [subject], resolution=res)
        px0, py0, px1, py1 = target.pixel_rect(res, res)
        assert np.array_equal(composed.values[py0:py1, px0:px1], nn_oracle(crop, py1 - py0, px1 - px0))

    def test_support_stays_inside_the_box_union(self):
        res = 24
        boxes = [BoundingBox(0.0, 0.0, 0.5, 0.6), BoundingBox(0.4, 0.3, 0.9, 0.9)]
        layout = make_layout(*[b.to_list() for b in boxes])
        subjects = [
            SubjectCondition(kind="sketch", sketch=ConditionMap(np.ones((4, 4)), kind="sketch"), source_box=None)
            for _ in boxes
        ]
        composed, _ = compose_conditions(layout, subjects, resolution=res)
        union = np.zeros((res, res), dtype=bool)
        for box in boxes:
            px0, py0, px1, py1 = box.pixel_rect(res, res)
            union[py0:py1, px0:px1] = True
        assert composed.values[~union].sum() == 0

    def test_later_bindings_overwrite_earlier_ones(self):
        res = 16
        layout = make_layout((0.0, 0.0, 1.0, 1.0), (0.25, 0.25, 0.75, 0.75))
        first = SubjectCondition(kind="sketch", sketch=ConditionMap(np.ones((2, 2)), kind="sketch"), source_box=None)
        second = SubjectCondition(kind="sketch", sketch=ConditionMap(np.zeros((2, 2)), kind="sketch"), source_box=None)
        composed, _ = compose_conditions(layout, [first, second], resolution=res)
        assert composed.values[8, 8] == 0.0 and composed.values[0, 0] == 1.0

    def test_sketch_crop_must_match_its_source_box(self):
        res = 32
        source_box = BoundingBox(0.0, 0.0, 0.5, 0.5)
        layout = make_layout((0.2, 0.2, 0.8, 0.8))
        subject = SubjectCondition(
            kind="sketch", sketch=ConditionMap(np.ones((3, 3)), kind="sketch"), source_box=source_box
        )
        with pytest.raises(AutoStoryError) as err:
            compose_conditions(layout, [subject], resolution=res)
        assert err.value.code == "SIZE_MISMATCH"
        assert err.value.path == "bindings[0]"

    def test_keypoint_only_panels_get_a_keypoint_raster(self):
        kp = KeypointSet(
            joints=(Joint(name="a", x=0.2, y=0.2, visible=True), Joint(name="b", x=0.8, y=0.8, visible=True)),
            skeleton=(("a", "b"),),
        )
        layout = make_layout((0.1, 0.1, 0.9, 0.9))
        subject = SubjectCondition(kind="keypoints", keypoints=kp, source_box=None)
        composed, panel_sets = compose_conditions(layout, [subject], resolution=32)
        assert composed.kind == "keypoint-raster"
        assert len(panel_sets) == 1
        assert composed.values.sum() > 0
        # mixing in a sketch flips the composed kind
        layout2 = make_layout((0.1, 0.1, 0.9, 0.9), (0.1, 0.1, 0.9, 0.9))
        sketch = SubjectCondition(kind="sketch", sketch=ConditionMap(np.ones((2, 2)), kind="sketch"), source_box=None)
        composed2, _ = compose_conditions(layout2, [subject, sketch], resolution=32)
        assert composed2.kind == "sketch"

    def test_count_mismatch_is_a_programming_error(self):
        with pytest.raises(ValueError):
            compose_conditions(make_layout((0.1, 0.1, 0.5, 0.5)), [], resolution=16)


class TestBuildPanelCondition:
    def setup_method(self):
        self.config = small_config()
        self.backends = resolve_backends(self.config)

    def test_stub_pipeline_produces_a_sketch_condition(self):
        layout = make_layout(
            (0.05, 0.45, 0.45, 0.95),
            (0.55, 0.4, 0.9, 0.9),
            prompts=["a brown dog running", "a grey cat leaping"],
        )
        build = build_panel_condition(
            layout, self.backends.perception, self.backends.generator, 7, resolution=self.config.resolution
        )
        assert build.condition.kind == "sketch"
        assert build.condition.values.shape == (64, 64)
        assert build.condition.values.sum() > 0
        assert len(build.subjects) == 2 and len(build.subject_images) == 2
        union = np.zeros((64, 64), dtype=bool)
        for binding in layout.bindings:
            px0, py0, px1, py1 = binding.box.pixel_rect(64, 64)
            union[py0:py1, px0:px1] = True
        assert build.condition.values[~union].sum() == 0

    def test_human_characters_get_keypoints(self):
        layout = make_layout((0.2, 0.1, 0.8, 0.95), subjects=["mira"], prompts=["a girl waving"])
        profiles = {"mira": CharacterProfile(name="mira", description="a girl", is_human=True)}
        build = build_panel_condition(
            layout,
            self.backends.perception,
            self.backends.generator,
            7,
            resolution=self.config.resolution,
            characters=profiles,
        )
        assert build.condition.kind == "keypoint-raster"
        assert len(build.keypoints) == 1
        assert build.subjects[0].condition.kind == "keypoints"

    def test_failures_name_the_binding(self):
        class Boom:
            name = "boom"

            def detect(self, image, query):
                raise RuntimeError("dead")

        layout = make_layout((0.1, 0.1, 0.5, 0.5), prompts=["a red bird"])
        perception = PerceptionBundle(detector=Boom(), segmenter=FakeSegmenter(), pose=FakePose(None))
        with pytest.raises(AutoStoryError) as err:
            build_panel_condition(layout, perception, self.backends.generator, 7, resolution=64)
        assert err.value.code == "BACKEND_FAILED"
        assert err.value.path == "bindings[0]"
        assert "binding 0 ('a red bird')" in str(err.value)

    def test_deterministic_for_a_fixed_seed(self):
        layout = make_layout((0.05, 0.45, 0.45, 0.95), prompts=["a brown dog running"])
        one = build_panel_condition(
            layout, self.backends.perception, self.backends.generator, 7, resolution=64
        )
        two = build_panel_condition(
            layout, self.backends.perception, self.backends.generator, 7, resolution=64
        )
        assert one.condition == two.condition
        three = build_panel_condition(
            layout, self.backends.perception, self.backends.generator, 8, resolution=64
        )
        assert one.condition == three.condition or not np.array_equal(
            one.subject_images[0], three.subject_images[0]
        )
