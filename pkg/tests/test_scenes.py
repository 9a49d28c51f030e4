import json
import math

import numpy as np
import pytest

from fomo import (
    AffineMap,
    FileFormatError,
    MaskPolicyConfig,
    OcclusionMap,
    SceneSpec,
    backwarp,
    coordinate_grid,
    dense_flow,
    evaluate_equivariance,
    flow_error_profile,
    ideal_descriptors,
    keypoint_grid,
    pairwise_motion,
    render_pattern,
    rotation_map,
    scene_from_json_dict,
    soft_masks,
    tps_warp_image,
)
from fomo.scenes import TpsMap, profile_to_csv
from fomo.tps import TpsSampleConfig, tps_eval_grid, tps_sample


def affine_scene(seed=0, **kw):
    rng = np.random.default_rng(seed)
    lin = rng.uniform(-0.3, 0.3, (2, 2)) + np.eye(2)
    off = rng.uniform(-0.15, 0.15, 2)
    defaults = dict(keypoints=keypoint_grid(3, 3), pattern="ramp", pattern_param=0)
    defaults.update(kw)
    return SceneSpec(AffineMap(lin, off), **defaults)


class TestIdealDescriptors:
    def test_identity_transform(self):
        spec = SceneSpec(AffineMap(np.eye(2), [0, 0]), keypoint_grid(2, 2))
        src, drv = ideal_descriptors(spec)
        assert np.array_equal(src.positions(), drv.positions())
        assert np.array_equal(src.jacobians(), drv.jacobians())

    def test_rotation_analytic(self):
        theta = 0.6
        spec = SceneSpec(rotation_map(theta), keypoint_grid(3, 3))
        src, drv = ideal_descriptors(spec)
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        assert np.abs(drv.positions() - src.positions() @ rot.T).max() < 1e-15
        assert np.abs(drv.jacobians() - rot).max() < 1e-15

    def test_tps_jacobians_match_finite_differences(self):
        t = tps_sample(TpsSampleConfig(seed=77))
        spec = SceneSpec(TpsMap(t), keypoint_grid(3, 3, 0.6))
        _, drv = ideal_descriptors(spec)
        h = 1e-5
        pts = spec.keypoints
        for n, jac in zip(range(len(pts)), drv.jacobians()):
            for axis in range(2):
                e = np.zeros(2)
                e[axis] = h
                fd = (tps_eval_grid(t, pts[n] + e) - tps_eval_grid(t, pts[n] - e)) / (2 * h)
                assert np.abs(jac[:, axis] - fd).max() < 1e-5


class TestFlowErrorProfile:
    def test_affine_first_order_exact(self):
        rows = flow_error_profile(affine_scene(1), "first", [0.1, 0.3, 0.5, 0.9])
        for row in rows:
            assert row.max_error < 1e-12

    def test_rotation_closed_form(self):
        for theta in (0.2, 0.5, 1.0):
            spec = SceneSpec(rotation_map(theta), [[0.0, 0.0]])
            rows = flow_error_profile(spec, "zeroth", [0.1, 0.2, 0.4])
            for row in rows:
                expected = 2.0 * row.radius * math.sin(theta / 2.0)
                assert abs(row.mean_error - expected) < 1e-9

    def test_radius_zero_both_orders(self):
        spec = affine_scene(2)
        for order in ("zeroth", "first"):
            rows = flow_error_profile(spec, order, [0.0])
            assert rows[0].max_error < 1e-12

    def test_zeroth_error_monotone_in_radius(self):
        radii = [0.1, 0.2, 0.4, 0.6, 0.8]
        rows = flow_error_profile(affine_scene(3), "zeroth", radii)
        means = [r.mean_error for r in rows]
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_csv_format(self):
        rows = flow_error_profile(affine_scene(4), "zeroth", [0.1, 0.2])
        text = profile_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "radius,mean_error,max_error"
        assert len(lines) == 3
        r, mean, mx = (float(v) for v in lines[1].split(","))
        assert r == 0.1 and mean > 0 and mx >= mean


class TestRenderPattern:
    def test_checkerboard_blocks(self):
        spec = SceneSpec(
            AffineMap(np.eye(2), [0, 0]), [[0, 0]], "checkerboard", 8, 64, 64
        )
        img = render_pattern(spec)
        data = img.data[..., 0]
        assert np.array_equal(np.unique(data), [0.0, 1.0])
        # 8x8 cells on 64 pixels: blocks of 8, alternating
        assert np.array_equal(data[:8, :8], np.zeros((8, 8)))
        assert np.array_equal(data[:8, 8:16], np.ones((8, 8)))
        assert np.array_equal(data[8:16, :8], np.ones((8, 8)))

    def test_ramp_exact(self):
        spec = SceneSpec(AffineMap(np.eye(2), [0, 0]), [[0, 0]], "ramp", 0, 32, 16)
        img = render_pattern(spec)
        i = np.arange(32)
        assert np.array_equal(img.data[..., 0], np.broadcast_to(i / 31.0, (16, 32)))

    def test_blob_maxima_at_keypoint_pixels(self):
        # Oracle: argmax scan around each keypoint.
        kps = np.array([[-0.4, -0.3], [0.5, 0.25]])
        spec = SceneSpec(AffineMap(np.eye(2), [0, 0]), kps, "blobs", 0.08, 64, 64)
        img = render_pattern(spec)
        grid = coordinate_grid(64, 64)
        data = img.data[..., 0]
        for kp in kps:
            d = np.linalg.norm(grid - kp, axis=-1)
            nearest = np.unravel_index(d.argmin(), d.shape)
            # the blob peaks at the pixel center nearest the keypoint
            local = data[
                max(nearest[0] - 5, 0) : nearest[0] + 6,
                max(nearest[1] - 5, 0) : nearest[1] + 6,
            ]
            assert data[nearest] == local.max()

    def test_too_small_resolution(self):
        spec = SceneSpec(AffineMap(np.eye(2), [0, 0]), [[0, 0]], "ramp", 0, 4, 4)
        with pytest.raises(ValueError):
            render_pattern(spec)


class TestSceneJson:
    def test_affine_kind(self):
        spec = scene_from_json_dict(
            {
                "transform": {
                    "kind": "affine",
                    "linear": [[1.1, 0.0], [0.0, 0.9]],
                    "offset": [0.05, 0.0],
                },
                "keypoints": {"points": [[0.0, 0.0], [0.3, 0.3]]},
                "pattern": {"kind": "ramp"},
                "resolution": [32, 32],
            }
        )
        assert isinstance(spec.transform, AffineMap)
        assert spec.keypoints.shape == (2, 2)
        assert (spec.width, spec.height) == (32, 32)

    def test_rotation_kind(self):
        spec = scene_from_json_dict(
            {
                "transform": {"kind": "rotation", "theta": 0.5, "center": [0.1, 0.1]},
                "keypoints": {"grid": [3, 2], "span": 0.4},
            }
        )
        assert spec.keypoints.shape == (6, 2)
        got = spec.transform.eval_grid(np.array([[0.1, 0.1]]))
        assert np.abs(got - [0.1, 0.1]).max() < 1e-15  # center is fixed

    def test_tps_kind_deterministic(self):
        d = {
            "transform": {"kind": "tps", "seed": 9},
            "keypoints": {"grid": [2, 2]},
        }
        a = scene_from_json_dict(d)
        b = scene_from_json_dict(d)
        assert np.array_equal(a.transform.tps.weights, b.transform.tps.weights)

    def test_bad_kind(self):
        with pytest.raises(FileFormatError):
            scene_from_json_dict(
                {"transform": {"kind": "mystery"}, "keypoints": {"grid": [2, 2]}}
            )

    def test_keypoints_outside_canvas_rejected(self):
        with pytest.raises(FileFormatError):
            scene_from_json_dict(
                {
                    "transform": {"kind": "rotation", "theta": 0.1},
                    "keypoints": {"points": [[1.5, 0.0]]},
                }
            )


class TestCrossModuleProperties:
    def test_ideal_descriptors_satisfy_equivariance(self):
        for seed in (3, 14, 15):
            t = tps_sample(TpsSampleConfig(seed=seed))
            spec = SceneSpec(TpsMap(t), keypoint_grid(3, 3, 0.5))
            src, drv = ideal_descriptors(spec)
            report = evaluate_equivariance(drv, src, t)
            assert report.position_mean < 1e-9
            assert report.jacobian_mean < 1e-9

    def test_warp_round_trip_recovers_ramp(self):
        # Warp the pattern by the scene transform, then by the
        # descriptor-built approximate inverse flow; the two backward
        # warps chain to the identity on an affine scene.
        scene = affine_scene(8, keypoints=keypoint_grid(5, 5, 0.8), width=64, height=64)
        pattern = render_pattern(scene)
        deformed = tps_warp_image(pattern, scene.transform.to_tps())
        src, drv = ideal_descriptors(scene)
        motion = pairwise_motion(src, drv, "first")
        masks = soft_masks(motion, 64, 64, MaskPolicyConfig(tau=1e-6, bg_radius=0.6))
        flow = dense_flow(motion, masks, 64, 64)
        recovered = backwarp(deformed, flow, OcclusionMap.ones(64, 64))

        chained = scene.transform.eval_grid(flow.data)
        margin = 1.0 - 3.0 / 64.0
        interior = (np.abs(flow.data).max(axis=-1) < margin) & (
            np.abs(chained).max(axis=-1) < margin
        )
        assert interior.sum() > 2000
        diff = np.abs(recovered.data - pattern.data)[..., 0]
        assert diff[interior].max() <= 2.0 / 255.0
