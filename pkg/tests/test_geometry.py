"""Camera model, inverse-depth sampling, homography and warping tests."""

import numpy as np
import pytest

from npmvs.features import FeatureMap
from npmvs.geometry import (
    CameraView,
    DepthRange,
    bilinear_sample,
    plane_homography,
    project,
    sample_inverse_depth,
    scale_camera,
    unproject,
    warp_map,
)

from conftest import identity_camera


class TestCameraView:
    def test_valid_camera(self):
        cam = identity_camera()
        assert cam.width == 8 and cam.height == 8

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(ValueError):
            CameraView(np.eye(3), np.eye(3) * 2.0, np.zeros(3), 8, 8)

    def test_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            CameraView(np.eye(3), R, np.zeros(3), 8, 8)

    def test_rejects_lower_triangular_intrinsics(self):
        K = np.eye(3)
        K[1, 0] = 0.5
        with pytest.raises(ValueError):
            CameraView(K, np.eye(3), np.zeros(3), 8, 8)

    def test_rejects_nonpositive_focal(self):
        K = np.diag([-1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            CameraView(K, np.eye(3), np.zeros(3), 8, 8)


class TestDepthRange:
    def test_valid(self):
        rng = DepthRange(1.0, 2.0)
        assert rng.d_min == 1.0

    @pytest.mark.parametrize("lo,hi", [(0.0, 1.0), (2.0, 1.0), (-1.0, 1.0), (1.0, 1.0)])
    def test_invalid(self, lo, hi):
        with pytest.raises(ValueError):
            DepthRange(lo, hi)


class TestScaleCamera:
    def test_level_zero_is_identity(self):
        cam = identity_camera(16, 16)
        assert scale_camera(cam, 0) is cam

    def test_halves_intrinsics_per_level(self):
        K = np.array([[100.0, 0.0, 50.0], [0.0, 100.0, 40.0], [0.0, 0.0, 1.0]])
        cam = CameraView(K, np.eye(3), np.zeros(3), 128, 96)
        c2 = scale_camera(cam, 2)
        assert np.allclose(c2.intrinsics[:2, :], K[:2, :] / 4.0)
        assert c2.intrinsics[2, 2] == 1.0
        assert (c2.width, c2.height) == (32, 24)

    def test_collapse_raises(self):
        cam = identity_camera(4, 4)
        with pytest.raises(ValueError):
            scale_camera(cam, 3)


class TestSampleInverseDepth:
    def test_three_sample_example(self):
        depths, _ = sample_inverse_depth(DepthRange(1.0, 2.0), 3)
        assert np.allclose(depths, [1.0, 4.0 / 3.0, 2.0], atol=1e-12)

    def test_endpoints_included_and_ascending(self):
        rng = DepthRange(2.5, 40.0)
        depths, intervals = sample_inverse_depth(rng, 17)
        assert depths[0] == pytest.approx(rng.d_min, abs=1e-12)
        assert depths[-1] == pytest.approx(rng.d_max, abs=1e-12)
        assert np.all(np.diff(depths) > 0)
        assert np.all(intervals > 0)

    def test_intervals_are_central_differences(self):
        depths, intervals = sample_inverse_depth(DepthRange(1.0, 10.0), 9)
        mid = (depths[2:] - depths[:-2]) / 2.0
        assert np.allclose(intervals[1:-1], mid, atol=1e-12)
        assert intervals[0] == pytest.approx(depths[1] - depths[0], abs=1e-12)
        assert intervals[-1] == pytest.approx(depths[-1] - depths[-2], abs=1e-12)

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError):
            sample_inverse_depth(DepthRange(1.0, 2.0), 1)


class TestPlaneHomography:
    def test_identity_pose_is_identity(self):
        cam = identity_camera()
        H = plane_homography(cam, cam, 5.0)
        H = H / H[2, 2]
        assert np.abs(H - np.eye(3)).max() < 1e-9

    def test_pure_translation_shifts_by_disparity(self):
        # camera displaced by b along +x; a plane at depth d appears shifted
        # by the disparity b/d (identity intrinsics)
        b, d = 1.5, 5.0
        ref = identity_camera()
        src = CameraView(np.eye(3), np.eye(3), -np.array([b, 0.0, 0.0]), 8, 8)
        H = plane_homography(ref, src, d)
        p = H @ np.array([2.0, 3.0, 1.0])
        p = p / p[2]
        assert p[0] == pytest.approx(2.0 - b / d, abs=1e-9)
        assert p[1] == pytest.approx(3.0, abs=1e-9)

    def test_rejects_nonpositive_depth(self):
        cam = identity_camera()
        with pytest.raises(ValueError):
            plane_homography(cam, cam, 0.0)


class TestBilinearSample:
    def test_integer_coordinates_bit_exact(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(5, 6, 2))
        valid = np.ones((5, 6), dtype=bool)
        us, vs = np.meshgrid(np.arange(6, dtype=np.float64), np.arange(5, dtype=np.float64))
        out, ok = bilinear_sample(values, valid, us, vs)
        assert ok.all()
        assert np.array_equal(out, values)

    def test_half_pixel_shift_on_ramp(self):
        w = 8
        ramp = np.tile(np.arange(w, dtype=np.float64), (4, 1))[..., None]
        valid = np.ones((4, w), dtype=bool)
        us, vs = np.meshgrid(np.arange(w, dtype=np.float64) + 0.5, np.arange(4, dtype=np.float64))
        out, ok = bilinear_sample(ramp, valid, us, vs)
        assert np.allclose(out[ok], (us[..., None] + 0.0)[ok])
        assert not ok[:, -1].any()  # last column reads out of bounds

    def test_invalid_neighbor_invalidates(self):
        values = np.ones((3, 3, 1))
        valid = np.ones((3, 3), dtype=bool)
        valid[1, 1] = False
        out, ok = bilinear_sample(values, valid, np.array([0.5]), np.array([0.5]))
        assert not ok[0]


class TestWarpMap:
    def test_identity_homography_bit_exact(self):
        rng = np.random.default_rng(1)
        fm = FeatureMap(values=rng.normal(size=(6, 7, 3)))
        out = warp_map(fm, np.eye(3))
        assert out.valid.all()
        assert np.array_equal(out.values, fm.values)

    def test_integer_translation_constant_map(self):
        fm = FeatureMap(values=np.full((6, 6, 1), 2.5))
        H = np.eye(3)
        H[0, 2] = 2.0  # sample from u+2
        out = warp_map(fm, H)
        assert np.allclose(out.values[:, :4], 2.5)
        assert not out.valid[:, 4:].any()
        assert np.all(out.values[~out.valid] == 0.0)

    def test_behind_plane_invalid(self):
        fm = FeatureMap(values=np.ones((4, 4, 1)))
        H = -np.eye(3)  # negative homogeneous scale everywhere
        H[2, 2] = -1.0
        out = warp_map(fm, H)
        assert not out.valid.any()


class TestProjectUnproject:
    def test_identity_pixel_origin(self):
        cam = identity_camera()
        p = unproject(np.array([0.0, 0.0]), 5.0, cam)
        assert np.allclose(p, [0.0, 0.0, 5.0], atol=1e-12)

    def test_focal_example(self):
        K = np.diag([2.0, 2.0, 1.0])
        cam = CameraView(K, np.eye(3), np.zeros(3), 8, 8)
        p = unproject(np.array([2.0, 0.0]), 3.0, cam)
        assert np.allclose(p, [3.0, 0.0, 3.0], atol=1e-12)

    def test_round_trip_random_poses(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            ang = rng.uniform(-0.5, 0.5)
            Kc = np.array([[80.0, 0.0, 32.0], [0.0, 80.0, 30.0], [0.0, 0.0, 1.0]])
            c, s = np.cos(ang), np.sin(ang)
            x, y, z = axis
            R = np.array(
                [
                    [c + x * x * (1 - c), x * y * (1 - c) - z * s, x * z * (1 - c) + y * s],
                    [y * x * (1 - c) + z * s, c + y * y * (1 - c), y * z * (1 - c) - x * s],
                    [z * x * (1 - c) - y * s, z * y * (1 - c) + x * s, c + z * z * (1 - c)],
                ]
            )
            cam = CameraView(Kc, R, rng.normal(size=3), 64, 60)
            px = rng.uniform(0, 60, size=(10, 2))
            d = rng.uniform(2.0, 9.0, size=10)
            uv, z_out = project(unproject(px, d, cam), cam)
            assert np.abs(uv - px).max() < 1e-9
            assert np.abs(z_out - d).max() < 1e-9

    def test_unproject_rejects_nonpositive_depth(self):
        with pytest.raises(ValueError):
            unproject(np.array([1.0, 1.0]), 0.0, identity_camera())

    def test_project_single_point_behind_camera(self):
        with pytest.raises(ValueError):
            project(np.array([0.0, 0.0, -1.0]), identity_camera())
