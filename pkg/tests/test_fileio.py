"""File format round-trips and malformed-input diagnostics."""

import numpy as np
import pytest

from npmvs.evaluation import PointCloud
from npmvs.fileio import (
    SceneFormatError,
    load_scene,
    read_cam_txt,
    read_pfm,
    read_ply,
    save_scene,
    write_cam_txt,
    write_pfm,
    write_ply,
)
from npmvs.geometry import CameraView
from npmvs.synth import synth_scene


class TestPfm:
    def test_round_trip(self, tmp_path):
        d = np.random.default_rng(0).uniform(1, 9, size=(7, 5))
        write_pfm(tmp_path / "d.pfm", d)
        back = read_pfm(tmp_path / "d.pfm")
        assert back.shape == d.shape
        assert np.allclose(back, d.astype(np.float32), atol=0)

    def test_nan_round_trip(self, tmp_path):
        d = np.ones((4, 4))
        d[1, 2] = np.nan
        write_pfm(tmp_path / "d.pfm", d)
        back = read_pfm(tmp_path / "d.pfm")
        assert np.isnan(back[1, 2])
        assert np.isfinite(np.delete(back.ravel(), 6)).all()

    def test_row_order_is_bottom_up(self, tmp_path):
        d = np.array([[1.0, 2.0], [3.0, 4.0]])
        write_pfm(tmp_path / "d.pfm", d)
        raw = (tmp_path / "d.pfm").read_bytes()
        body = raw.split(b"\n", 3)[3]
        first_row = np.frombuffer(body[:8], dtype="<f4")
        assert list(first_row) == [3.0, 4.0]

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.pfm").write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 16)
        with pytest.raises(SceneFormatError, match="line 1"):
            read_pfm(tmp_path / "bad.pfm")

    def test_truncated_raster(self, tmp_path):
        (tmp_path / "bad.pfm").write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 10)
        with pytest.raises(SceneFormatError, match="truncated"):
            read_pfm(tmp_path / "bad.pfm")

    def test_rejects_3d(self, tmp_path):
        with pytest.raises(ValueError):
            write_pfm(tmp_path / "d.pfm", np.ones((2, 2, 2)))


class TestCamTxt:
    def make_cam(self):
        K = np.array([[64.0, 0.0, 31.5], [0.0, 64.0, 31.5], [0.0, 0.0, 1.0]])
        angle = 0.3
        R = np.array(
            [
                [np.cos(angle), 0.0, np.sin(angle)],
                [0.0, 1.0, 0.0],
                [-np.sin(angle), 0.0, np.cos(angle)],
            ]
        )
        return CameraView(K, R, np.array([0.5, -0.25, 2.0]), 64, 64)

    def test_round_trip(self, tmp_path):
        cam = self.make_cam()
        write_cam_txt(tmp_path / "c.txt", cam, 3.5, 0.125)
        back, d_min, d_int = read_cam_txt(tmp_path / "c.txt", 64, 64)
        assert np.allclose(back.intrinsics, cam.intrinsics, atol=0)
        assert np.allclose(back.rotation, cam.rotation, atol=0)
        assert np.allclose(back.translation, cam.translation, atol=0)
        assert d_min == 3.5 and d_int == 0.125

    def test_hand_written_fixture(self, tmp_path):
        text = "\n".join(
            [
                "extrinsic",
                "1 0 0 0.5",
                "0 1 0 0",
                "0 0 1 0",
                "0 0 0 1",
                "",
                "intrinsic",
                "8 0 3.5",
                "0 8 3.5",
                "0 0 1",
                "",
                "2.0 0.25",
                "",
            ]
        )
        (tmp_path / "c.txt").write_text(text)
        cam, d_min, d_int = read_cam_txt(tmp_path / "c.txt", 8, 8)
        assert cam.translation[0] == 0.5
        assert cam.intrinsics[0, 0] == 8.0
        assert (d_min, d_int) == (2.0, 0.25)

    def test_missing_header_names_line(self, tmp_path):
        (tmp_path / "c.txt").write_text("oops\n")
        with pytest.raises(SceneFormatError, match="line 1"):
            read_cam_txt(tmp_path / "c.txt", 8, 8)

    def test_short_matrix_row_names_line(self, tmp_path):
        text = "extrinsic\n1 0 0 0\n0 1 0\n"
        (tmp_path / "c.txt").write_text(text)
        with pytest.raises(SceneFormatError, match="line 3"):
            read_cam_txt(tmp_path / "c.txt", 8, 8)

    def test_non_numeric_names_line(self, tmp_path):
        text = "\n".join(
            ["extrinsic", "1 0 0 0", "0 1 0 0", "0 0 1 x", "0 0 0 1"]
        )
        (tmp_path / "c.txt").write_text(text)
        with pytest.raises(SceneFormatError, match="line 4"):
            read_cam_txt(tmp_path / "c.txt", 8, 8)


class TestPly:
    def test_round_trip_with_colors(self, tmp_path):
        rng = np.random.default_rng(1)
        cloud = PointCloud(
            points=rng.uniform(-5, 5, size=(20, 3)),
            colors=rng.integers(0, 256, size=(20, 3)).astype(np.uint8),
        )
        write_ply(tmp_path / "c.ply", cloud)
        back = read_ply(tmp_path / "c.ply")
        assert len(back) == 20
        assert np.allclose(back.points, cloud.points, atol=1e-5, rtol=1e-5)
        assert np.array_equal(back.colors, cloud.colors)

    def test_default_gray_colors(self, tmp_path):
        write_ply(tmp_path / "c.ply", PointCloud(points=np.zeros((3, 3))))
        back = read_ply(tmp_path / "c.ply")
        assert (back.colors == 128).all()

    def test_not_a_ply(self, tmp_path):
        (tmp_path / "c.ply").write_text("obj\n")
        with pytest.raises(SceneFormatError, match="line 1"):
            read_ply(tmp_path / "c.ply")


class TestSceneRoundTrip:
    def test_save_load_lossless(self, tmp_path, small_two_plane):
        save_scene(small_two_plane, tmp_path / "scene")
        back = load_scene(tmp_path / "scene")
        assert back.num_views == small_two_plane.num_views
        assert back.name == small_two_plane.name
        assert back.depth_range.d_min == small_two_plane.depth_range.d_min
        assert back.depth_range.d_max == small_two_plane.depth_range.d_max
        for a, b in zip(back.images, small_two_plane.images):
            # images are 8-bit quantized at synthesis time, so PNG is lossless
            assert np.array_equal(a, b)
        for a, b in zip(back.cams, small_two_plane.cams):
            assert np.allclose(a.rotation, b.rotation, atol=0)
            assert np.allclose(a.translation, b.translation, atol=0)
        for a, b in zip(back.gt_depths, small_two_plane.gt_depths):
            assert np.allclose(a, b.astype(np.float32), atol=0)

    def test_load_without_metadata_uses_cam_range(self, tmp_path, small_two_plane):
        save_scene(small_two_plane, tmp_path / "scene")
        (tmp_path / "scene" / "scene.json").unlink()
        back = load_scene(tmp_path / "scene")
        assert back.depth_range.d_min == pytest.approx(small_two_plane.depth_range.d_min)
        assert back.depth_range.d_max == pytest.approx(small_two_plane.depth_range.d_max)

    def test_missing_camera_is_reported(self, tmp_path):
        scene = synth_scene("two-plane", size=32, views=2)
        save_scene(scene, tmp_path / "scene")
        (tmp_path / "scene" / "cams" / "00000001_cam.txt").unlink()
        with pytest.raises(SceneFormatError, match="00000001"):
            load_scene(tmp_path / "scene")

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(SceneFormatError):
            load_scene(tmp_path)
