"""
Tests for the mirror array, analytic scenes and simulated captures.
"""

import numpy as np
import pytest

from cata_field.calibration import calibrate
from cata_field.errors import ConfigError, DataError, GeometryError
from cata_field.geometry import rotation_geodesic
from cata_field.simulator import (
    STANDARD_LAYOUTS,
    AnalyticScene,
    MirrorArrayTemplate,
    Texture,
    build_array_template,
    capture_camera,
    default_scene,
    layout_for_count,
    marker_correspondences,
    perturb_template,
    render_capture,
    render_geometry_maps,
    render_ground_truth_view,
    slab_intervals,
    uniform_scene,
    with_geometry,
)


@pytest.fixture
def template():
    """Ideal 13-mirror honeycomb.

    Returns:
        MirrorArrayTemplate: Unperturbed array.
    """
    return build_array_template(layout_for_count(13))


@pytest.fixture
def camera():
    """Low-resolution capture camera.

    Returns:
        CameraCalibration: 96x84 camera on the array axis.
    """
    return capture_camera(96, 84)


class TestMirrorArray:
    """Tests for the honeycomb template."""

    @pytest.mark.parametrize("count", sorted(STANDARD_LAYOUTS))
    def test_standard_layouts(self, count):
        t = build_array_template(layout_for_count(count))
        assert t.count == count
        np.testing.assert_allclose(t.anchor.center, [0.0, 0.0, 0.0], atol=1e-12)
        assert np.all(t.centers[:, 2] == 0.0)
        assert np.all(t.radii == 25.0)

    def test_unknown_count(self):
        with pytest.raises(ConfigError):
            layout_for_count(4)

    def test_layout_without_center_rejected(self):
        with pytest.raises(ConfigError):
            build_array_template((2, 2))
        with pytest.raises(ConfigError):
            build_array_template((2, 2, 2))

    def test_neighbour_spacing_is_pitch(self):
        t = build_array_template(layout_for_count(5))
        pairs = t.adjacent_pairs()
        assert len(pairs) == 6
        for i, j in pairs:
            assert np.linalg.norm(t.centers[i] - t.centers[j]) == pytest.approx(t.pitch)

    def test_no_overlap(self, template):
        c = template.centers
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 2 * template.radius

    def test_markers_on_plane_and_unique(self, template):
        corners = template.corners
        assert np.all(corners[:, 2] == 0.0)
        assert len(np.unique(np.round(corners, 6), axis=0)) == len(corners)

    def test_dict_roundtrip(self, template):
        loaded = MirrorArrayTemplate.from_dict(template.to_dict())
        np.testing.assert_array_equal(loaded.centers, template.centers)
        np.testing.assert_array_equal(loaded.corners, template.corners)
        assert loaded.anchor_index == template.anchor_index
        assert loaded.rows_layout == template.rows_layout

    def test_malformed_dict(self):
        with pytest.raises(DataError):
            MirrorArrayTemplate.from_dict({"mirrors": []})


class TestPerturbTemplate:
    """Tests for misalignment noise."""

    def test_zero_sigma_is_identity(self, template):
        assert perturb_template(template, 0.0, seed=1) is template

    def test_anchor_and_markers_fixed(self, template):
        moved = perturb_template(template, 2.0, seed=1)
        np.testing.assert_array_equal(moved.anchor.center, template.anchor.center)
        np.testing.assert_array_equal(moved.corners, template.corners)
        assert np.all(moved.centers[:, 2] == 0.0)
        assert not np.array_equal(moved.centers, template.centers)

    def test_anchor_can_move(self, template):
        moved = perturb_template(template, 2.0, seed=1, perturb_anchor=True)
        assert not np.array_equal(moved.anchor.center, template.anchor.center)

    def test_seeded(self, template):
        a = perturb_template(template, 1.0, seed=7)
        b = perturb_template(template, 1.0, seed=7)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_negative_sigma(self, template):
        with pytest.raises(ConfigError):
            perturb_template(template, -1.0)

    def test_offset_spread(self, template):
        moving = np.arange(template.count) != template.anchor_index
        offsets = []
        seed = 0
        while sum(o.size for o in offsets) < 10_000:
            moved = perturb_template(template, 1.0, seed=seed)
            offsets.append((moved.centers - template.centers)[moving, :2].ravel())
            seed += 1
        offsets = np.concatenate(offsets)
        assert offsets.std() == pytest.approx(1.0, rel=0.05)
        assert abs(offsets.mean()) < 0.05


class TestScene:
    """Tests for analytic scenes."""

    def test_slab_intervals(self):
        origins = np.array([[-10.0, 0.0, 0.0], [-10.0, 5.0, 0.0]])
        directions = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        t_near, t_far = slab_intervals(origins, directions, [-1, -1, -1], [1, 1, 1])
        assert (t_near[0], t_far[0]) == (9.0, 11.0)
        assert t_near[1] > t_far[1]

    def test_trace_hit_and_miss(self):
        scene = default_scene()
        origins = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        directions = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        colors, hit, t = scene.trace(origins, directions)
        assert hit.tolist() == [True, False]
        assert t[0] == pytest.approx(100.0)
        np.testing.assert_array_equal(colors[1], scene.background)

    def test_checker_parity(self):
        tex = Texture("checker", ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)), scale=10.0)
        points = np.array([[1.0, 1.0, 1.0], [11.0, 1.0, 1.0], [11.0, 11.0, 1.0]])
        np.testing.assert_array_equal(tex.evaluate(points), [[1, 0, 0], [0, 0, 1], [1, 0, 0]])

    def test_unknown_texture(self):
        with pytest.raises(DataError):
            Texture("marble")

    def test_json_roundtrip(self, tmp_path):
        scene = default_scene()
        path = tmp_path / "scene.json"
        scene.save(str(path))
        assert AnalyticScene.load(str(path)).to_dict() == scene.to_dict()

    def test_unknown_primitive(self):
        with pytest.raises(DataError):
            AnalyticScene.from_dict({"primitives": [{"type": "torus"}]})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(DataError):
            AnalyticScene.load(str(path))


class TestCapture:
    """Tests for the ray-traced catadioptric capture."""

    def test_camera_inside_mirror(self, template):
        with pytest.raises(GeometryError):
            render_capture(default_scene(), capture_camera(32, 28, distance_mm=10.0), template)

    def test_maps_consistent(self, template, camera):
        bundle = render_capture(default_scene(), camera, template)
        valid = bundle.valid
        assert valid.any()
        assert np.all(np.isfinite(bundle.depth[valid]))
        assert np.all(np.isinf(bundle.depth[~valid]))
        np.testing.assert_allclose(np.linalg.norm(bundle.normals[valid], axis=1), 1.0)
        assert bundle.index_map.max() <= template.count
        assert not np.any(bundle.mask & ~valid)

    def test_uniform_scene_color(self, template, camera):
        color = (0.2, 0.4, 0.6)
        bundle = render_capture(uniform_scene(color), camera, template)
        np.testing.assert_array_equal(bundle.image[bundle.valid], np.tile(color, (bundle.valid.sum(), 1)))

    def test_threads_deterministic(self, template, camera):
        a = render_capture(default_scene(), camera, template, threads=1)
        b = render_capture(default_scene(), camera, template, threads=3)
        np.testing.assert_array_equal(a.image, b.image)
        np.testing.assert_array_equal(a.index_map, b.index_map)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_geometry_maps_match_unperturbed_capture(self, template, camera):
        bundle = render_capture(default_scene(), camera, template)
        maps = render_geometry_maps(camera, template)
        valid = bundle.valid
        assert not np.any(valid & ~maps.mirror_mask)
        np.testing.assert_array_equal(maps.depth[valid], bundle.depth[valid])
        np.testing.assert_array_equal(maps.index_map[valid], bundle.index_map[valid])

    def test_with_geometry_same_calibration(self, template, camera):
        bundle = render_capture(default_scene(), camera, template)
        again = with_geometry(bundle, camera, template)
        np.testing.assert_array_equal(again.valid, bundle.valid)
        np.testing.assert_array_equal(again.mask, bundle.mask)
        np.testing.assert_array_equal(again.image, bundle.image)

    def test_with_geometry_resolution_mismatch(self, template, camera):
        bundle = render_capture(default_scene(), camera, template)
        with pytest.raises(GeometryError):
            with_geometry(bundle, capture_camera(48, 42), template)

    def test_misaligned_capture_keeps_ideal_maps(self, template, camera):
        moved = perturb_template(template, 3.0, seed=4)
        bundle = render_capture(default_scene(), camera, moved, ideal_template=template)
        maps = render_geometry_maps(camera, template)
        valid = bundle.valid
        np.testing.assert_array_equal(bundle.depth[valid], maps.depth[valid])

    def test_summary(self, template, camera):
        stats = render_capture(default_scene(), camera, template).summary()
        assert stats["width"] == 96 and stats["height"] == 84
        assert stats["foreground_pixels"] + stats["background_pixels"] == stats["mirror_pixels"]
        assert 0 < stats["mirrors_seen"] <= template.count


class TestMarkers:
    """Tests for simulated calibration markers."""

    def test_markers_recover_camera(self, template):
        camera = capture_camera(480, 420)
        pairs = marker_correspondences(template, camera)
        assert len(pairs) >= 4
        calib = calibrate(pairs, camera.K)
        assert rotation_geodesic(calib.R, camera.R) < 1e-6
        np.testing.assert_allclose(calib.center, camera.center, atol=1e-3)

    def test_noise_is_seeded(self, template, camera):
        a = marker_correspondences(template, camera, noise_px=0.5, seed=3)
        b = marker_correspondences(template, camera, noise_px=0.5, seed=3)
        assert a == b


class TestGroundTruthView:
    """Tests for direct pinhole renderings."""

    def test_uniform_scene(self):
        camera = capture_camera(40, 30, distance_mm=400.0)
        image = render_ground_truth_view(uniform_scene((0.3, 0.3, 0.3)), camera)
        assert image.shape == (30, 40, 3)
        np.testing.assert_array_equal(image, 0.3)
