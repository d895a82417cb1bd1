"""
Tests for ray sampling, volume integration, depth and view rendering.
"""

import numpy as np
import pytest

from cata_field.errors import ConfigError, DataError
from cata_field.geometry import CameraIntrinsics, project
from cata_field.neuralfield import EncodingConfig, FieldConfig, FieldParams, evaluation_counts
from cata_field.raybank import BBox
from cata_field.renderer import (
    RaySampleSet,
    RenderConfig,
    composite,
    composite_backward,
    estimate_depth,
    frontal_arc,
    h_filter,
    integrate,
    integrate_backward,
    inverse_cdf,
    load_camera_path,
    render_rays,
    render_view,
    sample_coarse,
    sample_fine,
    save_camera_path,
)


@pytest.fixture
def bbox():
    """Unit-sized box in front of the origin.

    Returns:
        BBox: [-1, 1] x [-1, 1] x [2, 6].
    """
    return BBox(min=[-1.0, -1.0, 2.0], max=[1.0, 1.0, 6.0])


@pytest.fixture
def small_field():
    """Very small field over the default scene box.

    Returns:
        FieldParams: Three mirrors, anchor 1.
    """
    config = FieldConfig(
        trunk_width=8,
        trunk_depth=2,
        trunk_skips=(1,),
        color_width=4,
        warp_width=4,
        warp_depth=2,
        latent_dim=2,
        encoding=EncodingConfig(position_octaves=2, direction_octaves=1, warp_octaves=1),
    )
    bbox = BBox(min=[-120.0, -100.0, 90.0], max=[120.0, 100.0, 270.0])
    return FieldParams.initialize(config, n_mirrors=3, anchor_index=1, bbox=bbox, seed=0)


def _constant_query(rgb, sigma):
    def query(batch):
        n = batch.points.shape[0]
        return np.tile(np.asarray(rgb, dtype=float), (n, 1)), np.full(n, float(sigma))

    return query


class TestSampling:
    """Tests for stratified and importance sampling."""

    def test_midpoints(self):
        np.testing.assert_allclose(sample_coarse((0.0, 4.0), 4), [[0.5, 1.5, 2.5, 3.5]])

    def test_jitter_stays_in_strata(self):
        rng = np.random.default_rng(0)
        t = sample_coarse((np.array([0.0, 10.0]), np.array([4.0, 30.0])), 4, rng)
        width = np.array([1.0, 5.0])
        strata = np.floor((t - np.array([[0.0], [10.0]])) / width[:, None])
        np.testing.assert_array_equal(strata, [[0, 1, 2, 3], [0, 1, 2, 3]])

    def test_too_few_samples(self):
        with pytest.raises(ConfigError):
            sample_coarse((0.0, 1.0), 0)

    def test_fine_samples_follow_weight(self):
        t = np.array([[0.5, 1.5, 2.5, 3.5]])
        weights = np.array([[0.0, 1.0, 0.0, 0.0]])
        fine = sample_fine(t, weights, 16, np.array([4.0]), rng=np.random.default_rng(1), merge=False)
        assert fine.shape == (1, 16)
        assert np.all((fine >= 1.5) & (fine <= 2.5))

    def test_fine_quantiles_deterministic(self):
        t = np.array([[0.5, 1.5, 2.5, 3.5]])
        weights = np.array([[0.0, 1.0, 0.0, 0.0]])
        fine = sample_fine(t, weights, 4, np.array([4.0]), merge=False)
        np.testing.assert_allclose(fine, [[1.625, 1.875, 2.125, 2.375]])

    def test_merged_sorted(self):
        rng = np.random.default_rng(2)
        t = sample_coarse((np.zeros(3), np.full(3, 8.0)), 8, rng)
        weights = rng.random((3, 8))
        merged = sample_fine(t, weights, 5, np.full(3, 8.0), rng)
        assert merged.shape == (3, 13)
        assert np.all(np.diff(merged, axis=1) >= 0)
        assert np.all(merged[:, -1] <= 8.0)

    def test_zero_weights_uniform_in_t(self):
        edges = np.array([[0.0, 1.0, 4.0]])
        samples = inverse_cdf(edges, np.zeros((1, 2)), np.array([[0.125, 0.5, 0.875]]))
        np.testing.assert_allclose(samples, [[0.5, 2.0, 3.5]])

    def test_no_fine_samples(self):
        t = np.array([[0.5, 1.5]])
        np.testing.assert_array_equal(sample_fine(t, np.ones((1, 2)), 0, np.array([2.0])), t)

    def test_negative_weights(self):
        with pytest.raises(ValueError):
            sample_fine(np.array([[0.5, 1.5]]), np.array([[-1.0, 1.0]]), 2, np.array([2.0]))

    def test_uniform_weights_histogram(self):
        t = sample_coarse((0.0, 8.0), 8)
        n = 100_000
        fine = sample_fine(t, np.ones((1, 8)), n, np.array([8.0]), rng=np.random.default_rng(5), merge=False)
        counts, _ = np.histogram(fine[0], bins=np.append(t[0], 8.0))
        p = 1.0 / 8
        bound = 3.0 * np.sqrt(n * p * (1.0 - p))
        assert np.all(np.abs(counts - n * p) < bound)

    def test_matches_table_lookup(self):
        rng = np.random.default_rng(6)
        t = sample_coarse((np.zeros(3), np.array([4.0, 6.0, 9.0])), 6, rng)
        t_far = np.array([4.0, 6.0, 9.0])
        weights = rng.random((3, 6))
        weights[1, 2:4] = 0.0
        fine = sample_fine(t, weights, 7, t_far, rng=np.random.default_rng(11), merge=False)

        u = np.random.default_rng(11).random((3, 7))
        for r in range(3):
            edges = list(t[r]) + [t_far[r]]
            pdf = weights[r] / weights[r].sum()
            cdf = np.concatenate([[0.0], np.cumsum(pdf)])
            for j in range(7):
                k = max(i for i in range(6) if cdf[i] <= u[r, j] and pdf[i] > 0)
                expected = edges[k] + (u[r, j] - cdf[k]) / pdf[k] * (edges[k + 1] - edges[k])
                assert fine[r, j] == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestIntegrate:
    """Tests for front-to-back compositing."""

    def test_weights_and_transmittance_sum_to_one(self):
        rng = np.random.default_rng(3)
        t = np.sort(rng.uniform(0, 10, size=(5, 12)), axis=1)
        samples = RaySampleSet.build(t, 10.0, rng.uniform(0, 2, size=(5, 12)), rng.random((5, 12, 3)))
        _, opacity, w = integrate(samples)
        residual = samples.transmittance[:, -1] * np.exp(-samples.sigma[:, -1] * samples.delta[:, -1])
        np.testing.assert_allclose(opacity + residual, 1.0)
        np.testing.assert_allclose(opacity, w.sum(axis=1))

    def test_constant_density_transmittance(self):
        t = np.linspace(0.0, 9.0, 10)[None, :]
        samples = RaySampleSet.build(t, 10.0, np.full((1, 10), 0.3))
        np.testing.assert_allclose(samples.transmittance[0], np.exp(-0.3 * t[0]))
        _, opacity, _ = integrate(samples)
        assert opacity[0] == pytest.approx(1.0 - np.exp(-3.0))

    def test_length_unit_scales_delta(self):
        t = np.array([[0.0, 50.0]])
        samples = RaySampleSet.build(t, 100.0, np.ones((1, 2)), length_unit=50.0)
        np.testing.assert_array_equal(samples.delta, [[1.0, 1.0]])

    def test_empty_space(self):
        samples = RaySampleSet.build(np.array([[1.0, 2.0]]), 3.0, np.zeros((1, 2)), np.ones((1, 2, 3)))
        rgb, opacity, _ = integrate(samples)
        np.testing.assert_array_equal(rgb, 0.0)
        np.testing.assert_array_equal(opacity, 0.0)
        np.testing.assert_array_equal(composite(rgb, opacity, (0.0, 0.8, 0.0)), [[0.0, 0.8, 0.0]])

    def test_opaque_first_sample(self):
        colors = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
        samples = RaySampleSet.build(np.array([[1.0, 2.0]]), 3.0, np.array([[1e4, 1.0]]), colors)
        rgb, opacity, _ = integrate(samples)
        np.testing.assert_allclose(rgb, [[1.0, 0.0, 0.0]])
        assert opacity[0] == pytest.approx(1.0)

    def test_decreasing_samples_rejected(self):
        with pytest.raises(DataError):
            RaySampleSet.build(np.array([[2.0, 1.0]]), 3.0, np.zeros((1, 2)))
        with pytest.raises(DataError):
            RaySampleSet.build(np.array([[1.0, 4.0]]), 3.0, np.zeros((1, 2)))

    def test_coincident_samples_allowed(self):
        samples = RaySampleSet.build(np.array([[1.0, 1.0, 2.0]]), 3.0, np.ones((1, 3)))
        assert samples.delta[0, 0] == 0.0

    def test_dense_constant_density_transmittance(self):
        t = np.linspace(2.0, 12.0, 10_000, endpoint=False)[None, :]
        samples = RaySampleSet.build(t, 12.0, np.full((1, 10_000), 0.3))
        np.testing.assert_allclose(samples.transmittance[0], np.exp(-0.3 * (t[0] - 2.0)), rtol=0, atol=1e-6)
        _, opacity, _ = integrate(samples)
        assert opacity[0] == pytest.approx(1.0 - np.exp(-3.0), abs=1e-6)

    def test_zero_density_samples_change_nothing(self):
        t = np.array([[1.0, 2.0, 4.0, 5.0]])
        sigma = np.array([[0.0, 0.8, 0.0, 2.0]])
        colors = np.random.default_rng(7).random((1, 4, 3))
        denser_t = np.array([[1.0, 1.5, 2.0, 4.0, 4.3, 4.6, 5.0]])
        denser_sigma = np.array([[0.0, 0.0, 0.8, 0.0, 0.0, 0.0, 2.0]])
        denser_colors = np.random.default_rng(8).random((1, 7, 3))
        denser_colors[0, [0, 2, 3, 6]] = colors[0]
        base = RaySampleSet.build(t, 6.0, sigma, colors)
        denser = RaySampleSet.build(denser_t, 6.0, denser_sigma, denser_colors)
        rgb_a, opacity_a, _ = integrate(base)
        rgb_b, opacity_b, _ = integrate(denser)
        np.testing.assert_allclose(rgb_b, rgb_a, rtol=1e-12)
        np.testing.assert_allclose(opacity_b, opacity_a, rtol=1e-12)
        assert estimate_depth(denser, 0.0)[0] == pytest.approx(estimate_depth(base, 0.0)[0], rel=1e-12)

    def test_coincident_samples_match_deduplicated(self):
        colors = np.random.default_rng(9).random((1, 4, 3))
        sigma = np.array([[0.4, 0.9, 1.3, 0.2]])
        merged = RaySampleSet.build(np.array([[1.0, 2.0, 2.0, 3.0]]), 4.0, sigma, colors)
        unique = RaySampleSet.build(np.array([[1.0, 2.0, 3.0]]), 4.0, sigma[:, [0, 2, 3]], colors[:, [0, 2, 3]])
        rgb_a, opacity_a, w = integrate(merged)
        rgb_b, opacity_b, _ = integrate(unique)
        assert w[0, 1] == 0.0
        np.testing.assert_allclose(rgb_a, rgb_b, rtol=1e-12)
        np.testing.assert_allclose(opacity_a, opacity_b, rtol=1e-12)
        assert estimate_depth(merged, 0.0)[0] == pytest.approx(estimate_depth(unique, 0.0)[0], rel=1e-12)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        t = np.sort(rng.uniform(0, 5, size=(3, 6)), axis=1)
        sigma = rng.uniform(0.1, 1.5, size=(3, 6))
        colors = rng.random((3, 6, 3))
        g_rgb = rng.normal(size=(3, 3))
        g_opacity = rng.normal(size=3)
        g_weights = rng.normal(size=(3, 6))

        def objective(s, c):
            rgb, opacity, w = integrate(RaySampleSet.build(t, 5.0, s, c))
            return np.sum(g_rgb * rgb) + np.sum(g_opacity * opacity) + np.sum(g_weights * w)

        samples = RaySampleSet.build(t, 5.0, sigma, colors)
        _, _, w = integrate(samples)
        g_sigma, g_colors = integrate_backward(samples, w, g_rgb, g_opacity, g_weights)
        eps = 1e-6
        for idx in np.ndindex(sigma.shape):
            hi, lo = sigma.copy(), sigma.copy()
            hi[idx] += eps
            lo[idx] -= eps
            assert g_sigma[idx] == pytest.approx((objective(hi, colors) - objective(lo, colors)) / (2 * eps), abs=1e-7)
        idx = (1, 2, 0)
        hi, lo = colors.copy(), colors.copy()
        hi[idx] += eps
        lo[idx] -= eps
        assert g_colors[idx] == pytest.approx((objective(sigma, hi) - objective(sigma, lo)) / (2 * eps), abs=1e-7)

    def test_composite_backward(self):
        g_out = np.array([[1.0, 2.0, 3.0]])
        g_rgb, g_opacity = composite_backward(g_out, (0.0, 0.8, 0.0))
        np.testing.assert_array_equal(g_rgb, g_out)
        assert g_opacity[0] == pytest.approx(-1.6)


class TestDepth:
    """Tests for the thresholded depth estimate."""

    def test_h_filter(self):
        np.testing.assert_array_equal(h_filter([0.5, 1.0, 2.0], 1.0), [0.0, 0.0, 2.0])

    def test_opaque_surface(self):
        sigma = np.array([[0.0, 0.0, 1e4, 1e4]])
        samples = RaySampleSet.build(np.array([[1.0, 2.0, 3.0, 4.0]]), 5.0, sigma)
        assert estimate_depth(samples, 0.0)[0] == pytest.approx(3.0)

    def test_threshold_removes_haze(self):
        sigma = np.array([[0.5, 0.5, 1e4, 1e4]])
        samples = RaySampleSet.build(np.array([[1.0, 2.0, 3.0, 4.0]]), 5.0, sigma)
        assert estimate_depth(samples, 0.0)[0] < 3.0
        assert estimate_depth(samples, 1.0)[0] == pytest.approx(3.0)

    def test_everything_filtered(self):
        samples = RaySampleSet.build(np.array([[1.0, 2.0]]), 3.0, np.array([[5.0, 5.0]]))
        assert estimate_depth(samples, 10.0)[0] == 0.0

    @staticmethod
    def _slab(start, end, sigma=3.0, haze=0.0, n=10_000, t_far=10.0):
        t = np.linspace(0.0, t_far, n, endpoint=False)
        step = t_far / n
        density = np.full(n, haze)
        density[int(round(start / step)) : int(round(end / step))] = sigma
        return RaySampleSet.build(t[None, :], t_far, density[None, :])

    def test_matches_quadrature(self):
        samples = self._slab(3.0, 5.0, haze=0.5)
        t, delta = samples.t[0], samples.delta[0]
        density = np.where(samples.sigma[0] > 1.0, samples.sigma[0], 0.0)
        expected, transmittance = 0.0, 1.0
        for k in range(t.size):
            alpha = 1.0 - np.exp(-density[k] * delta[k])
            expected += transmittance * alpha * t[k]
            transmittance *= 1.0 - alpha
        assert estimate_depth(samples, 1.0)[0] == pytest.approx(expected, abs=1e-6)

        # continuous slab: a (1 - e) + (1 - e) / s - L e with e = exp(-s L)
        s, a, L = 3.0, 3.0, 2.0
        e = np.exp(-s * L)
        closed = a * (1.0 - e) + (1.0 - e) / s - L * e
        assert estimate_depth(samples, 1.0)[0] == pytest.approx(closed, abs=1e-3)

    def test_shifted_density_shifts_depth(self):
        near = estimate_depth(self._slab(3.0, 5.0), 0.0)[0]
        far = estimate_depth(self._slab(4.0, 6.0), 0.0)[0]
        # the depth is not normalized, so the shift is scaled by the opacity
        assert far - near == pytest.approx(1.0 - np.exp(-6.0), rel=1e-9)

    def test_denser_slab_moves_depth_forward(self):
        depths = [estimate_depth(self._slab(3.0, 5.0, sigma=s), 0.0)[0] for s in (2.0, 8.0, 32.0)]
        assert depths[0] > depths[1] > depths[2] > 3.0 - 1e-3


class TestRenderRays:
    """Tests for batch rendering through a query function."""

    def test_zero_density_is_background(self, bbox):
        config = RenderConfig(n_coarse=8, n_fine=4, background="white")
        origins = np.zeros((3, 3))
        directions = np.array([[0.0, 0.0, 1.0], [0.1, 0.0, 0.995], [0.0, 0.0, -1.0]])
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        result = render_rays(_constant_query((0.2, 0.3, 0.4), 0.0), origins, directions, np.zeros(3), bbox, config)
        np.testing.assert_allclose(result.rgb_coarse, 1.0)
        np.testing.assert_allclose(result.rgb_fine, 1.0)
        np.testing.assert_array_equal(result.rows, [0, 1])

    def test_missing_rays_skip_queries(self, bbox):
        calls = []

        def query(batch):
            calls.append(batch.points.shape[0])
            return np.zeros((batch.points.shape[0], 3)), np.zeros(batch.points.shape[0])

        config = RenderConfig(n_coarse=8, n_fine=4)
        result = render_rays(query, np.zeros((1, 3)), [[0.0, 0.0, -1.0]], [0], bbox, config)
        assert calls == []
        assert result.coarse is None and result.n_queries == 0
        np.testing.assert_array_equal(result.rgb_fine, [config.background_rgb()])

    def test_opaque_constant_color(self, bbox):
        config = RenderConfig(n_coarse=8, n_fine=4)
        result = render_rays(_constant_query((0.2, 0.3, 0.4), 1e4), np.zeros((1, 3)), [[0.0, 0.0, 1.0]], [0], bbox, config)
        np.testing.assert_allclose(result.rgb_fine, [[0.2, 0.3, 0.4]])
        assert result.coarse.query_index == 0
        assert result.fine.query_index == 1
        assert result.coarse.samples.t.shape == (1, 8)
        assert result.fine.samples.t.shape == (1, 12)

    def test_no_fine_pass(self, bbox):
        config = RenderConfig(n_coarse=8, n_fine=0)
        result = render_rays(_constant_query((0.2, 0.3, 0.4), 0.5), np.zeros((1, 3)), [[0.0, 0.0, 1.0]], [0], bbox, config)
        assert result.fine is None and result.n_queries == 1
        np.testing.assert_array_equal(result.rgb_fine, result.rgb_coarse)

    def test_density_per_length_unit(self, bbox):
        config = RenderConfig(n_coarse=8, n_fine=0, background="black")
        result = render_rays(_constant_query((1.0, 1.0, 1.0), 0.5), np.zeros((1, 3)), [[0.0, 0.0, 1.0]], [0], bbox, config)
        # first midpoint at 2.25 mm, far bound at 6 mm, length unit 2 mm (largest half extent)
        assert result.coarse.opacity[0] == pytest.approx(1.0 - np.exp(-0.5 * 3.75 / 2.0))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            RenderConfig(n_coarse=1)
        with pytest.raises(ConfigError):
            RenderConfig(background="purple")
        with pytest.raises(ConfigError):
            RenderConfig(background=(1.0, 0.0))
        np.testing.assert_array_equal(RenderConfig(background=(0.1, 0.2, 0.3)).background_rgb(), [0.1, 0.2, 0.3])


class TestViews:
    """Tests for novel-view rendering and camera paths."""

    @pytest.fixture
    def cameras(self):
        """Three cameras on the frontal arc around the default scene box.

        Returns:
            list: Calibrations with 12x9 images.
        """
        return frontal_arc([0.0, 0.0, 180.0], 170.0, 3, CameraIntrinsics.from_fov(12, 9, 60.0))

    def test_arc_looks_at_target(self, cameras):
        target = np.array([0.0, 0.0, 180.0])
        for camera in cameras:
            assert np.linalg.norm(camera.center - target) == pytest.approx(170.0)
            u, v = project(camera.K, camera.pose, target)
            assert (u, v) == pytest.approx((6.0, 4.5))

    def test_arc_spans_azimuth(self, cameras):
        x = [c.center[0] for c in cameras]
        assert x[0] == pytest.approx(-x[2])
        assert x[1] == pytest.approx(0.0, abs=1e-9)
        assert abs(x[0]) == pytest.approx(170.0 * np.sin(np.radians(30.0)))

    def test_single_view_is_frontal(self):
        (camera,) = frontal_arc([0.0, 0.0, 180.0], 170.0, 1, CameraIntrinsics.from_fov(12, 9, 60.0))
        np.testing.assert_allclose(camera.center, [0.0, 0.0, 10.0], atol=1e-9)

    def test_bad_arguments(self):
        K = CameraIntrinsics.from_fov(12, 9, 60.0)
        with pytest.raises(ConfigError):
            frontal_arc([0, 0, 0], 100.0, 0, K)
        with pytest.raises(ConfigError):
            frontal_arc([0, 0, 0], -1.0, 3, K)

    def test_render_view_deterministic_without_warp(self, small_field, cameras):
        config = RenderConfig(n_coarse=8, n_fine=4, width=12, height=9, chunk=50)
        before = evaluation_counts()["warp"]
        a = render_view(small_field, cameras[0], config, with_depth=True)
        b = render_view(small_field, cameras[0], config, with_depth=True, threads=3)
        assert evaluation_counts()["warp"] == before
        assert a.rgb.shape == (9, 12, 3)
        assert a.depth.shape == (9, 12)
        np.testing.assert_array_equal(a.rgb, b.rgb)
        np.testing.assert_array_equal(a.depth, b.depth)
        assert np.all((a.opacity >= 0) & (a.opacity <= 1))

    def test_camera_path_roundtrip(self, tmp_path, cameras):
        path = tmp_path / "path.json"
        save_camera_path(cameras, path)
        loaded = load_camera_path(path)
        assert len(loaded) == 3
        for a, b in zip(cameras, loaded):
            np.testing.assert_array_equal(a.R, b.R)
            np.testing.assert_array_equal(a.t, b.t)
            assert a.K == b.K

    def test_camera_path_default_intrinsics(self, tmp_path, cameras):
        path = tmp_path / "path.json"
        path.write_text('{"poses": [{"R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": [0, 0, 5]}]}', encoding="utf-8")
        with pytest.raises(DataError):
            load_camera_path(path)
        (camera,) = load_camera_path(path, intrinsics=cameras[0].K)
        np.testing.assert_array_equal(camera.t, [0.0, 0.0, 5.0])

    def test_camera_path_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_camera_path(tmp_path / "none.json")
