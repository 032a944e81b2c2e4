import numpy as np
import pytest

from crossmodal.cloud import PointCloud
from crossmodal.errors import EmptyContact, UnknownClass
from crossmodal.synth import (
    CLASS_IDS,
    ExplorationGrid,
    SensorSpec,
    grid_covering,
    make_object,
    plane_removal,
    sample_tactile,
    sample_visual,
)


class TestMakeObject:
    def test_catalog_has_fifteen_classes(self):
        assert len(CLASS_IDS) == 15

    def test_deterministic(self):
        a = make_object("wrench", 41)
        b = make_object("wrench", 41)
        assert a.primitives == b.primitives

    def test_unknown_class(self):
        with pytest.raises(UnknownClass):
            make_object("banana", 0)

    def test_jitter_bounded(self):
        areas = [make_object("cup_mat", seed).silhouette_area() for seed in range(12)]
        ratio = max(areas) / min(areas)
        assert 1.0 <= ratio <= 1.10 / 0.90

    def test_footprint_and_height_bounds(self):
        for cid in CLASS_IDS:
            obj = make_object(cid, 3)
            x0, y0, x1, y1 = obj.bounds()
            assert x1 - x0 <= 0.3 and y1 - y0 <= 0.3
            xs = np.linspace(x0, x1, 50)
            ys = np.linspace(y0, y1, 50)
            gx, gy = np.meshgrid(xs, ys)
            assert obj.height(gx, gy).max() <= 0.15

    def test_height_zero_outside_silhouette(self):
        obj = make_object("cup_mat", 5)
        x0, y0, x1, y1 = obj.bounds()
        assert obj.height(x1 + 0.05, y1 + 0.05) == 0.0


class TestSampleVisual:
    def test_zero_noise_points_on_surface(self):
        obj = make_object("cup_mat", 1)
        cloud = sample_visual(obj, None, 60000.0, 0.0, seed=2)
        x, y, z = cloud.points.T
        # Wall samples sit exactly on the silhouette edge, where the height
        # field steps to 0; probe a tiny neighborhood for the local maximum.
        eps = 1e-5
        h_near = np.max(
            [obj.height(x + dx, y + dy) for dx in (-eps, 0, eps) for dy in (-eps, 0, eps)],
            axis=0,
        )
        assert (z >= -1e-9).all()
        assert (z <= h_near + 1e-9).all()
        assert cloud.modality == "visual"
        assert cloud.label == "cup_mat"
        assert cloud.sensor_origin is not None

    def test_thin_disc_points_near_surface(self):
        obj = make_object("cup_mat", 2)
        sigma = 0.001
        cloud = sample_visual(obj, None, 60000.0, sigma, seed=3)
        x, y, z = cloud.points.T
        # distance to the disc surface: top plane over the disc, wall band at
        # the rim, table level outside
        h = obj.height(x, y)
        err = np.minimum(np.abs(z - h), np.abs(z))
        assert (err <= 4 * sigma).mean() >= 0.99

    def test_density_scaling(self):
        obj = make_object("mat", 4)
        counts = []
        for density in (30000.0, 60000.0):
            sizes = [
                len(sample_visual(obj, None, density, 0.001, seed=s)) for s in range(20)
            ]
            counts.append(np.mean(sizes))
        assert 1.8 <= counts[1] / counts[0] <= 2.2

    def test_seeded_determinism(self):
        obj = make_object("ruler", 6)
        a = sample_visual(obj, None, 50000.0, 0.001, seed=9)
        b = sample_visual(obj, None, 50000.0, 0.001, seed=9)
        assert np.array_equal(a.points, b.points)

    def test_observation_pose_applied(self):
        obj = make_object("ruler", 6)
        base = sample_visual(obj, None, 50000.0, 0.0, seed=9)
        posed = sample_visual(obj, (np.pi / 2, 0.1, 0.0), 50000.0, 0.0, seed=9)
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        expected = base.points[:, :2] @ rot.T + [0.1, 0.0]
        assert np.allclose(posed.points[:, :2], expected, atol=1e-12)
        assert np.allclose(posed.points[:, 2], base.points[:, 2], atol=1e-12)


class TestSampleTactile:
    def test_default_threshold_is_published_value(self):
        assert SensorSpec().force_threshold == pytest.approx(0.8)
        assert SensorSpec().modules_per_side == 6
        assert SensorSpec().array_edge == pytest.approx(0.05)

    def test_empty_contact(self):
        obj = make_object("cup_mat", 1)
        grid = ExplorationGrid(np.array([[5.0, 5.0]]), 0.025)
        with pytest.raises(EmptyContact):
            sample_tactile(obj, SensorSpec(), grid, seed=0)

    def test_uniform_plate_full_press(self):
        # A plate wider than the array with every module force at
        # stiffness * press_depth = 2 N >= beta: exactly 36 contacts.
        from crossmodal.synth import Box, ObjectModel

        plate = ObjectModel("plate_fixture", [Box(0, 0, 0.12, 0.12, 0.0, 0.004)])
        sensor = SensorSpec(
            contact_stiffness=1000.0, press_depth=0.006, noise_sigma=0.0001
        )
        # single press at the center: every module sees the plate
        grid = ExplorationGrid(np.array([[0.0, 0.0]]), 0.025)
        cloud = sample_tactile(plate, sensor, grid, seed=1)
        assert len(cloud) == 36
        assert np.abs(cloud.points[:, 2] - 0.004).max() <= 4 * sensor.noise_sigma
        assert cloud.modality == "tactile"

    def test_forces_of_emitted_points_clear_threshold(self):
        obj = make_object("shaver", 7)
        sensor = SensorSpec(noise_sigma=0.0)
        grid = grid_covering(obj.bounds(), 0.025, margin=sensor.array_edge / 2)
        cloud = sample_tactile(obj, sensor, grid, seed=2)
        pitch = sensor.module_pitch
        offs = (np.arange(6) + 0.5) * pitch - sensor.array_edge / 2
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        emitted = {tuple(np.round(p, 9)) for p in cloud.points}
        # replay the press loop: every emitted point must be a module site
        # whose spring force clears the threshold
        for vx, vy in grid.vertices:
            mx = np.round((vx + ox.ravel()) * 1e9) / 1e9
            my = np.round((vy + oy.ravel()) * 1e9) / 1e9
            h = obj.height(mx, my)
            if h.max() <= 0:
                continue
            force = sensor.contact_stiffness * np.clip(
                sensor.press_depth - (h.max() - h), 0, None
            )
            for x, y, hz, f in zip(mx, my, h, force):
                if (x, y, np.round(hz, 9)) in emitted:
                    assert f >= sensor.force_threshold
                    assert hz > 0

    def test_no_table_points(self):
        obj = make_object("mat", 8)
        sensor = SensorSpec(noise_sigma=0.0)
        grid = grid_covering(obj.bounds(), 0.025, margin=sensor.array_edge / 2)
        cloud = sample_tactile(obj, sensor, grid, seed=3)
        assert (cloud.points[:, 2] > 0).all()

    def test_points_on_top_surface(self):
        obj = make_object("mouse", 9)
        sensor = SensorSpec()
        grid = grid_covering(obj.bounds(), 0.025, margin=sensor.array_edge / 2)
        cloud = sample_tactile(obj, sensor, grid, seed=4)
        x, y, z = cloud.points.T
        assert (np.abs(z - obj.height(x, y)) <= 4 * sensor.noise_sigma).mean() >= 0.97

    def test_determinism(self):
        obj = make_object("tape", 10)
        sensor = SensorSpec()
        grid = grid_covering(obj.bounds(), 0.025, margin=sensor.array_edge / 2)
        a = sample_tactile(obj, sensor, grid, seed=5)
        b = sample_tactile(obj, sensor, grid, seed=5)
        assert np.array_equal(a.points, b.points)

    def test_sparser_than_visual(self):
        # Default-settings density gap between the modalities.
        for cid, seed in [("cup_mat", 1), ("mat", 2), ("ruler", 3), ("tape", 4)]:
            obj = make_object(cid, seed)
            visual = sample_visual(obj, seed=seed)
            sensor = SensorSpec()
            grid = grid_covering(obj.bounds(), 0.025, margin=sensor.array_edge / 2)
            tactile = sample_tactile(obj, sensor, grid, seed=seed)
            assert len(visual) / len(tactile) >= 5.0


class TestGridCovering:
    def test_row_major_vertices(self):
        grid = grid_covering((0.0, 0.0, 0.05, 0.05), pitch=0.025)
        v = grid.vertices
        assert (np.diff(v[:, 1]) >= -1e-12).all()  # y never decreases
        rows = np.unique(v[:, 1])
        for y in rows:
            xs = v[v[:, 1] == y, 0]
            assert (np.diff(xs) > 0).all()

    def test_covers_bounds(self):
        grid = grid_covering((-0.1, -0.05, 0.1, 0.05), pitch=0.03, margin=0.02)
        v = grid.vertices
        assert v[:, 0].min() <= -0.1 and v[:, 0].max() >= 0.1
        assert v[:, 1].min() <= -0.05 and v[:, 1].max() >= 0.05


class TestPlaneRemoval:
    def test_pure_plane_removed(self):
        rng = np.random.default_rng(0)
        xy = rng.uniform(-0.1, 0.1, size=(200, 2))
        cloud = PointCloud(np.column_stack([xy, np.zeros(200)]), "tactile")
        out = plane_removal(cloud, 0.001, seed=1)
        assert len(out) == 0

    def test_elevated_points_survive(self):
        rng = np.random.default_rng(1)
        xy = rng.uniform(-0.1, 0.1, size=(300, 2))
        table = np.column_stack([xy, np.zeros(300)])
        elevated = np.column_stack(
            [rng.uniform(-0.05, 0.05, size=(50, 2)), np.full(50, 0.02)]
        )
        cloud = PointCloud(np.vstack([table, elevated]), "tactile")
        out = plane_removal(cloud, 0.002, seed=2)
        assert len(out) == 50
        assert np.allclose(out.points[:, 2], 0.02)

    def test_epsilon_zero_exact_plane_only(self):
        pts = np.array(
            [[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0.5, 0.5, 1e-9], [2, 2, 0]]
        )
        out = plane_removal(PointCloud(pts, "tactile"), 0.0, seed=3)
        assert len(out) == 1
        assert out.points[0, 2] == 1e-9

    def test_small_cloud_passthrough(self):
        cloud = PointCloud(np.array([[0.0, 0, 0], [1, 1, 1]]), "tactile")
        out = plane_removal(cloud, 0.01, seed=4)
        assert np.array_equal(out.points, cloud.points)
