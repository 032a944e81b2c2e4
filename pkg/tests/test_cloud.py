import numpy as np
import pytest

from crossmodal.cloud import (
    EqualizationParams,
    Point,
    PointCloud,
    equalize,
    fit_local_plane,
    mls_resample,
    radius_neighbors,
    voxel_filter,
)
from crossmodal.errors import DegenerateNeighborhood, EmptyCloud


def make_cloud(points, modality="visual", **kw):
    return PointCloud(np.asarray(points, dtype=float), modality, **kw)


class TestPointCloud:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            make_cloud([[0, 0, np.nan]])

    def test_rejects_unknown_modality(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((1, 3)), "sonar")

    def test_empty_cloud_allowed(self):
        assert len(make_cloud(np.empty((0, 3)))) == 0

    def test_point_as_array(self):
        assert np.array_equal(Point(1, 2, 3).as_array(), [1.0, 2.0, 3.0])


class TestEqualizationParams:
    def test_published_defaults(self):
        params = EqualizationParams()
        assert params.upsample_step == pytest.approx(0.0003)
        assert params.search_radius == pytest.approx(0.06)
        assert params.poly_degree == 2
        assert params.voxel_edge == pytest.approx(0.005)

    @pytest.mark.parametrize(
        "kw",
        [
            {"upsample_step": 0.0},
            {"search_radius": -1.0},
            {"voxel_edge": 0.0},
            {"poly_degree": 4},
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            EqualizationParams(**kw)


class TestRadiusNeighbors:
    def test_zero_radius_hits_exact_point(self):
        cloud = make_cloud([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        assert radius_neighbors(cloud, [1, 0, 0], 0.0).tolist() == [1]

    def test_large_radius_returns_all(self):
        rng = np.random.default_rng(0)
        cloud = make_cloud(rng.normal(size=(40, 3)))
        idx = radius_neighbors(cloud, [0, 0, 0], 1e6)
        assert idx.tolist() == list(range(40))

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(-0.05, 0.05, size=(200, 3))
        cloud = make_cloud(pts)
        center = np.array([0.01, -0.02, 0.0])
        expected = np.nonzero(np.linalg.norm(pts - center, axis=1) <= 0.03)[0]
        got = radius_neighbors(cloud, center, 0.03)
        assert got.tolist() == expected.tolist()

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            radius_neighbors(make_cloud([[0, 0, 0]]), [0, 0, 0], -0.1)


class TestFitLocalPlane:
    def test_exact_horizontal_plane(self):
        rng = np.random.default_rng(1)
        xy = rng.uniform(-1, 1, size=(50, 2))
        pts = np.column_stack([xy, np.zeros(50)])
        plane = fit_local_plane(pts)
        assert np.allclose(plane.normal, [0, 0, 1], atol=1e-12)
        assert np.allclose(plane.centroid, pts.mean(axis=0), atol=1e-12)

    def test_three_points_interpolated(self):
        pts = np.array([[0.0, 0, 0], [1, 0, 0.5], [0, 1, -0.2]])
        plane = fit_local_plane(pts)
        dist = (pts - plane.centroid) @ plane.normal
        assert np.abs(dist).max() < 1e-12

    def test_frame_orthonormal(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(30, 3))
        plane = fit_local_plane(pts)
        frame = np.column_stack([plane.normal, plane.tangent_u, plane.tangent_v])
        assert np.allclose(frame.T @ frame, np.eye(3), atol=1e-9)

    def test_noisy_plane_beats_random_planes(self):
        # Total-least-squares optimality probed against 1000 random planes.
        rng = np.random.default_rng(3)
        xy = rng.uniform(-1, 1, size=(120, 2))
        pts = np.column_stack([xy, 0.2 * xy[:, 0] + 0.1 * xy[:, 1]])
        pts += rng.normal(0, 1e-3, pts.shape)
        plane = fit_local_plane(pts)
        best = (((pts - plane.centroid) @ plane.normal) ** 2).sum()
        centroid = pts.mean(axis=0)
        for _ in range(1000):
            normal = rng.normal(size=3)
            normal /= np.linalg.norm(normal)
            rss = (((pts - centroid) @ normal) ** 2).sum()
            assert best <= rss + 1e-12

    def test_collinear_points_degenerate(self):
        pts = np.outer(np.linspace(0, 1, 10), [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateNeighborhood):
            fit_local_plane(pts)

    def test_too_few_points(self):
        with pytest.raises(DegenerateNeighborhood):
            fit_local_plane(np.zeros((2, 3)))

    def test_normal_sign_convention(self):
        # Flat plane in z: largest-magnitude component is z, made positive.
        pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
        assert fit_local_plane(pts).normal[2] > 0

    def test_permutation_invariance_up_to_sign(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(40, 3))
        plane_a = fit_local_plane(pts)
        plane_b = fit_local_plane(pts[rng.permutation(40)])
        assert np.allclose(plane_a.normal, plane_b.normal, atol=1e-9)


class TestMlsResample:
    def test_planar_cloud_stays_planar(self):
        rng = np.random.default_rng(5)
        xy = rng.uniform(-0.02, 0.02, size=(80, 2))
        cloud = make_cloud(np.column_stack([xy, np.full(80, 0.01)]))
        params = EqualizationParams(upsample_step=0.002, search_radius=0.05)
        out = mls_resample(cloud, params)
        assert len(out) > 0
        assert np.abs(out.points[:, 2] - 0.01).max() < 1e-9

    def test_quadric_reproduced(self):
        # Symmetric grid sampling of z = x^2 + y^2 keeps the local plane
        # horizontal, so the degree-2 fit must reproduce the surface.
        axis = np.linspace(-0.03, 0.03, 13)
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), (gx**2 + gy**2).ravel()])
        cloud = make_cloud(pts)
        params = EqualizationParams(upsample_step=0.01, search_radius=0.2, poly_degree=2)
        out = mls_resample(cloud, params)
        x, y, z = out.points.T
        assert np.abs(z - (x**2 + y**2)).max() < 1e-6

    def test_degenerate_cloud_passthrough(self):
        cloud = make_cloud([[0.0, 0, 0], [1e-3, 0, 0]])
        params = EqualizationParams(upsample_step=0.001, search_radius=0.01)
        out = mls_resample(cloud, params)
        assert np.array_equal(out.points, cloud.points)

    def test_empty_cloud_raises(self):
        with pytest.raises(EmptyCloud):
            mls_resample(make_cloud(np.empty((0, 3))), EqualizationParams())

    def test_output_finite_and_metadata_kept(self):
        rng = np.random.default_rng(6)
        pts = rng.uniform(-0.02, 0.02, size=(60, 3)) * [1, 1, 0.05]
        cloud = PointCloud(pts, "tactile", "widget", np.array([0.0, 0, 1]))
        out = mls_resample(cloud, EqualizationParams(upsample_step=0.004, search_radius=0.03))
        assert np.isfinite(out.points).all()
        assert out.modality == "tactile"
        assert out.label == "widget"
        assert np.array_equal(out.sensor_origin, cloud.sensor_origin)


class TestVoxelFilter:
    def test_empty_cloud(self):
        out = voxel_filter(make_cloud(np.empty((0, 3))), 0.01)
        assert len(out) == 0

    def test_single_point_unchanged(self):
        cloud = make_cloud([[0.0123, -0.004, 0.02]])
        out = voxel_filter(cloud, 0.005)
        assert np.allclose(out.points, cloud.points, atol=0)

    def test_eight_points_one_voxel_exact_centroid(self):
        rng = np.random.default_rng(8)
        pts = 0.001 + rng.uniform(0, 0.003, size=(8, 3))  # all inside one 5 mm voxel
        out = voxel_filter(make_cloud(pts), 0.005)
        assert len(out) == 1
        assert np.abs(out.points[0] - pts.mean(axis=0)).max() <= 1e-12

    def test_count_equals_occupied_voxels_and_exact_means(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(-0.05, 0.05, size=(500, 3))
        edge = 0.01
        out = voxel_filter(make_cloud(pts), edge)
        keys = np.unique(np.floor(pts / edge).astype(int), axis=0)
        assert len(out) == len(keys)
        idx = np.floor(pts / edge).astype(int)
        for key, centroid in zip(keys, out.points):
            members = pts[(idx == key).all(axis=1)]
            assert np.abs(centroid - members.mean(axis=0)).max() <= 1e-12

    def test_lexicographic_order(self):
        pts = np.array([[0.02, 0.0, 0.0], [-0.02, 0.0, 0.0], [0.0, 0.02, 0.0]])
        out = voxel_filter(make_cloud(pts), 0.01)
        idx = np.floor(out.points / 0.01).astype(int)
        order = sorted(range(len(idx)), key=lambda i: tuple(idx[i]))
        assert order == list(range(len(idx)))

    def test_idempotent(self):
        rng = np.random.default_rng(10)
        cloud = make_cloud(rng.uniform(-0.05, 0.05, size=(300, 3)))
        once = voxel_filter(cloud, 0.01)
        twice = voxel_filter(once, 0.01)
        assert np.array_equal(once.points, twice.points)

    def test_edge_validation(self):
        with pytest.raises(ValueError):
            voxel_filter(make_cloud([[0, 0, 0]]), 0.0)


class TestEqualize:
    def test_planar_cloud_on_plane_one_point_per_voxel(self):
        rng = np.random.default_rng(11)
        xy = rng.uniform(-0.03, 0.03, size=(10, 2))
        cloud = make_cloud(np.column_stack([xy, np.zeros(10)]))
        params = EqualizationParams(upsample_step=0.002, search_radius=0.08, voxel_edge=0.005)
        out = equalize(cloud, params)
        assert np.abs(out.points[:, 2]).max() < 1e-9
        vox = np.floor(out.points / params.voxel_edge).astype(int)
        assert len(np.unique(vox, axis=0)) == len(out)

    def test_default_params_accepted(self):
        cloud = make_cloud([[0, 0, 0], [0.001, 0, 0], [0, 0.001, 0], [0.001, 0.001, 0]])
        out = equalize(cloud, EqualizationParams())
        assert len(out) >= 1

    def test_density_equalization_between_samplings(self):
        # Dense and sparse samplings of the same plane end up with output
        # spacing within 20% of each other.
        from scipy.spatial import cKDTree

        params = EqualizationParams(upsample_step=0.001, search_radius=0.03, voxel_edge=0.005)

        def spacing(step):
            axis = np.arange(-0.03, 0.0301, step)
            gx, gy = np.meshgrid(axis, axis, indexing="ij")
            cloud = make_cloud(
                np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
            )
            out = equalize(cloud, params)
            dist, _ = cKDTree(out.points).query(out.points, k=2)
            return dist[:, 1].mean()

        dense = spacing(0.003)
        sparse = spacing(0.009)
        assert abs(dense - sparse) / max(dense, sparse) < 0.20

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        pts = rng.uniform(-0.02, 0.02, size=(100, 3)) * [1, 1, 0.1]
        cloud = make_cloud(pts)
        params = EqualizationParams(upsample_step=0.003, search_radius=0.02)
        a = equalize(cloud, params)
        b = equalize(cloud, params)
        assert np.array_equal(a.points, b.points)

    def test_metadata_preserved(self):
        cloud = PointCloud(
            np.array([[0.0, 0, 0], [0.004, 0, 0], [0, 0.004, 0], [0.004, 0.004, 0.001]]),
            "tactile",
            "ring",
        )
        out = equalize(cloud, EqualizationParams(upsample_step=0.002, search_radius=0.02))
        assert out.modality == "tactile"
        assert out.label == "ring"
