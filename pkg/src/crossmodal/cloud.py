"""Point-cloud types and the equalization pipeline.

Equalization makes visual and tactile clouds comparable: a moving-least-squares
resampling fills gaps and uniformly upsamples the local surface, then a voxel
grid filter downsamples to one centroid per occupied cube. All operations are
pure functions of their inputs; nothing random, nothing global.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateNeighborhood, EmptyCloud

VISUAL = "visual"
TACTILE = "tactile"
_MODALITIES = (VISUAL, TACTILE)


@dataclasses.dataclass(frozen=True)
class Point:
    """A 3D position in meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclasses.dataclass
class PointCloud:
    """A labeled, modality-tagged set of 3D points in meters.

    `points` is an (N, 3) float array. `sensor_origin` is the viewpoint the
    cloud was captured from; normal estimation orients normals toward it.
    """

    points: np.ndarray
    modality: str
    label: str | None = None
    sensor_origin: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be an (N, 3) array")
        if not np.isfinite(pts).all():
            raise ValueError("point coordinates must be finite")
        if self.modality not in _MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        self.points = pts
        if self.sensor_origin is not None:
            origin = np.asarray(self.sensor_origin, dtype=float).reshape(3)
            if not np.isfinite(origin).all():
                raise ValueError("sensor_origin must be finite")
            self.sensor_origin = origin

    def __len__(self) -> int:
        return len(self.points)

    def with_points(self, points: np.ndarray) -> "PointCloud":
        """Same metadata, new geometry."""
        return PointCloud(points, self.modality, self.label, self.sensor_origin)


@dataclasses.dataclass(frozen=True)
class EqualizationParams:
    """Parameters of the MLS + voxel equalization, meters.

    Defaults are the published operating point: 0.3 mm upsampling step,
    6 cm search radius, degree-2 polynomial, 5 mm voxel edge.
    """

    upsample_step: float = 0.0003
    search_radius: float = 0.06
    poly_degree: int = 2
    voxel_edge: float = 0.005

    def __post_init__(self):
        if self.upsample_step <= 0:
            raise ValueError("upsample_step must be > 0")
        if self.search_radius <= 0:
            raise ValueError("search_radius must be > 0")
        if self.voxel_edge <= 0:
            raise ValueError("voxel_edge must be > 0")
        if self.poly_degree not in (1, 2, 3):
            raise ValueError("poly_degree must be 1, 2 or 3")


@dataclasses.dataclass(frozen=True)
class LocalPlane:
    """Total-least-squares plane with an in-plane orthonormal frame."""

    centroid: np.ndarray
    normal: np.ndarray
    tangent_u: np.ndarray
    tangent_v: np.ndarray


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # Largest-magnitude component made positive; ties prefer z, then y, then x.
    mags = np.abs(v)
    m = mags.max()
    for i in (2, 1, 0):
        if mags[i] == m:
            return v if v[i] > 0 else -v
    return v


def radius_neighbors(cloud: PointCloud, center, radius: float) -> np.ndarray:
    """Indices of points within `radius` of `center`, ascending."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if isinstance(center, Point):
        center = center.as_array()
    center = np.asarray(center, dtype=float).reshape(3)
    if len(cloud) == 0:
        return np.empty(0, dtype=int)
    tree = cKDTree(cloud.points)
    idx = tree.query_ball_point(center, radius)
    return np.array(sorted(idx), dtype=int)


def fit_local_plane(points) -> LocalPlane:
    """Fit a plane to >= 3 points by PCA of the 3x3 scatter matrix.

    The normal is the smallest-eigenvalue eigenvector; raises
    DegenerateNeighborhood when the points are (near-)collinear.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 3:
        raise DegenerateNeighborhood("need at least 3 points")
    centroid = pts.mean(axis=0)
    rel = pts - centroid
    scatter = rel.T @ rel
    evals, evecs = np.linalg.eigh(scatter)  # ascending eigenvalues
    if evals[1] <= 1e-12 * max(evals[2], 1e-300):
        raise DegenerateNeighborhood("neighborhood rank < 2")
    normal = _fix_sign(evecs[:, 0])
    tangent_u = _fix_sign(evecs[:, 2])
    tangent_v = np.cross(normal, tangent_u)
    return LocalPlane(centroid, normal, tangent_u, tangent_v)


def _poly_exponents(degree: int) -> list[tuple[int, int]]:
    return [(a, b) for total in range(degree + 1) for a in range(total + 1) for b in [total - a]]


def _design_matrix(u: np.ndarray, v: np.ndarray, degree: int) -> np.ndarray:
    exps = _poly_exponents(degree)
    out = np.empty((len(u), len(exps)))
    u_pow = {0: np.ones_like(u)}
    v_pow = {0: np.ones_like(v)}
    for p in range(1, degree + 1):
        u_pow[p] = u_pow[p - 1] * u
        v_pow[p] = v_pow[p - 1] * v
    for j, (a, b) in enumerate(exps):
        out[:, j] = u_pow[a] * v_pow[b]
    return out


def _grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = max(0, math.ceil((hi - lo) / step - 1e-12)) + 1
    return lo + step * np.arange(n)


def mls_resample(cloud: PointCloud, params: EqualizationParams) -> PointCloud:
    """Moving-least-squares surface resampling.

    For every point: gather the neighborhood within the search radius, fit a
    local plane, fit a bivariate polynomial to the heights over that plane,
    and emit points on a square (u, v) grid of step `upsample_step` covering
    the projected neighborhood. Grid nodes farther from every projected
    neighbor than (mean nearest-neighbor spacing + 2 * upsample_step) are
    pruned so the output never extrapolates past the data footprint.
    Degenerate neighborhoods pass the query point through unchanged.
    """
    if len(cloud) == 0:
        raise EmptyCloud("mls_resample requires a non-empty cloud")
    pts = cloud.points
    tree = cKDTree(pts)
    if len(pts) > 1:
        nn_d, _ = tree.query(pts, k=2)
        mean_nn = float(nn_d[:, 1].mean())
    else:
        mean_nn = 0.0
    keep_radius = mean_nn + 2.0 * params.upsample_step

    step = params.upsample_step
    keep_radius_sq = keep_radius * keep_radius
    out = []
    neighborhoods = tree.query_ball_point(pts, params.search_radius)
    for i in range(len(pts)):
        idx = np.sort(np.asarray(neighborhoods[i], dtype=np.int64))
        nb = pts[idx]
        try:
            plane = fit_local_plane(nb)
        except DegenerateNeighborhood:
            out.append(pts[i : i + 1])
            continue
        rel = nb - plane.centroid
        u = rel @ plane.tangent_u
        v = rel @ plane.tangent_v
        h = rel @ plane.normal

        # Reduce the degree when the neighborhood cannot support it.
        degree = params.poly_degree
        while degree > 1 and len(nb) < len(_poly_exponents(degree)):
            degree -= 1
        design = _design_matrix(u, v, degree)
        coef, *_ = np.linalg.lstsq(design, h, rcond=None)

        gu = _grid_axis(float(u.min()), float(u.max()), step)
        gv = _grid_axis(float(v.min()), float(v.max()), step)
        ku = np.repeat(gu, len(gv))
        kv = np.tile(gv, len(gu))
        # Prune grid nodes outside the projected data footprint.
        d_sq = (ku[:, None] - u) ** 2 + (kv[:, None] - v) ** 2
        keep = d_sq.min(axis=1) <= keep_radius_sq
        if not keep.any():
            out.append(pts[i : i + 1])
            continue
        ku = ku[keep]
        kv = kv[keep]
        kh = _design_matrix(ku, kv, degree) @ coef
        world = (
            plane.centroid
            + ku[:, None] * plane.tangent_u
            + kv[:, None] * plane.tangent_v
            + kh[:, None] * plane.normal
        )
        out.append(world)
    return cloud.with_points(np.vstack(out))


def voxel_filter(cloud: PointCloud, edge: float) -> PointCloud:
    """Replace the points of each occupied voxel by their exact centroid.

    Voxels are anchored at the world origin (index = floor(coord / edge));
    output order is lexicographic in voxel index, which makes the filter
    deterministic and idempotent.
    """
    if edge <= 0:
        raise ValueError("edge must be > 0")
    if len(cloud) == 0:
        return cloud.with_points(cloud.points)
    voxel_idx = np.floor(cloud.points / edge).astype(np.int64)
    keys, inverse = np.unique(voxel_idx, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(keys), 3))
    np.add.at(sums, inverse, cloud.points)
    counts = np.bincount(inverse, minlength=len(keys)).astype(float)
    return cloud.with_points(sums / counts[:, None])


def equalize(cloud: PointCloud, params: EqualizationParams) -> PointCloud:
    """MLS resampling followed by voxel-grid filtering; metadata preserved."""
    return voxel_filter(mls_resample(cloud, params), params.voxel_edge)
