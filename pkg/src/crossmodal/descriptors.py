"""Global point-cloud shape descriptors.

Four kinds share one Descriptor container:

* ``esf``    -- 10 concatenated 64-bin histograms of sampled shape functions
                (pair distances, triangle angles, triangle-area roots), each
                split by an in/out/mixed surface trace through an occupancy
                grid, plus the in/out ratio histogram. 640 values.
* ``shot``   -- normal-orientation histograms over 32 spherical divisions
                around the centroid (8 azimuth x 2 elevation x 2 radial,
                11 bins each), unit-normalized. 352 values.
* ``concat`` -- [shot; esf], 992 values.
* ``clue``   -- sigma1 * u1 of the column-centered 640x2 matrix
                [esf, zero-padded shot]: the scaled principal left singular
                vector of the two-descriptor fusion. 640 values.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .errors import DimensionMismatch, KindMismatch, TooFewPoints

ESF = "esf"
SHOT = "shot"
CONCAT = "concat"
CLUE = "clue"

DESCRIPTOR_SIZES = {ESF: 640, SHOT: 352, CONCAT: 992, CLUE: 640}

_ESF_BINS = 64
_ESF_GRID = 64
_ESF_TRACE_SAMPLES = 64
_SHOT_BINS = 11


@dataclasses.dataclass(frozen=True)
class Descriptor:
    """Fixed-length real feature vector with a kind tag."""

    kind: str
    values: np.ndarray
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in DESCRIPTOR_SIZES:
            raise KindMismatch(f"unknown descriptor kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if len(vals) != DESCRIPTOR_SIZES[self.kind]:
            raise KindMismatch(
                f"{self.kind} descriptor must have {DESCRIPTOR_SIZES[self.kind]} "
                f"values, got {len(vals)}"
            )
        if not np.isfinite(vals).all():
            raise ValueError("descriptor values must be finite")
        object.__setattr__(self, "values", vals)


@dataclasses.dataclass(frozen=True)
class NormalField:
    """One unit normal per cloud point, oriented toward the sensor."""

    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[1] != 3:
            raise ValueError("normals must be an (N, 3) array")
        object.__setattr__(self, "vectors", vecs)

    def __len__(self) -> int:
        return len(self.vectors)


@dataclasses.dataclass(frozen=True)
class SvdFusion:
    """Intermediate quantities of the rank-1 descriptor fusion."""

    d_hat: np.ndarray      # raw 640x2 matrix [esf, zero-padded shot]
    centered: np.ndarray   # column-centered copy
    sigma1: float
    u1: np.ndarray
    v1: np.ndarray


def estimate_normals(cloud: PointCloud, k: int) -> NormalField:
    """Per-point normals from the k-nearest-neighbor scatter matrix.

    The normal is the smallest-eigenvalue eigenvector of the scatter of the
    point plus its k nearest neighbors, flipped to face the cloud's
    sensor_origin (falling back to +z when no origin is set).
    """
    n = len(cloud)
    if k < 3:
        raise TooFewPoints("k must be >= 3")
    if n < k + 1:
        raise TooFewPoints(f"need at least k+1={k + 1} points, have {n}")
    tree = cKDTree(cloud.points)
    _, nbr_idx = tree.query(cloud.points, k=k + 1)
    nbrs = cloud.points[nbr_idx]  # (N, k+1, 3), includes the point itself
    rel = nbrs - nbrs.mean(axis=1, keepdims=True)
    scatter = np.einsum("nij,nik->njk", rel, rel)
    _, evecs = np.linalg.eigh(scatter)
    normals = evecs[:, :, 0]
    if cloud.sensor_origin is not None:
        view = cloud.sensor_origin[None, :] - cloud.points
    else:
        view = np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))
    flip = np.einsum("ni,ni->n", normals, view) < 0
    normals[flip] *= -1.0
    return NormalField(normals)


def _canonical_points(pts: np.ndarray) -> np.ndarray:
    # Centroid-centered PCA frame with a fixed per-axis sign convention.
    # Distances/angles/areas and the grid trace classification are invariant
    # to the residual axis reflections, so the ESF histograms are invariant
    # to rigid motions of the input.
    rel = pts - pts.mean(axis=0)
    scatter = rel.T @ rel
    _, evecs = np.linalg.eigh(scatter)
    axes = evecs[:, ::-1]  # principal axis first
    fixed = []
    for j in range(3):
        v = axes[:, j]
        mags = np.abs(v)
        m = mags.max()
        for i in (2, 1, 0):
            if mags[i] == m:
                v = v if v[i] > 0 else -v
                break
        fixed.append(v)
    return rel @ np.column_stack(fixed)


def _distinct_triplets(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    idx = rng.integers(0, n, size=(count, 3))
    while True:
        bad = (
            (idx[:, 0] == idx[:, 1])
            | (idx[:, 1] == idx[:, 2])
            | (idx[:, 0] == idx[:, 2])
        )
        if not bad.any():
            return idx
        idx[bad] = rng.integers(0, n, size=(int(bad.sum()), 3))


_ESF_IN_FRACTION = 0.8
_ESF_OUT_FRACTION = 0.2


def _trace_segments(starts, ends, occupancy, origin, voxel):
    """Classify segments against the occupancy grid.

    The occupied fraction of the interior trace samples decides the class:
    0 ("on surface") above 0.8, 1 ("off surface") below 0.2, 2 otherwise.
    `ratio` is the occupied fraction over all samples including endpoints.
    """
    t = np.linspace(0.0, 1.0, _ESF_TRACE_SAMPLES)
    # Endpoints are cloud points, hence inside the grid; scaling + clipping
    # them keeps every interpolated sample in range, so truncation == floor.
    limit = np.nextafter(float(_ESF_GRID), 0.0)
    a = np.clip((starts - origin) / voxel, 0.0, limit)
    b = np.clip((ends - origin) / voxel, 0.0, limit)
    flat_occ = occupancy.reshape(-1)

    n_seg = len(starts)
    cls = np.empty(n_seg, dtype=np.int64)
    ratio = np.empty(n_seg)
    chunk = max(1, 4_000_000 // _ESF_TRACE_SAMPLES)
    for lo in range(0, n_seg, chunk):
        hi = min(n_seg, lo + chunk)
        d = b[lo:hi] - a[lo:hi]
        flat = (
            (a[lo:hi, 0, None] + d[:, 0, None] * t).astype(np.int32) * (_ESF_GRID * _ESF_GRID)
            + (a[lo:hi, 1, None] + d[:, 1, None] * t).astype(np.int32) * _ESF_GRID
            + (a[lo:hi, 2, None] + d[:, 2, None] * t).astype(np.int32)
        )
        hit = flat_occ[flat]
        frac = hit[:, 1:-1].mean(axis=1)
        cls[lo:hi] = np.where(
            frac > _ESF_IN_FRACTION, 0, np.where(frac < _ESF_OUT_FRACTION, 1, 2)
        )
        ratio[lo:hi] = hit.mean(axis=1)
    return cls, ratio


def compute_esf(cloud: PointCloud, n_samples: int = 20000, seed: int = 0) -> Descriptor:
    """Ensemble-of-shape-functions descriptor from seeded triplet sampling.

    Histogram order: D2 in/out/mixed, D2 ratio, A3 in/out/mixed,
    D3 in/out/mixed; every 64-bin histogram sums to 1 (uniform when empty).
    Deterministic for identical (cloud, n_samples, seed).
    """
    n = len(cloud)
    if n < 3:
        raise TooFewPoints("ESF needs at least 3 points")
    pts = _canonical_points(cloud.points)

    mins = pts.min(axis=0)
    maxs = pts.max(axis=0)
    center = (mins + maxs) / 2.0
    side = float((maxs - mins).max())
    side = max(side, 1e-12) * (1.0 + 1e-9)
    origin = center - side / 2.0
    voxel = side / _ESF_GRID
    diag = side * np.sqrt(3.0)

    vox_idx = np.floor((pts - origin) / voxel).astype(np.int64)
    np.clip(vox_idx, 0, _ESF_GRID - 1, out=vox_idx)
    occupancy = np.zeros((_ESF_GRID,) * 3, dtype=bool)
    occupancy[vox_idx[:, 0], vox_idx[:, 1], vox_idx[:, 2]] = True
    # One-cell dilation keeps the sampled surface connected at grid
    # resolution; without it sparse clouds read as disconnected dots and the
    # trace split degenerates.
    occupancy = ndimage.binary_dilation(occupancy, structure=np.ones((3, 3, 3), dtype=bool))

    rng = np.random.default_rng(seed)
    trip = _distinct_triplets(rng, n, n_samples)
    p1, p2, p3 = pts[trip[:, 0]], pts[trip[:, 1]], pts[trip[:, 2]]

    # Segment s of triplet: 0 = p1-p2, 1 = p2-p3, 2 = p3-p1.
    starts = np.concatenate([p1, p2, p3])
    ends = np.concatenate([p2, p3, p1])
    seg_cls, seg_ratio = _trace_segments(starts, ends, occupancy, origin, voxel)
    seg_len = np.linalg.norm(ends - starts, axis=1)

    def to_bins(values):
        b = np.floor(values * _ESF_BINS).astype(np.int64)
        return np.clip(b, 0, _ESF_BINS - 1)

    d2_bins = to_bins(seg_len / diag)
    ratio_bins = to_bins(seg_ratio)

    def angle_at(apex, a, b):
        va = a - apex
        vb = b - apex
        na = np.linalg.norm(va, axis=1)
        nb = np.linalg.norm(vb, axis=1)
        denom = np.where(na * nb > 0, na * nb, 1.0)
        cosang = np.clip(np.einsum("ni,ni->n", va, vb) / denom, -1.0, 1.0)
        return np.arccos(cosang) / np.pi

    # The angle at each vertex is classified by the trace of its opposite edge.
    s = n_samples
    a3_vals = np.concatenate([angle_at(p1, p2, p3), angle_at(p2, p3, p1), angle_at(p3, p1, p2)])
    a3_cls = np.concatenate([seg_cls[s : 2 * s], seg_cls[2 * s :], seg_cls[:s]])
    a3_bins = to_bins(a3_vals)

    area = 0.5 * np.linalg.norm(np.cross(p2 - p1, p3 - p1), axis=1)
    d3_bins = to_bins(np.sqrt(area) / diag)
    edge_cls = seg_cls.reshape(3, s)
    d3_cls = np.where(
        (edge_cls == 0).all(axis=0), 0, np.where((edge_cls == 1).all(axis=0), 1, 2)
    )

    # Histogram layout: 0-2 D2 in/out/mixed, 3 D2 ratio, 4-6 A3, 7-9 D3.
    flat = np.concatenate(
        [
            seg_cls * _ESF_BINS + d2_bins,
            3 * _ESF_BINS + ratio_bins,
            (4 + a3_cls) * _ESF_BINS + a3_bins,
            (7 + d3_cls) * _ESF_BINS + d3_bins,
        ]
    )
    counts = np.bincount(flat, minlength=10 * _ESF_BINS).astype(float)
    hists = counts.reshape(10, _ESF_BINS)
    totals = hists.sum(axis=1)
    empty = totals == 0
    hists[empty] = 1.0 / _ESF_BINS
    hists[~empty] /= totals[~empty, None]
    return Descriptor(ESF, hists.reshape(-1))


def _disambiguate(axis: np.ndarray, rel: np.ndarray) -> np.ndarray:
    dots = rel @ axis
    n_pos = int((dots > 0).sum())
    n_neg = int((dots < 0).sum())
    if n_pos < n_neg:
        return -axis
    if n_pos == n_neg and dots.sum() < 0:
        return -axis
    return axis


def compute_shot(cloud: PointCloud, normals: NormalField) -> Descriptor:
    """Global orientation-signature descriptor around the cloud centroid.

    A local reference frame comes from the radius-weighted scatter about the
    centroid with majority-vote sign disambiguation; the enclosing sphere is
    split into 8 azimuth x 2 elevation x 2 radial divisions, each holding an
    11-bin histogram of cos(normal, frame z-axis). Fully degenerate frames
    fall back to the world axes and tag the descriptor with
    ``degenerate_frame``.
    """
    pts = cloud.points
    n = len(pts)
    if n < 3:
        raise TooFewPoints("SHOT needs at least 3 points")
    if len(normals) != n:
        raise DimensionMismatch("one normal per point required")
    centroid = pts.mean(axis=0)
    rel = pts - centroid
    dist = np.linalg.norm(rel, axis=1)
    r_support = float(dist.max())

    flags: tuple[str, ...] = ()
    weights = r_support - dist
    wsum = float(weights.sum())
    if wsum <= 0:
        weights = np.ones(n)
        wsum = float(n)
    scatter = (rel * weights[:, None]).T @ rel / wsum
    evals, evecs = np.linalg.eigh(scatter)
    if evals[2] - evals[0] <= 1e-12 * max(evals[2], 1e-300):
        x_axis = np.array([1.0, 0.0, 0.0])
        z_axis = np.array([0.0, 0.0, 1.0])
        flags = ("degenerate_frame",)
    else:
        x_axis = _disambiguate(evecs[:, 2], rel)
        z_axis = _disambiguate(evecs[:, 0], rel)
    y_axis = np.cross(z_axis, x_axis)

    lx = rel @ x_axis
    ly = rel @ y_axis
    lz = rel @ z_axis
    azimuth = np.arctan2(ly, lx)
    az_bin = np.clip(np.floor((azimuth + np.pi) / (2 * np.pi / 8)).astype(np.int64), 0, 7)
    elev_bin = (lz >= 0).astype(np.int64)
    rad_bin = (dist > r_support / 2.0).astype(np.int64)
    division = az_bin * 4 + elev_bin * 2 + rad_bin

    cosang = np.clip(normals.vectors @ z_axis, -1.0, 1.0)
    cos_bin = np.clip(np.floor((cosang + 1.0) / 2.0 * _SHOT_BINS).astype(np.int64), 0, _SHOT_BINS - 1)

    counts = np.bincount(division * _SHOT_BINS + cos_bin, minlength=32 * _SHOT_BINS).astype(float)
    norm = np.linalg.norm(counts)
    if norm > 0:
        counts /= norm
    return Descriptor(SHOT, counts, flags)


def concat_descriptor(d_shot: Descriptor, d_esf: Descriptor) -> Descriptor:
    """Plain concatenation [shot; esf] -> 992 values."""
    if d_shot.kind != SHOT or d_esf.kind != ESF:
        raise KindMismatch("concat_descriptor expects (shot, esf)")
    return Descriptor(CONCAT, np.concatenate([d_shot.values, d_esf.values]))


def svd_fusion(d_shot: Descriptor, d_esf: Descriptor) -> SvdFusion:
    """Column-centered SVD of the 640x2 matrix [esf, zero-padded shot]."""
    if d_shot.kind != SHOT or d_esf.kind != ESF:
        raise KindMismatch("svd_fusion expects (shot, esf)")
    padded = np.zeros(DESCRIPTOR_SIZES[ESF])
    padded[: DESCRIPTOR_SIZES[SHOT]] = d_shot.values
    d_hat = np.column_stack([d_esf.values, padded])
    centered = d_hat - d_hat.mean(axis=0, keepdims=True)
    u_mat, s, vt = np.linalg.svd(centered, full_matrices=False)
    sigma1 = float(s[0])
    u1 = u_mat[:, 0]
    v1 = vt[0]
    if sigma1 > 0:
        ref = float(u1 @ centered[:, 0])
        if ref < 0:
            u1, v1 = -u1, -v1
        elif ref == 0:
            nonzero = np.nonzero(u1)[0]
            if len(nonzero) and u1[nonzero[0]] < 0:
                u1, v1 = -u1, -v1
    return SvdFusion(d_hat, centered, sigma1, u1, v1)


def compute_clue(d_shot: Descriptor, d_esf: Descriptor) -> Descriptor:
    """Rank-1 fusion descriptor: sigma1 * u1 of the centered fusion matrix.

    The sign is anchored so u1 aligns with the centered esf column (first
    nonzero entry positive on exact ties); a zero matrix yields the zero
    vector.
    """
    fusion = svd_fusion(d_shot, d_esf)
    if fusion.sigma1 == 0:
        return Descriptor(CLUE, np.zeros(DESCRIPTOR_SIZES[CLUE]))
    return Descriptor(CLUE, fusion.sigma1 * fusion.u1)
