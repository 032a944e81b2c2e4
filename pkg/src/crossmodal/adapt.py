"""Unsupervised domain adaptation between descriptor sets.

The source (visual) and target (tactile) descriptor clouds are reduced to
d-dimensional PCA subspaces, which are two points on the Grassmann manifold
G(d, D). The geodesic between them is parameterized in closed form from the
principal angles, and integrating the projection onto every subspace along
the geodesic yields a D x D kernel matrix G: similarity(x_i, x_j) = x_i^T G x_j.
Target labels are never consumed; adaptation is fully unsupervised.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, RankDeficient

SOURCE = "source"
TARGET = "target"

_SMALL_ANGLE = 1e-4


@dataclasses.dataclass
class FeatureSet:
    """An (N, D) matrix of descriptors from one domain."""

    vectors: np.ndarray
    domain: str = SOURCE
    labels: list | None = None

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[0] < 1:
            raise ValueError("vectors must be a non-empty (N, D) matrix")
        if self.domain not in (SOURCE, TARGET):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.labels is not None and len(self.labels) != len(vecs):
            raise ValueError("one label per vector required")
        self.vectors = vecs

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclasses.dataclass(frozen=True)
class SubspacePair:
    """Source/target bases and the source orthonormal complement."""

    x_source: np.ndarray   # D x d
    x_target: np.ndarray   # D x d
    r_source: np.ndarray   # D x (D - d)
    d: int


@dataclasses.dataclass(frozen=True)
class GfkModel:
    """Fitted geodesic-flow kernel.

    theta holds the ascending principal angles; G is the symmetric PSD
    kernel matrix. The infinite-dimensional geodesic feature is never
    materialized -- it lives implicitly in G.
    """

    subspaces: SubspacePair
    theta: np.ndarray
    u1: np.ndarray   # d x d orthogonal
    u2: np.ndarray   # (D - d) x d, orthonormal columns
    v: np.ndarray    # d x d orthogonal
    g: np.ndarray    # D x D

    @property
    def dim(self) -> int:
        return self.g.shape[0]


def _fix_column_signs(basis: np.ndarray) -> np.ndarray:
    cols = basis.copy()
    for j in range(cols.shape[1]):
        i = int(np.argmax(np.abs(cols[:, j])))
        if cols[i, j] < 0:
            cols[:, j] = -cols[:, j]
    return cols


def pca_basis(data: FeatureSet, d: int) -> np.ndarray:
    """Top-d principal directions of the mean-centered vectors.

    Columns are eigenvalue-descending with the largest-magnitude entry of
    each column made positive. Raises RankDeficient when d exceeds the
    data rank.
    """
    x = data.vectors
    n, dim = x.shape
    if d < 1 or d > dim:
        raise RankDeficient(f"d={d} outside [1, {dim}]")
    centered = x - x.mean(axis=0, keepdims=True)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        rank = 0
    else:
        rank = int((s > s[0] * max(n, dim) * np.finfo(float).eps).sum())
    if d > rank:
        raise RankDeficient(f"d={d} exceeds data rank {rank}")
    return _fix_column_signs(vt[:d].T)


def orthonormal_complement(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the subspace orthogonal to the given columns."""
    return scipy.linalg.null_space(basis.T)


def principal_angles(x_source: np.ndarray, x_target: np.ndarray, r_source: np.ndarray | None = None):
    """Principal angles between two orthonormal bases plus the SVD factors.

    Returns (theta, U1, U2, V) with theta ascending in [0, pi/2]:
    X_S^T X_T = U1 diag(cos theta) V^T and R_S^T X_T = -U2 diag(sin theta) V^T
    share the same V. Columns of U2 whose angle is ~0 are filled by an
    orthonormal completion (their geodesic contribution vanishes anyway).
    """
    x_source = np.asarray(x_source, dtype=float)
    x_target = np.asarray(x_target, dtype=float)
    if x_source.shape != x_target.shape:
        raise DimensionMismatch("bases must share the same shape")
    dim, d = x_source.shape
    if r_source is None:
        r_source = orthonormal_complement(x_source)

    u1, gamma, vt = np.linalg.svd(x_source.T @ x_target)
    gamma = np.clip(gamma, 0.0, 1.0)
    theta = np.arccos(gamma)  # gamma descending => theta ascending
    v = vt.T

    w = -(r_source.T @ x_target) @ v
    u2 = np.zeros((dim - d, d))
    col_norms = np.linalg.norm(w, axis=0)
    good = col_norms > 1e-9
    u2[:, good] = w[:, good] / col_norms[good]

    # Deterministic orthonormal completion for the sin(theta) ~ 0 columns.
    if not good.all():
        existing = [u2[:, j] for j in range(d) if good[j]]
        for j in np.nonzero(~good)[0]:
            for i in range(dim - d):
                cand = np.zeros(dim - d)
                cand[i] = 1.0
                for e in existing:
                    cand -= (cand @ e) * e
                norm = np.linalg.norm(cand)
                if norm > 0.5:
                    u2[:, j] = cand / norm
                    existing.append(u2[:, j])
                    break
            # d > D - d leaves no room: the column stays zero, which is
            # consistent because its angle is exactly zero.
    return theta, u1, u2, v


def _lambda_coefficients(theta: np.ndarray):
    lam1 = np.empty_like(theta)
    lam2 = np.empty_like(theta)
    lam3 = np.empty_like(theta)
    small = theta < _SMALL_ANGLE
    lam1[small] = 2.0
    lam2[small] = 0.0
    lam3[small] = 0.0
    t = theta[~small]
    lam1[~small] = 1.0 + np.sin(2 * t) / (2 * t)
    lam2[~small] = (np.cos(2 * t) - 1.0) / (2 * t)
    lam3[~small] = 1.0 - np.sin(2 * t) / (2 * t)
    return lam1, lam2, lam3


def gfk_from_bases(x_source: np.ndarray, x_target: np.ndarray) -> GfkModel:
    """Closed-form geodesic-flow kernel for two given orthonormal bases."""
    r_source = orthonormal_complement(x_source)
    theta, u1, u2, v = principal_angles(x_source, x_target, r_source)
    lam1, lam2, lam3 = _lambda_coefficients(theta)

    a = x_source @ u1          # D x d
    b = r_source @ u2          # D x d
    p = np.hstack([a, b])      # D x 2d
    mid = np.block(
        [
            [np.diag(lam1), np.diag(lam2)],
            [np.diag(lam2), np.diag(lam3)],
        ]
    )
    g = p @ mid @ p.T
    g = (g + g.T) / 2.0
    subspaces = SubspacePair(x_source, x_target, r_source, x_source.shape[1])
    return GfkModel(subspaces, theta, u1, u2, v, g)


def gfk_fit(source: FeatureSet, target: FeatureSet, d: int) -> GfkModel:
    """Fit the geodesic-flow kernel between two unlabeled descriptor sets.

    Any labels on the target set are ignored. Raises DimensionMismatch when
    the feature dimensions differ and RankDeficient when d exceeds either
    data rank or D - 1.
    """
    if source.dim != target.dim:
        raise DimensionMismatch("source and target feature dimensions differ")
    dim = source.dim
    if d >= dim:
        raise RankDeficient(f"d={d} must be < D={dim}")
    x_source = pca_basis(source, d)
    x_target = pca_basis(target, d)
    return gfk_from_bases(x_source, x_target)


def geodesic_point(model: GfkModel, t: float) -> np.ndarray:
    """The subspace basis Phi(t) along the geodesic, t in [0, 1].

    Phi(0) spans the source subspace and Phi(1) spans the target subspace;
    columns are orthonormal for every t.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    sub = model.subspaces
    cos_t = np.cos(t * model.theta)
    sin_t = np.sin(t * model.theta)
    return sub.x_source @ (model.u1 * cos_t) - sub.r_source @ (model.u2 * sin_t)


def gfk_similarity(model: GfkModel, xi: np.ndarray, xj: np.ndarray) -> float:
    """Kernel similarity x_i^T G x_j."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    xj = np.asarray(xj, dtype=float).reshape(-1)
    if len(xi) != model.dim or len(xj) != model.dim:
        raise DimensionMismatch("vector dimension does not match the kernel")
    return float(xi @ model.g @ xj)


def gfk_distance(model: GfkModel, xi: np.ndarray, xj: np.ndarray) -> float:
    """Pseudo-metric induced by the kernel: sqrt((xi-xj)^T G (xi-xj))."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    xj = np.asarray(xj, dtype=float).reshape(-1)
    if len(xi) != model.dim or len(xj) != model.dim:
        raise DimensionMismatch("vector dimension does not match the kernel")
    diff = xi - xj
    return float(np.sqrt(max(0.0, diff @ model.g @ diff)))


@dataclasses.dataclass(frozen=True)
class PcaTransfer:
    """Shared-subspace projection baseline fitted on source + target."""

    source: FeatureSet
    target: FeatureSet
    mean: np.ndarray
    basis: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.mean) @ self.basis


def pca_transfer(source: FeatureSet, target: FeatureSet, d: int) -> PcaTransfer:
    """Project both domains onto one PCA basis fitted on their union."""
    if source.dim != target.dim:
        raise DimensionMismatch("source and target feature dimensions differ")
    union = np.vstack([source.vectors, target.vectors])
    basis = pca_basis(FeatureSet(union), d)
    mean = union.mean(axis=0)
    proj_s = (source.vectors - mean) @ basis
    proj_t = (target.vectors - mean) @ basis
    return PcaTransfer(
        FeatureSet(proj_s, SOURCE, source.labels),
        FeatureSet(proj_t, TARGET, target.labels),
        mean,
        basis,
    )
