"""Synthetic stand-in for the capture hardware.

Quasi-planar objects are unions of 2D primitives (boxes, discs, annuli,
capsules, domes) extruded by a piecewise height map. Visual clouds sample the
top and side surfaces of the height field; tactile clouds come from a
simulated grid of square force-sensing arrays pressed straight down, keeping
only module contacts whose spring force clears the threshold. Everything is
seed-deterministic.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .cloud import PointCloud, TACTILE, VISUAL
from .errors import EmptyContact, UnknownClass

MAX_FOOTPRINT = 0.3
MAX_HEIGHT = 0.15


def _rot2(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclasses.dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    wx: float
    wy: float
    angle: float
    top: float

    def height(self, x, y):
        rel = np.stack([x - self.cx, y - self.cy], axis=-1) @ _rot2(self.angle)
        inside = (np.abs(rel[..., 0]) <= self.wx / 2) & (np.abs(rel[..., 1]) <= self.wy / 2)
        return np.where(inside, self.top, 0.0)

    def bounds(self):
        r = math.hypot(self.wx, self.wy) / 2
        return self.cx - r, self.cy - r, self.cx + r, self.cy + r

    def perimeter(self):
        return 2 * (self.wx + self.wy)

    def boundary(self, s):
        # s in [0, perimeter); walk the four edges counterclockwise.
        rot = _rot2(-self.angle)
        hx, hy = self.wx / 2, self.wy / 2
        lengths = np.array([self.wx, self.wy, self.wx, self.wy])
        ends = np.cumsum(lengths)
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        for i, (start, corner, normal, direction) in enumerate(
            [
                (0.0, (-hx, -hy), (0, -1), (1, 0)),
                (ends[0], (hx, -hy), (1, 0), (0, 1)),
                (ends[1], (hx, hy), (0, 1), (-1, 0)),
                (ends[2], (-hx, hy), (-1, 0), (0, -1)),
            ]
        ):
            mask = (s >= start) & (s < ends[i])
            t = s[mask] - start
            pts[mask] = np.array(corner) + np.outer(t, direction)
            nrm[mask] = normal
        world = pts @ rot.T + np.array([self.cx, self.cy])
        return world, nrm @ rot.T


@dataclasses.dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    radius: float
    top: float
    dome: bool = False

    def height(self, x, y):
        rho2 = (x - self.cx) ** 2 + (y - self.cy) ** 2
        inside = rho2 <= self.radius**2
        if not self.dome:
            return np.where(inside, self.top, 0.0)
        frac = np.clip(1.0 - rho2 / self.radius**2, 0.0, None)
        return np.where(inside, self.top * np.sqrt(frac), 0.0)

    def bounds(self):
        return (
            self.cx - self.radius,
            self.cy - self.radius,
            self.cx + self.radius,
            self.cy + self.radius,
        )

    def perimeter(self):
        return 2 * math.pi * self.radius

    def boundary(self, s):
        ang = s / self.radius
        nrm = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return np.array([self.cx, self.cy]) + self.radius * nrm, nrm


@dataclasses.dataclass(frozen=True)
class Ring:
    cx: float
    cy: float
    r_outer: float
    r_inner: float
    top: float

    def height(self, x, y):
        rho2 = (x - self.cx) ** 2 + (y - self.cy) ** 2
        inside = (rho2 <= self.r_outer**2) & (rho2 >= self.r_inner**2)
        return np.where(inside, self.top, 0.0)

    def bounds(self):
        return (
            self.cx - self.r_outer,
            self.cy - self.r_outer,
            self.cx + self.r_outer,
            self.cy + self.r_outer,
        )

    def perimeter(self):
        return 2 * math.pi * (self.r_outer + self.r_inner)

    def boundary(self, s):
        split = 2 * math.pi * self.r_outer
        outer = s < split
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        ang = np.where(outer, s / self.r_outer, (s - split) / max(self.r_inner, 1e-12))
        radial = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        r = np.where(outer, self.r_outer, self.r_inner)
        pts = np.array([self.cx, self.cy]) + radial * r[:, None]
        nrm = np.where(outer[:, None], radial, -radial)  # inner wall faces the hole
        return pts, nrm


@dataclasses.dataclass(frozen=True)
class Capsule:
    x1: float
    y1: float
    x2: float
    y2: float
    radius: float
    top: float

    def _axis(self):
        a = np.array([self.x1, self.y1])
        b = np.array([self.x2, self.y2])
        d = b - a
        length = float(np.linalg.norm(d))
        return a, b, d / max(length, 1e-12), length

    def height(self, x, y):
        a, _, u, length = self._axis()
        px = np.stack([x - a[0], y - a[1]], axis=-1)
        t = np.clip(px @ u, 0.0, length)
        closest = np.stack([t * u[0], t * u[1]], axis=-1)
        dist2 = ((px - closest) ** 2).sum(axis=-1)
        return np.where(dist2 <= self.radius**2, self.top, 0.0)

    def bounds(self):
        return (
            min(self.x1, self.x2) - self.radius,
            min(self.y1, self.y2) - self.radius,
            max(self.x1, self.x2) + self.radius,
            max(self.y1, self.y2) + self.radius,
        )

    def perimeter(self):
        _, _, _, length = self._axis()
        return 2 * length + 2 * math.pi * self.radius

    def boundary(self, s):
        a, b, u, length = self._axis()
        n = np.array([-u[1], u[0]])
        cap = math.pi * self.radius
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        # side 1, cap at b, side 2, cap at a
        seg_ends = np.cumsum([length, cap, length, cap])
        m = s < seg_ends[0]
        pts[m] = a + np.outer(s[m], u) + self.radius * n
        nrm[m] = n
        m = (s >= seg_ends[0]) & (s < seg_ends[1])
        ang = (s[m] - seg_ends[0]) / self.radius
        direction = np.outer(np.cos(ang), n) + np.outer(np.sin(ang), u)
        pts[m] = b + self.radius * direction
        nrm[m] = direction
        m = (s >= seg_ends[1]) & (s < seg_ends[2])
        pts[m] = b - np.outer(s[m] - seg_ends[1], u) - self.radius * n
        nrm[m] = -n
        m = s >= seg_ends[2]
        ang = (s[m] - seg_ends[2]) / self.radius
        direction = np.outer(np.cos(ang), -n) + np.outer(np.sin(ang), -u)
        pts[m] = a + self.radius * direction
        nrm[m] = direction
        return pts, nrm


@dataclasses.dataclass
class ObjectModel:
    """Union of primitives with a piecewise height map h(x, y) >= 0."""

    class_id: str
    primitives: list

    def __post_init__(self):
        x0, y0, x1, y1 = self.bounds()
        if (x1 - x0) > MAX_FOOTPRINT or (y1 - y0) > MAX_FOOTPRINT:
            raise ValueError("object footprint exceeds 0.3 x 0.3 m")
        if any(p.top > MAX_HEIGHT for p in self.primitives):
            raise ValueError("object height exceeds 0.15 m")

    def height(self, x, y):
        """Top-surface height; 0 outside the silhouette."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        h = np.zeros(np.broadcast(x, y).shape)
        for prim in self.primitives:
            h = np.maximum(h, prim.height(x, y))
        return h

    def contains(self, x, y):
        return self.height(x, y) > 0.0

    def bounds(self):
        boxes = np.array([p.bounds() for p in self.primitives])
        return (
            float(boxes[:, 0].min()),
            float(boxes[:, 1].min()),
            float(boxes[:, 2].max()),
            float(boxes[:, 3].max()),
        )

    def silhouette_area(self, resolution: int = 300) -> float:
        """Footprint area by fine-grid integration (test instrumentation)."""
        x0, y0, x1, y1 = self.bounds()
        xs = np.linspace(x0, x1, resolution)
        ys = np.linspace(y0, y1, resolution)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
        return float(self.contains(gx, gy).sum() * cell)


@dataclasses.dataclass(frozen=True)
class SensorSpec:
    """Square array of force-sensing modules pressed along -z."""

    modules_per_side: int = 6
    array_edge: float = 0.05
    force_threshold: float = 0.8     # newtons
    contact_stiffness: float = 1000.0  # N/m
    press_depth: float = 0.010
    noise_sigma: float = 0.0004

    def __post_init__(self):
        if self.force_threshold <= 0:
            raise ValueError("force_threshold must be > 0")

    @property
    def module_pitch(self) -> float:
        return self.array_edge / self.modules_per_side


@dataclasses.dataclass(frozen=True)
class ExplorationGrid:
    """Row-major press vertices covering the object footprint."""

    vertices: np.ndarray  # (n, 2)
    pitch: float

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValueError("pitch must be > 0")
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 2))


def grid_covering(bounds, pitch: float = 0.025, margin: float = 0.0) -> ExplorationGrid:
    """Build a row-major exploration grid over an (x0, y0, x1, y1) box."""
    x0, y0, x1, y1 = bounds
    xs = np.arange(x0 - margin, x1 + margin + pitch / 2, pitch)
    ys = np.arange(y0 - margin, y1 + margin + pitch / 2, pitch)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return ExplorationGrid(np.column_stack([gx.ravel(), gy.ravel()]), pitch)


def _posed(prims, angle, tx, ty):
    rot = _rot2(angle)

    def xy(x, y):
        p = rot @ np.array([x, y])
        return float(p[0] + tx), float(p[1] + ty)

    out = []
    for p in prims:
        if isinstance(p, Box):
            cx, cy = xy(p.cx, p.cy)
            out.append(Box(cx, cy, p.wx, p.wy, p.angle + angle, p.top))
        elif isinstance(p, Disc):
            cx, cy = xy(p.cx, p.cy)
            out.append(Disc(cx, cy, p.radius, p.top, p.dome))
        elif isinstance(p, Ring):
            cx, cy = xy(p.cx, p.cy)
            out.append(Ring(cx, cy, p.r_outer, p.r_inner, p.top))
        else:
            x1, y1 = xy(p.x1, p.y1)
            x2, y2 = xy(p.x2, p.y2)
            out.append(Capsule(x1, y1, x2, y2, p.radius, p.top))
    return out


def _catalog():
    # Fifteen quasi-planar household/tool silhouettes; j jitters a nominal
    # dimension by +-5%.
    def build(name, fn):
        return name, fn

    # Every object carries an off-center raised feature (boss, head, tab) so
    # the height distribution and in-plane scatter are asymmetric; uniform
    # slabs would leave the orientation-signature reference frame to a coin
    # flip that lands differently in the two modalities.
    return dict(
        [
            build(
                "cup_mat",
                lambda j: [
                    Disc(0, 0, j(0.048), j(0.004)),
                    Disc(j(0.024), 0, j(0.013), j(0.007)),
                ],
            ),
            build(
                "mat",
                lambda j: [
                    Box(0, 0, j(0.20), j(0.15), 0.0, j(0.004)),
                    Box(j(0.065), j(0.045), j(0.05), j(0.04), 0.0, j(0.007)),
                ],
            ),
            build(
                "tweezers",
                lambda j: [
                    Capsule(0, 0, j(0.11), j(0.020), j(0.005), j(0.006)),
                    Capsule(0, 0, j(0.11), -j(0.020), j(0.005), j(0.006)),
                    Disc(0, 0, j(0.009), j(0.010)),
                ],
            ),
            build(
                "spanner",
                lambda j: [
                    Capsule(-j(0.05), 0, j(0.055), 0, j(0.009), j(0.008)),
                    Disc(-j(0.066), 0, j(0.024), j(0.012)),
                ],
            ),
            build(
                "socket_wrench",
                lambda j: [
                    Capsule(-j(0.045), 0, j(0.045), 0, j(0.013), j(0.009)),
                    Capsule(0, -j(0.04), 0, j(0.04), j(0.013), j(0.009)),
                    Disc(j(0.045), 0, j(0.015), j(0.014)),
                ],
            ),
            build(
                "wrench",
                lambda j: [
                    Capsule(-j(0.05), 0, j(0.05), 0, j(0.008), j(0.008)),
                    Ring(j(0.064), 0, j(0.021), j(0.011), j(0.012)),
                    Ring(-j(0.064), 0, j(0.021), j(0.011), j(0.008)),
                ],
            ),
            build(
                "allen_key",
                lambda j: [
                    Capsule(0, 0, j(0.09), 0, j(0.0035), j(0.007)),
                    Capsule(0, 0, 0, j(0.035), j(0.0035), j(0.007)),
                    Disc(0, 0, j(0.006), j(0.011)),
                ],
            ),
            build(
                "ruler",
                lambda j: [
                    Box(0, 0, j(0.25), j(0.032), 0.0, j(0.003)),
                    Box(j(0.105), 0, j(0.03), j(0.032), 0.0, j(0.006)),
                ],
            ),
            build(
                "shaver",
                lambda j: [
                    Capsule(0, 0, j(0.085), 0, j(0.007), j(0.009)),
                    Box(j(0.105), 0, j(0.024), j(0.062), 0.0, j(0.013)),
                ],
            ),
            build(
                "hairpin",
                lambda j: [
                    Capsule(0, j(0.006), j(0.07), j(0.007), j(0.0025), j(0.005)),
                    Capsule(0, -j(0.006), j(0.07), -j(0.007), j(0.0025), j(0.005)),
                    Disc(0, 0, j(0.0085), j(0.008)),
                ],
            ),
            build(
                "pincers",
                lambda j: [
                    Capsule(-j(0.055), j(0.030), j(0.055), -j(0.030), j(0.007), j(0.010)),
                    Capsule(-j(0.055), -j(0.030), j(0.055), j(0.030), j(0.007), j(0.010)),
                    Disc(j(0.058), 0, j(0.012), j(0.014)),
                ],
            ),
            build(
                "holder",
                lambda j: [
                    Box(0, j(0.034), j(0.11), j(0.016), 0.0, j(0.011)),
                    Box(0, -j(0.034), j(0.11), j(0.016), 0.0, j(0.011)),
                    Box(-j(0.047), 0, j(0.016), j(0.085), 0.0, j(0.011)),
                    Box(j(0.047), 0, j(0.016), j(0.085), 0.0, j(0.015)),
                ],
            ),
            build(
                "small_tape",
                lambda j: [
                    Ring(0, 0, j(0.028), j(0.010), j(0.010)),
                    Disc(j(0.024), 0, j(0.007), j(0.013)),
                ],
            ),
            build(
                "tape",
                lambda j: [
                    Ring(0, 0, j(0.055), j(0.040), j(0.013)),
                    Disc(j(0.0475), 0, j(0.009), j(0.017)),
                ],
            ),
            build(
                "mouse",
                lambda j: [
                    Disc(0, 0, j(0.036), j(0.003)),
                    Disc(j(0.006), 0, j(0.028), j(0.022), dome=True),
                ],
            ),
        ]
    )


CATALOG = _catalog()
CLASS_IDS = list(CATALOG)


def make_object(class_id: str, variation_seed: int = 0) -> ObjectModel:
    """Deterministic object instance: +-5% dimension jitter, random planar pose."""
    if class_id not in CATALOG:
        raise UnknownClass(f"unknown class {class_id!r}")
    rng = np.random.default_rng([int(variation_seed), CLASS_IDS.index(class_id)])

    def jitter(v):
        return float(v) * float(rng.uniform(0.95, 1.05))

    prims = CATALOG[class_id](jitter)
    angle = float(rng.uniform(0.0, 2 * math.pi))
    tx, ty = rng.uniform(-0.02, 0.02, size=2)
    return ObjectModel(class_id, _posed(prims, angle, float(tx), float(ty)))


def _observation_pose(points: np.ndarray, pose) -> np.ndarray:
    if pose is None:
        return points
    angle, tx, ty = pose
    rot = _rot2(float(angle))
    xy = points[:, :2] @ rot.T + np.array([tx, ty])
    return np.column_stack([xy, points[:, 2]])


def sample_visual(
    obj: ObjectModel,
    pose=None,
    density: float = 80000.0,
    noise_sigma: float = 0.001,
    seed: int = 0,
) -> PointCloud:
    """Visual cloud: jittered-grid samples of the visible top and side surfaces.

    `pose` is an optional (angle, tx, ty) observation transform applied before
    the noise. Height-field objects have no overhangs, so every generated
    surface sample is visible from above; vertical walls are sampled over the
    exposed band z > h(just outside the silhouette).
    """
    if density <= 0:
        raise ValueError("density must be > 0")
    rng = np.random.default_rng(seed)
    step = 1.0 / math.sqrt(density)
    x0, y0, x1, y1 = obj.bounds()

    xs = np.arange(x0 - step, x1 + step, step)
    ys = np.arange(y0 - step, y1 + step, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gx = gx.ravel() + rng.uniform(-step / 2, step / 2, gx.size)
    gy = gy.ravel() + rng.uniform(-step / 2, step / 2, gy.size)
    h = obj.height(gx, gy)
    top_mask = h > 0
    top = np.column_stack([gx[top_mask], gy[top_mask], h[top_mask]])

    walls = []
    eps = 1e-6
    for prim in obj.primitives:
        perim = prim.perimeter()
        band = prim.top if not getattr(prim, "dome", False) else 0.0
        # Walls are foreshortened for a mostly-overhead camera.
        n_wall = int(round(perim * band * density * 0.5))
        if n_wall <= 0:
            continue
        s = rng.uniform(0.0, perim, n_wall)
        pts2, nrm2 = prim.boundary(s)
        inner = pts2 - eps * nrm2
        outer = pts2 + eps * nrm2
        h_in = obj.height(inner[:, 0], inner[:, 1])
        h_out = obj.height(outer[:, 0], outer[:, 1])
        z = rng.uniform(0.0, 1.0, n_wall) * h_in
        visible = (h_in > 0) & (z > h_out)
        walls.append(np.column_stack([pts2[visible, 0], pts2[visible, 1], z[visible]]))

    pts = np.vstack([top] + walls) if walls else top
    pts = _observation_pose(pts, pose)
    if noise_sigma > 0:
        pts = pts + rng.normal(0.0, noise_sigma, pts.shape)
    cx, cy = pts[:, 0].mean(), pts[:, 1].mean()
    return PointCloud(pts, VISUAL, obj.class_id, np.array([cx, cy, 0.6]))


def sample_tactile(
    obj: ObjectModel,
    sensor: SensorSpec,
    grid: ExplorationGrid,
    seed: int = 0,
) -> PointCloud:
    """Tactile cloud from pressing the module array on every grid vertex.

    The rigid array descends along -z until it meets the highest point under
    it, then presses by press_depth; module i feels
    F_i = stiffness * max(0, press_depth - (h_contact - h_i)) and contributes
    the contact point (x_i, y_i, h_i) when F_i clears the threshold. Table
    contacts (h = 0) are excluded; exact duplicate sites from overlapping
    presses are dropped before the Gaussian jitter is applied.
    """
    rng = np.random.default_rng(seed)
    m = sensor.modules_per_side
    pitch = sensor.module_pitch
    offsets = (np.arange(m) + 0.5) * pitch - sensor.array_edge / 2
    ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
    ox = ox.ravel()
    oy = oy.ravel()

    contacts = []
    for vx, vy in grid.vertices:
        # Module centers quantized to 1 nm so the same physical site reached
        # from overlapping presses compares as an exact duplicate.
        mx = np.round((vx + ox) * 1e9) / 1e9
        my = np.round((vy + oy) * 1e9) / 1e9
        h = obj.height(mx, my)
        h_contact = float(h.max())
        if h_contact <= 0:
            continue
        force = sensor.contact_stiffness * np.clip(sensor.press_depth - (h_contact - h), 0.0, None)
        keep = (force >= sensor.force_threshold) & (h > 0)
        if keep.any():
            contacts.append(np.column_stack([mx[keep], my[keep], h[keep]]))
    if not contacts:
        raise EmptyContact(f"grid never touched object {obj.class_id!r}")

    pts = np.vstack(contacts)
    _, first = np.unique(pts, axis=0, return_index=True)
    pts = pts[np.sort(first)]
    if sensor.noise_sigma > 0:
        pts = pts + rng.normal(0.0, sensor.noise_sigma, pts.shape)
    cx, cy = pts[:, 0].mean(), pts[:, 1].mean()
    return PointCloud(pts, TACTILE, obj.class_id, np.array([cx, cy, 0.5]))


def plane_removal(
    cloud: PointCloud, epsilon: float, seed: int = 0, iterations: int = 200
) -> PointCloud:
    """Drop points within epsilon of the dominant plane (seeded RANSAC)."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    pts = cloud.points
    if len(pts) < 3:
        return cloud.with_points(pts.copy())
    rng = np.random.default_rng(seed)
    best_mask = None
    best_count = -1
    for _ in range(iterations):
        ids = rng.choice(len(pts), size=3, replace=False)
        p0, p1, p2 = pts[ids]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        dist = np.abs((pts - p0) @ normal)
        mask = dist <= epsilon
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None:
        return cloud.with_points(pts.copy())
    return cloud.with_points(pts[~best_mask])
