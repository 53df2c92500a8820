"""Body and cavity shapes, configurations, and discretized fluid boundaries.

Every curve is an analytic closed curve sampled at n uniform parameter values
(counterclockwise parameterization).  The stored tangent follows the fluid
convention: counterclockwise on body boundaries, clockwise on the cavity, so
that the normal n = perp(tau) always points out of the fluid (into the bodies,
out of the cavity).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._spectral import param_grid
from .errors import GeometryError

_REF_CACHE: dict = {}


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate vectors by +90 degrees: (x, y) -> (-y, x). Works on (..., 2) arrays."""
    out = np.empty_like(np.asarray(v, dtype=float))
    out[..., 0] = -np.asarray(v)[..., 1]
    out[..., 1] = np.asarray(v)[..., 0]
    return out


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# shape descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    radius: float

    def profile(self, t):
        t = np.asarray(t, dtype=float)
        r = self.radius * np.ones_like(t)
        return r, np.zeros_like(t), np.zeros_like(t)

    @property
    def scale(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Ellipse:
    semi_x: float
    semi_y: float

    def profile(self, t):
        # radius of the ellipse as a graph over the polar angle t
        t = np.asarray(t, dtype=float)
        a, b = self.semi_x, self.semi_y
        den = np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)
        r = a * b / den
        # rho' and rho'' by direct differentiation of a*b*den**-1
        dden = ((a * a - b * b) * np.sin(t) * np.cos(t)) / den
        ddden = ((a * a - b * b) * np.cos(2 * t) - dden * dden) / den
        dr = -a * b * dden / den**2
        ddr = a * b * (2 * dden * dden / den**3 - ddden / den**2)
        return r, dr, ddr

    @property
    def scale(self) -> float:
        return max(self.semi_x, self.semi_y)


@dataclass(frozen=True)
class Star:
    """Radial graph r(t) = radius + sum_m cos_coeffs[m-1] cos(mt) + sin_coeffs[m-1] sin(mt)."""

    radius: float
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def profile(self, t):
        t = np.asarray(t, dtype=float)
        r = self.radius * np.ones_like(t)
        dr = np.zeros_like(t)
        ddr = np.zeros_like(t)
        for m, c in enumerate(self.cos_coeffs, start=1):
            r += c * np.cos(m * t)
            dr += -c * m * np.sin(m * t)
            ddr += -c * m * m * np.cos(m * t)
        for m, s in enumerate(self.sin_coeffs, start=1):
            r += s * np.sin(m * t)
            dr += s * m * np.cos(m * t)
            ddr += -s * m * m * np.sin(m * t)
        return r, dr, ddr

    @property
    def scale(self) -> float:
        return self.radius + sum(abs(c) for c in self.cos_coeffs) + sum(
            abs(s) for s in self.sin_coeffs
        )


Descriptor = Circle | Ellipse | Star


def _curve_arrays(desc: Descriptor, t: np.ndarray):
    """Points and first/second parameter derivatives of the descriptor curve."""
    r, dr, ddr = desc.profile(t)
    e = np.stack([np.cos(t), np.sin(t)], axis=-1)
    de = np.stack([-np.sin(t), np.cos(t)], axis=-1)
    pts = r[:, None] * e
    dp = dr[:, None] * e + r[:, None] * de
    ddp = (ddr - r)[:, None] * e + 2.0 * dr[:, None] * de
    return pts, dp, ddp


def _validate_descriptor(desc: Descriptor) -> None:
    if isinstance(desc, Circle):
        if desc.radius <= 0:
            raise GeometryError("circle radius must be positive")
    elif isinstance(desc, Ellipse):
        if desc.semi_x <= 0 or desc.semi_y <= 0:
            raise GeometryError("ellipse semi-axes must be positive")
    elif isinstance(desc, Star):
        if desc.radius <= 0:
            raise GeometryError("star base radius must be positive")
        r, _, _ = desc.profile(param_grid(4096))
        if np.min(r) <= 1e-9 * desc.radius:
            raise GeometryError(
                "star profile is non-positive somewhere: curve would self-intersect"
            )
    else:
        raise GeometryError(f"unknown shape descriptor {type(desc).__name__}")


def _region_centroid(desc: Descriptor, n: int = 2048):
    """Area and centroid of the region enclosed by the descriptor curve."""
    t = param_grid(n)
    pts, dp, _ = _curve_arrays(desc, t)
    x, y = pts[:, 0], pts[:, 1]
    dx, dy = dp[:, 0], dp[:, 1]
    h = 2.0 * np.pi / n
    area = 0.5 * np.sum(x * dy - y * dx) * h
    cx = 0.5 * np.sum(x * x * dy) * h / area
    cy = -0.5 * np.sum(y * y * dx) * h / area
    return area, np.array([cx, cy])


class _RefCurve:
    """Reference-frame discretization of one descriptor (centered, unrotated)."""

    def __init__(self, desc: Descriptor, n: int, offset: np.ndarray):
        t = param_grid(n)
        pts, dp, ddp = _curve_arrays(desc, t)
        pts = pts - offset
        self.t = t
        self.points = pts
        self.dp = dp
        self.speed = np.hypot(dp[:, 0], dp[:, 1])
        cross = dp[:, 0] * ddp[:, 1] - dp[:, 1] * ddp[:, 0]
        self.curvature = cross / self.speed**3
        self.weights = self.speed * (2.0 * np.pi / n)
        self.unit_dp = dp / self.speed[:, None]


def _reference(desc: Descriptor, n: int, offset) -> _RefCurve:
    key = (desc, n, tuple(np.round(offset, 15)))
    ref = _REF_CACHE.get(key)
    if ref is None:
        ref = _RefCurve(desc, n, np.asarray(offset, dtype=float))
        _REF_CACHE[key] = ref
    return ref


# ---------------------------------------------------------------------------
# bodies, cavity, configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BodyShape:
    """A rigid body: reference curve (centroid at the origin), mass, and inertia."""

    shape: Descriptor
    mass: float
    inertia: float

    def __post_init__(self):
        _validate_descriptor(self.shape)
        if self.mass <= 0:
            raise GeometryError("body mass m must be positive")
        if self.inertia <= 0:
            raise GeometryError("body inertia J must be positive")

    @cached_property
    def centroid_offset(self) -> np.ndarray:
        """Offset subtracted from the descriptor curve so the centroid sits at 0."""
        if isinstance(self.shape, (Circle, Ellipse)):
            return np.zeros(2)
        _, c = _region_centroid(self.shape)
        if np.hypot(*c) > 1e-12 * self.shape.scale:
            warnings.warn(
                "body reference curve recentered: centroid was off-origin by "
                f"{np.hypot(*c):.3e}",
                stacklevel=2,
            )
        return c

    def reference(self, n: int) -> _RefCurve:
        return _reference(self.shape, n, self.centroid_offset)

    def contains(self, pts_body_frame: np.ndarray) -> np.ndarray:
        """Exact containment test for points given in the body frame."""
        return _radial_contains(self.shape, pts_body_frame + self.centroid_offset)

    def radial_gap(self, pts_body_frame: np.ndarray) -> np.ndarray:
        """Signed radial distance to the curve (positive outside the body)."""
        return _radial_gap(self.shape, pts_body_frame + self.centroid_offset)


@dataclass(frozen=True)
class CavityShape:
    """The fixed outer wall; the fluid fills its interior."""

    shape: Descriptor

    def __post_init__(self):
        _validate_descriptor(self.shape)

    def reference(self, n: int) -> _RefCurve:
        return _reference(self.shape, n, np.zeros(2))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return _radial_contains(self.shape, pts)

    def radial_gap(self, pts: np.ndarray) -> np.ndarray:
        """Signed radial distance to the wall (positive inside the cavity)."""
        return -_radial_gap(self.shape, pts)

    @property
    def scale(self) -> float:
        return self.shape.scale


def _radial_contains(desc: Descriptor, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(desc, Ellipse):
        return (pts[:, 0] / desc.semi_x) ** 2 + (pts[:, 1] / desc.semi_y) ** 2 < 1.0
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    r, _, _ = desc.profile(theta)
    return np.hypot(pts[:, 0], pts[:, 1]) < r


def _radial_gap(desc: Descriptor, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    r, _, _ = desc.profile(theta)
    return np.hypot(pts[:, 0], pts[:, 1]) - r


@dataclass
class Configuration:
    """Flat body coordinates q = (h1x, h1y, theta1, ..., hNx, hNy, thetaN)."""

    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).ravel()
        if self.q.size % 3 != 0:
            raise GeometryError("configuration vector length must be a multiple of 3")

    @classmethod
    def pack(cls, positions, angles) -> "Configuration":
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        q = np.empty(3 * len(angles))
        q[0::3] = positions[:, 0]
        q[1::3] = positions[:, 1]
        q[2::3] = angles
        return cls(q)

    @property
    def n_bodies(self) -> int:
        return self.q.size // 3

    def h(self, body: int) -> np.ndarray:
        return self.q[3 * body : 3 * body + 2]

    def theta(self, body: int) -> float:
        return self.q[3 * body + 2]


def body_of(k: int) -> int:
    """Body number owning coordinate k (0-based)."""
    return k // 3


def coord_of(k: int) -> int:
    """Coordinate within the body: 0, 1 translation, 2 rotation."""
    return k % 3


# ---------------------------------------------------------------------------
# discretized snapshot
# ---------------------------------------------------------------------------


@dataclass
class Curve:
    """One discretized boundary curve placed in the lab frame."""

    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    weights: np.ndarray
    curvature: np.ndarray
    orientation: int  # +1 body (ccw tangent), -1 cavity (cw tangent)
    body_index: int | None
    center: np.ndarray | None
    theta: float = 0.0
    source: BodyShape | CavityShape = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass
class DomainSnapshot:
    """The fluid domain for one configuration: cavity curve plus placed bodies.

    Immutable after assembly; curve 0 is the cavity, curve 1+i is body i.
    """

    cavity: CavityShape
    bodies: list
    config: Configuration
    curves: list
    _min_sep: float | None = field(default=None, repr=False)

    @property
    def body_curves(self) -> list:
        return self.curves[1:]

    @property
    def n_bodies(self) -> int:
        return len(self.bodies)

    @property
    def centers(self) -> np.ndarray:
        return np.array([self.config.h(i) for i in range(self.n_bodies)])

    def min_separation(self) -> float:
        if self._min_sep is None:
            self._min_sep = _min_separation_curves(self.cavity, self.bodies, self.curves)
        return self._min_sep


def _place_body(body: BodyShape, h: np.ndarray, theta: float, n: int) -> Curve:
    ref = body.reference(n)
    R = rotation(theta)
    pts = ref.points @ R.T + h
    unit_dp = ref.unit_dp @ R.T
    tangents = unit_dp  # ccw on bodies
    normals = perp(tangents)
    return Curve(
        points=pts,
        normals=normals,
        tangents=tangents,
        speed=ref.speed,
        weights=ref.weights,
        curvature=ref.curvature,
        orientation=+1,
        body_index=None,
        center=np.asarray(h, dtype=float).copy(),
        theta=float(theta),
        source=body,
    )


def _place_cavity(cavity: CavityShape, n: int) -> Curve:
    ref = cavity.reference(n)
    tangents = -ref.unit_dp  # clockwise on the cavity
    normals = perp(tangents)
    return Curve(
        points=ref.points.copy(),
        normals=normals,
        tangents=tangents,
        speed=ref.speed,
        weights=ref.weights,
        curvature=ref.curvature,
        orientation=-1,
        body_index=None,
        center=None,
        source=cavity,
    )


def assemble_domain(
    bodies: list,
    cavity: CavityShape,
    q: Configuration | np.ndarray,
    nodes_per_curve: int,
) -> DomainSnapshot:
    """Discretize the fluid boundary for configuration q.

    Raises GeometryError for inadmissible placements (separation <= 0) and for
    node counts below 32 or odd (the tangential spectral differentiation needs
    an even grid).
    """
    if nodes_per_curve < 32 or nodes_per_curve % 2 != 0:
        raise GeometryError("nodes_per_curve must be even and at least 32")
    if not isinstance(q, Configuration):
        q = Configuration(q)
    if q.n_bodies != len(bodies):
        raise GeometryError(
            f"configuration has {q.n_bodies} bodies but {len(bodies)} shapes given"
        )
    curves = [_place_cavity(cavity, nodes_per_curve)]
    for i, body in enumerate(bodies):
        c = _place_body(body, q.h(i), q.theta(i), nodes_per_curve)
        c.body_index = i
        curves.append(c)
    snap = DomainSnapshot(cavity=cavity, bodies=list(bodies), config=q, curves=curves)
    if bodies and snap.min_separation() <= 0.0:
        raise GeometryError("inadmissible configuration: bodies overlap or touch the wall")
    return snap


def _min_separation_curves(cavity: CavityShape, bodies: list, curves: list) -> float:
    cav, body_curves = curves[0], curves[1:]
    if not body_curves:
        return float("inf")
    best = np.inf
    worst_pen = 0.0
    for i, ci in enumerate(body_curves):
        d = np.min(
            np.hypot(
                ci.points[:, None, 0] - cav.points[None, :, 0],
                ci.points[:, None, 1] - cav.points[None, :, 1],
            )
        )
        best = min(best, d)
        gap = cavity.radial_gap(ci.points)
        if np.any(gap < 0):
            worst_pen = max(worst_pen, -np.min(gap))
        for j in range(i + 1, len(body_curves)):
            cj = body_curves[j]
            d = np.min(
                np.hypot(
                    ci.points[:, None, 0] - cj.points[None, :, 0],
                    ci.points[:, None, 1] - cj.points[None, :, 1],
                )
            )
            best = min(best, d)
            worst_pen = max(worst_pen, _pair_penetration(bodies, curves, i, j))
            worst_pen = max(worst_pen, _pair_penetration(bodies, curves, j, i))
    if worst_pen > 0.0:
        return -worst_pen
    return float(best)


def _pair_penetration(bodies: list, curves: list, i: int, j: int) -> float:
    """Depth by which nodes of body i intrude into body j (0 if disjoint)."""
    ci = curves[1 + i]
    cj = curves[1 + j]
    local = (ci.points - cj.center) @ rotation(-cj.theta).T
    gap = bodies[j].radial_gap(local)
    if np.any(gap < 0):
        return float(-np.min(gap))
    return 0.0


def min_separation(
    bodies: list, cavity: CavityShape, q: Configuration | np.ndarray, nodes: int = 256
) -> float:
    """Distance between discretized curves; <= 0 flags overlap/contact."""
    if not isinstance(q, Configuration):
        q = Configuration(q)
    curves = [_place_cavity(cavity, nodes)]
    for i, body in enumerate(bodies):
        curves.append(_place_body(body, q.h(i), q.theta(i), nodes))
    return _min_separation_curves(cavity, bodies, curves)


def rigid_field(
    q: Configuration | np.ndarray, k: int, x: np.ndarray, on: int | None
) -> np.ndarray:
    """Rigid velocity field of coordinate k evaluated at boundary points x.

    ``on`` identifies the boundary the points lie on (body index, or None for
    the cavity).  The field is the unit translation or the perpendicular lever
    arm on body k's own boundary and zero on every other boundary.
    """
    if not isinstance(q, Configuration):
        q = Configuration(q)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not 0 <= k < 3 * q.n_bodies:
        raise IndexError(f"coordinate index {k} out of range")
    out = np.zeros_like(x)
    if on is None or on != body_of(k):
        return out if x.shape[0] > 1 else out[0]
    c = coord_of(k)
    if c < 2:
        out[:, c] = 1.0
    else:
        out[:] = perp(x - q.h(body_of(k)))
    return out if x.shape[0] > 1 else out[0]


def rigid_data_columns(snapshot: DomainSnapshot) -> np.ndarray:
    """Normal traces of all 3N rigid fields at every boundary node, as columns."""
    nb = snapshot.n_bodies
    n_total = sum(c.n for c in snapshot.curves)
    cols = np.zeros((n_total, 3 * nb))
    offset = snapshot.curves[0].n
    for i, curve in enumerate(snapshot.body_curves):
        sl = slice(offset, offset + curve.n)
        cols[sl, 3 * i] = curve.normals[:, 0]
        cols[sl, 3 * i + 1] = curve.normals[:, 1]
        lever = perp(curve.points - curve.center)
        cols[sl, 3 * i + 2] = np.sum(lever * curve.normals, axis=1)
        offset += curve.n
    return cols
