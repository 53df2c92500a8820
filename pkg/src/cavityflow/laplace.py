"""Interior Laplace solvers on the multiply-connected fluid domain.

Two problem classes on a Nystrom discretization of analytic curves:

* Neumann problems (prescribed normal derivative, zero total flux), solved with
  a single-layer density.  The one-dimensional null space (constant potentials)
  is removed by a bordered system whose extra row pins the cavity charge and
  whose extra column spans the cokernel (total-flux functional).

* Dirichlet problems whose trace on each body is an unknown constant plus a
  given inhomogeneity, closed by prescribed fluxes through each body.  These
  use a double-layer density plus one point source per body placed at the body
  center; the source strengths are fixed a priori by the flux prescription and
  the density is normalized to zero mean on each body curve.

On-curve values of the single layer use the spectral quadrature for the
periodic log kernel; normal derivatives of double-layer fields use the
tangential-derivative identity d/ds S[d mu/ds], which avoids hypersingular
kernels entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from ._spectral import fourier_diff, log_kernel_circulant
from .errors import EvaluationError, SolverError
from .geometry import DomainSnapshot, rotation

_TWO_PI = 2.0 * np.pi
_SELF_BLOCK_CACHE: dict = {}

COMPATIBILITY_TOL = 1e-10
NEAR_BOUNDARY_SPACINGS = 5.0


# ---------------------------------------------------------------------------
# kernel blocks
# ---------------------------------------------------------------------------


def _self_blocks(source, n: int):
    """Rigid-motion-invariant self-interaction blocks for one reference curve.

    Built with the counterclockwise outward normal of the enclosed region;
    callers flip the sign to match the stored out-of-fluid normal.  Entries
    include the quadrature weights so that ``block @ density`` approximates
    the boundary integral.
    """
    offset = tuple(getattr(source, "centroid_offset", np.zeros(2)))
    key = (source.shape, offset, n)
    cached = _SELF_BLOCK_CACHE.get(key)
    if cached is not None:
        return cached
    ref = source.reference(n)
    pts, w, speed = ref.points, ref.weights, ref.speed
    kappa = ref.curvature
    tang = ref.unit_dp
    dx = pts[:, None, 0] - pts[None, :, 0]
    dy = pts[:, None, 1] - pts[None, :, 1]
    r2 = dx * dx + dy * dy
    np.fill_diagonal(r2, 1.0)
    inv = 1.0 / (_TWO_PI * r2)
    # ccw outward normal of the enclosed region
    nr = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    kp = (nr[:, 0, None] * dx + nr[:, 1, None] * dy) * inv * w[None, :]
    kd = -(nr[None, :, 0] * dx + nr[None, :, 1] * dy) * inv * w[None, :]
    diag = kappa / (4.0 * np.pi) * w  # curvature limit of both kernels, times weight
    np.fill_diagonal(kp, diag)
    np.fill_diagonal(kd, diag)
    # single layer with the periodic log-kernel splitting
    t = ref.t
    sin2 = 4.0 * np.sin(0.5 * (t[:, None] - t[None, :])) ** 2
    np.fill_diagonal(sin2, 1.0)
    smooth = r2 / sin2
    np.fill_diagonal(smooth, speed**2)
    L = log_kernel_circulant(n)
    h = _TWO_PI / n
    s_mat = (0.5 * L + 0.5 * h * np.log(smooth)) * speed[None, :] / _TWO_PI
    cached = (kp, kd, s_mat)
    _SELF_BLOCK_CACHE[key] = cached
    return cached


def _cross_kernels(xi, ni, yj, nj, wj):
    """Smooth source->target blocks between distinct curves (weights included)."""
    dx = xi[:, None, 0] - yj[None, :, 0]
    dy = xi[:, None, 1] - yj[None, :, 1]
    r2 = dx * dx + dy * dy
    inv = wj[None, :] / (_TWO_PI * r2)
    kp = (ni[:, 0, None] * dx + ni[:, 1, None] * dy) * inv
    kd = -(nj[None, :, 0] * dx + nj[None, :, 1] * dy) * inv
    s = 0.5 * np.log(r2) * wj[None, :] / _TWO_PI
    return kp, kd, s


# ---------------------------------------------------------------------------
# discretization container
# ---------------------------------------------------------------------------


class BoundaryDiscretization:
    """Kernel matrices and factorizations for one domain snapshot.

    Immutable once built; factorizations are created lazily per problem class
    and reused for every right-hand side against the same snapshot.
    """

    def __init__(self, snapshot: DomainSnapshot):
        self.snapshot = snapshot
        curves = snapshot.curves
        self.n_curves = len(curves)
        self.n_bodies = snapshot.n_bodies
        counts = [c.n for c in curves]
        offs = np.concatenate([[0], np.cumsum(counts)])
        self.slices = [slice(offs[i], offs[i + 1]) for i in range(len(curves))]
        self.n_total = offs[-1]
        self.points = np.vstack([c.points for c in curves])
        self.normals = np.vstack([c.normals for c in curves])
        self.tangents = np.vstack([c.tangents for c in curves])
        self.weights = np.concatenate([c.weights for c in curves])
        self.speed = np.concatenate([c.speed for c in curves])
        self.orientations = np.array([c.orientation for c in curves])
        self.curvature = np.concatenate([c.curvature for c in curves])
        self._uniform_n = len({c.n for c in curves}) == 1
        if self._uniform_n:
            scale = np.stack([c.orientation / c.speed for c in curves])
            self._dt_scale = scale[:, :, None]
        self._cache: dict = {}
        self._factors: dict = {}

    # -- assembled kernel matrices -----------------------------------------

    def _matrices(self):
        got = self._cache.get("kernels")
        if got is not None:
            return got
        n = self.n_total
        KP = np.empty((n, n))
        KD = np.empty((n, n))
        S = np.empty((n, n))
        curves = self.snapshot.curves
        for i, ci in enumerate(curves):
            si = self.slices[i]
            kp, kd, s_mat = _self_blocks(ci.source, ci.n)
            # reference blocks are built with the ccw outward normal; flip to
            # the stored out-of-fluid normal (both kernels are linear in it)
            sign = -ci.orientation  # body: stored n = -ccw outward; cavity: equal
            KP[si, si] = sign * kp
            KD[si, si] = sign * kd
            S[si, si] = s_mat
            for j, cj in enumerate(curves):
                if i == j:
                    continue
                sj = self.slices[j]
                kp, kd, s = _cross_kernels(
                    ci.points, ci.normals, cj.points, cj.normals, cj.weights
                )
                KP[si, sj] = kp
                KD[si, sj] = kd
                S[si, sj] = s
        got = (KP, KD, S)
        self._cache["kernels"] = got
        return got

    @property
    def single_layer_matrix(self) -> np.ndarray:
        return self._matrices()[2]

    def source_columns(self):
        """Point-source potentials at the body centers: values and normal derivatives."""
        got = self._cache.get("sources")
        if got is not None:
            return got
        nb = self.n_bodies
        G = np.zeros((self.n_total, nb))
        dG = np.zeros((self.n_total, nb))
        for nu in range(nb):
            z = self.snapshot.body_curves[nu].center
            d = self.points - z
            r2 = np.sum(d * d, axis=1)
            G[:, nu] = np.log(r2) / (2.0 * _TWO_PI)
            dG[:, nu] = np.sum(self.normals * d, axis=1) / (_TWO_PI * r2)
        got = (G, dG)
        self._cache["sources"] = got
        return got

    # -- factorizations ------------------------------------------------------

    def neumann_factor(self):
        """LU of the bordered single-layer Neumann system."""
        fac = self._factors.get("neumann")
        if fac is None:
            KP = self._matrices()[0]
            n = self.n_total
            A = np.zeros((n + 1, n + 1))
            A[:n, :n] = KP
            idx = np.arange(n)
            A[idx, idx] -= 0.5
            cav = self.slices[0]
            A[cav, n] = 1.0
            A[n, cav] = self.weights[cav]
            fac = _factor(A, "neumann")
            self._factors["neumann"] = fac
        return fac

    def dirichlet_factor(self):
        """LU of the double-layer system augmented with body constants."""
        fac = self._factors.get("dirichlet")
        if fac is None:
            KD = self._matrices()[1]
            n, nb = self.n_total, self.n_bodies
            A = np.zeros((n + nb, n + nb))
            A[:n, :n] = KD
            idx = np.arange(n)
            A[idx, idx] += 0.5
            for nu in range(nb):
                s = self.slices[1 + nu]
                A[s, n + nu] = -1.0
                A[n + nu, s] = self.weights[s]
            fac = _factor(A, "dirichlet")
            self._factors["dirichlet"] = fac
        return fac

    # -- per-curve helpers ----------------------------------------------------

    def curve_values(self, values: np.ndarray, i: int) -> np.ndarray:
        return values[self.slices[i]]

    def tangential_derivative_all(self, values: np.ndarray) -> np.ndarray:
        """d/ds along the stored tangent of nodewise boundary values (any columns)."""
        if self._uniform_n:
            flat = values.ndim == 1
            cols = values.reshape(self.n_curves, -1, 1 if flat else values.shape[1])
            d = fourier_diff(cols, axis=1) * self._dt_scale
            return d.reshape(values.shape)
        out = np.empty_like(values)
        for i, c in enumerate(self.snapshot.curves):
            s = self.slices[i]
            d = fourier_diff(values[s], axis=0)
            sp = c.speed if values.ndim == 1 else c.speed[:, None]
            out[s] = c.orientation * d / sp
        return out

    def mean_spacing(self, i: int) -> float:
        return float(np.mean(self.snapshot.curves[i].weights))

    def classify_points(self, pts: np.ndarray):
        """(inside_fluid, near_boundary) masks for evaluation guards."""
        pts = np.atleast_2d(pts)
        snap = self.snapshot
        inside = snap.cavity.contains(pts)
        for i, body in enumerate(snap.bodies):
            c = snap.body_curves[i]
            local = (pts - c.center) @ rotation(-c.theta).T
            inside &= ~body.contains(local)
        near = np.zeros(len(pts), dtype=bool)
        for i, c in enumerate(self.snapshot.curves):
            d2 = (pts[:, None, 0] - c.points[None, :, 0]) ** 2 + (
                pts[:, None, 1] - c.points[None, :, 1]
            ) ** 2
            thr = NEAR_BOUNDARY_SPACINGS * c.weights[None, :]
            near |= np.any(d2 < thr * thr, axis=1)
        return inside, near


def _factor(A: np.ndarray, label: str):
    try:
        fac = lu_factor(A, check_finite=False)
    except LinAlgError as exc:  # pragma: no cover - defensive
        raise SolverError(f"{label} system is singular") from exc
    growth = np.max(np.abs(fac[0])) / max(np.max(np.abs(A)), 1e-300)
    if not np.isfinite(growth) or growth > 1e12:
        raise SolverError(
            f"{label} system is numerically singular (pivot growth {growth:.2e})"
        )
    return fac


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass
class HarmonicSolution:
    """A solved interior Laplace field, evaluable in the fluid and on boundaries."""

    disc: BoundaryDiscretization
    kind: str  # "single" or "double"
    density: np.ndarray
    trace: np.ndarray
    normal_trace: np.ndarray
    tangent_trace: np.ndarray
    constants: np.ndarray | None = None
    source_strengths: np.ndarray | None = None
    offset: float = 0.0
    extra_field: object = field(default=None, repr=False)

    def boundary_values(self, curve: int) -> np.ndarray:
        return self.disc.curve_values(self.trace, curve)

    def normal_derivative(self, curve: int) -> np.ndarray:
        return self.disc.curve_values(self.normal_trace, curve)

    def flux(self, curve: int) -> float:
        s = self.disc.slices[curve]
        return float(np.sum(self.disc.weights[s] * self.normal_trace[s]))

    def evaluate(self, pts: np.ndarray, check: bool = True):
        """Values and gradients at strictly interior points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if check:
            inside, near = self.disc.classify_points(pts)
            if not np.all(inside):
                raise EvaluationError("evaluation point outside the fluid domain")
            if np.any(near):
                raise EvaluationError(
                    "evaluation point inside the near-boundary exclusion zone"
                )
        vals, grads = _eval_raw(self.disc, self.kind, self.density, pts)
        if self.kind == "single":
            vals += self.offset
        if self.source_strengths is not None and np.any(self.source_strengths):
            for nu, a in enumerate(self.source_strengths):
                if a == 0.0:
                    continue
                z = self.disc.snapshot.body_curves[nu].center
                d = pts - z
                r2 = np.sum(d * d, axis=1)
                vals += a * np.log(r2) / (2.0 * _TWO_PI)
                grads += a * d / (_TWO_PI * r2[:, None])
        if self.extra_field is not None:
            ev, eg = self.extra_field(pts)
            vals = vals + ev
            grads = grads + eg
        return vals, grads


def _eval_raw(disc: BoundaryDiscretization, kind: str, density, pts):
    """Plain-quadrature layer-potential evaluation away from the boundary."""
    dx = pts[:, None, 0] - disc.points[None, :, 0]
    dy = pts[:, None, 1] - disc.points[None, :, 1]
    r2 = dx * dx + dy * dy
    if density.ndim == 2:
        dw = disc.weights[:, None] * density
    else:
        dw = disc.weights * density
    if kind == "single":
        vals = (0.5 * np.log(r2) / _TWO_PI) @ dw
        gx = (dx / (_TWO_PI * r2)) @ dw
        gy = (dy / (_TWO_PI * r2)) @ dw
    else:
        ny = disc.normals
        num = ny[None, :, 0] * dx + ny[None, :, 1] * dy  # n_y . (x - y)
        vals = (-num / (_TWO_PI * r2)) @ dw
        r4 = r2 * r2
        gx = ((2.0 * num * dx - ny[None, :, 0] * r2) / (_TWO_PI * r4)) @ dw
        gy = ((2.0 * num * dy - ny[None, :, 1] * r2) / (_TWO_PI * r4)) @ dw
    return vals, np.stack([gx, gy], axis=-1)


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------


def solve_neumann(disc: BoundaryDiscretization, flux: np.ndarray) -> HarmonicSolution:
    """Solve the interior Neumann problem with nodewise normal-derivative data."""
    sols = solve_neumann_multi(disc, np.asarray(flux, dtype=float).reshape(-1, 1))
    return sols[0]


def solve_neumann_multi(disc: BoundaryDiscretization, flux_cols: np.ndarray):
    """Neumann solves sharing one factorization; flux_cols is (n_total, m)."""
    g = np.array(flux_cols, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    w = disc.weights
    total = w @ g
    scale = np.maximum(np.abs(w) @ np.abs(g), 1.0)
    bad = np.abs(total) > COMPATIBILITY_TOL * scale
    if np.any(bad):
        raise SolverError(
            f"incompatible Neumann data: total flux {total[bad][0]:.3e} exceeds tolerance"
        )
    g = g - total[None, :] / np.sum(w)
    rhs = np.zeros((disc.n_total + 1, g.shape[1]))
    rhs[: disc.n_total] = g
    sol = lu_solve(disc.neumann_factor(), rhs, check_finite=False)
    sigmas = sol[: disc.n_total]
    traces = disc.single_layer_matrix @ sigmas
    means = (w @ traces) / np.sum(w)
    traces = traces - means[None, :]
    dtau = disc.tangential_derivative_all(traces)
    out = []
    for m in range(g.shape[1]):
        out.append(
            HarmonicSolution(
                disc=disc,
                kind="single",
                density=sigmas[:, m],
                trace=traces[:, m],
                normal_trace=g[:, m],
                tangent_trace=dtau[:, m],
                offset=-float(means[m]),
            )
        )
    return out


def solve_dirichlet_with_constants(
    disc: BoundaryDiscretization,
    cavity_values: np.ndarray | float = 0.0,
    fluxes: np.ndarray | None = None,
    body_values: np.ndarray | float = 0.0,
) -> HarmonicSolution:
    """Dirichlet problem with unknown per-body constants and prescribed fluxes.

    The trace equals ``cavity_values`` on the wall and ``C_nu + body_values`` on
    body nu, with the constants returned on the solution object.  ``fluxes``
    prescribes the integral of the normal derivative over each body curve.
    """
    nb = disc.n_bodies
    fluxes = np.zeros(nb) if fluxes is None else np.asarray(fluxes, dtype=float)
    data = np.zeros(disc.n_total)
    data[disc.slices[0]] = cavity_values
    if np.ndim(body_values) == 0:
        for nu in range(nb):
            data[disc.slices[1 + nu]] = body_values
    else:
        for nu in range(nb):
            data[disc.slices[1 + nu]] = body_values[nu]
    sols = solve_dirichlet_multi(disc, data[:, None], fluxes.reshape(nb, 1))
    return sols[0]


def solve_dirichlet_multi(
    disc: BoundaryDiscretization, data_cols: np.ndarray, flux_cols: np.ndarray
):
    """Dirichlet-with-constants solves sharing one factorization.

    data_cols is (n_total, m) nodewise trace data (body columns hold only the
    inhomogeneous part); flux_cols is (n_bodies, m).
    """
    n, nb = disc.n_total, disc.n_bodies
    data = np.asarray(data_cols, dtype=float)
    m = data.shape[1]
    if nb:
        fl = np.asarray(flux_cols, dtype=float).reshape(nb, m)
    else:
        fl = np.zeros((0, m))
    strengths = -fl  # a point source of strength a has flux -a through its own curve
    rhs = np.zeros((n + nb, m))
    rhs[:n] = data
    if nb:
        G, dG = disc.source_columns()
        rhs[:n] -= G @ strengths
    sol = lu_solve(disc.dirichlet_factor(), rhs, check_finite=False)
    mus = sol[:n]
    consts = sol[n:]
    # traces: exact data on the wall, constants plus inhomogeneity on bodies
    traces = data.copy()
    for nu in range(nb):
        traces[disc.slices[1 + nu]] += consts[nu][None, :]
    dtau = disc.tangential_derivative_all(traces)
    # normal derivative via the tangential-derivative identity
    dmu_ds = disc.tangential_derivative_all(mus)
    svals = disc.single_layer_matrix @ dmu_ds
    normal = disc.tangential_derivative_all(svals)
    if nb:
        normal += dG @ strengths
    out = []
    for j in range(m):
        out.append(
            HarmonicSolution(
                disc=disc,
                kind="double",
                density=mus[:, j],
                trace=traces[:, j],
                normal_trace=normal[:, j],
                tangent_trace=dtau[:, j],
                constants=consts[:, j].copy(),
                source_strengths=strengths[:, j].copy(),
            )
        )
    return out


def eval_field(sol: HarmonicSolution, x: np.ndarray):
    """Value and gradient of a solved field at one interior point."""
    vals, grads = sol.evaluate(np.atleast_2d(x))
    return float(vals[0]), grads[0]


def tangential_derivative(sol: HarmonicSolution, curve: int) -> np.ndarray:
    """d/ds of the boundary trace along the stored tangent of one curve."""
    return sol.disc.curve_values(sol.tangent_trace, curve)
