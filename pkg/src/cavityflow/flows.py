"""Elementary flows: Kirchhoff basis, circulation basis, and vorticity stream.

The fluid velocity decomposes as u = u1 + u2 where u1 = sum_k q'_k grad phi_k
is driven by the body velocities and u2 = perp-grad of (psi_omega + psi . gamma)
carries the vorticity and the circulations around the bodies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError
from .geometry import DomainSnapshot, perp, rigid_data_columns
from .laplace import (
    _TWO_PI,
    BoundaryDiscretization,
    HarmonicSolution,
    _eval_raw,
    solve_dirichlet_multi,
    solve_neumann_multi,
)

BLOB_CORE_FACTOR = 0.05  # default core, as a fraction of the cavity scale
EXACT_BOUNDARY_CORES = 10.0  # use unregularized boundary data beyond this many cores


# ---------------------------------------------------------------------------
# regularized point-vortex fields
# ---------------------------------------------------------------------------


def blob_stream(positions, weights, core, pts, regularized=True):
    """Stream function of the particle set at pts; core=0 or regularized=False
    gives the exact logarithmic kernel."""
    pts = np.atleast_2d(pts)
    dx = pts[:, None, 0] - positions[None, :, 0]
    dy = pts[:, None, 1] - positions[None, :, 1]
    r2 = dx * dx + dy * dy
    if regularized:
        r2 = r2 + core * core
    return (np.log(r2) / (2.0 * _TWO_PI)) @ weights


def blob_velocity(positions, weights, core, pts, regularized=True):
    """Velocity (perp gradient of the stream) induced by the particle set."""
    pts = np.atleast_2d(pts)
    dx = pts[:, None, 0] - positions[None, :, 0]
    dy = pts[:, None, 1] - positions[None, :, 1]
    r2 = dx * dx + dy * dy
    if regularized:
        r2 = r2 + core * core
    else:
        r2 = np.where(r2 == 0.0, np.inf, r2)
    inv = 1.0 / (_TWO_PI * r2)
    ux = -(dy * inv) @ weights
    uy = (dx * inv) @ weights
    return np.stack([ux, uy], axis=-1)


def blob_gradient(positions, weights, core, pts, regularized=True):
    """Gradient of the particle stream function (perp of the velocity)."""
    u = blob_velocity(positions, weights, core, pts, regularized)
    return -perp(u)


# ---------------------------------------------------------------------------
# flow basis
# ---------------------------------------------------------------------------


@dataclass
class FlowBasis:
    """All elementary flows for one snapshot, plus fast nodewise trace arrays.

    Columns of the trace arrays follow the coordinate layout of q for the
    Kirchhoff fields and the body numbering for the circulation streams.
    Immutable once built.
    """

    disc: BoundaryDiscretization
    phi: list  # 3N Kirchhoff potentials
    kirchhoff_data: np.ndarray  # (n_total, 3N) normal traces (the rigid data)
    phi_trace: np.ndarray  # (n_total, 3N)
    phi_tangent: np.ndarray  # (n_total, 3N)
    psi: list = field(default_factory=list)  # N circulation streams
    C: np.ndarray | None = None  # (N, N) boundary constants
    psi_normal: np.ndarray | None = None  # (n_total, N)
    psi_omega: HarmonicSolution | None = None
    C_omega: np.ndarray | None = None  # (N,)
    psi_omega_normal: np.ndarray | None = None  # (n_total,)
    particles: object = None
    near_boundary_particles: list = field(default_factory=list)

    @property
    def snapshot(self) -> DomainSnapshot:
        return self.disc.snapshot

    @property
    def n_bodies(self) -> int:
        return self.disc.n_bodies

    def stream_normal_trace(self, gamma) -> np.ndarray:
        """Normal derivative of psi_omega + psi . gamma at every node."""
        out = np.zeros(self.disc.n_total)
        if self.psi_omega_normal is not None:
            out += self.psi_omega_normal
        gamma = np.zeros(self.n_bodies) if gamma is None else np.asarray(gamma, float)
        if self.psi_normal is not None and np.any(gamma):
            out += self.psi_normal @ gamma
        return out

    def velocity(self, pts, qp=None, gamma=None, exclude_particle=None, check=True):
        """Total fluid velocity at interior points (see total_velocity)."""
        return total_velocity(self, qp, gamma, pts, exclude_particle, check)

    def phi_gradients(self, pts, check=True) -> np.ndarray:
        """Gradients of all Kirchhoff potentials at pts: shape (len(pts), 3N, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if check:
            _guard(self.disc, pts)
        if not self.phi:
            return np.zeros((len(pts), 0, 2))
        sig = np.stack([s.density for s in self.phi], axis=1)
        _, grads = _eval_raw(self.disc, "single", sig, pts)
        return grads

    def stream_velocity(self, pts, gamma=None, exclude_particle=None, check=True):
        """u2 at pts: perp gradient of psi_omega + psi . gamma."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if check:
            _guard(self.disc, pts)
        grad = np.zeros_like(pts)
        gamma = np.zeros(self.n_bodies) if gamma is None else np.asarray(gamma, float)
        if np.any(gamma):
            mus = np.stack([s.density for s in self.psi], axis=1)
            _, g = _eval_raw(self.disc, "double", mus @ gamma, pts)
            grad += g
            for nu in range(self.n_bodies):
                a = float(gamma[nu])  # source strength of psi_nu on body nu is 1
                z = self.snapshot.body_curves[nu].center
                d = pts - z
                r2 = np.sum(d * d, axis=1)
                grad += a * d / (_TWO_PI * r2[:, None])
        if self.psi_omega is not None:
            _, g = _eval_raw(self.disc, "double", self.psi_omega.density, pts)
            grad += g
            p = self.particles
            if p is not None and len(p) > 0:
                keep = np.ones(len(p), dtype=bool)
                if exclude_particle is not None:
                    keep[exclude_particle] = False
                grad += blob_gradient(
                    p.positions[keep], p.weights[keep], p.core, pts
                )
        return perp(grad)


def _guard(disc: BoundaryDiscretization, pts: np.ndarray):
    inside, near = disc.classify_points(pts)
    if not np.all(inside):
        raise EvaluationError("velocity evaluation outside the fluid domain")
    if np.any(near):
        raise EvaluationError("velocity evaluation inside the near-boundary zone")


def kirchhoff_basis(disc: BoundaryDiscretization):
    """Solve the 3N Neumann problems driven by unit rigid body motions."""
    data = rigid_data_columns(disc.snapshot)
    if data.shape[1] == 0:
        return [], data
    sols = solve_neumann_multi(disc, data)
    return sols, data


def circulation_basis(disc: BoundaryDiscretization):
    """Solve the N circulation streams; returns (solutions, constants matrix).

    Stream kappa has flux -delta(kappa, nu) through body nu and unit
    circulation of its perp gradient around body kappa.
    """
    nb = disc.n_bodies
    if nb == 0:
        return [], np.zeros((0, 0))
    data = np.zeros((disc.n_total, nb))
    fluxes = -np.eye(nb)
    sols = solve_dirichlet_multi(disc, data, fluxes)
    C = np.stack([s.constants for s in sols], axis=0)
    return sols, C


def vorticity_stream(disc: BoundaryDiscretization, particles):
    """Stream function of the vortex particle set with zero wall value and
    zero net flux through every body.

    Returns (solution, constants, near_boundary_indices).  The particular blob
    field is corrected by a double-layer solve whose boundary data uses the
    exact kernel when every particle is far from the boundary (in units of the
    blob core), falling back to the regularized kernel with a warning.
    """
    nb = disc.n_bodies
    if particles is None or len(particles) == 0:
        return None, np.zeros(nb), []
    pos, w, core = particles.positions, particles.weights, particles.core
    d2 = (disc.points[:, None, 0] - pos[None, :, 0]) ** 2 + (
        disc.points[:, None, 1] - pos[None, :, 1]
    ) ** 2
    min_dist = np.sqrt(np.min(d2, axis=0))
    near = np.flatnonzero(min_dist < EXACT_BOUNDARY_CORES * core).tolist()
    regularized = bool(near)
    if regularized:
        warnings.warn(
            f"{len(near)} vortex particle(s) within {EXACT_BOUNDARY_CORES} cores of "
            "the boundary; using regularized boundary data",
            stacklevel=2,
        )
    bvals = blob_stream(pos, w, core, disc.points, regularized=regularized)
    data = -bvals[:, None]
    sols = solve_dirichlet_multi(disc, data, np.zeros((nb, 1)))
    corr = sols[0]

    def particular(pts):
        vals = blob_stream(pos, w, core, pts)
        grads = blob_gradient(pos, w, core, pts)
        return vals, grads

    # boundary traces of the full stream: correction trace plus blob values
    corr.trace = corr.trace + bvals
    dpart = np.sum(
        blob_gradient(pos, w, core, disc.points, regularized=regularized)
        * disc.normals,
        axis=1,
    )
    corr.normal_trace = corr.normal_trace + dpart
    corr.tangent_trace = disc.tangential_derivative_all(corr.trace)
    corr.extra_field = particular
    C_omega = corr.constants.copy() if nb else np.zeros(0)
    return corr, C_omega, near


def build_flow_basis(
    disc: BoundaryDiscretization,
    particles=None,
    include_circulation: bool = True,
) -> FlowBasis:
    """Assemble every elementary flow needed for the dynamics at this snapshot."""
    phi, data = kirchhoff_basis(disc)
    if phi:
        phi_trace = np.stack([s.trace for s in phi], axis=1)
        phi_tangent = np.stack([s.tangent_trace for s in phi], axis=1)
        kdata = np.stack([s.normal_trace for s in phi], axis=1)
    else:
        phi_trace = np.zeros((disc.n_total, 0))
        phi_tangent = np.zeros((disc.n_total, 0))
        kdata = data
    basis = FlowBasis(
        disc=disc,
        phi=phi,
        kirchhoff_data=kdata,
        phi_trace=phi_trace,
        phi_tangent=phi_tangent,
    )
    if include_circulation and disc.n_bodies:
        basis.psi, basis.C = circulation_basis(disc)
        basis.psi_normal = np.stack([s.normal_trace for s in basis.psi], axis=1)
    sol, C_omega, near = vorticity_stream(disc, particles)
    if sol is not None:
        basis.psi_omega = sol
        basis.C_omega = C_omega
        basis.psi_omega_normal = sol.normal_trace
        basis.particles = particles
        basis.near_boundary_particles = near
    return basis


def total_velocity(
    basis: FlowBasis,
    qp=None,
    gamma=None,
    x=None,
    exclude_particle=None,
    check=True,
) -> np.ndarray:
    """u(x) = sum_k q'_k grad phi_k(x) + perp-grad (psi_omega + psi . gamma)(x)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    u = np.zeros_like(pts)
    if qp is not None and np.any(np.asarray(qp)):
        grads = basis.phi_gradients(pts, check=check)
        u += np.einsum("k,pkd->pd", np.asarray(qp, dtype=float), grads)
        check = False  # guards already ran
    u += basis.stream_velocity(pts, gamma, exclude_particle, check=check)
    return u[0] if single else u
