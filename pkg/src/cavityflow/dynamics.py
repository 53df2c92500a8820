"""Inertia assembly, Christoffel tensor, forces, and body accelerations.

The bodies obey  M(q) q'' + <Gamma(q), q', q'> = E + A q' + D  where M is the
genuine-plus-added inertia metric, Gamma its first-kind Christoffel tensor,
E the circulation/vorticity pressure force, A the skew gyroscopic (lift)
matrix, and D the direct vorticity force.  Everything here reduces to weighted
sums of boundary traces produced by the flows module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import AccuracyError, GeometryError
from .flows import FlowBasis
from .geometry import body_of, coord_of, perp

ASYMMETRY_TOL = 1e-6


@dataclass
class InertiaModel:
    genuine: np.ndarray  # (3N, 3N) block diagonal
    added: np.ndarray  # (3N, 3N) symmetric PSD
    asymmetry: float  # relative asymmetry of the raw added-inertia assembly

    @property
    def total(self) -> np.ndarray:
        return self.genuine + self.added


@dataclass
class ChristoffelTensor:
    """First-kind Christoffel symbols of the inertia metric, gamma[k, i, j]."""

    gamma: np.ndarray  # (3N, 3N, 3N), symmetric in the last two indices

    def contract(self, p: np.ndarray) -> np.ndarray:
        """<Gamma, p, p>: quadratic-velocity force vector."""
        return np.einsum("kij,i,j->k", self.gamma, p, p)


@dataclass
class ForceAssembly:
    E: np.ndarray  # (3N,)
    A: np.ndarray  # (3N, 3N), skew
    D: np.ndarray  # (3N,)

    def total(self, qp: np.ndarray) -> np.ndarray:
        return self.E + self.A @ qp + self.D


def genuine_inertia(bodies) -> np.ndarray:
    """Block-diagonal matrix of (m, m, J) per body."""
    diag = []
    for b in bodies:
        if b.mass <= 0 or b.inertia <= 0:
            raise GeometryError("body mass and inertia must be positive")
        diag.extend([b.mass, b.mass, b.inertia])
    return np.diag(np.asarray(diag, dtype=float))


def added_inertia(basis: FlowBasis) -> InertiaModel:
    """Added-inertia matrix from boundary integrals of the Kirchhoff traces.

    Entry (k, l) is the boundary integral of phi_l times the normal derivative
    of phi_k; the assembly is symmetrized and the pre-averaging asymmetry kept
    as a solver-quality metric.
    """
    disc = basis.disc
    raw = basis.kirchhoff_data.T @ (disc.weights[:, None] * basis.phi_trace)
    if raw.size == 0:
        return InertiaModel(genuine=raw.copy(), added=raw.copy(), asymmetry=0.0)
    scale = max(np.max(np.abs(raw)), 1e-300)
    asym = float(np.max(np.abs(raw - raw.T)) / scale)
    if asym > ASYMMETRY_TOL:
        raise AccuracyError(
            f"added-inertia asymmetry {asym:.2e} exceeds {ASYMMETRY_TOL:.0e}; "
            "increase nodes_per_curve"
        )
    added = 0.5 * (raw + raw.T)
    genuine = genuine_inertia(disc.snapshot.bodies)
    return InertiaModel(genuine=genuine, added=added, asymmetry=asym)


def _body_node_fields(basis: FlowBasis, b: int):
    """Per-node gradients and rigid fields of all coordinates on body b's curve."""
    disc = basis.disc
    s = disc.slices[1 + b]
    curve = disc.snapshot.curves[1 + b]
    nrm, tan = curve.normals, curve.tangents
    grads = (
        basis.kirchhoff_data[s, :, None] * nrm[:, None, :]
        + basis.phi_tangent[s, :, None] * tan[:, None, :]
    )  # (n, 3N, 2)
    nd = 3 * disc.n_bodies
    xi = np.zeros((curve.n, nd, 2))
    xi[:, 3 * b, 0] = 1.0
    xi[:, 3 * b + 1, 1] = 1.0
    xi[:, 3 * b + 2, :] = perp(curve.points - curve.center)
    return s, curve, grads, xi


def grad_added_inertia(basis: FlowBasis) -> np.ndarray:
    """Configuration gradient of the added inertia, d M^a[i, j] / d q[k].

    Assembled from the curvature-free boundary formula: an integral of
    (xi_i - grad phi_i).(xi_j - grad phi_j) - xi_i.xi_j against the normal
    rigid speed of coordinate k over body [k]'s boundary, plus tangential
    correction terms that involve only the rotation coordinates of body [k].
    """
    disc = basis.disc
    nd = 3 * disc.n_bodies
    out = np.zeros((nd, nd, nd))
    for b in range(disc.n_bodies):
        s, curve, grads, xi = _body_node_fields(basis, b)
        v = xi - grads
        core = np.einsum("nia,nja->nij", v, v) - np.einsum("nia,nja->nij", xi, xi)
        w = curve.weights
        for c in range(3):
            k = 3 * b + c
            kn = np.sum(xi[:, k, :] * curve.normals, axis=1)
            out[:, :, k] -= np.einsum("n,nij->ij", w * kn, core)
            if c < 2:
                kt = curve.tangents[:, c]
                p = (w * kt) @ basis.phi_trace[s]
                out[3 * b + 2, :, k] -= p
                out[:, 3 * b + 2, k] -= p
    return out


def christoffel(dM: np.ndarray) -> ChristoffelTensor:
    """First-kind Christoffel symbols from the metric gradient dM[i, j, k]."""
    gamma = 0.5 * (
        np.einsum("ikj->kij", dM) + np.einsum("jki->kij", dM) - np.einsum("ijk->kij", dM)
    )
    return ChristoffelTensor(gamma=gamma)


def grad_C(basis: FlowBasis) -> np.ndarray:
    """Configuration gradient of the circulation constants, d C[mu, nu] / d q[k].

    Boundary formula: minus the integral over body [k] of the product of the
    two normal stream derivatives against the normal rigid speed of k.
    """
    disc = basis.disc
    nb = disc.n_bodies
    out = np.zeros((nb, nb, 3 * nb))
    if basis.psi_normal is None:
        raise AccuracyError("circulation basis not built for this snapshot")
    for b in range(nb):
        s = disc.slices[1 + b]
        curve = disc.snapshot.curves[1 + b]
        lam = basis.psi_normal[s]  # (n, N)
        w = curve.weights
        for c in range(3):
            k = 3 * b + c
            if c < 2:
                kn = curve.normals[:, c]
            else:
                kn = np.sum(perp(curve.points - curve.center) * curve.normals, axis=1)
            out[:, :, k] = -np.einsum("n,nm,nl->ml", w * kn, lam, lam)
    return out


def force_E(basis: FlowBasis, gamma=None) -> np.ndarray:
    """Quadratic boundary force of the combined stream: per coordinate of body
    kappa, minus half the integral of |d psi / d n|^2 times that coordinate's
    rigid normal data over body kappa's boundary."""
    disc = basis.disc
    nd = 3 * disc.n_bodies
    out = np.zeros(nd)
    lam = basis.stream_normal_trace(gamma)
    if not np.any(lam):
        return out
    for b in range(disc.n_bodies):
        s = disc.slices[1 + b]
        w = disc.snapshot.curves[1 + b].weights
        out[3 * b : 3 * b + 3] = -0.5 * (w * lam[s] ** 2) @ basis.kirchhoff_data[
            s, 3 * b : 3 * b + 3
        ]
    return out


def force_E_from_grad_C(basis: FlowBasis, gamma) -> np.ndarray:
    """Irrotational-case cross-check: half the q-gradient of gamma^T C(q) gamma."""
    gamma = np.asarray(gamma, dtype=float)
    dC = grad_C(basis)
    return 0.5 * np.einsum("m,l,mlk->k", gamma, gamma, dC)


def force_A(basis: FlowBasis, gamma=None) -> np.ndarray:
    """Skew gyroscopic matrix coupling body velocities to the stream field.

    Block (kappa, nu) integrates d psi/d n times the outer products of normal
    and tangential Kirchhoff traces over the two body boundaries; the assembly
    is exactly skew-symmetric by construction.
    """
    disc = basis.disc
    nd = 3 * disc.n_bodies
    A = np.zeros((nd, nd))
    lam = basis.stream_normal_trace(gamma)
    if not np.any(lam):
        return A
    for b in range(disc.n_bodies):
        s = disc.slices[1 + b]
        w = disc.snapshot.curves[1 + b].weights
        block = np.einsum(
            "n,nm,nl->ml",
            w * lam[s],
            basis.kirchhoff_data[s, 3 * b : 3 * b + 3],
            basis.phi_tangent[s],
        )
        A[3 * b : 3 * b + 3, :] += block
        A[:, 3 * b : 3 * b + 3] -= block.T
    return A


def force_D(basis: FlowBasis, qp=None, gamma=None) -> np.ndarray:
    """Direct vorticity force: minus the particle-weighted sum of the
    perpendicular fluid velocity dotted with each Kirchhoff gradient.

    Each particle's own free-space kernel is excluded from its velocity (the
    regularized blob induces zero velocity at its own center anyway)."""
    disc = basis.disc
    nd = 3 * disc.n_bodies
    out = np.zeros(nd)
    p = basis.particles
    if p is None or len(p) == 0:
        return out
    grads = basis.phi_gradients(p.positions, check=False)  # (P, 3N, 2)
    # the regularized kernel induces zero velocity at a particle's own center,
    # so the self-exclusion needs no special casing here
    u = basis.velocity(p.positions, qp, gamma, check=False)
    out -= np.einsum("p,pd,pkd->k", p.weights, perp(u), grads)
    return out


def assemble_forces(basis: FlowBasis, qp, gamma=None) -> ForceAssembly:
    """E, A, D for the current snapshot; all exactly zero without vorticity
    and circulation."""
    return ForceAssembly(
        E=force_E(basis, gamma),
        A=force_A(basis, gamma),
        D=force_D(basis, qp, gamma),
    )


def accel(basis: FlowBasis, qp, gamma=None) -> np.ndarray:
    """Body accelerations q'' = M(q)^{-1} (E + A q' + D - <Gamma, q', q'>)."""
    qp = np.asarray(qp, dtype=float)
    inertia = added_inertia(basis)
    rhs = assemble_forces(basis, qp, gamma).total(qp)
    if np.any(qp):
        gam = christoffel(grad_added_inertia(basis))
        rhs = rhs - gam.contract(qp)
    return solve_spd(inertia.total, rhs)


def solve_spd(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve with the symmetric positive-definite inertia matrix."""
    if M.size == 0:
        return np.zeros(0)
    try:
        return cho_solve(cho_factor(M, check_finite=False), rhs, check_finite=False)
    except LinAlgError as exc:
        raise AccuracyError("inertia matrix is not positive definite") from exc
