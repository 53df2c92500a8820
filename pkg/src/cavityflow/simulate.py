"""Time integration of the coupled body/vortex system.

One state vector gathers (q, q', particle positions); classical fixed-step RK4
advances it, rebuilding the flow basis at every stage configuration.  Runs
terminate early with an explicit status when bodies approach contact, a
particle leaves the fluid, or an internal accuracy check trips.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import accel, added_inertia
from .errors import (
    AccuracyError,
    CollisionError,
    GeometryError,
    ParticleEscapeError,
    SolverError,
)
from .flows import build_flow_basis
from .geometry import CavityShape, Configuration, assemble_domain
from .laplace import BoundaryDiscretization
from .vorticity import (
    VortexParticleSet,
    advect,
    check_particles_admissible,
    particle_velocity,
)

STATUS_COMPLETED = "completed"
STATUS_COLLISION = "collision"
STATUS_ACCURACY = "accuracy_failure"
STATUS_ESCAPE = "particle_escape"

DEFAULT_SEPARATION_FRACTION = 1e-3  # of the cavity diameter


@dataclass
class Problem:
    """A fully specified runnable simulation."""

    bodies: list
    cavity: CavityShape
    q0: np.ndarray
    qp0: np.ndarray
    gamma: np.ndarray
    particles: VortexParticleSet | None
    nodes_per_curve: int
    dt: float
    t_final: float
    output_every: int = 1
    separation_margin: float | None = None
    particle_margin: float = 0.0

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float)
        self.qp0 = np.asarray(self.qp0, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.separation_margin is None:
            self.separation_margin = DEFAULT_SEPARATION_FRACTION * (
                2.0 * self.cavity.scale
            )

    @property
    def needs_circulation(self) -> bool:
        return bool(np.any(self.gamma))

    def reversed_from(self, state: "SimState") -> "Problem":
        """The time-reversed problem started from ``state`` (velocities,
        circulations, and particle weights negated)."""
        parts = state.particles.negated() if state.particles is not None else None
        return Problem(
            bodies=self.bodies,
            cavity=self.cavity,
            q0=state.q.copy(),
            qp0=-state.qp,
            gamma=-self.gamma,
            particles=parts,
            nodes_per_curve=self.nodes_per_curve,
            dt=self.dt,
            t_final=self.t_final,
            output_every=self.output_every,
            separation_margin=self.separation_margin,
            particle_margin=self.particle_margin,
        )


@dataclass
class SimState:
    """Instantaneous state plus a lazily built flow basis for its own q."""

    t: float
    q: np.ndarray
    qp: np.ndarray
    particles: VortexParticleSet | None
    problem: Problem = field(repr=False, default=None)
    _basis: object = field(repr=False, default=None)
    _min_sep: float = field(repr=False, default=np.inf)

    def basis(self):
        if self._basis is None:
            self._basis, self._min_sep = _build_basis(
                self.problem, self.q, self.particles
            )
        return self._basis

    def min_separation(self) -> float:
        self.basis()
        return self._min_sep


def _build_basis(problem: Problem, q: np.ndarray, particles):
    snap = assemble_domain(problem.bodies, problem.cavity, q, problem.nodes_per_curve)
    sep = snap.min_separation()
    if sep < problem.separation_margin:
        raise CollisionError(
            f"separation {sep:.3e} below margin {problem.separation_margin:.3e}"
        )
    if particles is not None and len(particles):
        check_particles_admissible(snap, particles, problem.particle_margin)
    disc = BoundaryDiscretization(snap)
    basis = build_flow_basis(
        disc, particles, include_circulation=problem.needs_circulation
    )
    return basis, sep


def _derivative(problem: Problem, state: SimState):
    """Stage derivative (dq, dqp, dx) and the stage's minimum separation."""
    basis = state.basis()
    acc = accel(basis, state.qp, problem.gamma)
    if state.particles is not None and len(state.particles):
        pvel = particle_velocity(basis, state.qp, problem.gamma, state.particles)
    else:
        pvel = None
    return state.qp.copy(), acc, pvel, state._min_sep


def _stage_state(problem, base: SimState, dt, dq, dqp, dx) -> SimState:
    parts = base.particles
    if parts is not None and dx is not None:
        parts = advect(parts, dx, dt)
    return SimState(
        t=base.t + dt,
        q=base.q + dt * dq,
        qp=base.qp + dt * dqp,
        particles=parts,
        problem=problem,
    )


def step_rk4(state: SimState, dt: float) -> SimState:
    """One classical RK4 step of the coupled system.

    Every stage rebuilds the flow basis at its own configuration; the returned
    state carries no basis yet (built lazily on demand).
    """
    pb = state.problem
    k1 = _derivative(pb, state)
    s2 = _stage_state(pb, state, 0.5 * dt, *k1[:3])
    k2 = _derivative(pb, s2)
    s3 = _stage_state(pb, state, 0.5 * dt, *k2[:3])
    k3 = _derivative(pb, s3)
    s4 = _stage_state(pb, state, dt, *k3[:3])
    k4 = _derivative(pb, s4)
    q = state.q + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    qp = state.qp + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    parts = state.particles
    if parts is not None and k1[2] is not None:
        dx = (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0
        parts = advect(parts, dx, dt)
    out = SimState(t=state.t + dt, q=q, qp=qp, particles=parts, problem=pb)
    out._min_sep = min(k[3] for k in (k1, k2, k3, k4))
    return out


def step_doubling_error(state: SimState, dt: float) -> float:
    """Difference between one dt step and two dt/2 steps (local error proxy)."""
    one = step_rk4(state, dt)
    half = step_rk4(step_rk4(state, 0.5 * dt), 0.5 * dt)
    err = np.linalg.norm(one.q - half.q) + np.linalg.norm(one.qp - half.qp)
    if one.particles is not None:
        err += np.linalg.norm(one.particles.positions - half.particles.positions)
    return float(err)


@dataclass
class DiagnosticsRecord:
    t: float
    kinetic: float
    circulation_energy: float
    total: float
    min_separation: float
    added_asymmetry: float
    flux_residual: float
    near_boundary_particles: int


def diagnostics(state: SimState) -> DiagnosticsRecord:
    """Energies and solver-quality metrics at the state's configuration."""
    pb = state.problem
    basis = state.basis()
    if len(pb.bodies):
        inertia = added_inertia(basis)
        ekin = 0.5 * state.qp @ inertia.total @ state.qp
        asym = inertia.asymmetry
    else:
        ekin, asym = 0.0, 0.0
    ecirc = 0.0
    flux_res = 0.0
    if basis.C is not None and basis.C.size:
        ecirc = 0.5 * pb.gamma @ basis.C @ pb.gamma
        fluxes = np.array(
            [[s.flux(1 + nu) for nu in range(basis.n_bodies)] for s in basis.psi]
        )
        flux_res = float(np.max(np.abs(fluxes + np.eye(basis.n_bodies))))
    if basis.psi_omega is not None:
        wfl = np.array([basis.psi_omega.flux(1 + nu) for nu in range(basis.n_bodies)])
        if wfl.size:
            flux_res = max(flux_res, float(np.max(np.abs(wfl))))
    sep = state.min_separation()
    return DiagnosticsRecord(
        t=state.t,
        kinetic=float(ekin),
        circulation_energy=float(ecirc),
        total=float(ekin - ecirc),
        min_separation=float(sep),
        added_asymmetry=float(asym),
        flux_residual=flux_res,
        near_boundary_particles=len(basis.near_boundary_particles),
    )


@dataclass
class RunResult:
    status: str
    detail: str
    times: np.ndarray
    q_history: np.ndarray  # (records, 3N)
    qp_history: np.ndarray
    particle_history: list  # one (P, 2) array per record (empty list if none)
    records: list  # DiagnosticsRecord per output time
    final_state: SimState
    wall_time: float
    min_separation_reached: float

    @property
    def energy_drift(self) -> float:
        """Relative drift of the conserved combination over the run."""
        e0 = self.records[0].total
        scale = max(abs(e0), 1e-30)
        return max(abs(r.total - e0) for r in self.records) / scale


def initial_state(problem: Problem) -> SimState:
    return SimState(
        t=0.0,
        q=problem.q0.copy(),
        qp=problem.qp0.copy(),
        particles=problem.particles,
        problem=problem,
    )


def run(problem: Problem) -> RunResult:
    """Fixed-step RK4 loop with output decimation and early-termination statuses."""
    t0 = time.perf_counter()
    n_steps = int(round(problem.t_final / problem.dt))
    if abs(n_steps * problem.dt - problem.t_final) > 1e-9 * max(problem.t_final, 1.0):
        raise ValueError("t_final must be an integer number of steps")
    state = initial_state(problem)
    times, qs, qps, phist, records = [], [], [], [], []
    status, detail = STATUS_COMPLETED, ""
    min_sep = np.inf

    def record(st: SimState):
        records.append(diagnostics(st))
        times.append(st.t)
        qs.append(st.q.copy())
        qps.append(st.qp.copy())
        if st.particles is not None:
            phist.append(st.particles.positions.copy())

    try:
        record(state)
        for i in range(1, n_steps + 1):
            state = step_rk4(state, problem.dt)
            min_sep = min(min_sep, state._min_sep)
            if i % problem.output_every == 0 or i == n_steps:
                record(state)
    except CollisionError as exc:
        status, detail = STATUS_COLLISION, str(exc)
    except ParticleEscapeError as exc:
        status, detail = STATUS_ESCAPE, str(exc)
    except (AccuracyError, SolverError, GeometryError) as exc:
        status, detail = STATUS_ACCURACY, str(exc)
    wall = time.perf_counter() - t0
    return RunResult(
        status=status,
        detail=detail,
        times=np.asarray(times),
        q_history=np.asarray(qs) if qs else np.zeros((0, len(problem.q0))),
        qp_history=np.asarray(qps) if qps else np.zeros((0, len(problem.q0))),
        particle_history=phist,
        records=records,
        final_state=state,
        wall_time=wall,
        min_separation_reached=float(min_sep),
    )
