"""Vortex particles: the discrete carrier of the fluid vorticity.

Particles hold fixed circulation weights and are transported by the total
fluid velocity; the blob core regularizes particle-particle interactions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParticleEscapeError
from .flows import FlowBasis
from .geometry import DomainSnapshot, rotation


@dataclass
class VortexParticleSet:
    """Positions (P, 2), circulation weights (P,), and blob core length."""

    positions: np.ndarray
    weights: np.ndarray
    core: float

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.size == 0:
            self.positions = np.zeros((0, 2))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if len(self.weights) != len(self.positions):
            raise ValueError("one weight per particle required")
        if self.core < 0:
            raise ValueError("blob core must be nonnegative")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def with_positions(self, positions: np.ndarray) -> "VortexParticleSet":
        return VortexParticleSet(positions, self.weights.copy(), self.core)

    def negated(self) -> "VortexParticleSet":
        return VortexParticleSet(self.positions.copy(), -self.weights, self.core)


def particle_velocity(
    basis: FlowBasis, qp, gamma, particles: VortexParticleSet
) -> np.ndarray:
    """Fluid velocity at every particle, own free-space kernel excluded.

    The algebraic blob induces zero velocity at its own center, so no explicit
    exclusion term is needed; each particle still feels its own wall images
    through the harmonic correction.
    """
    if len(particles) == 0:
        return np.zeros((0, 2))
    return basis.velocity(particles.positions, qp, gamma, check=False)


def advect(
    particles: VortexParticleSet, velocities: np.ndarray, dt: float
) -> VortexParticleSet:
    """One explicit position kick x += dt * u; weights never change."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return particles.with_positions(particles.positions + dt * np.asarray(velocities))


def check_particles_admissible(
    snapshot: DomainSnapshot, particles: VortexParticleSet, margin: float
) -> None:
    """Raise ParticleEscapeError if any particle left the fluid or sits within
    ``margin`` of a boundary."""
    if len(particles) == 0:
        return
    pts = particles.positions
    if not np.all(snapshot.cavity.contains(pts)):
        raise ParticleEscapeError("vortex particle left the cavity")
    if np.any(snapshot.cavity.radial_gap(pts) < margin):
        raise ParticleEscapeError("vortex particle entered the wall exclusion zone")
    for body, curve in zip(snapshot.bodies, snapshot.body_curves):
        local = (pts - curve.center) @ rotation(-curve.theta).T
        if np.any(body.contains(local)):
            raise ParticleEscapeError("vortex particle entered a body")
        if np.any(body.radial_gap(local) < margin):
            raise ParticleEscapeError("vortex particle entered a body exclusion zone")
