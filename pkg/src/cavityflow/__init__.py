"""Rigid bodies in a two-dimensional incompressible perfect fluid in a cavity.

The configuration of N bodies is a vector q of length 3N (two translations
and one rotation per body).  The package assembles the configuration-dependent
inertia metric, its Christoffel tensor, and the circulation/vorticity forces
from boundary integrals, and integrates the coupled body/vortex dynamics.
"""

from .errors import (
    AccuracyError,
    CavityFlowError,
    CollisionError,
    EvaluationError,
    GeometryError,
    ParticleEscapeError,
    ScenarioError,
    SolverError,
)
from .geometry import (
    BodyShape,
    CavityShape,
    Circle,
    Configuration,
    DomainSnapshot,
    Ellipse,
    Star,
    assemble_domain,
    min_separation,
    rigid_field,
)
from .laplace import (
    BoundaryDiscretization,
    HarmonicSolution,
    eval_field,
    solve_dirichlet_with_constants,
    solve_neumann,
    tangential_derivative,
)

__version__ = "0.1.0"
