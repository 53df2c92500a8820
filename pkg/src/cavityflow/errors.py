"""Exception hierarchy shared by all cavityflow modules."""


class CavityFlowError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(CavityFlowError):
    """Invalid shape descriptor or inadmissible body placement."""


class ScenarioError(CavityFlowError):
    """Scenario file failed validation; the message names the offending key."""


class SolverError(CavityFlowError):
    """A boundary-integral linear system could not be solved."""


class AccuracyError(CavityFlowError):
    """A computed quantity failed an internal consistency check."""


class EvaluationError(CavityFlowError):
    """Field evaluation requested outside the fluid or too close to a boundary."""


class CollisionError(CavityFlowError):
    """Body separation fell below the admissibility margin."""


class ParticleEscapeError(CavityFlowError):
    """A vortex particle left the fluid domain (or its exclusion margin)."""
