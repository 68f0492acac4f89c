"""Exception hierarchy shared by all submodules."""


class JacobiOrbitsError(Exception):
    """Base class for all errors raised by this package."""


# --- model ---------------------------------------------------------------

class NotAnEquilibrium(JacobiOrbitsError):
    """Linearization requested at a point with nonzero gravity torque."""


# --- geometry ------------------------------------------------------------

class DegenerateMetric(JacobiOrbitsError):
    """The Jacobi metric vanished (E <= U) where a finite metric is required."""


class InsufficientEnergy(JacobiOrbitsError):
    """E <= U(q): no kinetic energy available at this configuration."""


class ZeroTangent(JacobiOrbitsError):
    """A direction vector with zero norm cannot be rescaled."""


# --- relaxation ----------------------------------------------------------

class TooFewVertices(JacobiOrbitsError):
    """A discrete string needs enough vertices for its finite-difference stencils."""


class NullClassWithoutSeed(JacobiOrbitsError):
    """A contractible (0,0) loop must be seeded explicitly; it may collapse."""


class StabilityViolation(JacobiOrbitsError):
    """Explicit step size exceeds the stability bound."""


class SolveFailure(JacobiOrbitsError):
    """A linear solve that should always succeed did not (indicates a bug)."""


class CollapseDetected(JacobiOrbitsError):
    """A closed string shrank to (numerically) a point."""


class NotClosed(JacobiOrbitsError):
    """Operation requires a closed string."""


class NonIntegerWinding(JacobiOrbitsError):
    """A closed path's turn count is not near an integer (broken string)."""


# --- integrate -----------------------------------------------------------

class NonFinite(JacobiOrbitsError):
    """State diverged to inf/nan during integration (step size too large)."""


# --- orbits --------------------------------------------------------------

class NoConvergence(JacobiOrbitsError):
    """Iterative search exhausted its budget without meeting tolerances."""


class ValidationFailed(JacobiOrbitsError):
    """A candidate orbit failed its independent forward-simulation check."""


class EnergyOutOfRange(JacobiOrbitsError):
    """Requested energy is outside the range where this orbit kind exists."""


class DegenerateSeed(JacobiOrbitsError):
    """Seed state is too close to a brake point to seed a disk-orbit solve."""


class PeriodCollapse(JacobiOrbitsError):
    """Periodic-orbit solve converged to an equilibrium (period -> 0)."""


class Unclassifiable(JacobiOrbitsError):
    """Orbit samples are too broken to classify (non-integer winding)."""
