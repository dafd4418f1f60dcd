"""Exception hierarchy for the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; anything else surfaces as the nearest base class.
"""


class LipmpcError(Exception):
    """Base class for all toolkit errors."""


class Unbounded(LipmpcError):
    """An LP/set operation is unbounded in the requested direction."""


class SingularMap(LipmpcError):
    """A linear map is too close to singular even after regularization."""


class NotConverged(LipmpcError):
    """Fixed-point iteration hit its cap. Carries the last iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ModelInconsistent(LipmpcError):
    """Data contradicts the assumed Lipschitz constant."""


class NoEnvelope(LipmpcError):
    """The envelope SDP reported infeasibility."""


class SolverFailure(LipmpcError):
    """A conic solver failed to converge to the required accuracy."""


class EmptyTube(LipmpcError):
    """A propagated reachable set has empty intersection with the state set."""


class UnboundedUncertainty(LipmpcError):
    """A per-step uncertainty polytope is the whole space; cannot robustify."""


class Unstabilizable(LipmpcError):
    """The Riccati recursion diverged; (A, B) is not stabilizable."""


class FeasibilityLost(LipmpcError):
    """The closed-loop MPC problem became infeasible. Carries the run log."""

    def __init__(self, message, step=None, log=None):
        super().__init__(message)
        self.step = step
        self.log = log


class ExplorationBudgetExhausted(LipmpcError):
    """Exploration ended without a nonempty terminal set."""

    def __init__(self, message, steps=None, last_bound=None):
        super().__init__(message)
        self.steps = steps
        self.last_bound = last_bound
