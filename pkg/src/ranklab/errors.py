"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Input violates a documented precondition (shape, finiteness, range)."""


class DegenerateInput(InvalidInput):
    """Input is structurally valid but degenerate for the operation (e.g. zero matrix)."""


class FullRankError(ValueError):
    """Matrix is already full rank; there is no singular value slot to bump."""


class PerturbationTooLarge(ValueError):
    """Bump magnitude would break the descending order of the singular values."""


class UnsupportedActivation(ValueError):
    """Operation is only defined for linear activation."""


class UnsupportedDepth(ValueError):
    """Closed-form expected-loss identities are stated for two-layer networks only."""


class AssumptionViolated(ValueError):
    """Dataset fails one of the full-rank / sample-count assumptions."""


class GenerationFailed(RuntimeError):
    """Dataset generator exhausted its retries without producing a certified dataset."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite or exceeded the divergence bound.

    Carries the partial trajectory recorded up to the failing iteration.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
