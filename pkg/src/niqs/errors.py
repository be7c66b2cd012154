"""Exception hierarchy for the niqs package."""


class NiqsError(Exception):
    """Base class for every error raised by niqs."""


class DimensionError(NiqsError, ValueError):
    """Shapes disagree, or a composite dimension exceeds the configured maximum."""


class NotHermitian(NiqsError, ValueError):
    pass


class NotAContraction(NiqsError, ValueError):
    """The assembled no-decay operator has a singular value above one.

    Usually means the decay levels were left out of the model.
    """


class ModelError(NiqsError, ValueError):
    """A model, probe or layout violates its invariants."""


class DependentVector(NiqsError):
    """Gram-Schmidt met a vector already in the span of its predecessors."""

    def __init__(self, index, residual=0.0):
        self.index = index
        self.residual = residual
        super().__init__(f"vector {index} is linearly dependent (residual {residual:.3e})")


class ChiOutsideKbar(NiqsError):
    pass


class DecompositionResidual(NiqsError):
    pass


class AlphaZero(NiqsError, ValueError):
    """The reference-arm amplitude vanishes; the projector construction needs it."""


class PlanModelMismatch(NiqsError, ValueError):
    pass
