class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class InsufficientQuadraticVariationError(ValueError):
    def __init__(self, horizon: float, attained: float):
        self.horizon = horizon
        self.attained = attained
        super().__init__(
            f"insufficient quadratic variation: horizon {horizon!r} exceeds "
            f"attained qv {attained!r}"
        )


class DegenerateEnsembleError(ValueError):
    """The ensemble carries no cross-sectional information to test."""
