"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a mathematical function."""


class CollisionError(ValueError):
    """Two point vortices occupy the same position under the singular kernel."""

    def __init__(self, pair, t=None, distance=0.0):
        self.pair = tuple(int(i) for i in pair)
        self.t = t
        self.distance = float(distance)
        where = "" if t is None else f" at t={t!r}"
        super().__init__(
            f"vortices {self.pair[0]} and {self.pair[1]} collide{where} "
            f"(distance {self.distance:.3e})"
        )


class NearCollisionError(CollisionError):
    """Pair distance dropped below the configured collision floor."""


class StepSizeError(RuntimeError):
    """Adaptive step size underflowed."""


class MassMismatchError(ValueError):
    """Per-sign masses of two measures differ."""


class SizeLimitError(ValueError):
    """Problem exceeds the size accepted by an exact routine."""


class FieldEvaluationError(FloatingPointError):
    """An external field or right-hand side returned non-finite values."""


class ConfigError(ValueError):
    """Invalid scenario configuration."""
