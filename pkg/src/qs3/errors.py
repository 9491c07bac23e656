"""Exception hierarchy shared by all qs3 modules."""


class QS3Error(Exception):
    """Base class for every error raised by qs3."""


class DimensionError(QS3Error, ValueError):
    """Operands live in different chart dimensions, or an index is out of range."""


class SingularEvaluationError(QS3Error, ArithmeticError):
    """A jet operation hit a singular value (division by zero, sqrt of x <= 0)."""

    def __init__(self, op, value, point=None):
        self.op = op
        self.value = value
        self.point = point
        msg = f"singular evaluation in {op!r} at value {value!r}"
        if point is not None:
            msg += f" (point {point!r})"
        super().__init__(msg)


class SingularSystemError(QS3Error, ArithmeticError):
    """Pivot magnitude fell below the configured floor during a jet solve."""


class DegreeError(QS3Error, ValueError):
    """Form degree out of the supported range."""


class NotSkewError(QS3Error, ValueError):
    pass


class RankDeficiencyError(QS3Error, ValueError):
    pass


class IndeterminateRankError(QS3Error, ArithmeticError):
    """Singular values sit too close to the rank threshold to decide."""

    def __init__(self, msg, singular_values):
        self.singular_values = singular_values
        super().__init__(f"{msg}; singular values {list(singular_values)}")


class DomainError(QS3Error, ValueError):
    """Point lies outside the chart's validity ball."""


class MetricError(QS3Error, ValueError):
    """Metric is not symmetric positive-definite at the point."""


class DegeneratePlaneError(QS3Error, ValueError):
    pass


class StructureDefectError(QS3Error):
    """An almost contact metric 3-structure relation fails above tolerance."""

    def __init__(self, relation, residual):
        self.relation = relation
        self.residual = residual
        super().__init__(f"structure relation {relation!r} violated, residual {residual:.3e}")


class Not3QuasiSasakianError(QS3Error):
    pass


class PreconditionError(QS3Error, ValueError):
    pass


class ConsistencyError(QS3Error):
    """Classification evidence contradicts the algebraic side conditions."""


class ParameterError(QS3Error, ValueError):
    pass


class ManifoldSpecError(QS3Error, ValueError):
    """A user manifold spec file is malformed or names an unknown catalog entry."""
