class GSPUnrollError(Exception):
    """Base class for all package errors."""


class LaplacianError(GSPUnrollError, ValueError):
    """A matrix failed Laplacian validation.

    ``violation`` names the first property that failed: one of ``"shape"``,
    ``"finite"``, ``"symmetry"``, ``"off_diagonal_sign"``, ``"row_sum"``.
    """

    def __init__(self, violation, detail):
        self.violation = violation
        self.detail = detail
        super().__init__(f"{violation}: {detail}")


class DimensionError(GSPUnrollError, ValueError):
    pass


class SingularSystemError(GSPUnrollError, ArithmeticError):
    pass


class DivergenceError(GSPUnrollError, ArithmeticError):
    """A solver produced a non-finite iterate."""

    def __init__(self, message, *, layer=None, alpha=None):
        self.layer = layer
        self.alpha = alpha
        extra = []
        if layer is not None:
            extra.append(f"layer={layer}")
        if alpha is not None:
            extra.append(f"alpha={list(alpha)}")
        super().__init__(message + (f" ({', '.join(extra)})" if extra else ""))


class UnderdeterminedVertexError(GSPUnrollError, ValueError):
    pass


class NoMissingEntriesError(GSPUnrollError, ValueError):
    pass


class InfeasibleMaskError(GSPUnrollError, ValueError):
    pass
