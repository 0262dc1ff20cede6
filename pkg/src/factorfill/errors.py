"""Exception taxonomy.

Two branches matter for callers (and for the CLI exit codes):

* :class:`DataValidationError` -- the inputs cannot support the requested
  computation (shape mismatches, not enough observations, degenerate
  missingness patterns).  CLI exit code 3.
* :class:`NumericalError` -- the inputs were admissible but a linear-algebra
  step failed or produced a non-usable object (singular designs, failed
  factorizations).  CLI exit code 4.
"""

from __future__ import annotations


class FactorfillError(Exception):
    """Base class for all library errors."""


class DataValidationError(FactorfillError):
    """Inputs fail a structural or statistical precondition."""


class NumericalError(FactorfillError):
    """A numerical step failed on admissible inputs."""


# ---------------------------------------------------------------------------
# data validation
# ---------------------------------------------------------------------------

class DimensionMismatch(DataValidationError):
    pass


class ZeroVarianceSeries(DataValidationError):
    def __init__(self, series: int):
        self.series = series
        super().__init__(f"series {series} has zero observed variance")


class TooFewObservations(DataValidationError):
    def __init__(self, series: int, needed: int, got: int):
        self.series = series
        super().__init__(
            f"series {series} has {got} observed values, needs at least {needed}"
        )


class RankTooLarge(DataValidationError):
    def __init__(self, r: int, limit: int):
        self.r = r
        super().__init__(f"rank {r} exceeds admissible maximum {limit}")


class NoTallBlock(DataValidationError):
    def __init__(self, n_o: int, r: int):
        self.n_o = n_o
        super().__init__(
            f"tall block has {n_o} fully observed series, needs at least {r}"
        )


class NoWideBlock(DataValidationError):
    def __init__(self, t_o: int, r: int):
        self.t_o = t_o
        super().__init__(
            f"wide block has {t_o} fully observed periods, needs at least {r}"
        )


class SeriesUnderdetermined(DataValidationError):
    def __init__(self, series: int, t_oi: int, r: int):
        self.series = series
        super().__init__(
            f"series {series} observed in {t_oi} periods, cannot fit {r} loadings"
        )


class CellObserved(DataValidationError):
    def __init__(self, t: int, i: int):
        super().__init__(f"cell (t={t}, i={i}) is observed; prediction intervals "
                         "apply to missing cells only")


class HorizonTooLarge(DataValidationError):
    def __init__(self, h: int, t_avail: int):
        super().__init__(f"horizon {h} leaves {t_avail} usable periods")


class InsufficientOverlap(DataValidationError):
    def __init__(self, i: int, j: int, count: int):
        self.pair = (i, j)
        super().__init__(
            f"series pair ({i}, {j}) share {count} jointly observed periods, need 2"
        )


class SeriesTooShort(DataValidationError):
    def __init__(self, series: int, t_oi: int):
        self.series = series
        super().__init__(f"series {series} has only {t_oi} observed periods")


class EmptyResidualPool(DataValidationError):
    def __init__(self, series: int | None = None):
        msg = "residual pool is empty"
        if series is not None:
            msg += f" for series {series}"
        super().__init__(msg)


class SchemeUnavailable(DataValidationError):
    def __init__(self, scheme):
        super().__init__(f"unknown overlay scheme {scheme!r}; valid schemes are 1-4")


class PatternDegeneratesPanel(DataValidationError):
    pass


# ---------------------------------------------------------------------------
# numerical failures
# ---------------------------------------------------------------------------

class SvdFailure(NumericalError):
    pass


class SingularDesign(NumericalError):
    def __init__(self, series: int):
        self.series = series
        super().__init__(f"regressor matrix for series {series} is singular")


class RotationSingular(NumericalError):
    pass


class SingularMoment(NumericalError):
    pass


class RankDeficientDesign(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class NegativeQuadraticForm(NumericalError):
    pass


class NotConverged(UserWarning):
    """Iterative refinement hit its iteration cap; the last iterate is returned."""
