"""Exception and warning types shared across the package."""


class GranpermError(Exception):
    """Base class for all errors raised by granperm."""


class EmptyInput(GranpermError, ValueError):
    pass


class DimensionMismatch(GranpermError, ValueError):
    pass


class MissingColumn(GranpermError, ValueError):
    def __init__(self, name):
        super().__init__(f"missing required column: {name!r}")
        self.name = name


class RowParseError(GranpermError, ValueError):
    def __init__(self, line_no, field, reason):
        super().__init__(f"line {line_no}, field {field!r}: {reason}")
        self.line_no = line_no
        self.field = field
        self.reason = reason


class DegenerateFeature(GranpermError, ValueError):
    def __init__(self, name):
        super().__init__(f"feature {name!r} has zero range (max == min)")
        self.name = name


class TooFewDistinctValues(GranpermError, ValueError):
    pass


class SingularSystem(GranpermError, ArithmeticError):
    pass


class UnknownAttribute(GranpermError, KeyError):
    pass


class UnknownObject(GranpermError, KeyError):
    pass


class TooManyAttributes(GranpermError, ValueError):
    pass


class EmptyBox(GranpermError, ValueError):
    pass


class NoFeasibleCandidate(GranpermError):
    """No candidate met both the error and the rule-count criteria.

    The aggregated box is attached so callers can inspect it or relax the
    threshold; ``fallback`` is the minimum-error candidate.
    """

    def __init__(self, box, fallback=None):
        super().__init__(
            f"no feasible candidate among {len(box.candidates)} evaluated "
            f"(threshold={box.error_threshold}, max_rules={box.max_rules})"
        )
        self.box = box
        self.fallback = fallback


class NumericalUnderflowWarning(RuntimeWarning):
    """Total rule firing strength underflowed; the strongest rule was used."""
