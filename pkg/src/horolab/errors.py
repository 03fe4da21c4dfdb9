"""Exception types shared across the laboratory modules."""


class HorolabError(Exception):
    """Base class for all laboratory errors."""


class InvalidElementError(HorolabError, ValueError):
    """Matrix cannot be normalized to a unit-determinant representative."""


class OpenCellError(HorolabError, ValueError):
    """Element lies outside the open Bruhat cell (lower-right entry vanishes)."""

    def __init__(self, msg, factor=None):
        super().__init__(msg)
        self.factor = factor


class ChartError(HorolabError, ValueError):
    """Boundary point falls outside the affine chart of the computation."""


class InvalidDirectionError(HorolabError, ValueError):
    """Chamber vector is neither interior nor zero."""


class GeneralPositionError(HorolabError, ValueError):
    """Pair of flags is degenerate where transversality is required."""


class PreconditionError(HorolabError, ValueError):
    """Operation called outside its stated domain."""


class EnumerationLimitError(HorolabError, OverflowError):
    """Word enumeration would exceed the hard size guard."""


class PingPongError(HorolabError, ValueError):
    """Schottky system failed ping-pong validation."""


class DivergenceError(HorolabError, ArithmeticError):
    """Series has no critical exponent for the given functional."""


class UnderflowError(HorolabError, ArithmeticError):
    """All weights vanish at double precision."""


class PartitionError(HorolabError, ValueError):
    """Boundary partition violates the minimum-mass requirement."""
