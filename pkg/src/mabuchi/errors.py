"""Exception hierarchy.

Every error raised on bad input derives from :class:`InputError`; the CLI maps
those to exit code 65.  Numerical breakdowns derive from :class:`NumericError`
(exit code 70).
"""


class MabuchiError(Exception):
    """Base class for all package errors."""

    code = "error"

    def payload(self):
        return {"error": self.code, "message": str(self)}


class InputError(MabuchiError, ValueError):
    code = "input_invalid"


class NumericError(MabuchiError, ArithmeticError):
    code = "numeric_failure"


# rootsys
class NonCrystallographic(InputError):
    code = "NonCrystallographic"


class DependentRoots(InputError):
    code = "DependentRoots"


class NonPositiveGram(InputError):
    code = "NonPositiveGram"


class WeylOverflow(InputError):
    code = "WeylOverflow"


class DimensionMismatch(InputError):
    code = "DimensionMismatch"


# geom
class Unbounded(InputError):
    code = "Unbounded"


class LowerDimensional(InputError):
    code = "LowerDimensional"


class NotWInvariant(InputError):
    code = "NotWInvariant"

    def __init__(self, message, element=None, vertex=None):
        super().__init__(message)
        self.element = element
        self.vertex = vertex

    def payload(self):
        out = super().payload()
        out["witness"] = {
            "weyl_element": None if self.element is None else [[str(a) for a in row] for row in self.element],
            "vertex": None if self.vertex is None else [str(a) for a in self.vertex],
        }
        return out


# quad
class DegenerateRegion(NumericError):
    code = "DegenerateRegion"


# extremal
class SingularMomentMatrix(NumericError):
    code = "SingularMomentMatrix"


class NotCentral(InputError):
    code = "NotCentral"


# criterion
class RayOutsideChamber(InputError):
    code = "RayOutsideChamber"


# dingfun
class OriginOutside(InputError):
    code = "OriginOutside"


class FourRhoOutside(InputError):
    code = "FourRhoOutside"


class NonDecaying(NumericError):
    code = "NonDecaying"


class TailTooLarge(NumericError):
    code = "TailTooLarge"


class MismatchedInstances(InputError):
    code = "MismatchedInstances"


class EmptyFamily(InputError):
    code = "EmptyFamily"


# masolver
class RankTooHigh(InputError):
    code = "RankTooHigh"


class FanoWarning(UserWarning):
    """4*rho is not an interior point of the chamber slice 2P_+."""
