"""Exception hierarchy. Every failure the library raises derives from JohnForgeError."""


class JohnForgeError(Exception):
    pass


# symspace
class DimensionMismatch(JohnForgeError):
    pass


class SymmetryViolation(JohnForgeError):
    pass


class TraceViolation(JohnForgeError):
    pass


class ChartLengthError(JohnForgeError):
    pass


# body
class BodyError(JohnForgeError):
    pass


class AmbiguousNormal(BodyError):
    pass


class DegenerateHull(BodyError):
    pass


class OriginNotInterior(BodyError):
    pass


class SingularTransform(BodyError):
    pass


class DescriptorError(BodyError):
    pass


# loewner
class DegenerateInput(JohnForgeError):
    pass


class MaxIterations(JohnForgeError):
    pass


class TooFewContacts(JohnForgeError):
    pass


# objective / isotropic
class LPFailure(JohnForgeError):
    pass


class AllZeroWeights(JohnForgeError):
    pass


class NonpositiveLambda(JohnForgeError):
    pass


class FullSphereContacts(JohnForgeError):
    pass


# flow
class SingularDeformation(JohnForgeError):
    pass


class QuadratureBudgetExceeded(JohnForgeError):
    pass
