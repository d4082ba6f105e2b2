"""Exception types shared across the package."""


class HierwalkError(Exception):
    """Base class for all package errors."""


class CapExceeded(HierwalkError):
    """A size limit (vertex count, dense dimension, ...) would be exceeded."""


class UnbalancedSpec(HierwalkError):
    """Superedge counts are not divisible by the supervertex sizes."""


class DegreeInfeasible(HierwalkError):
    """No simple wiring with the requested per-vertex degrees exists."""


class InvalidWeights(HierwalkError):
    """Factor weights supported outside the proper factors of the degree."""


class EvenChain(HierwalkError):
    """An odd-length chain was required."""


class ZeroHopping(HierwalkError):
    """A hopping amplitude is zero where a nonzero one is required."""


class GaugeViolated(HierwalkError):
    """A ratio assignment does not satisfy the gauge condition."""


class NonIntegral(HierwalkError):
    """A ratio assignment yields fractional vertex or edge counts."""


class NoPerfectMatching(HierwalkError):
    """No perfect matching exists on the required support."""


class ZeroOverlap(HierwalkError):
    """The traversal channel has zero end-to-end overlap."""


class DegreeIdentityViolated(HierwalkError):
    """D*s_i = 2*F_i + sum of adjacent superedge counts fails."""


class Reducible(HierwalkError):
    """The hopping matrix is not irreducible (its graph is disconnected)."""


class SizeUnderflow(HierwalkError):
    """Rounded supervertex sizes include a zero."""


class ProbabilityOverflow(HierwalkError):
    """An edge-inclusion probability exceeds one."""


class NotDoublyStochastic(HierwalkError):
    """Row or column sums deviate from one beyond tolerance."""


class TripleEdge(HierwalkError):
    """An edge of multiplicity three or more survived in a large supervertex."""


class NoTrials(HierwalkError):
    """A Monte-Carlo estimate was requested with zero trials."""


class UnknownExperiment(HierwalkError):
    """The experiment registry has no entry under the requested name."""
