"""Exception types shared across the package."""


class EvdagError(Exception):
    """Base class for all package-specific errors."""


# -- graph construction -------------------------------------------------------

class CycleDetected(EvdagError):
    """The edge set contains a directed cycle."""


class DuplicateEdge(EvdagError):
    """The same (parent, child) pair appears more than once."""


class SelfLoop(EvdagError):
    """An edge points from a node to itself."""


class ZeroWeight(EvdagError):
    """An edge carries weight exactly zero."""


# -- parameters and formats ---------------------------------------------------

class InvalidParams(EvdagError):
    """An operation was called with parameters outside its domain."""


class FormatError(EvdagError):
    """A text artifact (edge list, sample CSV, config) failed to parse."""


class SizeMismatch(EvdagError):
    """Two objects that must share a dimension do not."""


# -- numerics -----------------------------------------------------------------

class NumericalFailure(EvdagError):
    """A dense linear-algebra routine did not converge."""


class SingularSubblock(EvdagError):
    """A covariance subblock was not positive definite; upstream corruption."""


class NotSPD(EvdagError):
    """A matrix expected to be symmetric positive definite is not."""


class RankDeficient(EvdagError):
    """The Gram matrix of a regression is numerically singular.

    Carries the offending column subset so callers can report which
    regression degenerated.
    """

    def __init__(self, message, columns=None, target=None):
        super().__init__(message)
        self.columns = tuple(columns) if columns is not None else None
        self.target = target


# -- learners -----------------------------------------------------------------

class OrderStalled(EvdagError):
    """A full ordering sweep accepted no node."""


class NoPassingSubset(EvdagError):
    """Every candidate parent superset was rejected for some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class BMinExhausted(EvdagError):
    """The adaptive edge-strength scale was halved past its floor."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


# -- evaluation ---------------------------------------------------------------

class VerificationFailed(EvdagError):
    """A closed-form oracle check failed.

    ``detail`` identifies the offending pair or quantity.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail
