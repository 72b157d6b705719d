"""Exception types raised by the toolkit.

Input-validation problems are ``ValueError`` subclasses; failures that only
show up while computing (a blown-up right-hand side, an eigensolve that does
not converge) derive from :class:`NumericalError`.  The CLI maps the former to
exit status 1 and the latter to exit status 2.
"""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons."""


class DegenerateNodesError(NumericalError, ValueError):
    def __init__(self, msg="degenerate nodes"):
        super().__init__(msg)


class InsufficientHistoryError(ValueError):
    def __init__(self, msg="insufficient history"):
        super().__init__(msg)


class RhsBlowupError(NumericalError):
    def __init__(self, msg="rhs blowup"):
        super().__init__(msg)


class MisalignedHistoryError(ValueError):
    def __init__(self, msg="misaligned history"):
        super().__init__(msg)


class EigensolveError(NumericalError):
    def __init__(self, msg="eigensolve failed"):
        super().__init__(msg)


class BracketError(NumericalError):
    """A bisection bracket does not straddle the stability boundary."""


class DonorRangeError(ValueError):
    def __init__(self, msg="donor out of range"):
        super().__init__(msg)
