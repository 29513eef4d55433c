"""Exception types raised by the solver stack."""


class NmfStreamError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(NmfStreamError):
    """A matrix required to be positive definite had a nonpositive pivot.

    ``block_index`` identifies the offending block for block-diagonal
    factorizations (-1 for single-matrix operations).
    """

    def __init__(self, message: str = "matrix is not positive definite", block_index: int = -1):
        super().__init__(message)
        self.block_index = block_index


class SingularTriangular(NmfStreamError):
    """A triangular solve hit a zero diagonal entry."""


class RankDeficientPassiveSet(NmfStreamError):
    """The passive-column normal matrix in an NNLS solve was singular."""

    def __init__(self, message: str = "rank-deficient passive set", rhs_index: int = -1):
        super().__init__(message)
        self.rhs_index = rhs_index


class MaxIterationsExceeded(NmfStreamError):
    """An NNLS solve exceeded its active-set-change cap (cycling guard)."""

    def __init__(self, message: str = "active-set iteration cap exceeded", rhs_index: int = -1):
        super().__init__(message)
        self.rhs_index = rhs_index


class SchurNotPositiveDefinite(NmfStreamError):
    """The reduced (Schur-complement) system was not positive definite.

    Expected occasionally when the exact-curvature coupling is in use; the
    driver falls back to the Gauss-Newton coupling.
    """


class LineSearchStall(NmfStreamError):
    """Backtracking exceeded its halving budget without sufficient decrease."""


class NonPositiveInput(NmfStreamError):
    """A barrier-domain quantity was not strictly positive."""


class DegenerateFactor(NmfStreamError):
    """A factor matrix was identically zero where a nonzero one is required."""


class ParseError(NmfStreamError):
    """A matrix file failed to parse as a numeric grid."""

    def __init__(self, message: str, line: int = -1, column: int = -1):
        super().__init__(message)
        self.line = line
        self.column = column


class RaggedRows(NmfStreamError):
    """A matrix file had rows of differing lengths."""

    def __init__(self, message: str, line: int = -1):
        super().__init__(message)
        self.line = line
