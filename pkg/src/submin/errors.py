"""Exception types shared across the library."""


class SubminError(Exception):
    """Base class for all library-specific errors."""


class NotPositiveDefiniteError(SubminError):
    """Cholesky factorization hit a non-positive pivot.

    Carries the pivot index and the offending pivot value so callers can
    escalate damping or report which coordinate collapsed.
    """

    def __init__(self, pivot_index, pivot_value):
        self.pivot_index = int(pivot_index)
        self.pivot_value = float(pivot_value)
        super().__init__(
            f"matrix is not positive definite: pivot {self.pivot_index} "
            f"has value {self.pivot_value:.3e}"
        )


class SingularBlockError(SubminError):
    """A per-pixel 2x2 system has a (near-)zero determinant."""

    def __init__(self, det):
        self.det = float(det)
        super().__init__(f"2x2 block is singular: |det| = {abs(self.det):.3e} <= 1e-12")


class RankDeficientBasisError(SubminError):
    """Basis columns are linearly dependent (Gram matrix numerically singular)."""


class IndefiniteSystemError(SubminError):
    """Reduced system stayed indefinite after damping escalation."""

    def __init__(self, damping, cause=None):
        self.damping = float(damping)
        msg = f"system indefinite even with damping {self.damping:.3e}"
        if cause is not None:
            msg += f" ({cause})"
        super().__init__(msg)


class InvalidWeightsError(SubminError):
    """Generator weight file is corrupt or shape-incompatible."""


class FileFormatError(SubminError):
    """A binary container failed to parse.

    ``offset`` is the byte position of the first offending field.
    """

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        detail = message
        if offset is not None:
            detail += f" (byte offset {offset})"
        if path is not None:
            detail += f" in {path}"
        super().__init__(detail)


class InconsistentInstanceError(SubminError):
    """A dense regularized system violates its construction guarantee."""
