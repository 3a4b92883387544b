"""Exception types shared across the package."""

from __future__ import annotations


class ChainforgeError(Exception):
    """Base class for all chainforge-specific failures."""


class InputError(ChainforgeError, ValueError):
    """Malformed input file or command-line value."""


class ReducibleChainError(ChainforgeError, ValueError):
    """A coupling is zero, so the chain splits into disconnected pieces."""


class NotMirrorSymmetricError(ChainforgeError, ValueError):
    """Operation requires a chain invariant under site reversal."""


class IllPosedTargetError(ChainforgeError, ValueError):
    """Target coincides with an eigenvalue of a central block and of its
    leading principal submatrix, so the product constraint is vacuous."""


class DegenerateSystemError(ChainforgeError, RuntimeError):
    """Interpolation constraints are rank deficient or inconsistent."""

    def __init__(self, message: str, conditioning: float | None = None):
        if conditioning is not None:
            message = f"{message} (conditioning diagnostic {conditioning:.3e})"
        super().__init__(message)
        self.conditioning = conditioning


class InfeasibleExtensionError(ChainforgeError, RuntimeError):
    """No real chain with positive couplings realises the requested data."""


class EmptyNullSpaceError(ChainforgeError, RuntimeError):
    """No encoded state avoids all violating eigenvectors."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(
            f"{message} (smallest singular value {smallest_singular_value:.3e})"
        )
        self.smallest_singular_value = smallest_singular_value


class VerificationError(ChainforgeError, RuntimeError):
    """A solution failed its independent post-solve check."""
