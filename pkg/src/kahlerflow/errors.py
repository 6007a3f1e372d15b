"""Exception types shared across the package."""


class KahlerflowError(Exception):
    """Base class for all package errors."""


class NonPositiveError(KahlerflowError):
    """A metric lost positive definiteness (left the Kahler cone).

    Carries the offending node index and the smallest eigenvalue found.
    """

    def __init__(self, node, eigenvalue, message=None):
        self.node = node
        self.eigenvalue = eigenvalue
        super().__init__(
            message or f"metric not positive definite at node {node}: "
            f"min eigenvalue {eigenvalue:.3e}"
        )


class BackendDisagreementError(KahlerflowError):
    """Spectral and finite-difference backends differ beyond tolerance."""

    def __init__(self, quantity, disagreement, tolerance):
        self.quantity = quantity
        self.disagreement = disagreement
        self.tolerance = tolerance
        super().__init__(
            f"backends disagree on {quantity}: {disagreement:.3e} > tol {tolerance:.3e}"
        )


class UnsupportedValenceError(KahlerflowError):
    """Tensor valence outside the supported list."""


class ClassMismatchError(KahlerflowError):
    """Radial profile limits imply a cohomology class other than the expected one."""


class AsymmetryDetectedError(KahlerflowError):
    """A symmetric-metric operation was fed a field without the symmetry."""


class StepRejectedError(KahlerflowError):
    """The step controller exhausted its retries."""


class SingularTimeApproachedError(KahlerflowError):
    """KRF integration hit the singular-time guard."""

    def __init__(self, t, k_max, message=None):
        self.t = t
        self.k_max = k_max
        super().__init__(
            message or f"singular-time guard at t={t:.6f} (K_max={k_max:.3e})"
        )


class GaugeSolveFailedError(KahlerflowError):
    """Normalization of the potential-flow gauge constant failed."""


class WindowExceededError(KahlerflowError):
    """Reparametrization requested outside the source trajectory window."""


class InconclusiveError(KahlerflowError):
    """Trajectory window too short (or non-singular) to classify."""


class NoPickError(KahlerflowError):
    """No blow-up pick point exceeds the configured curvature threshold."""


class PoissonFailedError(KahlerflowError):
    """Ricci-potential solve failed (invalid metric data)."""


class NormalizationFailedError(KahlerflowError):
    """The e^{-f} normalization integral is invalid."""


class NoConvergenceError(KahlerflowError):
    """Entropy minimizer did not reach tolerance within the iteration budget."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"minimizer stopped after {iterations} iterations, residual {residual:.3e}"
        )


class NotHolomorphicError(KahlerflowError):
    """Vector field failed the holomorphy check."""


class NonPositiveScalarError(KahlerflowError):
    """Scalar curvature not positive where a Harnack hypothesis requires it."""


class NonPositiveCurvatureError(KahlerflowError):
    """Bisectional curvature not nonnegative where an LYH hypothesis requires it."""


class CounterexampleFoundError(KahlerflowError):
    """The randomized trace-inequality suite found a violation (implementation bug)."""


class ValidationErrors(KahlerflowError):
    """Config validation failed; carries the full list of errors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
