"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: validation problems exit 2,
I/O problems exit 3, numerical non-convergence exits 4.
"""


class ValidationError(ValueError):
    """Invalid argument or domain-type invariant violation."""


class SceneParseError(ValidationError):
    """Scene file is syntactically or semantically malformed."""


class RelativeAccuracyUndefinedError(ValidationError):
    """Relative accuracy target is undefined because the component mean is zero."""


class QuadratureConvergenceError(RuntimeError):
    """Hemisphere quadrature failed to converge under grid doubling."""
