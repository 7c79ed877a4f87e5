"""Error taxonomy shared by the solver, manifold, and CLI layers.

Each error carries a short machine-readable category string; the CLI maps
categories to exit codes and emits them in structured form on stderr.
"""


class MpmError(Exception):
    """Base class for all package errors."""

    category = "error"


class ConfigError(MpmError):
    """Invalid or inconsistent configuration input."""

    category = "config"


class FormatError(MpmError):
    """Malformed trajectory or checkpoint file."""

    category = "format"


class ShapeError(MpmError):
    """Array shape or resolution mismatch between inputs."""

    category = "shape"


class OutOfDomainError(MpmError):
    """A material or quadrature point left the background grid."""

    category = "out-of-domain"


class InvertedElementError(MpmError):
    """det(F) dropped below the positivity threshold."""

    category = "inverted-element"


class DegenerateMapError(MpmError):
    """Deformation map Jacobian is numerically singular."""

    category = "degenerate-map"


class NonConvergenceError(MpmError):
    """An iterative solve failed to reach its tolerance."""

    category = "non-convergence"
