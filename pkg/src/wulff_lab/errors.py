"""Exception types shared across the library.

Everything derives from ValueError so callers that only care about
"bad input" can catch one thing; the subclasses exist because the CLI
and the experiment harness map them to different exit paths.
"""


class WulffLabError(ValueError):
    """Base class for library-specific failures."""


class GridResolutionError(WulffLabError):
    """Grid too coarse (or degenerate) for the requested operation."""


class NonEllipticError(WulffLabError):
    """Integrand failed the ellipticity certification."""


class EmbeddingError(WulffLabError):
    """Surface construction or reparametrization left the valid regime
    (graph outside the tubular neighbourhood, fold-over, non-convergent
    chart solve)."""


class ConvexityError(WulffLabError):
    """Operation requires a convex surface and the input is not."""


class PreconditionError(WulffLabError):
    """Inputs violate a documented hypothesis (e.g. closeness regime)."""


class ConfigError(WulffLabError):
    """Malformed experiment configuration or CLI input."""
