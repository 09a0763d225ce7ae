"""Exception types shared across the toolkit."""


class SingularMatrix(Exception):
    """Matrix is singular or too ill-conditioned to invert reliably."""


class NonConvergence(Exception):
    """An iterative numerical routine did not reach its tolerance."""


class InvalidSlope(Exception):
    """A supplied ReLU relaxation slope lies outside [0, 1]."""


class ShapeMismatch(Exception):
    """Array shapes are inconsistent with the declared dimensions."""


class ParseError(Exception):
    """A model or dataset file could not be parsed."""


class Diverged(Exception):
    """Abstract iteration exceeded the divergence width threshold."""


class Exhausted(Exception):
    """Iteration budget spent without reaching the goal."""
