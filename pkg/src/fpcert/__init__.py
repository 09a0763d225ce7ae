"""Certification toolkit for numerical fixpoint iterators.

Core pieces:

- ``chzono``: a zonotope-plus-box abstract domain with an invertible-generator
  ("proper") normal form, order reduction and a cheap containment check.
- ``engine``: a generic two-phase abstract fixpoint engine (contract, then
  tighten).
- ``mondeq``: monotone implicit-layer models, concrete and abstract solvers.
- ``verifier``: local/global robustness certification plus baselines.
- ``householder``: a scalar case study (reciprocal square root iteration).
"""

from .errors import (
    Diverged,
    Exhausted,
    InvalidSlope,
    NonConvergence,
    ParseError,
    ShapeMismatch,
    SingularMatrix,
)

__all__ = [
    "Diverged",
    "Exhausted",
    "InvalidSlope",
    "NonConvergence",
    "ParseError",
    "ShapeMismatch",
    "SingularMatrix",
]

__version__ = "0.1.0"
