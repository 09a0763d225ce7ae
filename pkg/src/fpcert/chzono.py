"""Zonotope-plus-box abstract domain with an invertible normal form.

An element is the set  { A @ nu + diag(b) @ eta + a : nu in [-1,1]^k,
eta in [-1,1]^p }.  The ``proper`` flag records that A is square and
certified invertible, which is what makes the cheap containment check
possible.  All values are immutable; operations return new elements.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import numerics
from .errors import InvalidSlope, SingularMatrix


def _freeze(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CHZonotope:
    """Center a (p), generator matrix A (p x k), box radii b (p)."""

    a: np.ndarray
    A: np.ndarray
    b: np.ndarray
    proper: bool = False

    def __post_init__(self):
        object.__setattr__(self, "a", _freeze(self.a))
        object.__setattr__(self, "A", _freeze(self.A))
        object.__setattr__(self, "b", _freeze(self.b))
        p = self.a.shape[0]
        if self.A.ndim != 2 or self.A.shape[0] != p or self.b.shape != (p,):
            raise ValueError(
                f"inconsistent shapes: a {self.a.shape}, A {self.A.shape}, b {self.b.shape}"
            )
        if np.any(self.b < 0):
            raise ValueError("box radii must be non-negative")
        if not (
            np.all(np.isfinite(self.a))
            and np.all(np.isfinite(self.A))
            and np.all(np.isfinite(self.b))
        ):
            raise ValueError("non-finite entries")
        if self.proper and self.A.shape[1] != p:
            raise ValueError("proper element requires a square generator matrix")

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def order(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class ReluSlopes:
    """Per-dimension relaxation slopes in [0, 1] for crossing dimensions."""

    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", _freeze(self.lam))
        if np.any(self.lam < 0) or np.any(self.lam > 1):
            raise InvalidSlope("slopes must lie in [0, 1]")


def point(a):
    """Degenerate element containing exactly the point a."""
    a = np.asarray(a, dtype=float)
    p = a.shape[0]
    return CHZonotope(a, np.zeros((p, 0)), np.zeros(p), proper=False)


def from_box(center, radius):
    """Axis-aligned box as generators; proper when all radii are positive."""
    center = np.asarray(center, dtype=float)
    radius = np.asarray(radius, dtype=float)
    if np.any(radius < 0):
        raise ValueError("radius must be non-negative")
    return CHZonotope(
        center, np.diag(radius), np.zeros(center.shape[0]), proper=bool(np.all(radius > 0))
    )


def interval_hull(z):
    """Tight per-dimension bounds (l, u) of the concretization."""
    spread = np.abs(z.A).sum(axis=1) + z.b
    return z.a - spread, z.a + spread


def _cast_box(z):
    """Generators with the box recast as extra columns (zero radii dropped)."""
    nz = np.flatnonzero(z.b > 0)
    if nz.size == 0:
        return z.A
    cols = np.zeros((z.dim, nz.size))
    cols[nz, np.arange(nz.size)] = z.b[nz]
    return np.hstack([z.A, cols])


def affine(z, w, c):
    """Exact image under x -> w @ x + c.  Output is improper (box recast)."""
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    if w.shape[1] != z.dim:
        raise ValueError(f"matrix has {w.shape[1]} columns, element has {z.dim} dims")
    newA = w @ _cast_box(z)
    return CHZonotope(w @ z.a + c, newA, np.zeros(w.shape[0]), proper=False)


def relu(z, slopes=None):
    """Sound ReLU transformer, dimension by dimension.

    Sign-stable dimensions are exact; crossing dimensions use the slope
    relaxation with default slope u/(u-l).  Supplied slopes are used for
    crossing dimensions only and must lie in [0, 1].
    """
    lo, hi = interval_hull(z)
    a = z.a.copy()
    A = z.A.copy()
    b = z.b.copy()
    zeroed = False
    lam_user = None
    if slopes is not None:
        if not isinstance(slopes, ReluSlopes):
            slopes = ReluSlopes(np.asarray(slopes, dtype=float))
        lam_user = slopes.lam
        if lam_user.shape[0] != z.dim:
            raise ValueError("slope vector length must match dimension")
    for i in range(z.dim):
        l, u = lo[i], hi[i]
        if l >= 0:
            continue
        if u <= 0:
            a[i] = 0.0
            A[i, :] = 0.0
            b[i] = 0.0
            zeroed = True
            continue
        lam_def = u / (u - l)
        lam = lam_def if lam_user is None else float(lam_user[i])
        if lam < 0.0 or lam > 1.0:
            raise InvalidSlope(f"slope {lam} outside [0, 1] at dimension {i}")
        if lam <= lam_def:
            mu = 0.5 * (1.0 - lam) * u
        else:
            mu = -0.5 * lam * l
        A[i, :] *= lam
        b[i] = lam * b[i] + mu
        a[i] = lam * a[i] + mu
        if lam == 0.0:
            zeroed = True
    return CHZonotope(a, A, b, proper=z.proper and not zeroed)


# Smallest allowed scaling coefficient during consolidation; keeps the
# reduced generator matrix invertible when a direction has collapsed.
MIN_COEFF = 1e-12


def consolidate(z, basis, w_mul=0.0, w_add=0.0):
    """Over-approximate the generators by p generators along a fixed basis.

    The output has A' = basis @ diag(c) with
    c = (1 + w_mul) * |basis^-1 @ A| @ 1 + w_add, floored at MIN_COEFF,
    and is always proper; center and box are unchanged.  w_mul/w_add > 0
    deliberately inflate the result so that a later containment check can
    succeed.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (z.dim, z.dim):
        raise ValueError(f"basis must be {z.dim}x{z.dim}, got {basis.shape}")
    if w_mul < 0 or w_add < 0:
        raise ValueError("expansion parameters must be non-negative")
    binv = numerics.invert(basis)
    if z.order:
        c = (1.0 + w_mul) * np.abs(binv @ z.A).sum(axis=1) + w_add
    else:
        c = np.full(z.dim, w_add)
    c = np.maximum(c, MIN_COEFF)
    # Column i of the output is basis column i scaled by c_i: binv @ A @ nu
    # lies in the box [-c, c] component-wise, so basis @ diag(c) covers A @ nu.
    return CHZonotope(z.a, basis * c, z.b, proper=True)


# Slack for the containment inequality: absorbs roundoff so that exact
# self-containment (left side identically one) is accepted.
CONTAIN_SLACK = 1e-9


def contains(outer, inner):
    """Sufficient containment check: True implies gamma(inner) is a subset
    of gamma(outer).  Sound but incomplete; requires outer proper.
    Degrades to False when outer's generator matrix cannot be inverted.
    """
    if outer.dim != inner.dim:
        raise ValueError("dimension mismatch")
    if not outer.proper:
        raise ValueError("outer element must be proper")
    try:
        ainv = numerics.invert(outer.A)
    except SingularMatrix:
        return False
    lhs = np.abs(ainv @ inner.A).sum(axis=1) if inner.order else np.zeros(outer.dim)
    resid = np.maximum(0.0, np.abs(inner.a - outer.a) + inner.b - outer.b)
    lhs = lhs + np.abs(ainv) @ resid
    return bool(np.all(lhs <= 1.0 + CONTAIN_SLACK))


def member(z, x, tol=1e-9):
    """Test-only membership oracle via LP feasibility.

    Solves for nu in [-1,1]^k, eta in [-1,1]^p with
    A nu + diag(b) eta = x - a.
    """
    x = np.asarray(x, dtype=float)
    rhs = x - z.a
    cols = _cast_box(z)
    if cols.shape[1] == 0:
        return bool(np.all(np.abs(rhs) <= tol))
    # Rows with no generator mass must match the center exactly.
    dead = np.abs(cols).sum(axis=1) == 0
    if np.any(np.abs(rhs[dead]) > tol):
        return False
    live = ~dead
    res = linprog(
        np.zeros(cols.shape[1]),
        A_eq=cols[live],
        b_eq=rhs[live],
        bounds=[(-1.0 - tol, 1.0 + tol)] * cols.shape[1],
        method="highs",
        options={"primal_feasibility_tolerance": max(tol, 1e-10)},
    )
    return bool(res.status == 0)


def linear_bounds(z, d):
    """Exact min/max of d . x over the concretization."""
    d = np.asarray(d, dtype=float)
    if d.shape[0] != z.dim:
        raise ValueError("direction length must match dimension")
    center = float(d @ z.a)
    spread = float(np.abs(d @ z.A).sum() + np.abs(d) @ z.b)
    return center - spread, center + spread


def sample(z, rng, n=1):
    """Sample n concretization members (uniform coefficients); test helper."""
    nu = rng.uniform(-1.0, 1.0, size=(n, z.order))
    eta = rng.uniform(-1.0, 1.0, size=(n, z.dim))
    pts = z.a + nu @ z.A.T + eta * z.b
    return pts
