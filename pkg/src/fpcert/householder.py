"""Scalar case study: reciprocal square root by Householder's iteration.

The concrete program computes s with s*s close to 1/x via

    s = s0
    while s <= 0 or |s*s - 1/x| >= eps:
        h = 1 - x*s*s
        s = s + s*(0.5*h + 0.375*h*h)

The abstract analysis runs the same body on scalar affine forms (center,
named linear error terms, box remainder), contracting with the engine
recipe specialized to one dimension: after each step, every error symbol
except the input's is folded into one fresh named symbol, keeping input
correlation while still letting the next step's products cancel the
folded deviation.
"""

import itertools
import math
from dataclasses import dataclass, field

from .errors import Diverged, Exhausted, NonConvergence

# Error-symbol id reserved for the input variable.
X_SYMBOL = 0


@dataclass(frozen=True)
class AffineForm:
    center: float
    coeffs: dict = field(default_factory=dict)  # symbol id -> coefficient
    box: float = 0.0

    def __post_init__(self):
        if self.box < 0 or not math.isfinite(self.box) or not math.isfinite(self.center):
            raise ValueError("invalid affine form")
        object.__setattr__(
            self, "coeffs", {k: float(c) for k, c in self.coeffs.items() if c != 0.0}
        )

    @property
    def radius(self):
        return sum(abs(c) for c in self.coeffs.values()) + self.box

    def hull(self):
        return self.center - self.radius, self.center + self.radius


def const(c):
    return AffineForm(float(c))


def from_interval(lo, hi, symbol):
    return AffineForm(0.5 * (lo + hi), {symbol: 0.5 * (hi - lo)})


def add(a, b):
    coeffs = dict(a.coeffs)
    for k, c in b.coeffs.items():
        coeffs[k] = coeffs.get(k, 0.0) + c
    return AffineForm(a.center + b.center, coeffs, a.box + b.box)


def scale(a, t):
    return AffineForm(
        t * a.center, {k: t * c for k, c in a.coeffs.items()}, abs(t) * a.box
    )


def add_const(a, t):
    return AffineForm(a.center + t, dict(a.coeffs), a.box)


def _product_range(ga, gb):
    """Exact range of u*v over the symbol box, for the pure linear parts
    u = sum(ga[i] nu_i), v = sum(gb[i] nu_i) with nu in [-1, 1]^k.

    The pair (u, v) ranges over a centrally symmetric planar zonotope; the
    product has no interior extrema, so it suffices to scan the boundary,
    edge by edge (each edge is linear in one coefficient, so the product
    is a one-variable quadratic there).
    """
    gens = [(x, y) for x, y in zip(ga, gb) if x != 0.0 or y != 0.0]
    if not gens:
        return 0.0, 0.0
    # Flip generators into the upper half-plane and sort by angle; walking
    # them in order traces one half of the boundary, and the product is
    # symmetric under point reflection, so half suffices.
    flipped = [(-x, -y) if (y < 0 or (y == 0 and x < 0)) else (x, y) for x, y in gens]
    flipped.sort(key=lambda g: math.atan2(g[1], g[0]))
    px = -sum(g[0] for g in flipped)
    py = -sum(g[1] for g in flipped)
    lo = hi = px * py
    for gx, gy in flipped:
        # Edge from (px, py) to (px + 2 gx, py + 2 gy).
        prod = gx * gy
        for t in (2.0,) if prod == 0.0 else (2.0, -(px * gy + py * gx) / (2.0 * prod)):
            if 0.0 < t <= 2.0:
                val = (px + t * gx) * (py + t * gy)
                lo, hi = min(lo, val), max(hi, val)
        px += 2.0 * gx
        py += 2.0 * gy
    return lo, hi


def mul(a, b, fresh=None):
    """Affine product with a sound quadratic remainder.

    The residual of the product beyond its affine part is a quadratic in
    the error symbols; its exact range is computed (it is the range of a
    product of two correlated linear forms) and split into a center shift
    plus a symmetric remainder.  For a shared squared symbol this reduces
    to the half-range rewrite (nu^2 lies in [0, 1]), which is what keeps
    correlated products like x*s*s tight.

    With ``fresh`` (a callable yielding unused symbol ids) the remainder
    becomes a named symbol instead of widening the box, so later products
    can still reason about it exactly.
    """
    center = a.center * b.center
    coeffs = {}
    for k, c in a.coeffs.items():
        coeffs[k] = b.center * c
    for k, c in b.coeffs.items():
        coeffs[k] = coeffs.get(k, 0.0) + a.center * c
    sum_a = sum(abs(c) for c in a.coeffs.values())
    sum_b = sum(abs(c) for c in b.coeffs.values())
    syms = sorted(set(a.coeffs) | set(b.coeffs))
    q_lo, q_hi = _product_range(
        [a.coeffs.get(k, 0.0) for k in syms], [b.coeffs.get(k, 0.0) for k in syms]
    )
    center += 0.5 * (q_lo + q_hi)
    rem = 0.5 * (q_hi - q_lo)
    rem += a.box * (abs(b.center) + sum_b + b.box)
    rem += b.box * (abs(a.center) + sum_a + a.box)
    if fresh is not None and rem > 0.0:
        coeffs[fresh()] = rem
        rem = 0.0
    return AffineForm(center, coeffs, rem)


@dataclass
class RootTask:
    x_interval: tuple
    s0: float = 2.0 ** -3
    epsilon: float = 1e-8
    mode: str = "fix"   # "fix" or "reach"

    def __post_init__(self):
        lo, hi = self.x_interval
        if lo <= 0 or hi < lo:
            raise ValueError("input interval must be positive and ordered")
        if not 0 < self.epsilon < 1.0 / hi:
            raise ValueError("termination threshold must satisfy 0 < eps < 1/hi")
        if self.mode not in ("fix", "reach"):
            raise ValueError("mode must be 'fix' or 'reach'")


def _step_concrete(x, s):
    h = 1.0 - x * s * s
    return s + s * (0.5 * h + 0.375 * h * h)


def root_concrete(x, task):
    """Run the concrete loop; returns s with |s*s - 1/x| < epsilon."""
    if x <= 0:
        raise ValueError("x must be positive")
    s = task.s0
    for _ in range(10**4):
        if s > 0 and abs(s * s - 1.0 / x) < task.epsilon:
            return s
        s = _step_concrete(x, s)
    raise NonConvergence("concrete iteration did not terminate in 1e4 steps")


def householder_step_abstract(x, s, fresh=None):
    """One abstract loop body evaluation on affine forms.

    Intermediate product remainders are carried as named symbols (ids
    below X_SYMBOL, so they can never collide with retained ones); they
    stay correlated across the body's products and are folded away by the
    caller's consolidation.
    """
    if fresh is None:
        counter = iter(range(X_SYMBOL - 1, X_SYMBOL - 64, -1))
        fresh = lambda: next(counter)
    # Multiplying x into s first keeps the x-correlation inside both later
    # products, which measurably tightens the fixpoint envelope compared
    # with forming s*s first.
    xs = mul(x, s, fresh)
    h = add_const(scale(mul(xs, s, fresh), -1.0), 1.0)
    corr = add(scale(h, 0.5), scale(mul(h, h, fresh), 0.375))
    return add(s, mul(s, corr, fresh))


def consolidate_form(form, fresh, keep=X_SYMBOL, w_mul=0.0, w_add=0.0):
    """Reduce to two named symbols: the kept input symbol and one fresh one.

    Every other symbol and the box fold into the fresh generator (exact on
    the hull in one dimension, and a named symbol keeps the deviation
    correlated through the next step's products, which is what lets the
    iteration contract it).  w_mul/w_add optionally inflate the fresh
    coefficient the same way the general consolidation does.
    """
    kept = form.coeffs.get(keep, 0.0)
    extra = sum(abs(c) for k, c in form.coeffs.items() if k != keep) + form.box
    coeff = (1.0 + w_mul) * extra + w_add
    return AffineForm(form.center, {keep: kept, fresh: coeff}, 0.0)


def _contains_form(outer, inner, keep=X_SYMBOL):
    """Containment check sliced along the kept input symbol.

    For every value of the input symbol, the inner slice (an interval)
    must lie inside the outer slice.  Symbols other than the kept one are
    treated as independent between the two forms, which is sound.
    """
    d_gap = abs(inner.coeffs.get(keep, 0.0) - outer.coeffs.get(keep, 0.0))
    r_in = sum(abs(c) for k, c in inner.coeffs.items() if k != keep) + inner.box
    r_out = sum(abs(c) for k, c in outer.coeffs.items() if k != keep) + outer.box
    lhs = abs(inner.center - outer.center) + d_gap + r_in
    return lhs <= r_out + 1e-12 * max(1.0, r_out)


HISTORY_LEN = 10
N_MAX = 500
ABORT_WIDTH = 1e9


def analyze_root(task, trace=None):
    """Contract the abstract loop state, then report the root interval.

    Returns (root_lo, root_hi, iterations) where the interval bounds 1/s
    over the final hull.  mode="reach" additionally pads the s-hull by
    sqrt(epsilon) on each side, which covers every value of s observable
    at the loop exit rather than only true fixpoints.
    """
    lo, hi = task.x_interval
    x = from_interval(lo, hi, X_SYMBOL)
    s = const(task.s0)
    history = []
    fresh = X_SYMBOL + 1
    for n in range(1, N_MAX + 1):
        fresh += 1
        cons = consolidate_form(s, fresh)
        history.append(cons)
        history = history[-HISTORY_LEN:]
        s = householder_step_abstract(x, cons)
        if trace is not None:
            trace.append((n, *s.hull()))
        s_lo, s_hi = s.hull()
        if s_hi - s_lo > ABORT_WIDTH:
            raise Diverged(f"hull width exceeded {ABORT_WIDTH:.0e} at step {n}")
        if any(_contains_form(h, s) for h in history):
            if task.mode == "reach":
                pad = math.sqrt(task.epsilon)
                s_lo, s_hi = s_lo - pad, s_hi + pad
            if s_lo <= 0:
                raise Diverged("final hull reaches non-positive s")
            return 1.0 / s_hi, 1.0 / s_lo, n
    raise Exhausted(f"no contraction within {N_MAX} iterations")


def _guard_must_continue(x_lo, x_hi, s_lo, s_hi, eps):
    """Interval proof that the loop guard holds for every point in the hull."""
    if s_hi <= 0:
        return True
    # Range of s*s - 1/x over the hull.
    ss_lo = 0.0 if s_lo <= 0 <= s_hi else min(s_lo * s_lo, s_hi * s_hi)
    ss_hi = max(s_lo * s_lo, s_hi * s_hi)
    d_lo = ss_lo - 1.0 / x_lo
    d_hi = ss_hi - 1.0 / x_hi
    if d_lo > 0:
        return d_lo >= eps
    if d_hi < 0:
        return -d_hi >= eps
    return False  # zero inside the range: guard not provable


def kleene_root(task, unroll_k=100):
    """Baseline: join-free unrolling while the guard provably holds, then
    interval joins to a post-fixpoint.  Returns (lo, hi) in root space or
    the string "Diverged".
    """
    x_lo, x_hi = task.x_interval
    x = from_interval(x_lo, x_hi, X_SYMBOL)
    s = const(task.s0)
    # Unrolled phase keeps correlations via the affine forms.  A single
    # allocator spans all steps so remainder symbols stay distinct.
    counter = itertools.count(X_SYMBOL - 1, -1)
    fresh = lambda: next(counter)
    for _ in range(max(0, unroll_k)):
        s_lo, s_hi = s.hull()
        if not _guard_must_continue(x_lo, x_hi, s_lo, s_hi, task.epsilon):
            break
        s = householder_step_abstract(x, s, fresh)
        if s.hull()[1] - s.hull()[0] > ABORT_WIDTH:
            return "Diverged"
    # Join phase: accumulate the interval hull until it stabilizes.
    sym = X_SYMBOL + 1
    joins = 0
    while True:
        nxt = householder_step_abstract(x, s)
        n_lo, n_hi = nxt.hull()
        s_lo, s_hi = s.hull()
        if not math.isfinite(n_lo) or not math.isfinite(n_hi) or n_hi - n_lo > ABORT_WIDTH:
            return "Diverged"
        if n_lo >= s_lo - 1e-12 and n_hi <= s_hi + 1e-12:
            break
        j_lo, j_hi = min(s_lo, n_lo), max(s_hi, n_hi)
        if joins >= 200:
            pad = 0.1 * (j_hi - j_lo)
            j_lo, j_hi = j_lo - pad, j_hi + pad
        sym += 1
        s = AffineForm(0.5 * (j_lo + j_hi), {sym: 0.5 * (j_hi - j_lo)})
        joins += 1
        if j_hi - j_lo > ABORT_WIDTH:
            return "Diverged"
        if joins > 10000:
            return "Diverged"
    s_lo, s_hi = s.hull()
    if s_lo <= 0:
        return "Diverged"
    return 1.0 / s_hi, 1.0 / s_lo
