"""Monotone implicit-layer models and their fixpoint solvers.

The latent state solves z = ReLU(W z + U x + bias) with
W = (1 - m) I - P^T P + Q - Q^T, which makes I - W strongly monotone
(symmetric part at least m I).  Two solvers are provided:

- damped forward iteration ("fb"), convergent for small enough step size;
- a resolvent-based splitting ("pr") with auxiliary state u, convergent
  for any positive step size.

Both have abstract counterparts built from the chzono transformers.  The
abstract state keeps the input's generator columns as its leading columns
(tracked by x_cols on IterationState) so the input stays correlated
across iterations.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import chzono, numerics
from .engine import IterationState
from .errors import NonConvergence, ShapeMismatch


@dataclass(frozen=True)
class MonDeqParams:
    P: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    bias: np.ndarray
    V: np.ndarray
    v: np.ndarray
    m: float

    def __post_init__(self):
        for name in ("P", "Q", "U", "bias", "V", "v"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.m <= 0:
            raise ValueError("monotonicity parameter m must be positive")
        p = self.U.shape[0]
        if self.P.shape != (p, p) or self.Q.shape != (p, p):
            raise ShapeMismatch("P and Q must be p x p")
        if self.bias.shape != (p,):
            raise ShapeMismatch("bias must have length p")
        if self.V.ndim != 2 or self.V.shape[1] != p:
            raise ShapeMismatch("V must be r x p")
        if self.v.shape != (self.V.shape[0],):
            raise ShapeMismatch("v must have length r")

    @property
    def p(self):
        return self.U.shape[0]

    @property
    def q(self):
        return self.U.shape[1]

    @property
    def n_classes(self):
        return self.V.shape[0]


@dataclass(frozen=True)
class MonDeqWeights:
    params: MonDeqParams
    W: np.ndarray
    I_minus_W: np.ndarray
    _resolvents: dict = field(default_factory=dict, compare=False)

    def resolvent(self, alpha):
        """(I + alpha (I - W))^-1, cached per step size."""
        key = float(alpha)
        if key not in self._resolvents:
            p = self.params.p
            self._resolvents[key] = numerics.invert(np.eye(p) + key * self.I_minus_W)
        return self._resolvents[key]


@dataclass
class SolverConfig:
    method: str = "pr"              # "fb" or "pr"
    alpha: float = 0.1
    tol: float = 1e-10
    max_steps: int = 10**6

    def __post_init__(self):
        if self.method not in ("fb", "pr"):
            raise ValueError("method must be 'fb' or 'pr'")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def build_weights(params):
    """Derive W and verify the monotonicity of I - W."""
    p = params.p
    W = (1.0 - params.m) * np.eye(p) - params.P.T @ params.P + params.Q - params.Q.T
    I_minus_W = np.eye(p) - W
    if numerics.min_sym_eig(I_minus_W) < params.m - 1e-6:
        raise ValueError("monotonicity invariant violated")
    return MonDeqWeights(params, W, I_minus_W)


def fb_alpha_max(weights, m):
    """Convergence bound 2 m / ||I - W||^2 for the damped forward solver.

    Uses the Frobenius norm of I - W, a conservative upper bound of the
    spectral norm, so every step size below the returned value is safe.
    """
    nrm = numerics.frobenius_norm(weights.I_minus_W)
    return 2.0 * m / (nrm * nrm)


def fb_step(x, s, weights, alpha):
    """One damped forward step ReLU((1-a) s + a (W s + U x + bias))."""
    params = weights.params
    pre = (1.0 - alpha) * s + alpha * (weights.W @ s + params.U @ x + params.bias)
    return np.maximum(pre, 0.0)


def pr_step(x, s, weights, alpha):
    """One resolvent splitting step on the stacked state s = [z; u]."""
    params = weights.params
    p = params.p
    z, u = s[:p], s[p:]
    M = weights.resolvent(alpha)
    u_half = 2.0 * z - u
    z_half = M @ (u_half + alpha * (params.U @ x + params.bias))
    u_next = 2.0 * z_half - u_half
    z_next = np.maximum(u_next, 0.0)
    return np.concatenate([z_next, u_next])


def solve_fixpoint(x, weights, cfg):
    """Iterate the chosen solver until the z residual drops below cfg.tol."""
    x = np.asarray(x, dtype=float)
    p = weights.params.p
    if cfg.method == "fb":
        s = np.zeros(p)
        for _ in range(cfg.max_steps):
            s_next = fb_step(x, s, weights, cfg.alpha)
            if not np.all(np.isfinite(s_next)):
                raise NonConvergence("forward iteration produced non-finite values")
            if np.linalg.norm(s_next - s) <= cfg.tol:
                return s_next
            s = s_next
        raise NonConvergence(f"no fixpoint within {cfg.max_steps} steps")
    s = np.zeros(2 * p)
    for _ in range(cfg.max_steps):
        s_next = pr_step(x, s, weights, cfg.alpha)
        if not np.all(np.isfinite(s_next)):
            raise NonConvergence("splitting iteration produced non-finite values")
        if np.linalg.norm(s_next[:p] - s[:p]) <= cfg.tol:
            return s_next[:p]
        s = s_next
    raise NonConvergence(f"no fixpoint within {cfg.max_steps} steps")


def _joint_affine(M_state, state_z, x, x_cols, x_coef, offset):
    """Generators of M_state @ state + x_coef @ x + offset with shared columns.

    The leading x_cols columns of the state's generator matrix carry the
    same symbols as the input's generator columns; the input contribution
    is merged into them instead of appended, which preserves correlation.
    Returns (center, generators, n_shared).
    """
    kx = x.A.shape[1]
    cols = M_state @ _cast_cols(state_z)
    xpart = x_coef @ x.A
    if x_cols:
        if x_cols != kx:
            raise ValueError("shared column count does not match the input's")
        cols[:, :kx] += xpart
        gen = cols
    else:
        gen = np.hstack([xpart, cols])
    if np.any(x.b > 0):
        gen = np.hstack([gen, x_coef @ np.diag(x.b)])
    center = M_state @ state_z.a + x_coef @ x.a + offset
    return center, gen, kx


def _cast_cols(z):
    nz = np.flatnonzero(z.b > 0)
    if nz.size == 0:
        return z.A.copy()
    cols = np.zeros((z.dim, nz.size))
    cols[nz, np.arange(nz.size)] = z.b[nz]
    return np.hstack([z.A, cols])


def fb_pre_activation(x, s, weights, alpha, x_cols=0):
    """Pre-ReLU affine image of one damped forward step."""
    params = weights.params
    p = params.p
    M = (1.0 - alpha) * np.eye(p) + alpha * weights.W
    center, gen, kx = _joint_affine(
        M, s, x, x_cols, alpha * params.U, alpha * params.bias
    )
    return chzono.CHZonotope(center, gen, np.zeros(p), proper=False), kx


def fb_abstract(x, s, weights, alpha, x_cols=0, slopes=None):
    """Abstract damped forward step; returns (element, shared column count)."""
    pre, kx = fb_pre_activation(x, s, weights, alpha, x_cols)
    return chzono.relu(pre, slopes), kx


def pr_abstract(x, s, weights, alpha, x_cols=0, slopes=None):
    """Abstract resolvent splitting step on the stacked state [z; u].

    The three affine half-steps compose into one exact affine map onto the
    next u, followed by one ReLU for the next z.
    """
    params = weights.params
    p = params.p
    M = weights.resolvent(alpha)
    # u_next = (4M - 2I) z + (I - 2M) u + 2 a M (U x + bias)
    T = np.hstack([4.0 * M - 2.0 * np.eye(p), np.eye(p) - 2.0 * M])
    center, gen, kx = _joint_affine(
        T, s, x, x_cols, 2.0 * alpha * (M @ params.U), 2.0 * alpha * (M @ params.bias)
    )
    u_next = chzono.CHZonotope(center, gen, np.zeros(p), proper=False)
    z_next = chzono.relu(u_next, slopes)
    stacked = chzono.CHZonotope(
        np.concatenate([z_next.a, u_next.a]),
        np.vstack([z_next.A, u_next.A]),
        np.concatenate([z_next.b, u_next.b]),
        proper=False,
    )
    return stacked, kx


class FbTransformer:
    """AbstractTransformer wrapper for the damped forward solver."""

    def __init__(self, weights, alpha, slopes=None):
        self.weights = weights
        self.alpha = alpha
        self.slopes = slopes  # optional per-step list or a single vector
        self.name = f"fb(alpha={alpha:g})"

    def _slopes_for(self, step):
        if self.slopes is None:
            return None
        if isinstance(self.slopes, list):
            return self.slopes[step] if step < len(self.slopes) else None
        return self.slopes

    def apply(self, x, state):
        if state.u_dims:
            state = state.z_marginal()
        out, kx = fb_abstract(
            x, state.s, self.weights, self.alpha, state.x_cols,
            self._slopes_for(state.step),
        )
        return replace(state, s=out, x_cols=kx, step=state.step + 1)


class PrTransformer:
    """AbstractTransformer wrapper for the resolvent splitting solver."""

    def __init__(self, weights, alpha):
        self.weights = weights
        self.alpha = alpha
        self.name = f"pr(alpha={alpha:g})"

    def apply(self, x, state):
        if state.u_dims != state.z_dims:
            raise ValueError("splitting transformer needs a stacked [z; u] state")
        out, kx = pr_abstract(x, state.s, self.weights, self.alpha, state.x_cols)
        return replace(state, s=out, x_cols=kx, step=state.step + 1)


def initial_state(weights, x, cfg=None):
    """Stacked point state at the concrete fixpoint of the center input."""
    if cfg is None:
        cfg = SolverConfig(method="pr", alpha=0.1)
    z_star = solve_fixpoint(x, weights, cfg)
    p = weights.params.p
    return IterationState(
        chzono.point(np.concatenate([z_star, z_star])), z_dims=p, u_dims=p
    )


def random_monotone_model(p, q, r, m, seed):
    """Random parameters at desk scale; deterministic for a fixed seed."""
    if p < 1 or q < 1 or r < 1:
        raise ValueError("p, q, r must be at least 1")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(p)
    return MonDeqParams(
        P=rng.uniform(-1.0, 1.0, (p, p)) * scale,
        Q=rng.uniform(-1.0, 1.0, (p, p)) * scale,
        U=rng.uniform(-1.0, 1.0, (p, q)) * scale,
        bias=rng.uniform(-0.5, 0.5, p),
        V=rng.uniform(-1.0, 1.0, (r, p)) * scale,
        v=rng.uniform(-0.5, 0.5, r),
        m=float(m),
    )
