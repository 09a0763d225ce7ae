"""Two-phase abstract fixpoint engine.

Phase 1 ("contract") iterates a sound abstract transformer of a convergent
solver, periodically reducing the state to its invertible normal form with
a small deliberate inflation, until the current state is contained in one
of the recently reduced states.  Such a containment proves that the state
encloses every true fixpoint reachable under the input set.

Phase 2 ("tighten") iterates a fixpoint-set-preserving transformer from
that enclosure; every iterate remains a valid enclosure, so a
postcondition check may be evaluated after each step without any further
containment requirement.
"""

import csv
import enum
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import chzono, numerics
from .errors import Diverged, Exhausted


@dataclass
class EngineConfig:
    r: int = 3                      # iterations between consolidations
    pca_refresh: int = 30           # consolidation events between basis recomputes
    history_len: int = 10           # consolidated states kept for containment
    n_max: int = 500                # iteration budget per phase
    abort_width: float = 1e9        # divergence threshold on the hull width
    r_prime: int = 50               # reporting period; stall window = 3 * r_prime
    stall_window: Optional[int] = None
    w_mul: float = 1e-3             # multiplicative inflation at consolidation
    w_add: float = 1e-2             # additive inflation at consolidation
    expansion_schedule: str = "const"  # "const" or "exp"

    def __post_init__(self):
        if self.r < 1 or self.history_len < 1 or self.n_max < 1:
            raise ValueError("r, history_len and n_max must be at least 1")
        if self.w_mul < 0 or self.w_add < 0:
            raise ValueError("expansion parameters must be non-negative")
        if self.expansion_schedule not in ("const", "exp"):
            raise ValueError("expansion_schedule must be 'const' or 'exp'")
        if self.stall_window is None:
            self.stall_window = 3 * self.r_prime


@dataclass(frozen=True)
class IterationState:
    """Solver state as one abstract element over stacked dimensions [z; u].

    x_cols counts the leading generator columns whose symbols are shared
    with the input abstraction; transformers use it to keep the input
    correlated across iterations.
    """

    s: chzono.CHZonotope
    z_dims: int
    u_dims: int = 0
    step: int = 0
    x_cols: int = 0

    def __post_init__(self):
        if self.s.dim != self.z_dims + self.u_dims:
            raise ValueError("state dimension must equal z_dims + u_dims")

    def z_marginal(self):
        """Project onto the z rows (drop u rows); a sound projection."""
        if self.u_dims == 0:
            return self
        p = self.z_dims
        s = chzono.CHZonotope(self.s.a[:p], self.s.A[:p, :], self.s.b[:p], proper=False)
        return IterationState(s, p, 0, self.step, self.x_cols)


class Trace:
    """Per-step record of the run, exportable as CSV."""

    COLUMNS = ("step", "phase", "mean_width", "margin")

    def __init__(self):
        self.rows = []
        self.consolidation_pairs = []  # (width_before, width_after)

    def add(self, step, phase, mean_width, margin=None):
        self.rows.append((step, phase, float(mean_width), margin))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for step, phase, width, margin in self.rows:
                writer.writerow([step, phase, repr(width), "" if margin is None else repr(margin)])


class Status(enum.Enum):
    CERTIFIED = "Certified"
    UNKNOWN = "Unknown"
    DIVERGED = "Diverged"
    EXHAUSTED = "Exhausted"


@dataclass
class Verdict:
    status: Status
    margin: float = float("-inf")
    phase1_steps: int = 0
    phase2_steps: int = 0
    wallclock: float = 0.0
    trace: Optional[Trace] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "status": self.status.value,
            "margin": None if self.margin == float("-inf") else self.margin,
            "phase1_steps": self.phase1_steps,
            "phase2_steps": self.phase2_steps,
            "wallclock": self.wallclock,
            **self.extra,
        }


def _mean_width(z):
    lo, hi = chzono.interval_hull(z)
    return float(np.mean(hi - lo))


def _max_width(z):
    lo, hi = chzono.interval_hull(z)
    return float(np.max(hi - lo))


def check_history(current, history):
    """Index of the first history element containing current, else None."""
    for idx, h in enumerate(history):
        if chzono.contains(h, current):
            return idx
    return None


def phase1_contract(g1, x, s0, cfg, trace=None):
    """Iterate g1 with periodic consolidation until contraction is found.

    Returns (state, trace) where the state is contained in one of the
    recently consolidated states and therefore encloses the true fixpoint
    set.  Raises Diverged or Exhausted otherwise.
    """
    if trace is None:
        trace = Trace()
    state = s0
    history = deque(maxlen=cfg.history_len)
    basis = None
    consolidations = 0
    w_mul, w_add = cfg.w_mul, cfg.w_add
    for n in range(1, cfg.n_max + 1):
        if (n - 1) % cfg.r == 0:
            if basis is None or consolidations % cfg.pca_refresh == 0:
                basis = numerics.pca_basis(state.s.A)
            width_before = _mean_width(state.s)
            cons = chzono.consolidate(state.s, basis, w_mul, w_add)
            state = replace(state, s=cons, x_cols=0)
            consolidations += 1
            trace.consolidation_pairs.append((width_before, _mean_width(cons)))
            trace.add(state.step, "consolidate", _mean_width(cons))
            history.append(state)
        if cfg.expansion_schedule == "exp" and n % 2 == 0:
            w_mul *= 1.1
            w_add *= 1.2
        state = g1.apply(x, state)
        trace.add(state.step, "phase1", _mean_width(state.s))
        if _max_width(state.s) > cfg.abort_width:
            raise Diverged(f"hull width exceeded {cfg.abort_width:.0e} at step {state.step}")
        if history and check_history(state.s, [h.s for h in history]) is not None:
            return state, trace
    raise Exhausted(f"no contraction within {cfg.n_max} iterations")


def phase2_tighten(g2, x, s_star, check, cfg, trace=None):
    """Iterate g2 from an enclosure, testing the postcondition each step.

    check maps an IterationState to (ok, margin).  Returns Certified on
    the first success, Unknown after a stall (no margin improvement within
    cfg.stall_window steps) or when the budget runs out.
    """
    if trace is None:
        trace = Trace()
    t0 = time.perf_counter()
    state = s_star
    best = float("-inf")
    last_gain = 0
    for j in range(1, cfg.n_max + 1):
        state = g2.apply(x, state)
        ok, margin = check(state)
        trace.add(state.step, "phase2", _mean_width(state.s), margin)
        if _max_width(state.s) > cfg.abort_width:
            raise Diverged(f"hull width exceeded {cfg.abort_width:.0e} at step {state.step}")
        if ok:
            return Verdict(
                Status.CERTIFIED, margin, phase2_steps=j,
                wallclock=time.perf_counter() - t0, trace=trace,
            )
        if margin > best + 1e-9:
            best = margin
            last_gain = j
        if j - last_gain >= cfg.stall_window:
            break
    return Verdict(
        Status.UNKNOWN, best, phase2_steps=j,
        wallclock=time.perf_counter() - t0, trace=trace,
    )
