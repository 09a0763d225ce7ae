"""End-to-end robustness certification for monotone implicit-layer models.

verify_local runs the two-phase engine (contract with the splitting
transformer, tighten with a line-searched forward transformer or the
splitting one) and checks the classification margin on the output layer.
verify_kleene and verify_box are baselines sharing the same postcondition;
verify_global bisects an input box and certifies leaves with verify_local.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import chzono, engine, mondeq
from .engine import EngineConfig, IterationState, Status, Trace, Verdict
from .errors import Diverged, Exhausted


@dataclass
class VerificationTask:
    model: mondeq.MonDeqParams
    x: np.ndarray
    epsilon: float              # scalar radius or per-dimension vector
    target: int
    g1: mondeq.SolverConfig = field(default_factory=lambda: mondeq.SolverConfig("pr", 0.1))
    g2: str = "fb-linesearch"   # "fb-linesearch" | "pr" | "fb:<alpha>"
    engine: EngineConfig = field(default_factory=EngineConfig)
    lambda_opt: str = "off"     # "off" | "reduced" | "full"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        eps = np.asarray(self.epsilon, dtype=float)
        if np.any(eps < 0):
            raise ValueError("epsilon must be non-negative")
        self.epsilon = eps
        n = self.model.n_classes
        limit = 2 if n == 1 else n
        if not (0 <= self.target < limit):
            raise ValueError("target class out of range")
        if self.lambda_opt not in ("off", "reduced", "full"):
            raise ValueError("lambda_opt must be off, reduced or full")


def _radius_vector(task):
    eps = task.epsilon
    if eps.ndim == 0:
        return np.full(task.model.q, float(eps))
    return eps


def input_abstraction(task):
    rad = _radius_vector(task)
    if np.all(rad == 0):
        return chzono.point(task.x)
    return chzono.from_box(task.x, rad)


def _margin_directions(model, target):
    """Rows (d, offset) so that the margin is min_i lower_bound(d.z + offset)."""
    V, v = model.V, model.v
    if model.n_classes == 1:
        # Single logit: class 1 means positive output, class 0 negative.
        sign = 1.0 if target == 1 else -1.0
        return [(sign * V[0], sign * v[0])]
    return [
        (V[target] - V[i], float(v[target] - v[i]))
        for i in range(model.n_classes)
        if i != target
    ]


def classify(model, weights, x, solver=None):
    """Concrete class decision at input x."""
    if solver is None:
        solver = mondeq.SolverConfig("pr", 0.1)
    z = mondeq.solve_fixpoint(x, weights, solver)
    y = model.V @ z + model.v
    if model.n_classes == 1:
        return 1 if y[0] > 0 else 0
    return int(np.argmax(y))


def margin_of_state(model, target, state):
    """Worst-class lower bound of the output margin over a state."""
    z = state.z_marginal().s
    worst = math.inf
    for d, off in _margin_directions(model, target):
        lo, _ = chzono.linear_bounds(z, d)
        worst = min(worst, lo + off)
    return worst


def _margin_check(model, target):
    def check(state):
        m = margin_of_state(model, target, state)
        return m > 0, m
    return check


def _golden_section_max(f, lo, hi, probes):
    """Golden-section maximization with a fixed probe budget; returns argmax."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(max(0, probes - 2)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f


# Line-search parameters for the tightening step size: probe run length and
# number of objective evaluations.
PROBE_STEPS = 30
PROBE_COUNT = 12


def _line_search_alpha(weights, x_hat, s_star, check, cfg):
    """Pick the forward step size maximizing the margin after a short probe."""

    def objective(alpha):
        state = s_star.z_marginal()
        g = mondeq.FbTransformer(weights, alpha)
        margin = -math.inf
        for _ in range(PROBE_STEPS):
            state = g.apply(x_hat, state)
            if engine._max_width(state.s) > cfg.abort_width:
                return -math.inf
        _, margin = check(state)
        return margin

    alpha, _ = _golden_section_max(objective, 0.02, 1.0, PROBE_COUNT)
    return alpha


@dataclass
class _LambdaContext:
    weights: mondeq.MonDeqWeights
    x_hat: chzono.CHZonotope
    s_star: IterationState
    alpha: float
    check: object


def _run_slope_prefix(ctx, offsets, record=False):
    """Run the tightening prefix with per-step slope offsets.

    Each offset shifts the default crossing slope of that step, clipped to
    [0, 1].  Returns (margin after the prefix, end state, recorded slope
    vectors if requested).
    """
    state = ctx.s_star.z_marginal()
    recorded = []
    for j, delta in enumerate(offsets):
        pre, kx = mondeq.fb_pre_activation(
            ctx.x_hat, state.s, ctx.weights, ctx.alpha, state.x_cols
        )
        lo, hi = chzono.interval_hull(pre)
        lam = np.ones(pre.dim)
        crossing = (lo < 0) & (hi > 0)
        lam[crossing] = np.clip(
            hi[crossing] / (hi[crossing] - lo[crossing]) + delta, 0.0, 1.0
        )
        out = chzono.relu(pre, chzono.ReluSlopes(lam))
        if record:
            recorded.append(chzono.ReluSlopes(lam))
        state = replace(state, s=out, x_cols=kx, step=state.step + 1)
    _, margin = ctx.check(state)
    return margin, state, recorded


def optimize_lambda(task, unroll, evals, _context=None):
    """Zeroth-order search over per-step ReLU slopes for the tightening prefix.

    Cyclic coordinate search: one scalar slope offset per unrolled step,
    refined with a 3-point quadratic fit (linear objectives push to the
    boundary).  Never returns a configuration worse than the default.
    """
    if _context is None:
        _context = _prepare_lambda_context(task)
    ctx = _context
    offsets = np.zeros(unroll)
    base_margin, _, base_slopes = _run_slope_prefix(ctx, offsets, record=True)
    if evals <= 0 or unroll == 0:
        return base_slopes, base_margin, offsets
    best_margin = base_margin
    used = 0
    step_size = 0.25
    while used < evals:
        improved = False
        for j in range(unroll):
            if used + 2 > evals:
                break
            lo_off = np.clip(offsets[j] - step_size, -1.0, 1.0)
            hi_off = np.clip(offsets[j] + step_size, -1.0, 1.0)
            trial = offsets.copy()
            trial[j] = lo_off
            m_lo, _, _ = _run_slope_prefix(ctx, trial)
            trial[j] = hi_off
            m_hi, _, _ = _run_slope_prefix(ctx, trial)
            used += 2
            points = [(lo_off, m_lo), (offsets[j], best_margin), (hi_off, m_hi)]
            # Quadratic fit through the three points; fall back to the best
            # endpoint pushed to the boundary when the fit is not concave.
            cand = None
            (x0, f0), (x1, f1), (x2, f2) = points
            denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
            if abs(denom) > 1e-12:
                a_coef = (x2 * (f1 - f0) + x1 * (f0 - f2) + x0 * (f2 - f1)) / denom
                b_coef = (
                    x2 * x2 * (f0 - f1) + x1 * x1 * (f2 - f0) + x0 * x0 * (f1 - f2)
                ) / denom
                if a_coef < -1e-12:
                    cand = np.clip(-b_coef / (2.0 * a_coef), -1.0, 1.0)
            if cand is None:
                if m_lo >= best_margin or m_hi >= best_margin:
                    cand = -1.0 if m_lo >= m_hi else 1.0
            if cand is not None and used < evals:
                trial = offsets.copy()
                trial[j] = cand
                m_cand, _, _ = _run_slope_prefix(ctx, trial)
                used += 1
                best_here = max(
                    [(m_lo, lo_off), (m_hi, hi_off), (m_cand, cand)],
                    key=lambda t: t[0],
                )
                if best_here[0] > best_margin + 1e-12:
                    best_margin = best_here[0]
                    offsets[j] = best_here[1]
                    improved = True
        if not improved:
            step_size *= 0.5
            if step_size < 1e-3:
                break
    if best_margin <= base_margin:
        return base_slopes, base_margin, np.zeros(unroll)
    final_margin, _, slopes = _run_slope_prefix(ctx, offsets, record=True)
    if final_margin < base_margin:
        return base_slopes, base_margin, np.zeros(unroll)
    return slopes, final_margin, offsets


def _prepare_lambda_context(task):
    weights = mondeq.build_weights(task.model)
    x_hat = input_abstraction(task)
    s0 = mondeq.initial_state(weights, task.x, task.g1)
    g1 = mondeq.PrTransformer(weights, task.g1.alpha)
    s_star, _ = engine.phase1_contract(g1, x_hat, s0, task.engine)
    check = _margin_check(task.model, task.target)
    alpha = _line_search_alpha(weights, x_hat, s_star, check, task.engine)
    return _LambdaContext(weights, x_hat, s_star, alpha, check)


# Trigger threshold for the slope optimization: only attempted when the
# default margin is within this fraction of the output hull width of zero.
LAMBDA_TRIGGER = 0.1

_LAMBDA_BUDGETS = {"reduced": (20, 60), "full": (40, 200)}


def verify_local(task):
    """Two-phase certification of local robustness around task.x."""
    t0 = time.perf_counter()
    weights = mondeq.build_weights(task.model)
    x_hat = input_abstraction(task)
    check = _margin_check(task.model, task.target)
    trace = Trace()
    try:
        if task.g1.method == "pr":
            s0 = mondeq.initial_state(weights, task.x, task.g1)
            g1 = mondeq.PrTransformer(weights, task.g1.alpha)
        else:
            z_star = mondeq.solve_fixpoint(task.x, weights, task.g1)
            s0 = IterationState(chzono.point(z_star), z_dims=task.model.p)
            g1 = mondeq.FbTransformer(weights, task.g1.alpha)
        s_star, trace = engine.phase1_contract(g1, x_hat, s0, task.engine, trace)
    except Diverged:
        return Verdict(Status.DIVERGED, wallclock=time.perf_counter() - t0, trace=trace)
    except Exhausted:
        return Verdict(Status.EXHAUSTED, wallclock=time.perf_counter() - t0, trace=trace)
    phase1_steps = s_star.step

    policy = task.g2
    if policy == "pr":
        g2 = mondeq.PrTransformer(weights, task.g1.alpha)
        s2_init = s_star
        alpha2 = task.g1.alpha
    else:
        if policy == "fb-linesearch":
            alpha2 = _line_search_alpha(weights, x_hat, s_star, check, task.engine)
        elif policy.startswith("fb:"):
            alpha2 = float(policy.split(":", 1)[1])
        else:
            raise ValueError(f"unknown tightening policy {policy!r}")
        g2 = mondeq.FbTransformer(weights, alpha2)
        s2_init = s_star.z_marginal()

    try:
        verdict = engine.phase2_tighten(g2, x_hat, s2_init, check, task.engine, trace)
    except Diverged:
        return Verdict(
            Status.DIVERGED, phase1_steps=phase1_steps,
            wallclock=time.perf_counter() - t0, trace=trace,
        )
    verdict.phase1_steps = phase1_steps
    verdict.extra["alpha2"] = alpha2

    if (
        verdict.status is not Status.CERTIFIED
        and task.lambda_opt in _LAMBDA_BUDGETS
        and policy != "pr"
    ):
        scale = max(
            abs(b)
            for d, off in _margin_directions(task.model, task.target)
            for b in chzono.linear_bounds(s_star.z_marginal().s, d)
        )
        if verdict.margin > -LAMBDA_TRIGGER * max(scale, 1e-12):
            unroll, evals = _LAMBDA_BUDGETS[task.lambda_opt]
            ctx = _LambdaContext(weights, x_hat, s_star, alpha2, check)
            slopes, margin, _ = optimize_lambda(task, unroll, evals, _context=ctx)
            # Re-run the prefix with the chosen explicit slopes, then keep
            # tightening with the default transformer.
            state = s_star.z_marginal()
            g_sloped = mondeq.FbTransformer(weights, alpha2, slopes=list(slopes))
            certified_mid = None
            base_step = state.step
            for _ in range(len(slopes)):
                state = g_sloped.apply(x_hat, state)
                ok, m2 = check(state)
                trace.add(state.step, "phase2-slope", engine._mean_width(state.s), m2)
                if ok:
                    certified_mid = m2
                    break
            if certified_mid is not None:
                verdict = Verdict(
                    Status.CERTIFIED, certified_mid, phase1_steps=phase1_steps,
                    phase2_steps=state.step - base_step, trace=trace,
                )
            else:
                cont = engine.phase2_tighten(g2, x_hat, state, check, task.engine, trace)
                if cont.status is Status.CERTIFIED or cont.margin > verdict.margin:
                    cont.phase1_steps = phase1_steps
                    cont.extra["alpha2"] = alpha2
                    verdict = cont

    verdict.wallclock = time.perf_counter() - t0
    verdict.trace = trace
    return verdict


def verify_kleene(task, domain="zonotope", unroll_k=2):
    """Baseline: join-free unrolling, then interval-hull joins to a post-fixpoint."""
    t0 = time.perf_counter()
    weights = mondeq.build_weights(task.model)
    model = task.model
    if task.g1.method == "fb":
        alpha = task.g1.alpha
    else:
        alpha = min(0.9 * mondeq.fb_alpha_max(weights, model.m), 1.0)
    x_hat = input_abstraction(task)
    if domain == "box":
        x_hat = _as_box(x_hat)
    state = IterationState(chzono.point(np.zeros(model.p)), z_dims=model.p)
    g = mondeq.FbTransformer(weights, alpha)
    trace = Trace()
    steps = 0
    for _ in range(max(0, unroll_k)):
        state = g.apply(x_hat, state)
        if domain == "box":
            state = replace(state, s=_as_box(state.s), x_cols=0)
        steps += 1
        trace.add(steps, "unroll", engine._mean_width(state.s))
    joins = 0
    widen = False
    while True:
        nxt = g.apply(x_hat, state)
        if domain == "box":
            nxt = replace(nxt, s=_as_box(nxt.s), x_cols=0)
        steps += 1
        lo_s, hi_s = chzono.interval_hull(state.s)
        lo_n, hi_n = chzono.interval_hull(nxt.s)
        if np.all(lo_n >= lo_s - 1e-9) and np.all(hi_n <= hi_s + 1e-9):
            break  # post-fixpoint on the hull
        lo_j = np.minimum(lo_s, lo_n)
        hi_j = np.maximum(hi_s, hi_n)
        if widen:
            pad = 0.1 * (hi_j - lo_j)
            lo_j, hi_j = lo_j - pad, hi_j + pad
        joined = chzono.from_box(0.5 * (lo_j + hi_j), 0.5 * (hi_j - lo_j))
        state = replace(state, s=joined, x_cols=0, step=steps)
        joins += 1
        trace.add(steps, "join", engine._mean_width(state.s))
        if np.max(hi_j - lo_j) > task.engine.abort_width:
            return Verdict(
                Status.DIVERGED, phase1_steps=steps,
                wallclock=time.perf_counter() - t0, trace=trace,
            )
        if joins >= 200:
            widen = True
        if steps > 100000:
            return Verdict(
                Status.EXHAUSTED, phase1_steps=steps,
                wallclock=time.perf_counter() - t0, trace=trace,
            )
    margin = margin_of_state(model, task.target, state)
    status = Status.CERTIFIED if margin > 0 else Status.UNKNOWN
    return Verdict(
        status, margin, phase1_steps=steps,
        wallclock=time.perf_counter() - t0, trace=trace,
        extra={"hull": [chzono.interval_hull(state.s)[0].tolist(),
                        chzono.interval_hull(state.s)[1].tolist()]},
    )


def _as_box(z):
    lo, hi = chzono.interval_hull(z)
    return chzono.CHZonotope(0.5 * (lo + hi), np.zeros((z.dim, 0)), 0.5 * (hi - lo))


def _box_contains(outer, inner):
    lo_o, hi_o = chzono.interval_hull(outer)
    lo_i, hi_i = chzono.interval_hull(inner)
    return bool(np.all(lo_i >= lo_o - 1e-9) and np.all(hi_i <= hi_o + 1e-9))


def verify_box(task):
    """Interval-only variant of the two-phase pipeline (no generator matrix)."""
    t0 = time.perf_counter()
    cfg = task.engine
    weights = mondeq.build_weights(task.model)
    model = task.model
    x_hat = _as_box(input_abstraction(task))
    check = _margin_check(model, task.target)
    if task.g1.method == "pr":
        s0 = mondeq.initial_state(weights, task.x, task.g1)
        g1 = mondeq.PrTransformer(weights, task.g1.alpha)
    else:
        z_star = mondeq.solve_fixpoint(task.x, weights, task.g1)
        s0 = IterationState(chzono.point(z_star), z_dims=model.p)
        g1 = mondeq.FbTransformer(weights, task.g1.alpha)
    state = replace(s0, s=_as_box(s0.s))
    trace = Trace()
    history = []
    found = False
    for n in range(1, cfg.n_max + 1):
        if (n - 1) % cfg.r == 0:
            grown = chzono.CHZonotope(
                state.s.a, state.s.A, (1.0 + cfg.w_mul) * state.s.b + cfg.w_add
            )
            state = replace(state, s=grown)
            history.append(state.s)
            history = history[-cfg.history_len:]
        state = g1.apply(x_hat, state)
        state = replace(state, s=_as_box(state.s), x_cols=0)
        trace.add(state.step, "phase1", engine._mean_width(state.s))
        if engine._max_width(state.s) > cfg.abort_width:
            return Verdict(
                Status.DIVERGED, phase1_steps=state.step,
                wallclock=time.perf_counter() - t0, trace=trace,
            )
        if any(_box_contains(h, state.s) for h in history):
            found = True
            break
    if not found:
        return Verdict(
            Status.EXHAUSTED, phase1_steps=state.step,
            wallclock=time.perf_counter() - t0, trace=trace,
        )
    phase1_steps = state.step
    g2 = g1 if task.g1.method == "fb" else mondeq.PrTransformer(weights, task.g1.alpha)
    best = -math.inf
    last_gain = 0
    for j in range(1, cfg.n_max + 1):
        state = g2.apply(x_hat, state)
        state = replace(state, s=_as_box(state.s), x_cols=0)
        ok, margin = check(state)
        trace.add(state.step, "phase2", engine._mean_width(state.s), margin)
        if engine._max_width(state.s) > cfg.abort_width:
            return Verdict(
                Status.DIVERGED, phase1_steps=phase1_steps, phase2_steps=j,
                wallclock=time.perf_counter() - t0, trace=trace,
            )
        if ok:
            return Verdict(
                Status.CERTIFIED, margin, phase1_steps=phase1_steps, phase2_steps=j,
                wallclock=time.perf_counter() - t0, trace=trace,
            )
        if margin > best + 1e-9:
            best = margin
            last_gain = j
        if j - last_gain >= cfg.stall_window:
            break
    return Verdict(
        Status.UNKNOWN, best, phase1_steps=phase1_steps, phase2_steps=j,
        wallclock=time.perf_counter() - t0, trace=trace,
    )


@dataclass
class RegionReport:
    leaves: list            # dicts: lo, hi, status, label, depth
    certified_fraction: float

    def to_json(self):
        return json.dumps(
            {"certified_fraction": self.certified_fraction, "leaves": self.leaves},
            indent=2,
        )

    def to_csv(self, path):
        import csv as _csv

        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["lo", "hi", "status", "label", "depth"])
            for leaf in self.leaves:
                writer.writerow([
                    ";".join(repr(t) for t in leaf["lo"]),
                    ";".join(repr(t) for t in leaf["hi"]),
                    leaf["status"], leaf["label"], leaf["depth"],
                ])


def verify_global(model, input_box, max_depth, base_task=None, jobs=1):
    """Certify an input box by recursive bisection of the widest dimension.

    A leaf is certified when verify_local around its center, with the
    leaf's own radii, proves the concrete class of the center.  Returns
    per-leaf labels and the certified volume fraction.
    """
    lo0 = np.asarray(input_box[0], dtype=float)
    hi0 = np.asarray(input_box[1], dtype=float)
    weights = mondeq.build_weights(model)
    total_volume = float(np.prod(hi0 - lo0)) or 1.0

    def make_task(lo, hi):
        center = 0.5 * (lo + hi)
        radius = 0.5 * (hi - lo)
        label = classify(model, weights, center)
        if base_task is None:
            task = VerificationTask(model, center, radius, label)
        else:
            task = VerificationTask(
                model, center, radius, label,
                g1=base_task.g1, g2=base_task.g2, engine=base_task.engine,
                lambda_opt=base_task.lambda_opt,
            )
        return task, label

    def process(item):
        lo, hi, depth = item
        task, label = make_task(lo, hi)
        verdict = verify_local(task)
        return lo, hi, depth, label, verdict

    leaves = []
    queue = [(lo0, hi0, 0)]
    while queue:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(process, queue))
        else:
            results = [process(item) for item in queue]
        queue = []
        for lo, hi, depth, label, verdict in results:
            if verdict.status is Status.CERTIFIED:
                leaves.append({
                    "lo": lo.tolist(), "hi": hi.tolist(),
                    "status": "certified", "label": label, "depth": depth,
                })
            elif depth < max_depth:
                widest = int(np.argmax(hi - lo))
                mid = 0.5 * (lo[widest] + hi[widest])
                lo_a, hi_a = lo.copy(), hi.copy()
                lo_b, hi_b = lo.copy(), hi.copy()
                hi_a[widest] = mid
                lo_b[widest] = mid
                queue.append((lo_a, hi_a, depth + 1))
                queue.append((lo_b, hi_b, depth + 1))
            else:
                leaves.append({
                    "lo": lo.tolist(), "hi": hi.tolist(),
                    "status": "unknown", "label": label, "depth": depth,
                })
    certified = sum(
        float(np.prod(np.asarray(l["hi"]) - np.asarray(l["lo"])))
        for l in leaves
        if l["status"] == "certified"
    )
    return RegionReport(leaves, certified / total_volume)
