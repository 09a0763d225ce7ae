"""Acceptance gate: one test per top-level criterion, in order.

Each test prints exactly one PASS/FAIL line for its criterion.  Certified
verdicts produced here are recorded and audited by the final test.
"""

import time

import numpy as np
import pytest

from fpcert import chzono, engine, householder, mondeq, numerics, verifier
from fpcert.engine import EngineConfig, Status
from fpcert.errors import Diverged

from helpers import two_neuron_model, random_improper

# (task, verdict) pairs for every Certified verdict produced by this gate.
CERTIFIED = []


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def test_acceptance_01_worked_example_reproduction():
    t0 = time.perf_counter()
    model = two_neuron_model()
    weights = mondeq.build_weights(model)
    x = np.array([0.2, 0.5])
    alpha = 0.1
    s0 = np.zeros(2)
    s1 = mondeq.fb_step(x, s0, weights, alpha)
    s2 = mondeq.fb_step(x, s1, weights, alpha)
    checks = [
        np.allclose(s1, [0.07, 0.03], atol=1e-12),
        np.allclose(s2, [0.102, 0.052], atol=1e-12),
        abs(np.linalg.norm(s1 - s0) - 0.0762) < 1e-4,
        abs(np.linalg.norm(s2 - s1) - 0.0389) < 1e-4,
    ]
    z = mondeq.solve_fixpoint(x, weights, mondeq.SolverConfig("fb", alpha))
    y = model.V @ z + model.v
    checks += [
        np.allclose(z, [0.1231, 0.0846], atol=1e-3),
        abs(y[0] - 0.0385) < 1e-3,
        time.perf_counter() - t0 < 1.0,
    ]
    _report("worked-example reproduction", all(checks), f"z*={z.round(4)} y={y[0]:.4f}")


def test_acceptance_02_local_certification_beats_kleene():
    t0 = time.perf_counter()
    task = verifier.VerificationTask(two_neuron_model(), [0.2, 0.5], 0.05, 1)
    verdict = verifier.verify_local(task)
    kleene = verifier.verify_kleene(task)
    ok = (
        verdict.status is Status.CERTIFIED
        and verdict.margin > 0
        and kleene.status is not Status.CERTIFIED
        and time.perf_counter() - t0 < 5.0
    )
    if verdict.status is Status.CERTIFIED:
        CERTIFIED.append((task, verdict))
    _report(
        "local certification vs join baseline", ok,
        f"two-phase={verdict.status.value} margin={verdict.margin:.4f}, "
        f"baseline={kleene.status.value}",
    )


def test_acceptance_03_householder_tables():
    t0 = time.perf_counter()
    subs = []

    def sub(name, ok, detail=""):
        subs.append((name, ok, detail))

    results = {}
    for iv in [(16.0, 20.0), (16.0, 25.0)]:
        for mode in ("fix", "reach"):
            results[(iv, mode)] = householder.analyze_root(
                householder.RootTask(iv, mode=mode)
            )

    published = {
        ((16.0, 20.0), "fix"): (3.983, 4.493),
        ((16.0, 25.0), "fix"): (3.887, 5.104),
        ((16.0, 20.0), "reach"): (3.982, 4.495),
        ((16.0, 25.0), "reach"): (3.885, 5.106),
    }
    exact = {(16.0, 20.0): (4.000, 4.472), (16.0, 25.0): (4.000, 5.000)}
    for key, (plo, phi) in published.items():
        lo, hi, _ = results[key]
        sub(
            f"{key[1]} {key[0]} within 5e-3 of published",
            abs(lo - plo) <= 5e-3 and abs(hi - phi) <= 5e-3,
            f"got ({lo:.4f},{hi:.4f}) vs ({plo},{phi})",
        )
    for iv, (elo, ehi) in exact.items():
        for mode in ("fix", "reach"):
            lo, hi, _ = results[(iv, mode)]
            sub(f"{mode} {iv} contains exact", lo <= elo and hi >= ehi + 1e-4 * 0,
                f"({lo:.4f},{hi:.4f}) vs exact ({elo},{ehi})")
    n20 = results[((16.0, 20.0), "fix")][2]
    n25 = results[((16.0, 25.0), "fix")][2]
    sub("iteration counts within 3 of 10/18", abs(n20 - 10) <= 3 and abs(n25 - 18) <= 3,
        f"got {n20}/{n25}")

    kl20 = householder.kleene_root(householder.RootTask((16.0, 20.0)))
    kl25 = householder.kleene_root(householder.RootTask((16.0, 25.0)))
    fix20 = results[((16.0, 20.0), "fix")]
    sub(
        "join baseline terminates loosely on [16,20]",
        kl20 != "Diverged"
        and kl20[0] < fix20[0] and kl20[1] > fix20[1]
        and kl20[0] <= 4.0 and kl20[1] >= 4.472,
        f"got {kl20}",
    )
    sub("join baseline diverges on [16,25]", kl25 == "Diverged", f"got {kl25}")
    sub("runtime < 2 s", time.perf_counter() - t0 < 2.0)

    for name, ok, detail in subs:
        print(f"  {'ok' if ok else 'MISS'}: {name} {detail}")
    failed = [f"{n} {d}" for n, ok, d in subs if not ok]
    _report("square-root case-study tables", not failed, "; ".join(failed))


def test_acceptance_04_forward_step_size_bound():
    model = two_neuron_model()
    weights = mondeq.build_weights(model)
    val = mondeq.fb_alpha_max(weights, model.m)
    _report("forward step-size bound", abs(val - 0.1538) < 1e-3, f"got {val:.6f}")


def test_acceptance_05_containment_soundness_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    plan = [(2, 400), (5, 400), (20, 200)]
    violations = 0
    positives = 0
    for p, count in plan:
        for _ in range(count):
            k = int(rng.integers(1, 4 * p + 1))
            raw = random_improper(rng, p, k)
            basis = numerics.pca_basis(raw.A)
            outer = chzono.consolidate(raw, basis)
            factor = rng.uniform(0.3, 1.3)
            shift = rng.normal(size=p) * rng.uniform(0.0, 0.5) * np.abs(outer.A).sum(1).mean()
            inner = chzono.CHZonotope(
                outer.a + shift, factor * outer.A, factor * outer.b
            )
            if chzono.contains(outer, inner):
                positives += 1
                pts = chzono.sample(inner, rng, 100)
                for pt in pts:
                    if not chzono.member(outer, pt):
                        violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and positives > 100 and elapsed < 120
    _report(
        "containment soundness suite", ok,
        f"{positives} positive pairs, {violations} violations, {elapsed:.1f}s",
    )


def test_acceptance_06_consolidation_soundness_suite():
    rng = np.random.default_rng(6)
    violations = 0
    for _ in range(1000):
        p = int(rng.integers(2, 6))
        k = int(rng.integers(1, 4 * p + 1))
        z = random_improper(rng, p, k)
        basis = numerics.pca_basis(z.A)
        pts = chzono.sample(z, rng, 5)
        for w_mul, w_add in ((0.0, 0.0), (1e-3, 1e-2)):
            cons = chzono.consolidate(z, basis, w_mul, w_add)
            for pt in pts:
                if not chzono.member(cons, pt):
                    violations += 1
    _report("consolidation soundness suite", violations == 0, f"{violations} violations")


def test_acceptance_07_fixpoint_preservation_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    fb_violations = 0
    member_checked = 0
    member_violations = 0
    failures = []
    for i in range(50):
        p = int(rng.integers(2, 21))
        q = int(rng.integers(1, 5))
        m = 4.0 if i % 2 == 0 else 20.0
        model = mondeq.random_monotone_model(p, q, 2, m, seed=1000 + i)
        weights = mondeq.build_weights(model)
        x = rng.uniform(-1, 1, q)
        z_star = mondeq.solve_fixpoint(x, weights, mondeq.SolverConfig("pr", 0.1))
        for alpha in (0.0, 0.25, 0.5, 1.0):
            if np.linalg.norm(mondeq.fb_step(x, z_star, weights, alpha) - z_star) > 1e-9:
                fb_violations += 1
        task = verifier.VerificationTask(model, x, 0.01, 0)
        x_hat = verifier.input_abstraction(task)
        s0 = mondeq.initial_state(weights, x, task.g1)
        g1 = mondeq.PrTransformer(weights, task.g1.alpha)
        try:
            s_star, _ = engine.phase1_contract(g1, x_hat, s0, task.engine)
        except Diverged as exc:
            failures.append(f"model {i} (p={p}, m={m}): {exc}")
            continue
        marginal = s_star.z_marginal().s
        for _ in range(4):
            xi = x + rng.uniform(-0.01, 0.01, q)
            zi = mondeq.solve_fixpoint(xi, weights, mondeq.SolverConfig("pr", 0.1))
            member_checked += 1
            if not chzono.member(marginal, zi, tol=1e-7):
                member_violations += 1
    elapsed = time.perf_counter() - t0
    ok = (
        fb_violations == 0 and member_violations == 0 and not failures
        and member_checked == 200 and elapsed < 300
    )
    _report(
        "fixpoint preservation suite", ok,
        f"fb violations {fb_violations}, member {member_violations}/{member_checked}, "
        f"phase-1 failures {failures}, {elapsed:.1f}s",
    )


def test_acceptance_08_box_vs_zonotope_qualitative():
    model = mondeq.random_monotone_model(40, 10, 2, 2.0, seed=7)
    weights = mondeq.build_weights(model)
    sigma = numerics.spectral_norm(np.eye(40) - weights.W)
    alpha = 0.9 * 2.0 * model.m / sigma**2
    x = np.random.default_rng(1).uniform(-1, 1, 10)
    task = verifier.VerificationTask(
        model, x, 0.01, target=verifier.classify(model, weights, x),
        g1=mondeq.SolverConfig("fb", alpha),
    )
    box = verifier.verify_box(task)
    full = verifier.verify_local(task)
    ok = box.status is Status.DIVERGED and full.status is Status.CERTIFIED
    if full.status is Status.CERTIFIED:
        CERTIFIED.append((task, full))
    _report(
        "interval-only pipeline diverges where the full domain contracts", ok,
        f"box={box.status.value} after {box.phase1_steps} steps, "
        f"full={full.status.value} margin={full.margin:.4f}",
    )


def test_acceptance_09_containment_performance():
    rng = np.random.default_rng(9)
    p = 87
    raw = random_improper(rng, p, 2 * p)
    basis = numerics.pca_basis(raw.A)
    outer = chzono.consolidate(raw, basis)
    inner = chzono.CHZonotope(outer.a, 0.5 * raw.A, 0.5 * raw.b)
    chzono.contains(outer, inner)  # warm-up
    t0 = time.perf_counter()
    result = chzono.contains(outer, inner)
    elapsed = time.perf_counter() - t0
    _report(
        "containment check performance at p=87", result is True and elapsed < 0.05,
        f"{elapsed * 1e3:.2f} ms",
    )


def test_acceptance_10_certified_verdict_audit():
    rng = np.random.default_rng(10)
    assert CERTIFIED, "earlier criteria produced no certified verdicts to audit"
    violations = 0
    total = 0
    for task, _verdict in CERTIFIED:
        weights = mondeq.build_weights(task.model)
        rad = verifier._radius_vector(task)
        for _ in range(200):
            xi = task.x + rng.uniform(-1, 1, task.model.q) * rad
            total += 1
            if verifier.classify(task.model, weights, xi) != task.target:
                violations += 1
    _report(
        "end-to-end audit of certified verdicts", violations == 0,
        f"{len(CERTIFIED)} verdicts, {total} samples, {violations} misclassified",
    )
