"""Acceptance criteria 1-9; each test records one pass/fail line."""

import math
import time

import numpy as np
import pytest

from audits import construct_n_mismatches, dd_violations, random_tree
from conftest import record_criterion
from oracles import bottleneck_brute, dense_betti, dense_persistence, sample_grid
from verifiedph.cli import RunConfig, run_pipeline
from verifiedph.cw import cellular_approximation
from verifiedph.expr import Const, Var, cos, refined_eval, sin, to_numpy
from verifiedph.filtration import ThresholdSchedule, a_posteriori_bound, build_schedule, grid_value, nesting_violations
from verifiedph.fourier import generate_fourier
from verifiedph.grid import GridConfig, GridFailure, Verifier, construct_verified_grid
from verifiedph.interval import TWO_PI, IntervalBox
from verifiedph.persistence import INF, PersistenceDiagram, betti, bottleneck

SINSIN = sin(Const.of(TWO_PI) * Var(0)) * sin(Const.of(TWO_PI) * Var(1))
SHIFT = 0.37


def _check(number, ok, detail):
    record_criterion(number, bool(ok), detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# shared pipeline runs


@pytest.fixture(scope="module")
def sinsin_run():
    t0 = time.perf_counter()
    res = run_pipeline(RunConfig(delta=0.1, max_depth=12), f=SINSIN)
    return res, time.perf_counter() - t0


def _stable_thresholds(values, n=5, eta=0.02):
    # thresholds whose dense Betti numbers do not change within +-eta
    lo, hi = np.quantile(values, [0.03, 0.97])
    cands = [round(float(t), 3) for t in np.linspace(lo, hi, 60)]
    stable = [t for t in cands if len({dense_betti(values, t + d) for d in (-eta, 0.0, eta)}) == 1]
    picks = np.linspace(0, len(stable) - 1, n).round().astype(int)
    return [stable[i] for i in picks]


@pytest.fixture(scope="module")
def sublevel_cases():
    t0 = time.perf_counter()
    cases = []
    for seed in range(20):
        f = generate_fourier(2, seed)
        dense = sample_grid(to_numpy(f), 513)
        v = Verifier(f, 2, 7)
        for t in _stable_thresholds(dense):
            try:
                tree = construct_verified_grid(v, t, GridConfig(max_depth=25))
            except GridFailure as e:
                cases.append((seed, t, None, dense_betti(dense, t), e.kind))
                continue
            cx = cellular_approximation(tree)
            cases.append((seed, t, cx, dense_betti(dense, t), None))
    return cases, time.perf_counter() - t0


@pytest.fixture(scope="module")
def shift_runs():
    out = []
    for f, delta in [(SINSIN, 0.1), (generate_fourier(2, 1), 0.5)]:
        sched = build_schedule(f, delta)
        a = run_pipeline(RunConfig(delta=delta, max_depth=12), f=f, schedule=sched)
        b = run_pipeline(RunConfig(delta=delta, max_depth=12), f=f + Const.of(SHIFT), schedule=sched.shifted(SHIFT))
        out.append((a, b))
    return out


# ---------------------------------------------------------------------------


def test_criterion_1_error_bound_formula():
    t0 = time.perf_counter()
    sched = ThresholdSchedule(0.05, tuple(grid_value(j, 0.05) for j in range(-300, 301)))
    flags = [True] * len(sched)
    i = sched.values.index(-5.2)
    flags[i] = flags[i + 1] = False
    two = a_posteriori_bound(sched, flags)
    flags = [True] * len(sched)
    for j in range(200, 207):
        flags[j] = False
    seven = a_posteriori_bound(sched, flags)
    dt = time.perf_counter() - t0
    ok = two == (0.15, 2) and seven == (0.4, 7) and dt < 1.0
    _check(1, ok, f"two adjacent failures -> {two[0]}, seven -> {seven[0]} ({dt * 1e3:.1f} ms)")


def test_criterion_2_separable_benchmark(sinsin_run):
    res, dt = sinsin_run
    eps = res.report["epsilon"]
    oracle = PersistenceDiagram(tuple(dense_persistence(sample_grid(to_numpy(SINSIN), 257))))
    d = bottleneck(res.diagram, oracle)
    worst = 0.0
    for _, b, e in res.diagram:
        for v in (b, e):
            if v != INF:
                worst = max(worst, min(abs(v - c) for c in (-1.0, 0.0, 1.0)))
    ok = dt < 300 and d <= eps + 0.05 and worst <= eps and res.report["config"]["max_depth"] <= 12
    _check(
        2,
        ok,
        f"{dt:.1f} s, bottleneck to dense oracle {d:.3g} <= {eps + 0.05:.3g}, "
        f"max offset from critical values {worst:.3g} <= eps {eps}, F={res.report['F']}",
    )


def test_criterion_3_sublevel_homology(sublevel_cases):
    cases, dt = sublevel_cases
    mismatches = []
    for seed, t, cx, want, failure in cases:
        got = None if cx is None else tuple(betti(cx)[:2])
        if got != want:
            mismatches.append((seed, t, got, want, failure))
    ok = len(cases) == 100 and not mismatches and dt < 1200
    _check(3, ok, f"{len(cases)} thresholds, {len(mismatches)} mismatches {mismatches[:3]}, {dt:.0f} s")


def test_criterion_4_chain_complex_audit(sinsin_run, sublevel_cases):
    structures = [sinsin_run[0].filtration.structure]
    structures += [cx.structure for _, _, cx, _, _ in sublevel_cases[0] if cx is not None]
    cells = bad = 0
    for s in structures:
        n, b = dd_violations(s)
        cells += n
        bad += b
    _check(4, bad == 0 and cells > 0, f"{len(structures)} complexes, {cells} cells, {bad} violations")


def test_criterion_5_construct_n_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = bad = cover = 0
    for g in range(50):
        n = (1, 2, 3)[g % 3]
        tree = random_tree(rng, n, 5, p={1: 0.7, 2: 0.5, 3: 0.35}[n], max_leaves={1: 32, 2: 64, 3: 50}[n])
        assert max(len(leaf) for leaf in tree.leaves) <= 5
        c, b, v = construct_n_mismatches(tree)
        checked += c
        bad += b
        cover += v
    dt = time.perf_counter() - t0
    ok = bad == 0 and cover == 0 and dt < 120
    _check(5, ok, f"50 grids, {checked} cells, {bad} mismatches, {cover} cover failures, {dt:.0f} s")


def test_criterion_6_filtration_nesting(sinsin_run, shift_runs):
    runs = [sinsin_run[0]] + [r for pair in shift_runs for r in pair]
    bad = 0
    for res in runs:
        fc = res.filtration
        bad += nesting_violations(fc)
        prev = frozenset()
        for i in fc.verified_levels:
            lv = fc.level(i)
            if not prev <= lv.members:
                bad += 1
            if not lv.is_closed():
                bad += 1
            prev = lv.members
        if len(fc.level(fc.verified_levels[-1])) != len(fc):
            bad += 1
    _check(6, bad == 0, f"{len(runs)} pipeline runs, {bad} violations")


def _random_diagram(rng, k):
    pts = []
    for _ in range(int(rng.integers(0, k + 1))):
        d = int(rng.integers(0, 2))
        b = float(rng.uniform(-2, 2))
        e = INF if rng.random() < 0.15 else b + float(rng.uniform(1e-3, 3))
        pts.append((d, b, e))
    return PersistenceDiagram(tuple(pts))


def test_criterion_7_bottleneck():
    rng = np.random.default_rng(7)
    err = 0.0
    asym = 0
    for _ in range(200):
        a, b = _random_diagram(rng, 5), _random_diagram(rng, 5)
        got, want = bottleneck(a, b), bottleneck_brute(list(a), list(b))
        if math.isinf(want) or math.isinf(got):
            err = max(err, 0.0 if got == want else INF)
        else:
            err = max(err, abs(got - want))
        asym += bottleneck(b, a) != got
    tri = 0.0
    for _ in range(100):
        a, b, c = (_random_diagram(rng, 5) for _ in range(3))
        ab, bc, ac = bottleneck(a, b), bottleneck(b, c), bottleneck(a, c)
        if math.isfinite(ab + bc):
            tri = max(tri, ac - (ab + bc))
    ok = err <= 1e-12 and asym == 0 and tri <= 1e-12
    _check(7, ok, f"max |fast - brute| {err:.3g}, asymmetric pairs {asym}, worst triangle excess {tri:.3g}")


def _random_expr(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Var(int(rng.integers(0, 2)))
        return Const.of(float(rng.normal(0, 2)))
    op = rng.integers(0, 5)
    a = _random_expr(rng, depth - 1)
    if op == 0:
        return a + _random_expr(rng, depth - 1)
    if op == 1:
        return a * _random_expr(rng, depth - 1)
    if op == 2:
        return -a
    return sin(Const.of(float(rng.uniform(1, 7))) * a) if op == 3 else cos(a)


def test_criterion_8_interval_soundness():
    rng = np.random.default_rng(8)
    checks = violations = 0
    width_bad = pairs = 0
    for n in range(1000):
        f = generate_fourier(2, n) if n % 5 == 0 else _random_expr(rng, 4)
        lo = rng.uniform(0, 1, 2)
        w = 10.0 ** rng.uniform(-4, -0.3, 2)
        hi = np.minimum(lo + w, 1.0)
        box = IntervalBox.from_bounds(list(zip(lo, hi)))
        widths = [refined_eval(f, box, k) for k in range(5)]
        pairs += 1
        if any(not (b.width <= a.width) for a, b in zip(widths, widths[1:])):
            width_bad += 1
        enc = widths[int(rng.integers(0, 5))]
        pts = rng.uniform(lo, hi, (100, 2))
        vals = to_numpy(f, np.longdouble)(pts.astype(np.longdouble))
        checks += len(vals)
        violations += int(np.sum((vals < np.longdouble(enc.lo)) | (vals > np.longdouble(enc.hi))))
    ok = checks >= 100_000 and violations == 0 and width_bad == 0 and pairs >= 1000
    _check(8, ok, f"{checks} containment checks, {violations} violations; {pairs} width sequences, {width_bad} increases")


def test_criterion_9_shift_equivariance(shift_runs):
    bad = []
    for a, b in shift_runs:
        if a.diagram.shifted(SHIFT) != b.diagram:
            bad.append((a.diagram, b.diagram))
        if abs(bottleneck(a.diagram, b.diagram) - SHIFT) > 1e-12:
            bad.append("distance")
    npts = [len(a.diagram) for a, _ in shift_runs]
    _check(9, not bad, f"{len(shift_runs)} functions ({npts} points), shifted diagrams equal: {not bad}")
