"""Threshold schedules, the intersected filtration and its error bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

from .cw import CellComplex, CWStructure, cellular_approximation
from .grid import GridTree, Verifier
from .persistence import BoundaryMatrix, PersistenceDiagram, reduce


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def grid_value(j: int, delta: float) -> float:
    """``j * delta`` rounded once from the decimal product."""
    return float(j * _dec(delta))


@dataclass(frozen=True)
class ThresholdSchedule:
    delta: float
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("a schedule needs at least two thresholds")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("thresholds must increase strictly")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def shifted(self, c: float) -> ThresholdSchedule:
        return ThresholdSchedule(self.delta, tuple(v + c for v in self.values))

    def covers(self, lo: float, hi: float) -> bool:
        return self.values[0] < lo and self.values[-1] > hi


def build_schedule(
    f,
    delta: float,
    ndim: int | None = None,
    k: int | None = None,
    bounds: tuple[float, float] | None = None,
) -> ThresholdSchedule:
    """Uniform thresholds ``j * delta`` strictly enclosing the certified range of ``f``.

    With ``bounds`` the grid runs from the first multiple of delta at or
    above ``bounds[0]`` to the last at or below ``bounds[1]``; a ValueError
    is raised if that does not cover the certified range.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    v = f if isinstance(f, Verifier) else Verifier(f, ndim if ndim is not None else max(f.ndim, 1), 7 if k is None else k)
    lo, hi = v.f_range([0.0] * v.ndim, [1.0] * v.ndim, k)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("range enclosure is not finite")
    d = _dec(delta)
    if bounds is not None:
        blo, bhi = bounds
        j0 = math.ceil(_dec(blo) / d)
        j1 = math.floor(_dec(bhi) / d)
        vals = tuple(grid_value(j, delta) for j in range(j0, j1 + 1))
        sched = ThresholdSchedule(delta, vals)
        if not sched.covers(lo, hi):
            raise ValueError(f"bounds {bounds} do not enclose the certified range [{lo}, {hi}]")
        return sched
    j0 = math.floor(_dec(lo) / d)
    while grid_value(j0, delta) >= lo:
        j0 -= 1
    j1 = math.ceil(_dec(hi) / d)
    while grid_value(j1, delta) <= hi:
        j1 += 1
    j1 = max(j1, j0 + 2)
    return ThresholdSchedule(delta, tuple(grid_value(j, delta) for j in range(j0, j1 + 1)))


# ---------------------------------------------------------------------------
# status bookkeeping


@dataclass(frozen=True)
class ThresholdStatus:
    threshold: float
    verified: bool
    failure: str | None = None
    cube: tuple[int, ...] | None = None
    leaves: int = 0

    def to_json(self) -> dict:
        out = {"threshold": self.threshold, "verified": self.verified}
        if self.verified:
            out["leaves"] = self.leaves
        else:
            out["failure"] = self.failure
            out["cube"] = list(self.cube) if self.cube is not None else None
        return out


def longest_failure_run(verified: Sequence[bool]) -> int:
    """Longest run of consecutive failures among interior thresholds."""
    best = run = 0
    for ok in list(verified)[1:-1]:
        run = 0 if ok else run + 1
        best = max(best, run)
    return best


def a_posteriori_bound(schedule: ThresholdSchedule | float, statuses: Sequence) -> tuple[float, int]:
    """Return ``(epsilon, F)`` with ``epsilon = delta * (F + 1)``.

    ``statuses`` may be ThresholdStatus objects or plain booleans.
    """
    delta = schedule.delta if isinstance(schedule, ThresholdSchedule) else float(schedule)
    flags = [s.verified if isinstance(s, ThresholdStatus) else bool(s) for s in statuses]
    if isinstance(schedule, ThresholdSchedule) and len(flags) != len(schedule):
        raise ValueError("statuses are not aligned with the schedule")
    F = longest_failure_run(flags)
    return float(_dec(delta) * (F + 1)), F


# ---------------------------------------------------------------------------
# the filtered complex


@dataclass
class FilteredComplex:
    """Canonical cells of the common refinement with a birth level each.

    ``births[p]`` is the index of the first verified threshold from which
    cell ``p`` stays in every later cellular approximation.
    """

    structure: CWStructure
    births: list[int]
    values: tuple[float, ...]
    verified_levels: tuple[int, ...] = field(default=())

    def level(self, i: int) -> CellComplex:
        return CellComplex(self.structure, frozenset(p for p, b in enumerate(self.births) if b is not None and b <= i))

    def boundary_matrix(self) -> BoundaryMatrix:
        s = self.structure
        order = sorted(range(len(s)), key=lambda p: (self.births[p], s.dims[p], p))
        where = {p: j for j, p in enumerate(order)}
        cols = [sorted(where[q] for q in s.boundary_pos(p, 2)) for p in order]
        return BoundaryMatrix([self.births[p] for p in order], [s.dims[p] for p in order], cols)

    def diagram(self) -> PersistenceDiagram:
        return reduce(self.boundary_matrix(), self.values)

    def __len__(self) -> int:
        return len(self.births)


def _membership(tree: GridTree, structure: CWStructure | None = None) -> tuple[CWStructure, frozenset]:
    cx = cellular_approximation(tree, structure)
    return cx.structure, cx.members


def intersect_into_filtration(values: Sequence[float], trees: Sequence[GridTree | None]) -> FilteredComplex:
    """Sequential pass from the top verified threshold downwards.

    Each step refines the accumulated grid by the next verified grid and
    keeps a cell at the new level only if it was present at the previous
    verified level and lies in the new cellular approximation.  Failed
    thresholds (``None``) are skipped.
    """
    if len(values) != len(trees):
        raise ValueError("values and trees differ in length")
    levels = [i for i, t in enumerate(trees) if t is not None]
    if not levels:
        raise ValueError("no verified threshold")
    top = levels[-1]
    acc_tree = trees[top]
    acc_struct, members = _membership(acc_tree)
    births: list[int | None] = [top if p in members else None for p in range(len(acc_struct))]
    prev = top
    for i in reversed(levels[:-1]):
        g = trees[i]
        g_struct, g_members = _membership(g)
        if g.internal <= acc_tree.internal:
            new_tree, new_struct = acc_tree, acc_struct
        else:
            new_tree = acc_tree.union(g)
            new_struct = CWStructure(new_tree)
        same = new_struct is acc_struct
        new_births: list[int | None] = []
        for p, (cube, _lam) in enumerate(new_struct.cells):
            key = new_struct.keys[p]
            old = births[p] if same else births[acc_struct.locate(cube, key)]
            if old == prev and g_struct.locate(cube, key) in g_members:
                new_births.append(i)
            else:
                new_births.append(old)
        acc_tree, acc_struct, births, prev = new_tree, new_struct, new_births, i
    if any(b is None for b in births):
        raise ValueError("top verified level is not the full cube")
    return FilteredComplex(acc_struct, births, tuple(values), tuple(levels))


def direct_births(values: Sequence[float], trees: Sequence[GridTree | None]) -> FilteredComplex:
    """Same filtration from the global formula on the union of all grids.

    Quadratic in the number of levels; meant for audits.
    """
    levels = [i for i, t in enumerate(trees) if t is not None]
    union = trees[levels[0]]
    for i in levels[1:]:
        union = union.union(trees[i])
    s = CWStructure(union)
    per_level = {i: _membership(trees[i]) for i in levels}
    births = []
    for p, (cube, _lam) in enumerate(s.cells):
        key = s.keys[p]
        b = None
        for i in reversed(levels):
            gs, gm = per_level[i]
            if gs.locate(cube, key) in gm:
                b = i
            else:
                break
        births.append(b)
    return FilteredComplex(s, births, tuple(values), tuple(levels))


def nesting_violations(fc: FilteredComplex) -> int:
    """Count boundary-closure failures over every verified level.

    Nesting itself holds by construction of birth indices; a level is
    audited by checking that each cell's boundary cells are born no later.
    """
    s = fc.structure
    bad = 0
    for p in range(len(s)):
        bp = fc.births[p]
        for q in s.boundary_pos(p, 2):
            if fc.births[q] is None or (bp is not None and fc.births[q] > bp):
                bad += 1
    return bad
