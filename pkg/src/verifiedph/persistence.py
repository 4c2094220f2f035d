"""Z2 persistence by column reduction, Betti numbers and bottleneck distance."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

INF = math.inf


@dataclass
class BoundaryMatrix:
    """Columns in filtration order.

    ``columns[j]`` lists the row indices (earlier columns) of the boundary
    of column ``j``; ``levels`` and ``dims`` describe each column.
    """

    levels: list
    dims: list[int]
    columns: list[list[int]]

    def __post_init__(self):
        if not len(self.levels) == len(self.dims) == len(self.columns):
            raise ValueError("column metadata lengths differ")

    @classmethod
    def from_cells(cls, order: Sequence, levels: dict, dims: dict, boundaries: dict) -> BoundaryMatrix:
        """Build from arbitrary cell ids sorted already in filtration order."""
        where = {c: j for j, c in enumerate(order)}
        cols = []
        for c in order:
            cols.append(sorted(where[r] for r in boundaries[c]))
        return cls([levels[c] for c in order], [dims[c] for c in order], cols)


@dataclass(frozen=True)
class Reduction:
    pairs: tuple[tuple[int, int], ...]
    essential: tuple[int, ...]


def reduce_matrix(m: BoundaryMatrix) -> Reduction:
    """Standard left-to-right column reduction over Z2."""
    low_of: dict[int, int] = {}
    pairs = []
    paired = set()
    reduced: dict[int, set[int]] = {}
    for j, col in enumerate(m.columns):
        for r in col:
            assert r < j, "boundary entry after its column"
            assert m.levels[r] <= m.levels[j], "face enters after its coface"
            assert m.dims[r] == m.dims[j] - 1, "boundary entry of wrong dimension"
        c = set(col)
        while c:
            low = max(c)
            k = low_of.get(low)
            if k is None:
                break
            c ^= reduced[k]
        if c:
            low = max(c)
            low_of[low] = j
            reduced[j] = c
            pairs.append((low, j))
            paired.add(low)
            paired.add(j)
    essential = tuple(j for j in range(len(m.columns)) if j not in paired)
    return Reduction(tuple(pairs), essential)


@dataclass(frozen=True)
class PersistenceDiagram:
    """Points ``(dim, birth, death)`` sorted; ``death`` may be ``inf``."""

    points: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        pts = tuple(sorted((int(d), float(b), float(e)) for d, b, e in self.points))
        for d, b, e in pts:
            if not b < e:
                raise ValueError(f"diagram point ({b}, {e}) is not above the diagonal")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def in_dim(self, dim: int) -> list[tuple[float, float]]:
        return [(b, e) for d, b, e in self.points if d == dim]

    @property
    def dims(self) -> list[int]:
        return sorted({d for d, _, _ in self.points})

    def shifted(self, c: float) -> PersistenceDiagram:
        return PersistenceDiagram(tuple((d, b + c, e + c) for d, b, e in self.points))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for d, b, e in self.points:
            buf.write(f"{d},{_fmt(b)},{_fmt(e)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> PersistenceDiagram:
        pts = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            d, b, e = line.split(",")
            pts.append((int(d), float(b), float(e)))
        return cls(tuple(pts))


def _fmt(x: float) -> str:
    return "inf" if x == INF else repr(x)


def diagram_from_reduction(m: BoundaryMatrix, red: Reduction, values: Sequence[float] | None = None) -> PersistenceDiagram:
    def val(level):
        return values[level] if values is not None else level

    pts = []
    for i, j in red.pairs:
        if m.levels[i] != m.levels[j]:
            pts.append((m.dims[i], val(m.levels[i]), val(m.levels[j])))
    for i in red.essential:
        pts.append((m.dims[i], val(m.levels[i]), INF))
    return PersistenceDiagram(tuple(pts))


def reduce(m: BoundaryMatrix, values: Sequence[float] | None = None) -> PersistenceDiagram:
    """Diagram of a filtered complex given as an ordered boundary matrix."""
    return diagram_from_reduction(m, reduce_matrix(m), values)


def betti_from_matrix(m: BoundaryMatrix, top_dim: int | None = None) -> list[int]:
    red = reduce_matrix(m)
    n = (max(m.dims) if m.dims else 0) if top_dim is None else top_dim
    out = [0] * (n + 1)
    for i in red.essential:
        out[m.dims[i]] += 1
    return out


def betti(complex_) -> list[int]:
    """Z2 Betti numbers of a closed cell complex, dimensions 0..N."""
    s = complex_.structure
    order = sorted(complex_.members, key=lambda p: (s.dims[p], p))
    where = {p: j for j, p in enumerate(order)}
    cols = []
    for p in order:
        bd = s.boundary_pos(p, 2)
        try:
            cols.append(sorted(where[q] for q in bd))
        except KeyError:
            raise ValueError("complex is not closed under boundaries") from None
    m = BoundaryMatrix([0] * len(order), [s.dims[p] for p in order], cols)
    return betti_from_matrix(m, s.ndim)


# ---------------------------------------------------------------------------
# bottleneck distance


def _linf(p, q) -> float:
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def _feasible(a, b, r: float) -> bool:
    n, m = len(a), len(b)
    size = n + m
    rows, cols = [], []
    # left: a_0..a_{n-1}, then diagonal copies of b; right: b_0..b_{m-1}, then diagonal copies of a
    for i, p in enumerate(a):
        for j, q in enumerate(b):
            if _linf(p, q) <= r:
                rows.append(i)
                cols.append(j)
        if (p[1] - p[0]) / 2 <= r:
            rows.append(i)
            cols.append(m + i)
    for j, q in enumerate(b):
        if (q[1] - q[0]) / 2 <= r:
            rows.append(n + j)
            cols.append(j)
        for i in range(n):
            rows.append(n + j)
            cols.append(m + i)
    g = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(size, size))
    match = maximum_bipartite_matching(g, perm_type="column")
    return bool(np.all(match >= 0))


def _finite_bottleneck(a: list, b: list) -> float:
    if not a and not b:
        return 0.0
    cands = {0.0}
    cands.update((p[1] - p[0]) / 2 for p in a)
    cands.update((q[1] - q[0]) / 2 for q in b)
    cands.update(_linf(p, q) for p in a for q in b)
    cands = sorted(cands)
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(a, b, cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return cands[lo]


def bottleneck(a: PersistenceDiagram, b: PersistenceDiagram) -> float:
    """Bottleneck distance with the L-infinity ground metric.

    Returns ``inf`` when the diagrams disagree on the number of
    infinite-death points in some dimension.
    """
    out = 0.0
    for d in sorted(set(a.dims) | set(b.dims)):
        pa, pb = a.in_dim(d), b.in_dim(d)
        ia = sorted(p[0] for p in pa if p[1] == INF)
        ib = sorted(p[0] for p in pb if p[1] == INF)
        if len(ia) != len(ib):
            return INF
        for x, y in zip(ia, ib):
            out = max(out, abs(x - y))
        fa = [p for p in pa if p[1] != INF]
        fb = [p for p in pb if p[1] != INF]
        out = max(out, _finite_bottleneck(fa, fb))
    return out


def diagram(points: Iterable[tuple[int, float, float]]) -> PersistenceDiagram:
    return PersistenceDiagram(tuple(points))
