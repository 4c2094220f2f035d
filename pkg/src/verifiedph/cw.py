"""Cells of the CW structure induced by a dyadic grid.

A cell is named by a cube index together with a word ``lam`` over
{0, 1, 2}: digit 0 is the lower end of that axis, 1 the upper end and 2 the
open interval between.  Geometry is kept as exact integers at a fixed
global scale ``2**GSCALE`` so that cells of different grids compare
exactly.  A geometry key lists ``(lo, hi)`` per axis; ``lo == hi`` marks a
point axis, otherwise the axis is open.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .grid import CubeIndex, GridTree, Kind, cube_coords, index_from_coords
from .interval import Interval, IntervalBox

GSCALE = 64

Key = tuple[int, ...]


class CellIndex(NamedTuple):
    cube: CubeIndex
    lam: tuple[int, ...]

    @property
    def dim(self) -> int:
        return sum(1 for d in self.lam if d == 2)


class NonCanonicalCell(ValueError):
    """The cell is subdivided in the grid; use construct_n for its pieces."""


# ---------------------------------------------------------------------------
# geometry


def cube_key(cube: CubeIndex, ndim: int) -> Key:
    shift = GSCALE - len(cube)
    out = []
    for a in cube_coords(cube, ndim):
        out.append(a << shift)
        out.append((a + 1) << shift)
    return tuple(out)


def cell_key(cube: CubeIndex, lam: Sequence[int]) -> Key:
    ndim = len(lam)
    shift = GSCALE - len(cube)
    out = []
    for a, d in zip(cube_coords(cube, ndim), lam):
        lo = a << shift
        if d == 0:
            out += (lo, lo)
        elif d == 1:
            hi = (a + 1) << shift
            out += (hi, hi)
        else:
            out += (lo, (a + 1) << shift)
    return tuple(out)


def key_dim(key: Key) -> int:
    return sum(1 for i in range(0, len(key), 2) if key[i] != key[i + 1])


def key_box(key: Key) -> IntervalBox:
    scale = 2.0 ** -GSCALE
    return IntervalBox(tuple(Interval(key[i] * scale, key[i + 1] * scale) for i in range(0, len(key), 2)))


def key_fractions(key: Key) -> tuple[tuple[Fraction, Fraction], ...]:
    d = 1 << GSCALE
    return tuple((Fraction(key[i], d), Fraction(key[i + 1], d)) for i in range(0, len(key), 2))


def cell_geometry(c: CellIndex) -> IntervalBox:
    """Closure of the cell as a box; the open cell is its relative interior."""
    return key_box(cell_key(c.cube, c.lam))


def open_cells_meet(a: Key, b: Key) -> bool:
    for i in range(0, len(a), 2):
        alo, ahi, blo, bhi = a[i], a[i + 1], b[i], b[i + 1]
        if alo == ahi:
            if blo == bhi:
                if alo != blo:
                    return False
            elif not blo < alo < bhi:
                return False
        elif blo == bhi:
            if not alo < blo < ahi:
                return False
        elif max(alo, blo) >= min(ahi, bhi):
            return False
    return True


def open_cell_inside(inner: Key, outer: Key) -> bool:
    """Whether open cell ``inner`` is a subset of open cell ``outer``."""
    for i in range(0, len(inner), 2):
        ilo, ihi, olo, ohi = inner[i], inner[i + 1], outer[i], outer[i + 1]
        if olo == ohi:
            if not ilo == ihi == olo:
                return False
        elif ilo == ihi:
            if not olo < ilo < ohi:
                return False
        elif not (olo <= ilo and ihi <= ohi):
            return False
    return True


def _box_meets_open(box: Key, cell: Key) -> bool:
    # closed box against open cell
    for i in range(0, len(box), 2):
        clo, chi, lo, hi = box[i], box[i + 1], cell[i], cell[i + 1]
        if lo == hi:
            if not clo <= lo <= chi:
                return False
        elif max(clo, lo) >= min(chi, hi):
            return False
    return True


def _inside_box_interior(cell: Key, box: Key) -> bool:
    for i in range(0, len(box), 2):
        clo, chi, lo, hi = box[i], box[i + 1], cell[i], cell[i + 1]
        if lo == hi:
            if not clo < lo < chi:
                return False
        elif not (clo <= lo and hi <= chi):
            return False
    return True


def closed_union_equals(pieces: Iterable[Key], whole: Key) -> bool:
    """Exact check that the closures of ``pieces`` tile the closure of ``whole``.

    Pieces must lie inside ``whole``; the check compares measure in the
    open axes of ``whole`` and requires every piece to have the same
    dimension, which together with interior-disjointness gives equality.
    """
    pieces = list(pieces)
    dim = key_dim(whole)
    total = 0
    for p in pieces:
        if key_dim(p) != dim:
            return False
        for i in range(0, len(p), 2):
            if not (whole[i] <= p[i] and p[i + 1] <= whole[i + 1]):
                return False
        vol = 1
        for i in range(0, len(p), 2):
            if p[i] != p[i + 1]:
                vol *= p[i + 1] - p[i]
        total += vol
    target = 1
    for i in range(0, len(whole), 2):
        if whole[i] != whole[i + 1]:
            target *= whole[i + 1] - whole[i]
    for a, b in itertools.combinations(pieces, 2):
        if open_cells_meet(a, b):
            return False
    return total == target


# ---------------------------------------------------------------------------
# incidence


def incidence(lam: Sequence[int], mu: Sequence[int]) -> int:
    """Cubical incidence number [lam : mu]."""
    if len(lam) != len(mu):
        return 0
    pos = -1
    for i, (a, b) in enumerate(zip(lam, mu)):
        if a != b:
            if pos >= 0 or a != 2 or b == 2:
                return 0
            pos = i
    if pos < 0:
        return 0
    twos = sum(1 for d in lam[:pos] if d == 2)
    sign = -1 if twos % 2 else 1
    return -sign if mu[pos] == 0 else sign


def faces(lam: Sequence[int]) -> list[tuple[tuple[int, ...], int]]:
    out = []
    for p, d in enumerate(lam):
        if d == 2:
            for b in (0, 1):
                mu = tuple(lam[:p]) + (b,) + tuple(lam[p + 1:])
                out.append((mu, incidence(lam, mu)))
    return out


# ---------------------------------------------------------------------------
# chains


class Chain(dict):
    """Finite linear combination of cells; zero coefficients are never stored."""

    def __init__(self, items=(), modulus: int | None = None):
        super().__init__()
        self.modulus = modulus
        for c, v in dict(items).items():
            self.add(c, v)

    def add(self, cell, coef: int) -> None:
        v = self.get(cell, 0) + coef
        if self.modulus:
            v %= self.modulus
        if v:
            self[cell] = v
        else:
            self.pop(cell, None)


# ---------------------------------------------------------------------------
# the structure E_G


class CWStructure:
    """Canonical cells of the grid ``tree``, each stored once.

    Representatives are chosen by scanning leaves in (depth, digits) order
    and keeping the first leaf that carries a given geometry.  Positions in
    ``cells`` are stable and serve as the canonical order.
    """

    def __init__(self, tree: GridTree):
        self.tree = tree
        self.ndim = tree.ndim
        self.cells: list[CellIndex] = []
        self.keys: list[Key] = []
        self.dims: list[int] = []
        self.index: dict[Key, int] = {}
        self.by_leaf: dict[CubeIndex, list[int]] = {}
        lams = list(itertools.product(range(3), repeat=self.ndim))
        for leaf in tree.sorted_leaves():
            coords = cube_coords(leaf, self.ndim)
            own = []
            for lam in lams:
                if not self._canonical_face(leaf, coords, lam):
                    continue
                key = cell_key(leaf, lam)
                if key in self.index:
                    continue
                pos = len(self.cells)
                self.index[key] = pos
                self.cells.append(CellIndex(leaf, lam))
                self.keys.append(key)
                self.dims.append(sum(1 for d in lam if d == 2))
                own.append(pos)
            self.by_leaf[leaf] = own

    def __len__(self) -> int:
        return len(self.cells)

    def _canonical_face(self, cube: CubeIndex, coords, lam) -> bool:
        # a face is split iff a same-depth cube sharing it is refined
        pts = [i for i, d in enumerate(lam) if d != 2]
        if len(pts) == len(lam):
            return True
        depth = len(cube)
        if depth == 0:
            return True
        top = 1 << depth
        internal = self.tree.internal
        choices = []
        for i in range(self.ndim):
            a = coords[i]
            if lam[i] == 2:
                choices.append((a,))
            else:
                b = a - 1 if lam[i] == 0 else a + 1
                choices.append((a, b) if 0 <= b < top else (a,))
        for nb in itertools.product(*choices):
            if tuple(nb) == tuple(coords):
                continue
            if index_from_coords(nb, depth) in internal:
                return False
        return True

    def is_canonical(self, c: CellIndex) -> bool:
        pos = self.index.get(cell_key(c.cube, c.lam))
        return pos is not None

    def position(self, c: CellIndex) -> int:
        pos = self.index.get(cell_key(c.cube, c.lam))
        if pos is None:
            raise NonCanonicalCell(f"{c} is not a cell of the structure")
        return pos

    def canonicalize(self, c: CellIndex) -> CellIndex:
        """Canonical representative with the same geometry as ``c``."""
        self._check_covered(c.cube)
        return self.cells[self.position(c)]

    def _check_covered(self, cube: CubeIndex) -> None:
        if cube not in self.tree.leaves and cube not in self.tree.internal:
            raise ValueError(f"cube {cube} is not a node of the grid")

    # -- neighbour search ----------------------------------------------------

    def _search(self, cube: CubeIndex, key: Key, accept) -> list[int]:
        # ascend until the open cell sits inside a node's interior, then
        # descend into every child whose closed box meets it
        s = cube
        while s and not _inside_box_interior(key, cube_key(s, self.ndim)):
            s = s[:-1]
        out: list[int] = []
        stack = [s]
        internal = self.tree.internal
        while stack:
            node = stack.pop()
            if node in internal:
                for c in range(1 << self.ndim):
                    child = node + (c,)
                    if _box_meets_open(cube_key(child, self.ndim), key):
                        stack.append(child)
                continue
            for pos in self.by_leaf.get(node, ()):
                if accept(pos):
                    out.append(pos)
        out.sort()
        return out

    def construct_n_key(self, cube: CubeIndex, key: Key) -> list[int]:
        """Canonical cells of the dimension of ``key`` meeting its open cell."""
        dim = key_dim(key)
        keys, dims = self.keys, self.dims
        return self._search(cube, key, lambda p: dims[p] == dim and open_cells_meet(keys[p], key))

    def construct_n(self, c: CellIndex) -> set[CellIndex]:
        self._check_covered(c.cube)
        return {self.cells[p] for p in self.construct_n_key(c.cube, cell_key(c.cube, c.lam))}

    def boundary_pos(self, pos: int, modulus: int | None = None) -> dict[int, int]:
        cube, lam = self.cells[pos]
        out: dict[int, int] = {}
        for mu, sign in faces(lam):
            for q in self.construct_n_key(cube, cell_key(cube, mu)):
                v = out.get(q, 0) + sign
                if modulus:
                    v %= modulus
                if v:
                    out[q] = v
                else:
                    out.pop(q, None)
        return out

    def boundary(self, c: CellIndex, modulus: int | None = None) -> Chain:
        pos = self.position(c)
        return Chain({self.cells[q]: v for q, v in self.boundary_pos(pos, modulus).items()}, modulus)

    def boundary_matrix(self, positions: Iterable[int] | None = None) -> dict[int, list[int]]:
        """Z2 boundary columns (sorted row positions) for the given cells."""
        positions = range(len(self.cells)) if positions is None else positions
        return {p: sorted(self.boundary_pos(p, 2)) for p in positions}

    # -- containment across grids -------------------------------------------

    def locate(self, leaf: CubeIndex, key: Key) -> int:
        """Position of the canonical cell containing the open cell ``key``.

        ``leaf`` must be a cube (of this or a finer grid) whose closure
        contains the cell.
        """
        pos = self.index.get(key)
        if pos is not None:
            return pos
        host = self.tree.leaf_above(leaf)
        if host is None:
            raise ValueError(f"cube {leaf} is not covered by a leaf of this grid")
        box = cube_key(host, self.ndim)
        lam = []
        for i in range(0, len(key), 2):
            lo, hi = key[i], key[i + 1]
            if lo == hi == box[i]:
                lam.append(0)
            elif lo == hi == box[i + 1]:
                lam.append(1)
            else:
                lam.append(2)
        pos = self.index.get(cell_key(host, lam))
        if pos is not None:
            return pos
        keys = self.keys
        found = self._search(host, key, lambda p: open_cell_inside(key, keys[p]))
        if len(found) != 1:
            raise AssertionError(f"cell lies in {len(found)} canonical cells")  # pragma: no cover
        return found[0]


def canonicalize(c: CellIndex, tree: GridTree | CWStructure) -> CellIndex:
    s = tree if isinstance(tree, CWStructure) else CWStructure(tree)
    return s.canonicalize(c)


def construct_n(c: CellIndex, tree: GridTree | CWStructure) -> set[CellIndex]:
    s = tree if isinstance(tree, CWStructure) else CWStructure(tree)
    return s.construct_n(c)


def boundary(c: CellIndex, tree: GridTree | CWStructure, modulus: int | None = None) -> Chain:
    s = tree if isinstance(tree, CWStructure) else CWStructure(tree)
    return s.boundary(c, modulus)


# ---------------------------------------------------------------------------
# complexes


@dataclass(frozen=True)
class CellComplex:
    """A subset of the canonical cells of ``structure``."""

    structure: CWStructure
    members: frozenset

    def cells(self, dim: int | None = None) -> list[CellIndex]:
        s = self.structure
        return [s.cells[p] for p in sorted(self.members) if dim is None or s.dims[p] == dim]

    def counts(self) -> list[int]:
        out = [0] * (self.structure.ndim + 1)
        for p in self.members:
            out[self.structure.dims[p]] += 1
        return out

    def euler(self) -> int:
        return sum((-1) ** d * n for d, n in enumerate(self.counts()))

    def is_closed(self) -> bool:
        s = self.structure
        return all(q in self.members for p in self.members for q in s.boundary_pos(p, 2))

    def __len__(self) -> int:
        return len(self.members)


def _member(outcome, lam: Sequence[int]) -> bool:
    if outcome is None:
        raise ValueError("grid carries no verification outcomes")
    if outcome.kind is Kind.BELOW:
        return True
    if outcome.kind is Kind.ABOVE:
        return False
    if outcome.kind is not Kind.MIXED:
        raise ValueError(f"leaf is not verified: {outcome.kind}")
    # f is monotone along every axis of D, so its maximum over the closed
    # cell sits on the uphill end of each open D-axis
    bits = 0
    for j, (ax, sg) in enumerate(zip(outcome.axes, outcome.signs)):
        d = lam[ax]
        b = d if d != 2 else (1 if sg > 0 else 0)
        bits |= b << j
    return outcome.face_below[bits]


def cellular_approximation(tree: GridTree, structure: CWStructure | None = None) -> CellComplex:
    """Canonical cells whose closure lies in the sub-level set at the grid's threshold."""
    s = structure if structure is not None else CWStructure(tree)
    if s.tree is not tree and s.tree.internal != tree.internal:
        raise ValueError("structure does not belong to this grid")
    members = frozenset(p for p, (cube, lam) in enumerate(s.cells) if _member(tree.leaves[cube], lam))
    return CellComplex(s, members)


def full_complex(structure: CWStructure) -> CellComplex:
    return CellComplex(structure, frozenset(range(len(structure))))
