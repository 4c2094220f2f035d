"""Adaptive dyadic grids on the unit cube and their (f, t)-verification.

A cube is addressed by a tuple of digits ``s_j`` in ``[0, 2**N)``; bit ``i``
of ``s_j`` is the ``j``-th binary digit of the cube's offset along axis ``i``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .expr import MAX_REFINEMENT, Expr, compile_tape, partial
from .interval import Interval, IntervalBox

CubeIndex = tuple[int, ...]

DEFAULT_MAX_DEPTH = 25
DEFAULT_REFINEMENT = 7


@dataclass(frozen=True)
class GridConfig:
    max_depth: int = DEFAULT_MAX_DEPTH
    k: int = DEFAULT_REFINEMENT

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.max_depth > 50:
            raise ValueError("max_depth above 50 is not supported")
        if not 0 <= self.k <= MAX_REFINEMENT:
            raise ValueError(f"refinement k must lie in [0, {MAX_REFINEMENT}]")


class Kind(enum.Enum):
    ABOVE = "above"
    BELOW = "below"
    MIXED = "mixed"
    NOT_VERIFIED = "not_verified"
    UNDECIDABLE_VERTEX = "undecidable_vertex"


@dataclass(frozen=True)
class Outcome:
    """Result of testing one cube.

    For ``MIXED``, ``axes`` is the certified-sign axis set D, ``signs`` the
    sign of each partial on the cube and ``face_below[b]`` tells whether the
    face with D-coordinates given by the bits of ``b`` lies in ``{f <= t}``
    (bit ``j`` of ``b`` picks the lower/upper end of axis ``axes[j]``).
    """

    kind: Kind
    axes: tuple[int, ...] = ()
    signs: tuple[int, ...] = ()
    face_below: tuple[bool, ...] = ()

    @property
    def verified(self) -> bool:
        return self.kind in (Kind.ABOVE, Kind.BELOW, Kind.MIXED)


ABOVE = Outcome(Kind.ABOVE)
BELOW = Outcome(Kind.BELOW)
NOT_VERIFIED = Outcome(Kind.NOT_VERIFIED)
UNDECIDABLE = Outcome(Kind.UNDECIDABLE_VERTEX)


class GridFailure(Exception):
    """Raised when no (f, t)-verified grid could be built."""

    def __init__(self, kind: str, cube: CubeIndex):
        super().__init__(f"{kind} at cube {cube}")
        self.kind = kind
        self.cube = cube


MAX_DEPTH_FAILURE = "max_depth"
UNDECIDABLE_FAILURE = "undecidable_vertex"


# ---------------------------------------------------------------------------
# index arithmetic


def cube_coords(idx: CubeIndex, ndim: int) -> tuple[int, ...]:
    """Integer offsets ``a_i`` with ``C = prod [a_i, a_i + 1] / 2**depth``."""
    a = [0] * ndim
    for s in idx:
        for i in range(ndim):
            a[i] = (a[i] << 1) | ((s >> i) & 1)
    return tuple(a)


def index_from_coords(coords: Sequence[int], depth: int) -> CubeIndex:
    digits = []
    for j in range(depth):
        shift = depth - 1 - j
        digits.append(sum(((c >> shift) & 1) << i for i, c in enumerate(coords)))
    return tuple(digits)


def cube_geometry(idx: CubeIndex, ndim: int) -> IntervalBox:
    """The dyadic box named by ``idx``; bounds are exact."""
    if ndim < 1:
        raise ValueError("ndim must be positive")
    if any(not 0 <= s < (1 << ndim) for s in idx):
        raise ValueError(f"digit out of range in {idx}")
    n = len(idx)
    scale = 2.0 ** -n
    return IntervalBox(tuple(Interval(a * scale, (a + 1) * scale) for a in cube_coords(idx, ndim)))


def cube_bounds_exact(idx: CubeIndex, ndim: int) -> tuple[tuple[Fraction, Fraction], ...]:
    d = 1 << len(idx)
    return tuple((Fraction(a, d), Fraction(a + 1, d)) for a in cube_coords(idx, ndim))


def offspring(idx: CubeIndex, ndim: int, max_depth: int = DEFAULT_MAX_DEPTH) -> list[CubeIndex]:
    if len(idx) >= max_depth:
        raise GridFailure(MAX_DEPTH_FAILURE, idx)
    return [idx + (s,) for s in range(1 << ndim)]


# ---------------------------------------------------------------------------
# verification


class Verifier:
    """Compiled f and partials, reusable across cubes and thresholds."""

    def __init__(self, f: Expr, ndim: int, k: int = DEFAULT_REFINEMENT, partials: Sequence[Expr] | None = None):
        if f.ndim > ndim:
            raise ValueError(f"expression uses x{f.ndim - 1} but ndim={ndim}")
        if not 0 <= k <= MAX_REFINEMENT:
            raise ValueError(f"refinement k must lie in [0, {MAX_REFINEMENT}]")
        self.f = f
        self.ndim = ndim
        self.k = k
        self.partials = tuple(partials) if partials is not None else tuple(partial(f, i) for i in range(ndim))
        self._tf = compile_tape((f,))
        self._tdf = compile_tape(self.partials)

    def f_range(self, lo, hi, k: int | None = None) -> tuple[float, float]:
        out_lo, out_hi = kernels.hull_eval(self._tf, np.asarray(lo, float), np.asarray(hi, float), self.k if k is None else k)
        return float(out_lo[0]), float(out_hi[0])

    def df_range(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        return kernels.hull_eval(self._tdf, np.asarray(lo, float), np.asarray(hi, float), self.k)

    # -- faces -------------------------------------------------------------

    def face_sides(self, lo, hi, axes: Sequence[int], t: float) -> tuple[bool, ...] | None:
        """For every face orthogonal to ``axes``, True if it is certified ``<= t``.

        Returns None if some face is not one-sided.
        """
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        out = []
        for bits in range(1 << len(axes)):
            flo = lo.copy()
            fhi = hi.copy()
            for j, ax in enumerate(axes):
                v = hi[ax] if (bits >> j) & 1 else lo[ax]
                flo[ax] = v
                fhi[ax] = v
            a, b = self.f_range(flo, fhi)
            if b <= t:
                out.append(True)
            elif a > t:
                out.append(False)
            else:
                return None
        return tuple(out)

    def vertex_straddles(self, lo, hi, t: float) -> bool:
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        n = len(lo)
        for bits in range(1 << n):
            p = np.where([(bits >> i) & 1 for i in range(n)], hi, lo)
            a, b = self.f_range(p, p, 0)
            if not (a > t or b <= t):
                return True
        return False

    def verify_box(self, lo, hi, t: float) -> Outcome:
        a, b = self.f_range(lo, hi)
        if a > t:
            return ABOVE
        if b <= t:
            return BELOW
        dlo, dhi = self.df_range(lo, hi)
        axes = tuple(i for i in range(self.ndim) if dlo[i] > 0.0 or dhi[i] < 0.0)
        if axes:
            sides = self.face_sides(lo, hi, axes, t)
            if sides is not None:
                signs = tuple(1 if dlo[i] > 0.0 else -1 for i in axes)
                return Outcome(Kind.MIXED, axes, signs, sides)
        if self.vertex_straddles(lo, hi, t):
            return UNDECIDABLE
        return NOT_VERIFIED

    def verify(self, idx: CubeIndex, t: float) -> Outcome:
        box = cube_geometry(idx, self.ndim)
        return self.verify_box(box.lo, box.hi, t)


def verify_cube(f: Expr, partials: Sequence[Expr], t: float, idx: CubeIndex, cfg: GridConfig, ndim: int | None = None) -> Outcome:
    ndim = len(partials) if ndim is None else ndim
    return Verifier(f, ndim, cfg.k, partials).verify(idx, t)


def verifies_with_axes(verifier: Verifier, box: IntervalBox, axes: Sequence[int], t: float) -> bool:
    """Whether the face test passes for an explicitly chosen axis subset.

    The subset must consist of certified-sign axes.
    """
    axes = tuple(axes)
    if not axes:
        return False
    dlo, dhi = verifier.df_range(box.lo, box.hi)
    if any(not (dlo[i] > 0.0 or dhi[i] < 0.0) for i in axes):
        return False
    return verifier.face_sides(box.lo, box.hi, axes, t) is not None


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class GridTree:
    """Leaves of a dyadic subdivision of [0,1]^N plus the refined (internal) nodes.

    ``leaves`` maps each leaf index to its outcome, or None for bare trees
    that were built without a function.
    """

    ndim: int
    internal: frozenset
    leaves: dict = field(hash=False, compare=False)
    threshold: float | None = None

    def __post_init__(self):
        if self.ndim < 1:
            raise ValueError("ndim must be positive")

    @classmethod
    def from_leaves(cls, ndim: int, leaves, threshold: float | None = None) -> GridTree:
        if not isinstance(leaves, dict):
            leaves = {tuple(l): None for l in leaves}
        internal = set()
        for leaf in leaves:
            for n in range(len(leaf)):
                internal.add(tuple(leaf[:n]))
        return cls(ndim, frozenset(internal), dict(leaves), threshold)

    @classmethod
    def from_internal(cls, ndim: int, internal) -> GridTree:
        """Tree whose refined nodes are ``internal`` (closed under prefixes)."""
        internal = frozenset(tuple(x) for x in internal)
        for node in internal:
            if node and node[:-1] not in internal:
                raise ValueError(f"parent of {node} is not refined")
        if not internal:
            return cls(ndim, internal, {(): None})
        leaves = {}
        for node in internal:
            for s in range(1 << ndim):
                c = node + (s,)
                if c not in internal:
                    leaves[c] = None
        return cls(ndim, internal, leaves)

    @classmethod
    def uniform(cls, ndim: int, depth: int) -> GridTree:
        internal = [idx for n in range(depth) for idx in itertools.product(range(1 << ndim), repeat=n)]
        return cls.from_internal(ndim, internal)

    def is_leaf(self, idx: CubeIndex) -> bool:
        return idx in self.leaves

    def is_internal(self, idx: CubeIndex) -> bool:
        return idx in self.internal

    def children(self, idx: CubeIndex) -> list[CubeIndex]:
        return [idx + (s,) for s in range(1 << self.ndim)]

    def leaf_above(self, idx: CubeIndex) -> CubeIndex | None:
        """The leaf equal to or containing ``idx``, if ``idx`` is not below an internal-only path."""
        for n in range(len(idx) + 1):
            p = idx[:n]
            if p in self.leaves:
                return p
            if p not in self.internal:
                return None
        return None

    def sorted_leaves(self) -> list[CubeIndex]:
        return sorted(self.leaves, key=lambda s: (len(s), s))

    @property
    def depth(self) -> int:
        return max(len(l) for l in self.leaves)

    def iter_depth_first(self) -> Iterator[CubeIndex]:
        stack = [()]
        while stack:
            node = stack.pop()
            yield node
            if node in self.internal:
                stack.extend(reversed(self.children(node)))

    def union(self, other: GridTree) -> GridTree:
        """Common refinement of the two subdivisions (outcomes dropped)."""
        if other.ndim != self.ndim:
            raise ValueError("dimension mismatch")
        return GridTree.from_internal(self.ndim, self.internal | other.internal)

    def volume(self) -> Fraction:
        return sum((Fraction(1, 1 << (self.ndim * len(l))) for l in self.leaves), Fraction(0))


def construct_verified_grid(f: Expr | Verifier, t: float, cfg: GridConfig = GridConfig(), ndim: int | None = None) -> GridTree:
    """Depth-first subdivision until every leaf is verified.

    Raises GridFailure on an undecidable vertex or when a cube at the
    maximum depth cannot be verified.
    """
    if isinstance(f, Verifier):
        verifier = f
    else:
        verifier = Verifier(f, ndim if ndim is not None else max(f.ndim, 1), cfg.k)
    n = verifier.ndim
    internal = set()
    leaves = {}
    stack: list[CubeIndex] = [()]
    while stack:
        idx = stack.pop()
        out = verifier.verify(idx, t)
        if out.verified:
            leaves[idx] = out
            continue
        if out.kind is Kind.UNDECIDABLE_VERTEX:
            raise GridFailure(UNDECIDABLE_FAILURE, idx)
        if len(idx) >= cfg.max_depth:
            raise GridFailure(MAX_DEPTH_FAILURE, idx)
        internal.add(idx)
        stack.extend(reversed(offspring(idx, n, cfg.max_depth)))
    return GridTree(n, frozenset(internal), leaves, t)
