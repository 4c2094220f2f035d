"""Independent reference implementations used only by the tests.

Nothing here imports the cell or persistence machinery of the package;
each oracle recomputes its answer from first principles.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import ndimage

INF = math.inf


# ---------------------------------------------------------------------------
# dense cubical sublevel filtrations on a vertex grid


def sample_grid(fn, n: int) -> np.ndarray:
    """Values of ``fn`` on the ``n x n`` vertex grid ``i / (n - 1)``; axis 0 is x."""
    u = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(u, u, indexing="ij")
    return fn(np.stack([X, Y], axis=-1))


def dense_betti(values: np.ndarray, t: float) -> tuple[int, int]:
    """Betti numbers of the lower-star complex {cells with all vertices <= t}."""
    m = values <= t
    _, b0 = ndimage.label(m, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    V = int(m.sum())
    E = int((m[1:, :] & m[:-1, :]).sum() + (m[:, 1:] & m[:, :-1]).sum())
    F = int((m[1:, 1:] & m[:-1, 1:] & m[1:, :-1] & m[:-1, :-1]).sum())
    chi = V - E + F
    return b0, b0 - chi


class _UF:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a


def dense_persistence(values: np.ndarray) -> list[tuple[int, float, float]]:
    """Lower-star persistence (H0 and H1) of a 2D vertex-valued grid.

    H0 by union-find with the elder rule.  H1 by duality: squares plus an
    outer node form a graph processed in decreasing value; a merge of two
    dual components at edge value b kills the younger square value d and
    gives the H1 pair (b, d).
    """
    nx, ny = values.shape
    v = values.ravel()

    def vid(i, j):
        return i * ny + j

    edges = []
    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                edges.append((max(v[vid(i, j)], v[vid(i + 1, j)]), vid(i, j), vid(i + 1, j), ("h", i, j)))
            if j + 1 < ny:
                edges.append((max(v[vid(i, j)], v[vid(i, j + 1)]), vid(i, j), vid(i, j + 1), ("v", i, j)))
    pts = []
    uf = _UF(nx * ny)
    birth = v.copy()
    for val, a, b, _ in sorted(edges, key=lambda e: e[0]):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if birth[ra] > birth[rb]:
            ra, rb = rb, ra
        if birth[rb] < val:
            pts.append((0, float(birth[rb]), float(val)))
        uf.p[rb] = ra
    pts.append((0, float(v.min()), INF))

    # dual: square (i, j) spans vertices (i..i+1, j..j+1); index nsq = outer
    sx, sy = nx - 1, ny - 1
    nsq = sx * sy
    sq = np.maximum.reduce([values[:-1, :-1], values[1:, :-1], values[:-1, 1:], values[1:, 1:]]).ravel()
    sbirth = np.append(sq, INF)

    def sid(i, j):
        if 0 <= i < sx and 0 <= j < sy:
            return i * sy + j
        return nsq

    dual = []
    for val, _a, _b, (kind, i, j) in edges:
        if kind == "h":  # edge between (i,j) and (i+1,j): squares (i, j-1) and (i, j)
            dual.append((val, sid(i, j - 1), sid(i, j)))
        else:  # edge (i,j)-(i,j+1): squares (i-1, j) and (i, j)
            dual.append((val, sid(i - 1, j), sid(i, j)))
    duf = _UF(nsq + 1)
    for val, a, b in sorted(dual, key=lambda e: -e[0]):
        ra, rb = duf.find(a), duf.find(b)
        if ra == rb:
            continue
        # elder in the superlevel sense: larger birth survives
        if sbirth[ra] < sbirth[rb]:
            ra, rb = rb, ra
        if val < sbirth[rb]:
            pts.append((1, float(val), float(sbirth[rb])))
        duf.p[rb] = ra
    return sorted(pts)


# ---------------------------------------------------------------------------
# brute-force bottleneck


def bottleneck_brute(a, b) -> float:
    """Exhaustive search over partial matchings, diagonal completion."""
    out = 0.0
    dims = {d for d, _, _ in a} | {d for d, _, _ in b}
    for d in dims:
        pa = [(x, y) for dd, x, y in a if dd == d]
        pb = [(x, y) for dd, x, y in b if dd == d]
        if sum(y == INF for _, y in pa) != sum(y == INF for _, y in pb):
            return INF
        best = _brute(pa, pb)
        out = max(out, best)
    return out


def _cost(p, q):
    if p[1] == INF and q[1] == INF:
        return abs(p[0] - q[0])
    if p[1] == INF or q[1] == INF:
        return INF
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def _diag(p):
    return INF if p[1] == INF else (p[1] - p[0]) / 2


def _brute(pa, pb):
    best = INF

    def rec(i, used, cur):
        nonlocal best
        if cur >= best:
            return
        if i == len(pa):
            rest = max((_diag(pb[j]) for j in range(len(pb)) if j not in used), default=0.0)
            best = min(best, max(cur, rest))
            return
        rec(i + 1, used, max(cur, _diag(pa[i])))
        for j in range(len(pb)):
            if j not in used:
                rec(i + 1, used | {j}, max(cur, _cost(pa[i], pb[j])))

    rec(0, frozenset(), 0.0)
    return best


# ---------------------------------------------------------------------------
# rank-based persistence over Z2


def _gf2_rank(vectors) -> int:
    basis = {}
    r = 0
    for v in vectors:
        while v:
            top = v.bit_length() - 1
            if top in basis:
                v ^= basis[top]
            else:
                basis[top] = v
                r += 1
                break
    return r


def rank_persistence(cells, faces, level, dim, top_level: int) -> list[tuple[int, int, float]]:
    """Diagram from persistent Betti numbers of a filtered complex.

    ``cells`` is a list of ids, ``faces[c]`` their boundary cells,
    ``level[c]`` integer entry levels in 0..top_level.
    Returns sorted (dim, birth, death) with death INF for essential classes.
    """
    maxd = max(dim[c] for c in cells) if cells else 0

    def K(i):
        return [c for c in cells if level[c] <= i]

    def pbetti(k, i, j):
        # dim Z_k(K_i) - dim(B_k(K_j) ∩ C_k(K_i))
        if i < 0:
            return 0
        ki = [c for c in K(i) if dim[c] == k]
        kj = [c for c in K(j) if dim[c] == k]
        zi = len(ki)
        if k > 0:
            low = {c: n for n, c in enumerate(c for c in cells if dim[c] == k - 1)}
            zi -= _gf2_rank([sum(1 << low[f] for f in faces[c]) for c in ki])
        pos = {c: n for n, c in enumerate(kj)}
        bj = [sum(1 << pos[f] for f in faces[c]) for c in K(j) if dim[c] == k + 1]
        outside = sum(1 << pos[c] for c in kj if level[c] > i)
        return zi - (_gf2_rank(bj) - _gf2_rank([v & outside for v in bj]))

    pts = []
    for k in range(maxd + 1):
        for i in range(top_level + 1):
            for j in range(i + 1, top_level + 1):
                mu = pbetti(k, i, j - 1) - pbetti(k, i, j) - pbetti(k, i - 1, j - 1) + pbetti(k, i - 1, j)
                pts += [(k, i, j)] * mu
            ess = pbetti(k, i, top_level) - pbetti(k, i - 1, top_level)
            pts += [(k, i, INF)] * ess
    return sorted(pts)


# ---------------------------------------------------------------------------
# exact dyadic geometry from first principles


def cube_box(idx, ndim):
    """Closed box of a cube index as Fractions, digit by digit."""
    lo = [Fraction(0)] * ndim
    for j, s in enumerate(idx, start=1):
        for i in range(ndim):
            lo[i] += Fraction((s >> i) & 1, 2**j)
    w = Fraction(1, 2 ** len(idx))
    return [(l, l + w) for l in lo]


def cell_box(idx, lam):
    """Per-axis (lo, hi) Fractions; lo == hi on point axes."""
    box = cube_box(idx, len(lam))
    out = []
    for (l, h), d in zip(box, lam):
        out.append((l, l) if d == 0 else (h, h) if d == 1 else (l, h))
    return tuple(out)


def open_meet(a, b) -> bool:
    for (al, ah), (bl, bh) in zip(a, b):
        if al == ah and bl == bh:
            if al != bl:
                return False
        elif al == ah:
            if not bl < al < bh:
                return False
        elif bl == bh:
            if not al < bl < ah:
                return False
        elif max(al, bl) >= min(ah, bh):
            return False
    return True


def open_subset(a, b) -> bool:
    for (al, ah), (bl, bh) in zip(a, b):
        if bl == bh:
            if not al == ah == bl:
                return False
        elif al == ah:
            if not bl < al < bh:
                return False
        elif not (bl <= al and ah <= bh):
            return False
    return True


def canonical_geometries(leaves, ndim) -> set:
    """Cells of all leaves kept if every other leaf cell is disjoint or contains them."""
    geoms = {cell_box(l, lam) for l in leaves for lam in itertools.product(range(3), repeat=ndim)}
    out = set()
    for g in geoms:
        if all(not open_meet(g, h) or open_subset(g, h) for h in geoms):
            out.add(g)
    return out


def gdim(g) -> int:
    return sum(1 for l, h in g if l != h)
