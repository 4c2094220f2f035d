"""Audit helpers shared by the module tests and the acceptance suite."""

from __future__ import annotations

import itertools

from oracles import canonical_geometries, cell_box, gdim, open_meet
from verifiedph.cw import CWStructure, closed_union_equals, key_fractions
from verifiedph.grid import GridTree


def random_tree(rng, ndim: int, max_depth: int, p: float = 0.45, max_leaves: int = 120) -> GridTree:
    """Random dyadic subdivision with leaves no deeper than ``max_depth``.

    The root is always refined (when ``max_depth > 0``); every other node
    is refined with probability ``p``.
    """
    if max_depth == 0:
        return GridTree.from_internal(ndim, [])
    internal = {()}
    frontier = [()]
    n_leaves = 1 << ndim
    while frontier:
        node = frontier.pop(int(rng.integers(len(frontier))))
        if len(node) + 1 >= max_depth:
            continue
        for s in range(1 << ndim):
            child = node + (s,)
            if n_leaves + (1 << ndim) - 1 > max_leaves:
                break
            if rng.random() < p:
                internal.add(child)
                frontier.append(child)
                n_leaves += (1 << ndim) - 1
    return GridTree.from_internal(ndim, internal)


def construct_n_mismatches(tree: GridTree, structure: CWStructure | None = None) -> tuple[int, int, int]:
    """Compare construct_n with brute-force intersection for every leaf cell.

    Returns ``(checked, neighbour_mismatches, cover_failures)``.  The
    canonical cell set itself is also compared with the oracle selection;
    a disagreement there counts as one mismatch.
    """
    s = structure or CWStructure(tree)
    n = tree.ndim
    canon = canonical_geometries(list(tree.leaves), n)
    mismatches = 0
    if canon != {key_fractions(k) for k in s.keys}:
        mismatches += 1
    by_dim: dict[int, list] = {}
    for g in canon:
        by_dim.setdefault(gdim(g), []).append(g)
    checked = cover_bad = 0
    for leaf in tree.leaves:
        for lam in itertools.product(range(3), repeat=n):
            g = cell_box(leaf, lam)
            want = {h for h in by_dim.get(gdim(g), []) if open_meet(g, h)}
            got_pos = s.construct_n_key(leaf, _key(leaf, lam))
            got = {key_fractions(s.keys[p]) for p in got_pos}
            checked += 1
            if got != want:
                mismatches += 1
            if not closed_union_equals([s.keys[p] for p in got_pos], _key(leaf, lam)):
                cover_bad += 1
    return checked, mismatches, cover_bad


def _key(leaf, lam):
    from verifiedph.cw import cell_key

    return cell_key(leaf, lam)


def dd_violations(structure: CWStructure) -> tuple[int, int]:
    """Signed-integer check of boundary(boundary(c)) == 0 for every cell."""
    bad = 0
    for p in range(len(structure)):
        acc: dict[int, int] = {}
        for q, a in structure.boundary_pos(p).items():
            for r, b in structure.boundary_pos(q).items():
                acc[r] = acc.get(r, 0) + a * b
        if any(acc.values()):
            bad += 1
    return len(structure), bad


def random_filtered_complex(rng, structure: CWStructure, top_level: int):
    """Random closure-compatible entry levels for every cell of ``structure``.

    Returns ``(levels, faces)`` keyed by cell position; a cell never
    enters before its boundary.
    """
    order = sorted(range(len(structure)), key=lambda p: structure.dims[p])
    faces = {p: sorted(structure.boundary_pos(p, 2)) for p in order}
    levels: dict[int, int] = {}
    for p in order:
        lv = int(rng.integers(0, top_level + 1))
        levels[p] = max([lv] + [levels[q] for q in faces[p]])
    return levels, faces
