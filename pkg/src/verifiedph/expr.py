"""Expression trees for the function class {const, x_i, +, *, -, sin, cos}.

Trees are immutable and hashable; structurally equal subtrees compare
equal, which is what the tape compiler relies on for sharing work.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .interval import Interval, IntervalBox

MAX_REFINEMENT = 12


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return make_sum(self, as_expr(other))

    def __radd__(self, other):
        return make_sum(as_expr(other), self)

    def __sub__(self, other):
        return make_sum(self, make_neg(as_expr(other)))

    def __rsub__(self, other):
        return make_sum(as_expr(other), make_neg(self))

    def __mul__(self, other):
        return make_prod(self, as_expr(other))

    def __rmul__(self, other):
        return make_prod(as_expr(other), self)

    def __neg__(self):
        return make_neg(self)

    def children(self) -> tuple[Expr, ...]:
        return ()

    @property
    def ndim(self) -> int:
        """One more than the largest coordinate index used (0 for constants)."""
        return _ndim(self)

    def __str__(self) -> str:
        return to_prefix(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    """A real constant known only through the enclosure ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"bad constant enclosure [{self.lo}, {self.hi}]")

    @classmethod
    def of(cls, value) -> Const:
        if isinstance(value, Interval):
            return cls(value.lo, value.hi)
        v = float(value)
        return cls(v, v)

    @property
    def interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    def is_exactly(self, v: float) -> bool:
        return self.lo == v and self.hi == v


@dataclass(frozen=True, slots=True)
class Var(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("coordinate index must be non-negative")


@dataclass(frozen=True, slots=True)
class Sum(Expr):
    terms: tuple[Expr, ...]

    def children(self):
        return self.terms


@dataclass(frozen=True, slots=True)
class Prod(Expr):
    factors: tuple[Expr, ...]

    def children(self):
        return self.factors


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class Sin(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class Cos(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


ZERO = Const(0.0, 0.0)
ONE = Const(1.0, 1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Interval):
        return Const.of(x)
    return Const.of(float(x))


def var(i: int) -> Var:
    return Var(i)


def sin(e) -> Expr:
    return Sin(as_expr(e))


def cos(e) -> Expr:
    return Cos(as_expr(e))


# ---------------------------------------------------------------------------
# smart constructors


def make_neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.hi, -e.lo)
    if isinstance(e, Neg):
        return e.arg
    return Neg(e)


def make_sum(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    const = None
    for t in terms:
        parts = t.terms if isinstance(t, Sum) else (t,)
        for p in parts:
            if isinstance(p, Const):
                if p.is_exactly(0.0):
                    continue
                const = p.interval if const is None else const + p.interval
            else:
                flat.append(p)
    if const is not None:
        flat.insert(0, Const.of(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def make_prod(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    const = None
    for f in factors:
        parts = f.factors if isinstance(f, Prod) else (f,)
        for p in parts:
            if isinstance(p, Neg):
                const = Interval(-1.0, -1.0) if const is None else -const
                p = p.arg
                if isinstance(p, Prod):
                    flat.extend(p.factors)
                    continue
            if isinstance(p, Const):
                if p.is_exactly(0.0):
                    return ZERO
                if p.is_exactly(1.0):
                    continue
                const = p.interval if const is None else const * p.interval
            else:
                flat.append(p)
    # a second pass folds any constants pulled out of negated products
    rest = []
    for p in flat:
        if isinstance(p, Const):
            const = p.interval if const is None else const * p.interval
        else:
            rest.append(p)
    if const is not None and const.lo == 0.0 and const.hi == 0.0:
        return ZERO
    if const is not None and not (const.lo == 1.0 and const.hi == 1.0):
        rest.insert(0, Const.of(const))
    if not rest:
        return ONE
    if len(rest) == 1:
        return rest[0]
    return Prod(tuple(rest))


# ---------------------------------------------------------------------------
# structure


@lru_cache(maxsize=4096)
def _ndim(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index + 1
    return max((_ndim(c) for c in e.children()), default=0)


def size(e: Expr) -> int:
    return 1 + sum(size(c) for c in e.children())


def partial(f: Expr, axis: int) -> Expr:
    """Exact symbolic derivative of ``f`` with respect to ``x_axis``."""
    if axis < 0:
        raise ValueError("axis must be non-negative")
    return _d(f, axis)


def _d(e: Expr, axis: int) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == axis else ZERO
    if isinstance(e, Sum):
        return make_sum(*(_d(t, axis) for t in e.terms))
    if isinstance(e, Neg):
        return make_neg(_d(e.arg, axis))
    if isinstance(e, Prod):
        terms = []
        fs = e.factors
        for i, fi in enumerate(fs):
            di = _d(fi, axis)
            if di == ZERO:
                continue
            terms.append(make_prod(*fs[:i], di, *fs[i + 1:]))
        return make_sum(*terms)
    if isinstance(e, Sin):
        du = _d(e.arg, axis)
        return ZERO if du == ZERO else make_prod(du, Cos(e.arg))
    if isinstance(e, Cos):
        du = _d(e.arg, axis)
        return ZERO if du == ZERO else make_prod(Const(-1.0, -1.0), du, Sin(e.arg))
    raise TypeError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# float evaluation (sampling, finite differences)


def to_numpy(e: Expr, dtype=float) -> Callable[[np.ndarray], np.ndarray]:
    """Plain floating-point evaluator; ``x`` has shape ``(..., N)``.

    ``dtype=np.longdouble`` gives a higher-precision reference where the
    platform supports it.
    """

    def ev(node, x, memo):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            v = np.full(x.shape[:-1], (dtype(node.lo) + dtype(node.hi)) / 2, dtype=dtype)
        elif isinstance(node, Var):
            v = x[..., node.index]
        elif isinstance(node, Sum):
            v = sum(ev(t, x, memo) for t in node.terms)
        elif isinstance(node, Prod):
            v = ev(node.factors[0], x, memo)
            for fct in node.factors[1:]:
                v = v * ev(fct, x, memo)
        elif isinstance(node, Neg):
            v = -ev(node.arg, x, memo)
        elif isinstance(node, Sin):
            v = np.sin(ev(node.arg, x, memo))
        elif isinstance(node, Cos):
            v = np.cos(ev(node.arg, x, memo))
        else:
            raise TypeError(type(node).__name__)
        memo[key] = v
        return v

    def call(x):
        x = np.asarray(x, dtype=dtype)
        return np.broadcast_to(ev(e, x, {}), x.shape[:-1]).copy()

    return call


# ---------------------------------------------------------------------------
# tape compilation


@dataclass(frozen=True)
class Tape:
    op: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    clo: np.ndarray
    chi: np.ndarray
    mask: np.ndarray
    roots: np.ndarray

    def __len__(self) -> int:
        return len(self.op)


class _TapeBuilder:
    def __init__(self):
        self.rows: list[tuple] = []
        self.masks: list[int] = []
        self.memo: dict = {}

    def _emit(self, key, op, a0=-1, a1=-1, lo=0.0, hi=0.0, mask=0) -> int:
        slot = self.memo.get(key)
        if slot is not None:
            return slot
        slot = len(self.rows)
        self.rows.append((op, a0, a1, lo, hi))
        self.masks.append(mask)
        self.memo[key] = slot
        return slot

    def _fold(self, op, slots: list[int]) -> int:
        # combine children grouped by dependency mask so that single-axis
        # pieces are reduced before anything mixes axes
        groups: dict[int, list[int]] = {}
        for s in slots:
            groups.setdefault(self.masks[s], []).append(s)
        order = sorted(groups, key=lambda m: (bin(m).count("1"), m))
        acc = None
        for m in order:
            for s in groups[m]:
                if acc is None:
                    acc = s
                else:
                    mask = self.masks[acc] | self.masks[s]
                    acc = self._emit((op, acc, s), op, acc, s, mask=mask)
        return acc

    def _prod_slot(self, factors: list[Expr]) -> int:
        if not factors:
            return self.add(ONE)
        return self._fold(kernels.OP_MUL, [self.add(f) for f in factors])

    def _sum_slot(self, flists: list[list[Expr]]) -> int:
        # collect the most shared non-constant factor: F*a + F*b -> F*(a + b);
        # fewer operations and, by subdistributivity, a tighter enclosure
        counts: dict[Expr, int] = {}
        for fl in flists:
            if len(fl) < 2:
                continue
            for fct in dict.fromkeys(fl):
                if not isinstance(fct, Const):
                    counts[fct] = counts.get(fct, 0) + 1
        best = max(counts, key=counts.get, default=None)
        if best is None or counts[best] < 2:
            return self._fold(kernels.OP_ADD, [self._prod_slot(fl) for fl in flists])
        group, rest = [], []
        for fl in flists:
            if len(fl) >= 2 and best in fl:
                fl = list(fl)
                fl.remove(best)
                group.append(fl)
            else:
                rest.append(fl)
        a = self.add(best)
        b = self._sum_slot(group)
        slot = self._emit((kernels.OP_MUL, a, b), kernels.OP_MUL, a, b, mask=self.masks[a] | self.masks[b])
        if rest:
            return self._fold(kernels.OP_ADD, [slot, self._sum_slot(rest)])
        return slot

    def add(self, e: Expr) -> int:
        if e in self.memo:
            return self.memo[e]
        if isinstance(e, Const):
            slot = self._emit(e, kernels.OP_CONST, lo=e.lo, hi=e.hi)
        elif isinstance(e, Var):
            slot = self._emit(e, kernels.OP_VAR, a0=e.index, mask=1 << e.index)
        elif isinstance(e, Sum):
            flists = [list(t.factors) if isinstance(t, Prod) else [t] for t in e.terms]
            slot = self._sum_slot(flists)
            self.memo[e] = slot
        elif isinstance(e, Prod):
            slot = self._prod_slot(list(e.factors))
            self.memo[e] = slot
        else:
            op = {Neg: kernels.OP_NEG, Sin: kernels.OP_SIN, Cos: kernels.OP_COS}[type(e)]
            k = self.add(e.children()[0])
            slot = self._emit(e, op, a0=k, mask=self.masks[k])
        return slot

    def build(self, roots: list[int]) -> Tape:
        rows = self.rows
        return Tape(
            op=np.array([r[0] for r in rows], dtype=np.int64),
            a0=np.array([r[1] for r in rows], dtype=np.int64),
            a1=np.array([r[2] for r in rows], dtype=np.int64),
            clo=np.array([r[3] for r in rows], dtype=np.float64),
            chi=np.array([r[4] for r in rows], dtype=np.float64),
            mask=np.array(self.masks, dtype=np.int64),
            roots=np.array(roots, dtype=np.int64),
        )


@lru_cache(maxsize=512)
def compile_tape(exprs: tuple[Expr, ...]) -> Tape:
    """Compile one or more expressions into a shared tape."""
    b = _TapeBuilder()
    roots = [b.add(e) for e in exprs]
    return b.build(roots)


# ---------------------------------------------------------------------------
# interval evaluation


def _check(f: Expr, box: IntervalBox):
    if f.ndim > box.dims:
        raise ValueError(f"expression uses x{f.ndim - 1} but the box has {box.dims} axes")


def refined_eval(f: Expr, box: IntervalBox, k: int) -> Interval:
    """Hull of the enclosures of ``f`` over ``2**k`` pieces per axis of ``box``.

    Degenerate axes are not split.  The result contains the true range of
    ``f`` on ``box`` and is contained in ``eval(f, box)``.
    """
    if not 0 <= k <= MAX_REFINEMENT:
        raise ValueError(f"refinement k={k} outside [0, {MAX_REFINEMENT}]")
    _check(f, box)
    lo, hi = kernels.hull_eval(compile_tape((f,)), np.array(box.lo), np.array(box.hi), k)
    return Interval(lo[0], hi[0])


def eval(f: Expr, box: IntervalBox) -> Interval:  # noqa: A001 - mirrors the operation name
    """Natural interval extension of ``f`` on ``box``."""
    return refined_eval(f, box, 0)


def enclose_many(exprs: Sequence[Expr], lo, hi, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw-array variant of :func:`refined_eval` for several expressions at once."""
    return kernels.hull_eval(compile_tape(tuple(exprs)), np.asarray(lo, float), np.asarray(hi, float), k)


# ---------------------------------------------------------------------------
# prefix text format


def decimal_const(text: str) -> Const:
    """Enclosure of the real number written in ``text``."""
    exact = Fraction(text)
    v = float(exact)
    if Fraction(v) == exact:
        return Const(v, v)
    if Fraction(v) < exact:
        return Const(v, math.nextafter(v, math.inf))
    return Const(math.nextafter(v, -math.inf), v)


_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def parse_prefix(text: str) -> Expr:
    """Parse an s-expression such as ``(* (sin (* 2 pi x0)) x1)``.

    Atoms are decimal numbers, ``pi`` and coordinates ``x0, x1, ...``.
    Operators are ``+``, ``*``, ``-`` (negation with one argument,
    subtraction otherwise), ``sin`` and ``cos``.
    """
    from .interval import PI

    toks = _TOKEN.findall(text)
    pos = 0

    def atom(tok: str) -> Expr:
        if tok == "pi":
            return Const.of(PI)
        m = re.fullmatch(r"x(\d+)", tok)
        if m:
            return Var(int(m.group(1)))
        try:
            return decimal_const(tok)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"bad atom {tok!r}") from None

    def parse() -> Expr:
        nonlocal pos
        if pos >= len(toks):
            raise ValueError("unexpected end of expression")
        tok = toks[pos]
        pos += 1
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok != "(":
            return atom(tok)
        if pos >= len(toks):
            raise ValueError("unexpected end of expression")
        head = toks[pos]
        pos += 1
        args = []
        while pos < len(toks) and toks[pos] != ")":
            args.append(parse())
        if pos >= len(toks):
            raise ValueError("missing ')'")
        pos += 1
        if head == "+":
            return make_sum(*args) if args else ZERO
        if head == "*":
            return make_prod(*args) if args else ONE
        if head == "-":
            if len(args) == 1:
                return make_neg(args[0])
            if not args:
                raise ValueError("'-' needs arguments")
            return make_sum(args[0], *(make_neg(a) for a in args[1:]))
        if head in ("sin", "cos"):
            if len(args) != 1:
                raise ValueError(f"{head} takes one argument")
            return Sin(args[0]) if head == "sin" else Cos(args[0])
        if head == "interval" and len(args) == 2 and all(isinstance(a, Const) for a in args):
            return Const(args[0].lo, args[1].hi)
        raise ValueError(f"unknown operator {head!r}")

    e = parse()
    if pos != len(toks):
        raise ValueError("trailing tokens after expression")
    return e


def _exact_text(x: float) -> str:
    # shortest repr when it denotes the float exactly, else the full expansion
    s = repr(x)
    return s if Fraction(s) == Fraction(x) else str(Decimal(x))


def to_prefix(e: Expr) -> str:
    if isinstance(e, Const):
        if e.lo == e.hi:
            return _exact_text(e.lo)
        return f"(interval {_exact_text(e.lo)} {_exact_text(e.hi)})"
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Sum):
        return "(+ " + " ".join(to_prefix(t) for t in e.terms) + ")"
    if isinstance(e, Prod):
        return "(* " + " ".join(to_prefix(t) for t in e.factors) + ")"
    if isinstance(e, Neg):
        return f"(- {to_prefix(e.arg)})"
    if isinstance(e, Sin):
        return f"(sin {to_prefix(e.arg)})"
    if isinstance(e, Cos):
        return f"(cos {to_prefix(e.arg)})"
    raise TypeError(type(e).__name__)
