"""Closed intervals with outward rounding, and boxes built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

_INF = math.inf


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _prod(a: float, b: float) -> float:
    # 0 * inf is 0 for interval endpoints
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


@dataclass(frozen=True, slots=True)
class Interval:
    """The closed set ``[lo, hi]`` of extended reals.

    Arithmetic nudges each computed bound one ulp outward, so the result
    always contains the exact real result set.
    """

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> Interval:
        return cls(x, x)

    @classmethod
    def hull_of(cls, items: Iterable[Interval]) -> Interval:
        items = list(items)
        if not items:
            raise ValueError("hull of nothing")
        return cls(min(i.lo for i in items), max(i.hi for i in items))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def is_point(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def subset_of(self, other: Interval) -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other) -> Interval:
        other = _coerce(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __neg__(self) -> Interval:
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> Interval:
        return self + (-_coerce(other))

    def __rsub__(self, other) -> Interval:
        return _coerce(other) + (-self)

    def __mul__(self, other) -> Interval:
        other = _coerce(other)
        ps = [
            _prod(self.lo, other.lo),
            _prod(self.lo, other.hi),
            _prod(self.hi, other.lo),
            _prod(self.hi, other.hi),
        ]
        return Interval(_down(min(ps)), _up(max(ps)))

    __rmul__ = __mul__

    def sin(self) -> Interval:
        from . import kernels

        return Interval(*kernels._itrig(self.lo, self.hi, 0))

    def cos(self) -> Interval:
        from . import kernels

        return Interval(*kernels._itrig(self.lo, self.hi, 1))

    def above(self, t: float) -> bool:
        """Certified ``> t`` everywhere."""
        return self.lo > t

    def below(self, t: float) -> bool:
        """Certified ``<= t`` everywhere."""
        return self.hi <= t

    def straddles(self, t: float) -> bool:
        return not (self.lo > t or self.hi <= t)

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.point(float(x))


# [math.pi, next float up] encloses pi since math.pi < pi.
PI = Interval(math.pi, _up(math.pi))
TWO_PI = Interval(2.0 * math.pi, 2.0 * _up(math.pi))


@dataclass(frozen=True, slots=True)
class IntervalBox:
    """Product of ``dims`` closed intervals."""

    axes: tuple[Interval, ...]

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Interval) else Interval(*a) for a in self.axes)
        if not axes:
            raise ValueError("a box needs at least one axis")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple[float, float]]) -> IntervalBox:
        return cls(tuple(Interval(lo, hi) for lo, hi in bounds))

    @classmethod
    def unit(cls, dims: int) -> IntervalBox:
        return cls(tuple(Interval(0.0, 1.0) for _ in range(dims)))

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def lo(self) -> tuple[float, ...]:
        return tuple(a.lo for a in self.axes)

    @property
    def hi(self) -> tuple[float, ...]:
        return tuple(a.hi for a in self.axes)

    def __getitem__(self, i: int) -> Interval:
        return self.axes[i]

    def __iter__(self):
        return iter(self.axes)

    def __len__(self) -> int:
        return len(self.axes)

    def contains_point(self, x: Sequence[float]) -> bool:
        return all(a.lo <= v <= a.hi for a, v in zip(self.axes, x))

    def replace(self, axis: int, iv: Interval) -> IntervalBox:
        axes = list(self.axes)
        axes[axis] = iv
        return IntervalBox(tuple(axes))

    def __repr__(self) -> str:
        return " x ".join(f"[{a.lo!r}, {a.hi!r}]" for a in self.axes)
