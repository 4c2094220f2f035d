"""Random two-dimensional Fourier series used as test and demo functions."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .expr import Const, Cos, Expr, Sin, Var, make_prod, make_sum, ZERO
from .interval import TWO_PI, Interval


def _freq(i: int) -> Const:
    return Const.of(TWO_PI if i == 1 else TWO_PI * Interval.point(float(i)))


def _trig(kind: str, i: int, axis: int) -> Expr:
    arg = make_prod(_freq(i), Var(axis))
    return Sin(arg) if kind == "s" else Cos(arg)


# k = 1..4 selects (sin, sin), (sin, cos), (cos, sin), (cos, cos)
_PAIRS = {1: ("s", "s"), 2: ("s", "c"), 3: ("c", "s"), 4: ("c", "c")}


def fourier_coefficients(modes: int, seed: int) -> np.ndarray:
    """Standard normal coefficients ``a[i-1, j-1, k-1]`` from numpy's PCG64 stream."""
    if modes < 1:
        raise ValueError("modes must be at least 1")
    return np.random.default_rng(seed).standard_normal((modes, modes, 4))


def fourier_from_terms(terms: Iterable[tuple[int, int, int, float]]) -> Expr:
    """Sum of ``a * trig(2 pi i x0) * trig(2 pi j x1)`` over ``(i, j, k, a)``.

    Indices are 1-based; zero coefficients are skipped.
    """
    out = []
    for i, j, k, a in terms:
        i, j, k = int(i), int(j), int(k)
        if i < 1 or j < 1 or k not in _PAIRS:
            raise ValueError(f"bad Fourier index ({i}, {j}, {k})")
        a = float(a)
        if a == 0.0:
            continue
        kx, ky = _PAIRS[k]
        out.append(make_prod(Const.of(a), _trig(kx, i, 0), _trig(ky, j, 1)))
    return make_sum(*out) if out else ZERO


def coefficient_terms(coeffs: np.ndarray) -> list[tuple[int, int, int, float]]:
    m = coeffs.shape[0]
    return [(i + 1, j + 1, k + 1, float(coeffs[i, j, k])) for i in range(m) for j in range(m) for k in range(4)]


def generate_fourier(modes: int, seed: int, coeffs: np.ndarray | None = None) -> Expr:
    """Random series with ``4 * modes**2`` coefficients.

    ``coeffs`` overrides the random draw (shape ``(modes, modes, 4)``).
    """
    if coeffs is None:
        coeffs = fourier_coefficients(modes, seed)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (modes, modes, 4):
        raise ValueError(f"coefficients must have shape ({modes}, {modes}, 4)")
    return fourier_from_terms(coefficient_terms(coeffs))
