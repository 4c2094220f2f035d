"""Hot loops of the interval evaluator.

A compiled expression is a *tape*: parallel integer/float arrays in
topological order, one slot per distinct subexpression.  ``hull_eval``
splits a box into ``2**k`` pieces along every non-degenerate axis,
evaluates the tape on every sub-box with outward-rounded interval
arithmetic, and returns the hull of each requested root.

Nodes are grouped by the set of axes they depend on.  Constant nodes are
evaluated once, single-axis nodes once per piece of their axis, and only
nodes that mix axes are evaluated per sub-box.  Both implementations
(numba and numpy broadcasting) follow that scheme.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_MUL = 3
OP_NEG = 4
OP_SIN = 5
OP_COS = 6

_TWO_OVER_PI = 2.0 / math.pi
# Widening applied to libm sin/cos endpoint values (about 8 ulp).
_TRIG_REL = 2.0**-49
_TINY = 5e-324


# ---------------------------------------------------------------------------
# scalar primitives (jitted)


@njit
def _iadd(al, ah, bl, bh):
    return np.nextafter(al + bl, -np.inf), np.nextafter(ah + bh, np.inf)


@njit
def _imul(al, ah, bl, bh):
    p1 = al * bl
    p2 = al * bh
    p3 = ah * bl
    p4 = ah * bh
    lo = min(min(p1, p2), min(p3, p4))
    hi = max(max(p1, p2), max(p3, p4))
    return np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)


@njit
def _itrig(lo, hi, shift):
    # shift 0 -> sin, 1 -> cos.  Extrema sit at q*pi/2 with q = 1, 3 (mod 4)
    # for sin and q = 0, 2 (mod 4) for cos.
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi - lo >= 6.3:
        return -1.0, 1.0
    if shift == 0:
        vl = math.sin(lo)
        vh = math.sin(hi)
    else:
        vl = math.cos(lo)
        vh = math.cos(hi)
    rlo = min(vl, vh)
    rhi = max(vl, vh)
    slack = 1e-12 * (1.0 + max(abs(lo), abs(hi)))
    qlo = int(math.ceil(lo * _TWO_OVER_PI - slack))
    qhi = int(math.floor(hi * _TWO_OVER_PI + slack))
    rmax = (1 - shift) % 4
    rmin = (3 - shift) % 4
    if qlo + (rmax - qlo) % 4 <= qhi:
        rhi = 1.0
    if qlo + (rmin - qlo) % 4 <= qhi:
        rlo = -1.0
    rlo = max(-1.0, rlo - (abs(rlo) * _TRIG_REL + _TINY))
    rhi = min(1.0, rhi + (abs(rhi) * _TRIG_REL + _TINY))
    return rlo, rhi


@njit
def _apply(opc, l0, h0, l1, h1):
    if opc == OP_ADD:
        return _iadd(l0, h0, l1, h1)
    if opc == OP_MUL:
        return _imul(l0, h0, l1, h1)
    if opc == OP_NEG:
        return -h0, -l0
    if opc == OP_SIN:
        return _itrig(l0, h0, 0)
    if opc == OP_COS:
        return _itrig(l0, h0, 1)
    return l0, h0


@njit
def _pieces(lo, hi, k):
    ndim = lo.shape[0]
    big = 1 << k
    npc = np.empty(ndim, np.int64)
    plo = np.empty((ndim, big))
    phi = np.empty((ndim, big))
    for a in range(ndim):
        if lo[a] == hi[a]:
            npc[a] = 1
            plo[a, 0] = lo[a]
            phi[a, 0] = hi[a]
            continue
        npc[a] = big
        w = hi[a] - lo[a]
        prev = lo[a]
        for j in range(big):
            nxt = hi[a] if j == big - 1 else lo[a] + w * ((j + 1) / big)
            plo[a, j] = prev
            phi[a, j] = nxt
            prev = nxt
    return npc, plo, phi


@njit
def _hull_eval_jit(op, a0, a1, clo, chi, mask, roots, lo, hi, k):
    n = op.shape[0]
    ndim = lo.shape[0]
    npc, plo, phi = _pieces(lo, hi, k)
    big = plo.shape[1]

    axis_of = np.full(n, -1, np.int64)
    for i in range(n):
        m = mask[i]
        if m != 0 and (m & (m - 1)) == 0:
            a = 0
            while (m >> a) & 1 == 0:
                a += 1
            axis_of[i] = a

    vlo = np.zeros(n)
    vhi = np.zeros(n)
    tlo = np.zeros((n, big))
    thi = np.zeros((n, big))

    for i in range(n):
        if mask[i] != 0:
            continue
        if op[i] == OP_CONST:
            vlo[i] = clo[i]
            vhi[i] = chi[i]
        else:
            j0 = a0[i]
            j1 = a1[i] if a1[i] >= 0 else a0[i]
            vlo[i], vhi[i] = _apply(op[i], vlo[j0], vhi[j0], vlo[j1], vhi[j1])

    for i in range(n):
        a = axis_of[i]
        if a < 0:
            continue
        for p in range(npc[a]):
            if op[i] == OP_VAR:
                tlo[i, p] = plo[a, p]
                thi[i, p] = phi[a, p]
                continue
            j0 = a0[i]
            j1 = a1[i] if a1[i] >= 0 else a0[i]
            if mask[j0] == 0:
                l0, h0 = vlo[j0], vhi[j0]
            else:
                l0, h0 = tlo[j0, p], thi[j0, p]
            if mask[j1] == 0:
                l1, h1 = vlo[j1], vhi[j1]
            else:
                l1, h1 = tlo[j1, p], thi[j1, p]
            tlo[i, p], thi[i, p] = _apply(op[i], l0, h0, l1, h1)

    nr = roots.shape[0]
    out_lo = np.full(nr, np.inf)
    out_hi = np.full(nr, -np.inf)
    has_multi = False
    for r in range(nr):
        i = roots[r]
        a = axis_of[i]
        if mask[i] == 0:
            out_lo[r] = vlo[i]
            out_hi[r] = vhi[i]
        elif a >= 0:
            for p in range(npc[a]):
                out_lo[r] = min(out_lo[r], tlo[i, p])
                out_hi[r] = max(out_hi[r], thi[i, p])
        else:
            has_multi = True
    if not has_multi:
        return out_lo, out_hi

    multi = np.empty(n, np.int64)
    nm = 0
    for i in range(n):
        if mask[i] != 0 and axis_of[i] < 0:
            multi[nm] = i
            nm += 1

    # sweep rows along the last axis so the inner loops are independent
    last = ndim - 1
    pl = npc[last]
    rows = 1
    for a in range(last):
        rows *= npc[a]
    mlo = np.zeros((n, pl))
    mhi = np.zeros((n, pl))
    b0lo = np.empty(pl)
    b0hi = np.empty(pl)
    b1lo = np.empty(pl)
    b1hi = np.empty(pl)
    idx = np.zeros(ndim, np.int64)
    for _ in range(rows):
        for q in range(nm):
            i = multi[q]
            opc = op[i]
            l0, h0 = _operand(a0[i], mask, axis_of, vlo, vhi, tlo, thi, mlo, mhi, idx, last, pl, b0lo, b0hi)
            if a1[i] >= 0:
                l1, h1 = _operand(a1[i], mask, axis_of, vlo, vhi, tlo, thi, mlo, mhi, idx, last, pl, b1lo, b1hi)
            else:
                l1, h1 = l0, h0
            olo = mlo[i]
            ohi = mhi[i]
            if opc == OP_ADD:
                for p in range(pl):
                    olo[p] = np.nextafter(l0[p] + l1[p], -np.inf)
                    ohi[p] = np.nextafter(h0[p] + h1[p], np.inf)
            elif opc == OP_MUL:
                for p in range(pl):
                    olo[p], ohi[p] = _imul(l0[p], h0[p], l1[p], h1[p])
            elif opc == OP_NEG:
                for p in range(pl):
                    olo[p] = -h0[p]
                    ohi[p] = -l0[p]
            elif opc == OP_SIN:
                for p in range(pl):
                    olo[p], ohi[p] = _itrig(l0[p], h0[p], 0)
            elif opc == OP_COS:
                for p in range(pl):
                    olo[p], ohi[p] = _itrig(l0[p], h0[p], 1)
        for r in range(nr):
            i = roots[r]
            if mask[i] != 0 and axis_of[i] < 0:
                for p in range(pl):
                    if mlo[i, p] < out_lo[r]:
                        out_lo[r] = mlo[i, p]
                    if mhi[i, p] > out_hi[r]:
                        out_hi[r] = mhi[i, p]
        # odometer over the leading axes
        a = last - 1
        while a >= 0:
            idx[a] += 1
            if idx[a] < npc[a]:
                break
            idx[a] = 0
            a -= 1
    return out_lo, out_hi


@njit
def _operand(j, mask, axis_of, vlo, vhi, tlo, thi, mlo, mhi, idx, last, pl, blo, bhi):
    # value of slot j along the current row, as two length-pl arrays
    if mask[j] == 0:
        blo[:] = vlo[j]
        bhi[:] = vhi[j]
        return blo, bhi
    a = axis_of[j]
    if a < 0:
        return mlo[j], mhi[j]
    if a == last:
        return tlo[j, :pl], thi[j, :pl]
    blo[:] = tlo[j, idx[a]]
    bhi[:] = thi[j, idx[a]]
    return blo, bhi


# ---------------------------------------------------------------------------
# numpy versions


def _add_np(al, ah, bl, bh):
    return np.nextafter(al + bl, -np.inf), np.nextafter(ah + bh, np.inf)


def _mul_np(al, ah, bl, bh):
    p1 = al * bl
    p2 = al * bh
    p3 = ah * bl
    p4 = ah * bh
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)


def _trig_np(lo, hi, shift):
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    wide = ~(np.isfinite(lo) & np.isfinite(hi)) | (hi - lo >= 6.3)
    lo_s = np.where(wide, 0.0, lo)
    hi_s = np.where(wide, 0.0, hi)
    fn = np.sin if shift == 0 else np.cos
    vl = fn(lo_s)
    vh = fn(hi_s)
    rlo = np.minimum(vl, vh)
    rhi = np.maximum(vl, vh)
    slack = 1e-12 * (1.0 + np.maximum(np.abs(lo_s), np.abs(hi_s)))
    qlo = np.ceil(lo_s * _TWO_OVER_PI - slack).astype(np.int64)
    qhi = np.floor(hi_s * _TWO_OVER_PI + slack).astype(np.int64)
    rmax = (1 - shift) % 4
    rmin = (3 - shift) % 4
    rhi = np.where(qlo + np.mod(rmax - qlo, 4) <= qhi, 1.0, rhi)
    rlo = np.where(qlo + np.mod(rmin - qlo, 4) <= qhi, -1.0, rlo)
    rlo = np.maximum(-1.0, rlo - (np.abs(rlo) * _TRIG_REL + _TINY))
    rhi = np.minimum(1.0, rhi + (np.abs(rhi) * _TRIG_REL + _TINY))
    rlo = np.where(wide, -1.0, rlo)
    rhi = np.where(wide, 1.0, rhi)
    return rlo, rhi


def _apply_np(opc, l0, h0, l1, h1):
    if opc == OP_ADD:
        return _add_np(l0, h0, l1, h1)
    if opc == OP_MUL:
        return _mul_np(l0, h0, l1, h1)
    if opc == OP_NEG:
        return -h0, -l0
    if opc == OP_SIN:
        return _trig_np(l0, h0, 0)
    if opc == OP_COS:
        return _trig_np(l0, h0, 1)
    raise ValueError(f"bad opcode {opc}")


def _hull_eval_np(op, a0, a1, clo, chi, mask, roots, lo, hi, k):
    ndim = lo.shape[0]
    big = 1 << k
    axes = []
    for a in range(ndim):
        if lo[a] == hi[a]:
            e = np.array([lo[a], hi[a]])
        else:
            e = lo[a] + (hi[a] - lo[a]) * (np.arange(big + 1) / big)
            e[0] = lo[a]
            e[-1] = hi[a]
        shape = [1] * ndim
        shape[a] = e.size - 1
        axes.append((e[:-1].reshape(shape), e[1:].reshape(shape)))
    vals = [None] * len(op)
    for i in range(len(op)):
        o = op[i]
        if o == OP_CONST:
            vals[i] = (np.float64(clo[i]), np.float64(chi[i]))
        elif o == OP_VAR:
            vals[i] = axes[a0[i]]
        else:
            l0, h0 = vals[a0[i]]
            l1, h1 = vals[a1[i]] if a1[i] >= 0 else (l0, h0)
            vals[i] = _apply_np(o, l0, h0, l1, h1)
    out_lo = np.array([np.min(vals[r][0]) for r in roots], dtype=float)
    out_hi = np.array([np.max(vals[r][1]) for r in roots], dtype=float)
    return out_lo, out_hi


def hull_eval_numba(tape, lo, hi, k):
    return _hull_eval_jit(
        tape.op, tape.a0, tape.a1, tape.clo, tape.chi, tape.mask, tape.roots,
        np.ascontiguousarray(lo, dtype=np.float64), np.ascontiguousarray(hi, dtype=np.float64), int(k),
    )


def hull_eval_numpy(tape, lo, hi, k):
    return _hull_eval_np(
        tape.op, tape.a0, tape.a1, tape.clo, tape.chi, tape.mask, tape.roots,
        np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64), int(k),
    )


hull_eval = hull_eval_numba if USE_NUMBA else hull_eval_numpy
BACKEND = "numba" if USE_NUMBA else "numpy"
