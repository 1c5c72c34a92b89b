"""Compiled Horner kernels over the Mersenne field GF(2^61 - 1).

Every value is a ``uint64`` in ``[0, P61)``. Products are formed from 32-bit
halves so no intermediate exceeds 64 bits; the results are bit-identical to
Python big-integer arithmetic.
"""

import numpy as np
from numba import njit

P61 = (1 << 61) - 1

_P = np.uint64(P61)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)
_S3 = np.uint64(3)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)


@njit(inline="always", cache=True)
def _mulmod(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    lo = a_lo * b_lo
    mid = a_lo * b_hi + a_hi * b_lo
    hi = a_hi * b_hi
    # 2^64 = 8 and 2^61 = 1 (mod P); every term below is < 2^61 + 2^33
    s = (hi << _S3) + (mid >> _S29) + ((mid & _MASK29) << _S32) + (lo & _P) + (lo >> _S61)
    s = (s & _P) + (s >> _S61)
    if s >= _P:
        s -= _P
    return s


@njit(inline="always", cache=True)
def _addmod(a, b):
    s = a + b
    if s >= _P:
        s -= _P
    return s


@njit(cache=True)
def _horner_into(coeffs, xs, acc):
    # coefficient-outer loop keeps the per-point chains independent so the
    # inner loop vectorizes
    r = coeffs.shape[0]
    top = coeffs[r - 1]
    for j in range(xs.shape[0]):
        acc[j] = top
    for i in range(r - 2, -1, -1):
        c = coeffs[i]
        for j in range(xs.shape[0]):
            acc[j] = _addmod(_mulmod(acc[j], xs[j]), c)


@njit(cache=True)
def horner(coeffs, xs):
    """Evaluate one polynomial (coefficients low-to-high) at every point."""
    out = np.empty(xs.shape[0], dtype=np.uint64)
    _horner_into(coeffs, xs, out)
    return out


@njit(cache=True)
def horner_many(coeffs, xs):
    """Evaluate each row of ``coeffs`` (shape ``(B, r)``) at every point.

    Returns a ``(B, len(xs))`` array.
    """
    out = np.empty((coeffs.shape[0], xs.shape[0]), dtype=np.uint64)
    for b in range(coeffs.shape[0]):
        _horner_into(coeffs[b], xs, out[b])
    return out


@njit(cache=True)
def sparse_scatter(h_coeffs, s_coeffs, k, alpha, c, js, vs, y):
    """Accumulate ``sign * (c * v)`` into ``y[h(u)]`` for every replica ``u``.

    ``js`` are 0-based input coordinates processed in order, replicas in
    increasing order, so the floating point accumulation order is fixed.
    """
    m = np.uint64(k)
    one = np.uint64(1)
    a = np.uint64(alpha)
    u = np.empty(alpha, dtype=np.uint64)
    hv = np.empty(alpha, dtype=np.uint64)
    sv = np.empty(alpha, dtype=np.uint64)
    for t in range(js.shape[0]):
        cv = c * vs[t]
        base = np.uint64(js[t]) * a
        for i in range(alpha):
            u[i] = base + np.uint64(i)
        _horner_into(h_coeffs, u, hv)
        _horner_into(s_coeffs, u, sv)
        for i in range(alpha):
            row = hv[i] % m
            if sv[i] & one:
                y[row] -= cv
            else:
                y[row] += cv
