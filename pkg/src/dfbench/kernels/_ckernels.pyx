# cython: boundscheck=False, wraparound=False, cdivision=False
"""Compiled twins of the functions in ``_pykernels``; results are bit-identical."""
from libc.math cimport fabs


def neumaier_sum(values):
    cdef double s = 0.0, c = 0.0, t, v
    for obj in values:
        v = obj
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def weighted_mean(values, weights):
    cdef Py_ssize_t i, n = len(values)
    cdef double s = 0.0, c = 0.0, ws = 0.0, wc = 0.0, t, w, x, den
    if len(weights) != n:
        raise ValueError("values and weights differ in length")
    for i in range(n):
        w = weights[i]
        x = w * <double>values[i]
        t = s + x
        if fabs(s) >= fabs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        t = ws + w
        if fabs(ws) >= fabs(w):
            wc += (ws - t) + w
        else:
            wc += (w - t) + ws
        ws = t
    den = ws + wc
    if den == 0.0:
        raise ZeroDivisionError("weights sum to zero")
    return (s + c) / den


def load_imbalance(units, throughputs):
    cdef Py_ssize_t i, n = len(units)
    cdef double tmin, t, r, x, s = 0.0, c = 0.0, rs = 0.0, rc = 0.0
    if n == 0 or len(throughputs) != n:
        raise ValueError("need equal-length, non-empty units and throughputs")
    tmin = throughputs[0]
    for i in range(1, n):
        t = throughputs[i]
        if t < tmin:
            tmin = t
    for i in range(n):
        r = units[i]
        x = (tmin / <double>throughputs[i]) * r
        t = s + x
        if fabs(s) >= fabs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        t = rs + r
        if fabs(rs) >= fabs(r):
            rc += (rs - t) + r
        else:
            rc += (r - t) + rs
        rs = t
    return (s + c) / (rs + rc)


def split_even(long long total, long long parts):
    cdef long long base, extra, i
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if total < 0:
        raise ValueError("total must be >= 0")
    base = total // parts
    extra = total % parts
    return [base + 1 if i < extra else base for i in range(parts)]


def max_load_index(loads):
    cdef Py_ssize_t i, n = len(loads), best = -1
    cdef long long top = 0, x
    for i in range(n):
        x = loads[i]
        if x > top:
            top = x
            best = i
    return best
