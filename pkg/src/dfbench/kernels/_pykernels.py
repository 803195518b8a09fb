"""Pure-Python reference versions of the numeric kernels.

Every function here has a twin in ``_ckernels.pyx`` that must return
bit-identical results: same operation order, Neumaier compensation, and
IEEE double arithmetic throughout.
"""
from __future__ import annotations


def neumaier_sum(values) -> float:
    s = 0.0
    c = 0.0
    for v in values:
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def weighted_mean(values, weights) -> float:
    """Return sum(w*v) / sum(w) with compensated sums."""
    n = len(values)
    if len(weights) != n:
        raise ValueError("values and weights differ in length")
    s = c = 0.0
    ws = wc = 0.0
    for i in range(n):
        w = float(weights[i])
        x = w * float(values[i])
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        t = ws + w
        if abs(ws) >= abs(w):
            wc += (ws - t) + w
        else:
            wc += (w - t) + ws
        ws = t
    den = ws + wc
    if den == 0.0:
        raise ZeroDivisionError("weights sum to zero")
    return (s + c) / den


def load_imbalance(units, throughputs) -> float:
    """Resource-weighted mean of min(T)/T_i; inputs must be positive."""
    n = len(units)
    if n == 0 or len(throughputs) != n:
        raise ValueError("need equal-length, non-empty units and throughputs")
    tmin = float(throughputs[0])
    for i in range(1, n):
        t = float(throughputs[i])
        if t < tmin:
            tmin = t
    s = c = 0.0
    rs = rc = 0.0
    for i in range(n):
        r = float(units[i])
        x = (tmin / float(throughputs[i])) * r
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        t = rs + r
        if abs(rs) >= abs(r):
            rc += (rs - t) + r
        else:
            rc += (r - t) + rs
        rs = t
    return (s + c) / (rs + rc)


def split_even(total: int, parts: int) -> list:
    """Split ``total`` into ``parts`` counts differing by at most one.

    Earlier parts receive the remainder.
    """
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if total < 0:
        raise ValueError("total must be >= 0")
    base, extra = divmod(total, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


def max_load_index(loads) -> int:
    """Index of the first maximum; -1 if every load is zero."""
    best = -1
    top = 0
    for i in range(len(loads)):
        x = int(loads[i])
        if x > top:
            top = x
            best = i
    return best
