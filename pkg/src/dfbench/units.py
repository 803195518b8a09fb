"""Quantity strings with unit suffixes, e.g. ``40GiB``, ``0.2TB/s``, ``1.69PFLOP/s``.

Decimal prefixes (k, M, G, T, P, E) are powers of 1000; binary prefixes
(Ki, Mi, Gi, Ti, Pi) are powers of 1024. Bare numbers are taken as already
being in the canonical unit (bytes, bytes/s, FLOP/s).
"""
from __future__ import annotations

import re

from .errors import UnitError

_DECIMAL = {"": 1, "k": 10**3, "K": 10**3, "M": 10**6, "G": 10**9, "T": 10**12, "P": 10**15, "E": 10**18}
_BINARY = {"Ki": 2**10, "Mi": 2**20, "Gi": 2**30, "Ti": 2**40, "Pi": 2**50}

_BASES = {
    "bytes": ("B",),
    "bandwidth": ("B/s",),
    "flops": ("FLOP/s", "FLOPS", "FLOPs/s"),
}

_QUANTITY = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-z/]*)\s*$")


def _multiplier(suffix: str, dimension: str) -> int:
    for base in _BASES[dimension]:
        if suffix.endswith(base):
            prefix = suffix[: -len(base)]
            if prefix in _BINARY:
                return _BINARY[prefix]
            if prefix in _DECIMAL:
                return _DECIMAL[prefix]
    raise UnitError(f"unrecognized unit suffix {suffix!r} for {dimension}")


def parse_quantity(value, dimension: str, field: str | None = None):
    """Return ``value`` in canonical units.

    Integers stay integers when the multiplier keeps them exact; everything
    else becomes a float.
    """
    if dimension not in _BASES:
        raise ValueError(f"unknown dimension {dimension!r}")
    if isinstance(value, bool):
        raise UnitError(f"expected a {dimension} quantity, got {value!r}", field=field)
    if isinstance(value, (int, float)):
        return value
    if not isinstance(value, str):
        raise UnitError(f"expected a {dimension} quantity, got {value!r}", field=field)
    m = _QUANTITY.match(value)
    if not m:
        raise UnitError(f"cannot parse quantity {value!r}", field=field)
    number, suffix = m.groups()
    try:
        mult = _multiplier(suffix, dimension) if suffix else 1
    except UnitError as exc:
        raise UnitError(str(exc), field=field) from None
    if re.fullmatch(r"[+-]?\d+", number):
        return int(number) * mult
    return float(number) * mult
