import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfbench import kernels
from dfbench.kernels import _pykernels as py

BACKENDS = [py]
if kernels.compiled_backend is not None:
    BACKENDS.append(kernels.compiled_backend)

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=1e-6, max_value=1e9, allow_nan=False)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.compiled_backend is not None:
        assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_neumaier_recovers_cancellation(k):
    assert k.neumaier_sum([1.0, 1e100, 1.0, -1e100]) == 2.0
    assert k.neumaier_sum([]) == 0.0


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_weighted_mean_zero_weights(k):
    with pytest.raises(ZeroDivisionError):
        k.weighted_mean([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        k.weighted_mean([1.0], [1.0, 2.0])


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_split_even_and_max_index(k):
    assert list(k.split_even(10, 3)) == [4, 3, 3]
    assert list(k.split_even(0, 2)) == [0, 0]
    assert k.max_load_index([0, 3, 3, 1]) == 1
    assert k.max_load_index([0, 0]) == -1
    with pytest.raises(ValueError):
        k.split_even(3, 0)


@settings(max_examples=300, deadline=None)
@given(st.lists(finite, max_size=60))
def test_sum_close_to_fsum(xs):
    assert kernels.neumaier_sum(xs) == pytest.approx(math.fsum(xs), rel=1e-12, abs=1e-6)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled backend not built")
@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(finite, positive), min_size=1, max_size=40))
def test_backends_bit_identical(rows):
    c = kernels.compiled_backend
    vals = [v for v, _ in rows]
    ws = [w for _, w in rows]
    assert c.neumaier_sum(vals) == py.neumaier_sum(vals)
    assert c.weighted_mean(vals, ws) == py.weighted_mean(vals, ws)
    units = [max(1, int(w)) for w in ws]
    assert c.load_imbalance(units, ws) == py.load_imbalance(units, ws)
    assert c.max_load_index(units) == py.max_load_index(units)
    assert list(c.split_even(sum(units), len(units))) == list(py.split_even(sum(units), len(units)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 10**6), positive), min_size=1, max_size=30))
def test_load_imbalance_matches_exact(rows):
    units = [r for r, _ in rows]
    thr = [t for _, t in rows]
    tmin = min(Fraction(t) for t in thr)
    want = sum(tmin / Fraction(t) * r for r, t in rows) / sum(units)
    got = kernels.load_imbalance(units, thr)
    assert abs(Fraction(got) - want) <= want * Fraction(1, 10**12)
