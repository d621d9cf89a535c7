from __future__ import annotations

from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnacount.expr import var
from rnacount.series import ConvergenceError, SeriesError, SeriesRing, TruncatedSeries, solve_fixed_point

T = SeriesRing(("t",))
TS = SeriesRing(("t", "s"), (1, 2))
t_, y_, s_ = var("t"), var("y"), var("s")


def catalan(n):
    return comb(2 * n, n) // (n + 1)


def test_ring_pack_roundtrip_and_degree():
    key = TS.pack((3, 2))
    assert TS.unpack(key) == (3, 2)
    assert TS.degree(key) == 3 + 2 * 2


def test_ring_rejects_negative_weights():
    with pytest.raises(ValueError):
        SeriesRing(("a",), (-1,))


def test_geometric_series_and_reciprocal():
    t = T.gen("t", 10)
    g = 1 / (1 - t)
    assert g.to_list() == [1] * 11
    assert (g * (1 - t)).to_list() == [1] + [0] * 10


def test_orders_propagate_to_minimum():
    a = T.gen("t", 5) + 1
    b = T.gen("t", 3) + 2
    assert (a * b).order == 3
    assert (a + b).order == 3


def test_floats_are_rejected():
    t = T.gen("t", 4)
    with pytest.raises(TypeError):
        t * 0.5
    with pytest.raises(TypeError):
        TruncatedSeries.from_list([0.5, 1])


def test_reciprocal_needs_unit():
    with pytest.raises(SeriesError):
        T.gen("t", 4).reciprocal()


def test_rational_coefficients():
    t = T.gen("t", 6)
    e = 1 / (1 - t / 2)
    assert e.to_list() == [Fraction(1, 2**k) for k in range(7)]


def test_multivariate_product_respects_weighted_order():
    t, s = TS.gen("t", 6), TS.gen("s", 6)
    f = 1 / (1 - t - s)
    # coefficient of t^a s^b is binomial(a+b, a); weighted degree a + 2b <= 6
    for (a, b), c in f.terms():
        assert a + 2 * b <= 6
        assert c == comb(a + b, a)
    assert f.coefficient(2, 2) == 6


def test_multivariate_reciprocal():
    t, s = TS.gen("t", 8), TS.gen("s", 8)
    a = 1 + t + 3 * s + t * s
    assert (a * a.reciprocal()) == TS.const(1, 8)


def test_composition():
    t = T.gen("t", 6)
    x = T.gen("t", 6)
    f = x / (1 - x)
    g = f.substitute({"t": t / (1 - t)})
    assert g.to_list() == [0, 1, 2, 4, 8, 16, 32]


def test_ill_defined_composition():
    t = T.gen("t", 6)
    f = 1 / (1 - t)
    with pytest.raises(SeriesError, match="ill-defined"):
        f.substitute({"t": t + 1})


def test_substitute_into_other_ring():
    f = TS.gen("t", 6) * TS.gen("s", 6)
    T4 = T.gen("t", 6)
    g = f.substitute({"t": T4, "s": T4 * T4 * 3}, ring=T)
    assert g.to_list() == [0, 0, 0, 3, 0, 0, 0]


def test_csv_roundtrip():
    t, s = TS.gen("t", 6), TS.gen("s", 6)
    f = 1 / (1 - t / 3 - s)
    text = f.to_csv()
    assert text.splitlines()[0] == "exponents,numerator,denominator"
    assert TruncatedSeries.from_csv(text, TS, 6) == f


def test_catalan_fixed_point_both_methods():
    env = {"t": T.gen("t", 40)}
    Q = t_ * (1 + y_) ** 2
    f_newton = solve_fixed_point(Q, env, 40)
    f_iter = solve_fixed_point(Q, env, 40, method="iterate")
    assert f_newton == f_iter
    assert f_newton.to_list() == [0] + [catalan(n) for n in range(1, 41)]


def test_fixed_point_with_rational_denominators():
    # Motzkin paths: M = 1 + t M + t^2 M^2 ; y = M - 1
    Q = t_ * (1 + y_) + t_**2 * (1 + y_) ** 2
    f = solve_fixed_point(Q, {"t": T.gen("t", 10)}, 10)
    assert f.to_list()[1:] == [1, 2, 4, 9, 21, 51, 127, 323, 835, 2188]


def test_fixed_point_detects_unforced_constant():
    with pytest.raises(ConvergenceError):
        solve_fixed_point(1 + y_ * y_, {"t": T.gen("t", 4)}, 4)


def test_fixed_point_unbound_variable():
    with pytest.raises(KeyError):
        solve_fixed_point(t_ * s_ * (1 + y_), {"t": T.gen("t", 4)}, 4)


series_lists = st.lists(st.integers(-5, 5), min_size=1, max_size=8)


@settings(max_examples=60)
@given(series_lists, series_lists, series_lists)
def test_ring_axioms(a, b, c):
    A, B, C = (TruncatedSeries.from_list(v, order=7) for v in (a, b, c))
    assert (A * B) * C == A * (B * C)
    assert A * (B + C) == A * B + A * C
    assert A + B == B + A


@settings(max_examples=60)
@given(series_lists.filter(lambda v: v[0] != 0))
def test_reciprocal_inverse(a):
    A = TruncatedSeries.from_list(a, order=9)
    assert A * A.reciprocal() == TruncatedSeries.from_list([1], order=9)
