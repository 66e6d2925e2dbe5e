from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from chc_ta import terms as T


x = T.Var("x", T.INT)
y = T.Var("y", T.INT)


def test_substitute_simple():
    assert T.substitute(T.add(x, T.num(1)), {x: T.num(5)}) == T.add(T.num(5), T.num(1))


def test_substitute_empty_mapping_is_identity():
    t = T.add(x, y)
    assert T.substitute(t, {}) is t


def test_substitute_capture_avoidance():
    # forall x. x > y  under  {x -> 0, y -> x}  must rename the binder
    body = T.gt(x, y)
    t = T.forall([x], body)
    out = T.substitute(t, {x: T.num(0), y: x})
    assert isinstance(out, T.Quant)
    renamed = out.bound[0]
    assert renamed != x
    assert out.body == T.gt(renamed, x)


def test_substitute_sort_mismatch():
    with pytest.raises(T.SortError):
        T.substitute(x, {x: T.rat(1)})


def test_disjoint_substitutions_commute():
    z = T.Var("z", T.INT)
    t = T.add(x, T.add(y, z))
    one, two = {x: T.num(1)}, {y: T.num(2)}
    assert T.substitute(T.substitute(t, one), two) == \
        T.substitute(T.substitute(t, two), one)


@given(st.integers(-50, 50), st.integers(-50, 50))
def test_substitute_ground_evaluates_consistently(a, b):
    t = T.conj(T.le(x, y), T.eq(T.add(x, T.num(1)), y))
    s1 = T.substitute(t, {x: T.num(a), y: T.num(b)})
    s2 = T.substitute(T.substitute(t, {x: T.num(a)}), {y: T.num(b)})
    assert s1 == s2


def test_sort_checking():
    with pytest.raises(T.SortError):
        T.mk_app("+", (x, T.rat(1)))
    with pytest.raises(T.SortError):
        T.mk_app("and", (x, x))
    with pytest.raises(T.SortError):
        T.mk_app("ite", (T.TRUE, x, T.rat(1)))
    assert T.mk_app("ite", (T.TRUE, x, y)).sort == T.INT


def test_free_vars():
    t = T.forall([x], T.gt(x, y))
    assert t.free_vars() == frozenset({y})
    assert T.conj(T.gt(x, y)).free_vars() == frozenset({x, y})


def test_fresh_names_reserved_prefix():
    fresh = T.FreshNames()
    v = fresh.var(T.INT, "x")
    assert v.name.startswith(T.RESERVED_PREFIX)
    assert fresh.var(T.INT).name != v.name


def test_printing():
    assert T.to_smtlib(T.num(-3)) == "(- 3)"
    assert T.to_smtlib(T.rat(Fraction(1, 2))) == "(/ 1.0 2.0)"
    assert T.to_smtlib(T.conj(T.gt(x, T.num(0)), T.lt(x, y))) == \
        "(and (> x 0) (< x y))"
    assert T.to_smtlib(T.exists([x], T.eq(x, y))) == \
        "(exists ((x Int)) (= x y))"


def test_conj_flattens_and_dedups():
    a = T.gt(x, T.num(0))
    assert T.conj(a, T.conj(a, T.TRUE)) == a
    assert T.conj() == T.TRUE
    assert T.disj() == T.FALSE
    assert T.conj(a, T.FALSE) == T.FALSE
