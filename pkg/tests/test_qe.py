import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from chc_ta import qe
from chc_ta import terms as T

x = T.Var("x", T.INT)
y = T.Var("y", T.INT)
z = T.Var("z", T.INT)
r = T.Var("r", T.REAL)
s = T.Var("s", T.REAL)
b = T.Var("b", T.BOOL)


def test_ground_decisions():
    assert qe.satisfiable(T.TRUE)
    assert not qe.satisfiable(T.FALSE)
    assert qe.valid(T.eq(T.num(2), T.add(T.num(1), T.num(1))))


def test_basic_sat_unsat():
    assert qe.satisfiable(T.gt(x, T.num(0)))
    assert not qe.satisfiable(T.conj(T.gt(x, T.num(0)), T.lt(x, T.num(0))))
    assert qe.valid(T.implies(T.ge(x, T.num(1)), T.ge(x, T.num(0))))
    assert not qe.valid(T.ge(x, T.num(0)))


def test_parity_facts():
    # every y is 2x or 2x+1; not every y is 2x
    every = T.forall([y], T.exists([x], T.disj(
        T.eq(T.mul(T.num(2), x), y),
        T.eq(T.add(T.mul(T.num(2), x), T.num(1)), y))))
    assert qe.satisfiable(every) and qe.valid(every)
    even_only = T.forall([y], T.exists([x], T.eq(T.mul(T.num(2), x), y)))
    assert not qe.satisfiable(even_only)


def test_integer_density_fails_real_density_holds():
    between_int = T.forall([x, y], T.implies(
        T.lt(x, y), T.exists([z], T.conj(T.lt(x, z), T.lt(z, y)))))
    assert not qe.valid(between_int)
    t, u, v = (T.Var(n, T.REAL) for n in "tuv")
    between_real = T.forall([t, u], T.implies(
        T.lt(t, u), T.exists([v], T.conj(T.lt(t, v), T.lt(v, u)))))
    assert qe.valid(between_real)


def test_mod_pattern():
    even = T.eq(T.mk_app("mod", (x, T.num(2))), T.num(0))
    assert qe.satisfiable(even)
    assert not qe.satisfiable(T.conj(even, T.eq(x, T.num(3))))
    assert qe.valid(T.implies(T.eq(x, T.num(4)), even))


def test_bool_structure():
    f = T.conj(T.disj(b, T.gt(x, T.num(0))), T.neg(b))
    m = qe.get_model(f)
    assert m is not None and m["b"] is False and m["x"] > 0


def test_nonlinear_unsupported():
    with pytest.raises(qe.Unsupported):
        qe.satisfiable(T.eq(T.mul(x, y), T.num(4)))


def test_uninterpreted_sort_unsupported():
    u = T.Var("u", T.Sort("U"))
    with pytest.raises(qe.Unsupported):
        qe.satisfiable(T.eq(u, u))


# --- randomized, rigorous: formulas carry explicit bounds so brute-force
# enumeration over the box is a complete oracle


def _random_formula(rng, variables, depth=2):
    if depth == 0 or rng.random() < 0.4:
        coeffs = {v: rng.randint(-3, 3) for v in variables}
        k = rng.randint(-4, 4)
        lhs = T.num(k)
        for v, c in coeffs.items():
            if c:
                lhs = T.add(lhs, T.mul(T.num(c), v))
        op = rng.choice([T.le, T.lt, T.eq, lambda a, b: T.neg(T.eq(a, b)),
                         T.ge, T.gt])
        return op(lhs, T.num(rng.randint(-3, 3)))
    parts = [_random_formula(rng, variables, depth - 1)
             for _ in range(rng.randint(2, 3))]
    if rng.random() < 0.5:
        return T.conj(*parts)
    return T.disj(*parts)


def _bounded(formula, variables, bound):
    box = [T.conj(T.le(T.num(-bound), v), T.le(v, T.num(bound)))
           for v in variables]
    return T.conj(formula, *box)


def test_bounded_satisfiability_matches_enumeration():
    rng = random.Random(23)
    bound = 3
    for _ in range(150):
        variables = [x, y, z][:rng.randint(1, 3)]
        f = _bounded(_random_formula(rng, variables), variables, bound)
        ir = qe.translate(f)
        expected = any(
            qe.eval_ground(ir, dict(zip((v.name for v in variables), vals)))
            for vals in itertools.product(range(-bound, bound + 1),
                                          repeat=len(variables)))
        assert qe.satisfiable(f) == expected, T.to_smtlib(f)
        m = qe.get_model(f)
        if expected:
            assert m is not None
            assert qe.eval_ground(ir, {k: v for k, v in m.items()})
        else:
            assert m is None


def test_bounded_elimination_matches_enumeration():
    rng = random.Random(31)
    bound = 3
    for _ in range(80):
        f = _bounded(_random_formula(rng, [x, y]), [x, y], bound)
        projected = qe.eliminate(qe.translate(T.exists([x], f)))
        for yv in range(-bound, bound + 1):
            expected = any(
                qe.eval_ground(qe.translate(f), {"x": xv, "y": yv})
                for xv in range(-bound, bound + 1))
            got = qe.eval_ground(projected, {"y": yv}) \
                if "y" in qe.fvars(projected) else projected is qe.TRUEF
            assert got == expected, T.to_smtlib(f)


def test_real_constraints():
    assert qe.satisfiable(T.conj(T.lt(r, s), T.lt(s, T.add(r, T.rat("1/10")))))
    assert not qe.satisfiable(T.conj(T.lt(r, s), T.lt(s, r)))
    m = qe.get_model(T.conj(T.lt(T.rat(0), r), T.lt(r, T.rat("1/3"))))
    assert m is not None and 0 < m["r"] < Fraction(1, 3)


def test_real_strictness():
    # sup without max: x < 1 has no greatest solution but 1 is not reached
    f = T.conj(T.lt(r, T.rat(1)), T.ge(r, T.rat(1)))
    assert not qe.satisfiable(f)
    g = T.forall([r], T.exists([s], T.gt(s, r)))
    assert qe.valid(g)


def test_projection_examples():
    p = qe.project_onto(
        T.conj(T.eq(x, T.add(y, T.num(1))), T.ge(y, T.num(0))),
        {"x"}, {"x": T.INT})
    assert qe.valid(T.implies(p, T.ge(x, T.num(1))))
    assert qe.valid(T.implies(T.ge(x, T.num(1)), p))


def test_projection_keeps_divisibility():
    doubled = T.exists([y], T.eq(x, T.mul(T.num(2), y)))
    p = qe.project_onto(doubled, {"x"}, {"x": T.INT})
    assert qe.valid(T.implies(T.eq(x, T.num(4)), p))
    assert not qe.satisfiable(T.conj(p, T.eq(x, T.num(3))))


@settings(max_examples=60, deadline=None)
@given(st.integers(-8, 8), st.integers(1, 4), st.integers(-8, 8))
def test_interval_models(lo, width, shift):
    f = T.conj(T.ge(x, T.num(lo)), T.le(x, T.num(lo + width)),
               T.eq(y, T.add(x, T.num(shift))))
    m = qe.get_model(f)
    assert m is not None
    assert lo <= m["x"] <= lo + width
    assert m["y"] == m["x"] + shift
