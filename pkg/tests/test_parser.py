import random

import pytest

from chc_ta import terms as T
from chc_ta.clauses import ClauseKind, classify, validate_system
from chc_ta.parser import (
    NotHornError,
    ParseError,
    expected_status,
    parse,
    unparse,
)

HEADER = "(set-logic HORN)\n(declare-fun P (Int) Bool)\n"
FOOTER = "\n(check-sat)\n"


def parse_one(assert_text):
    return parse(HEADER + assert_text + FOOTER)


def test_single_fact():
    s = parse("(set-logic HORN)(declare-fun P (Int) Bool)"
              "(assert (forall ((x Int)) (=> (> x 0) (P x))))(check-sat)")
    assert len(s.clauses) == 1
    assert classify(s.clauses[0]) == ClauseKind.FACT
    assert s.logic == "HORN"


def test_query_clause():
    s = parse_one("(assert (forall ((x Int)) (=> (and (P x) (> x 5)) false)))")
    c = s.clauses[0]
    assert classify(c) == ClauseKind.QUERY
    assert len(c.body_preds) == 1


def test_disjunctive_head_is_not_horn():
    with pytest.raises(NotHornError):
        parse_one("(assert (or (P 1) (P 2)))")


def test_predicate_under_negation_is_not_horn():
    with pytest.raises(NotHornError):
        parse_one("(assert (forall ((x Int)) (=> (not (P x)) false)))")


def test_constraint_head_is_not_horn():
    with pytest.raises(NotHornError):
        parse_one("(assert (forall ((x Int)) (=> (P x) (> x 0))))")


def test_curried_implication():
    s = parse_one("(assert (forall ((x Int) (y Int))"
                  " (=> (P x) (=> (> x y) (P y)))))")
    c = s.clauses[0]
    assert classify(c) == ClauseKind.DEFINITE
    assert len(c.body_preds) == 1


def test_nested_forall_merged():
    s = parse_one("(assert (forall ((x Int)) (forall ((y Int))"
                  " (=> (and (P x) (= y x)) (P y)))))")
    assert classify(s.clauses[0]) == ClauseKind.DEFINITE


def test_let_expansion():
    s = parse_one("(assert (forall ((x Int))"
                  " (let ((z (+ x 1))) (=> (> z 0) (P z)))))")
    c = s.clauses[0]
    assert classify(c) == ClauseKind.FACT
    # the let body was inlined; constraints mention x through z = x+1
    assert any(v.name == "x" for v in c.constraint.free_vars())


def test_quantifier_free_fact_and_not_query():
    s = parse("(set-logic HORN)(declare-fun P (Int) Bool)"
              "(assert (P 5))(assert (not (P 7)))(check-sat)")
    assert [classify(c) for c in s.clauses] == [ClauseKind.FACT,
                                                ClauseKind.QUERY]


def test_rejects_reserved_prefix():
    with pytest.raises(ParseError):
        parse("(set-logic HORN)(declare-fun P (Int) Bool)"
              "(assert (forall ((~z Int)) (=> (> ~z 0) (P ~z))))(check-sat)")


def test_rejects_multiple_check_sat():
    with pytest.raises(ParseError):
        parse("(set-logic HORN)(check-sat)(check-sat)")


def test_missing_set_logic():
    with pytest.raises(ParseError):
        parse("(check-sat)")


def test_non_horn_logic_warns():
    warnings = []
    parse("(set-logic QF_LIA)(check-sat)", warnings=warnings)
    assert warnings and warnings[0].severity == "warning"


def test_diagnostic_format():
    try:
        parse("(set-logic HORN)\n(assert (or a b))\n(check-sat)",
              filename="file.smt2")
        assert False
    except ParseError as e:
        text = str(e)
        assert text.startswith("file.smt2:2:")
        assert ": error: " in text


def test_arity_mismatch():
    with pytest.raises(ParseError):
        parse_one("(assert (forall ((x Int)) (=> (> x 0) (P x x))))")


def test_big_literals():
    s = parse_one("(assert (forall ((x Int))"
                  " (=> (= x 123456789012345678901234567890) (P x))))")
    assert classify(s.clauses[0]) == ClauseKind.FACT


def test_expected_status():
    assert expected_status("(set-info :status sat)(check-sat)") == "sat"
    assert expected_status("(set-logic HORN)") is None


def test_roundtrip_counter_system():
    text = """(set-logic HORN)
(declare-fun Inv (Int Int) Bool)
(assert (forall ((x Int) (y Int)) (=> (and (= x 0) (= y x)) (Inv x y))))
(assert (forall ((x Int) (y Int) (a Int) (b Int))
  (=> (and (Inv x y) (< x 5) (= a (+ x 1)) (= b (+ y 2))) (Inv a b))))
(assert (forall ((x Int) (y Int)) (=> (and (Inv x y) (> y 20)) false)))
(check-sat)"""
    s1 = parse(text)
    s2 = parse(unparse(s1))
    s3 = parse(unparse(s2))
    for a, b in ((s1, s2), (s2, s3)):
        assert len(a.clauses) == len(b.clauses)
        assert [classify(c) for c in a.clauses] == [classify(c) for c in b.clauses]
        assert {p.name for p in a.predicates} == {p.name for p in b.predicates}
    # the printed form is a fixpoint after one round
    assert unparse(s2) == unparse(s3)
    assert all(validate_system(s) == [] for s in (s1, s2, s3))


def test_roundtrip_opaque_sort():
    text = ("(set-logic HORN)(declare-sort U 0)(declare-fun P (U) Bool)"
            "(assert (forall ((u U)) (P u)))(check-sat)")
    s = parse(text)
    printed = unparse(s)
    assert "(declare-sort U 0)" in printed
    s2 = parse(printed)
    assert {p.name for p in s2.predicates} == {"P"}


def test_unparse_no_variable_clause():
    s = parse("(set-logic HORN)(assert false)(check-sat)")
    printed = unparse(s)
    assert "(forall ()" not in printed
    s2 = parse(printed)
    assert classify(s2.clauses[0]) == ClauseKind.QUERY


def test_fuzz_never_crashes_smoke():
    rng = random.Random(5)
    alphabet = "()assert forall =>PInt x01:\"|;~#\n"
    for _ in range(500):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        try:
            parse(text)
        except ParseError:
            pass
