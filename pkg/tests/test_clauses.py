import itertools

import pytest

from chc_ta import terms as T
from chc_ta.clauses import (
    ChcSystem,
    ClauseError,
    ClauseKind,
    HornClause,
    PredApp,
    PredicateSymbol,
    build_system,
    classify,
    normalize_clause,
    validate_system,
)
from conftest import all_interpretations, clause_holds_everywhere

x = T.Var("x", T.INT)
y = T.Var("y", T.INT)
P = PredicateSymbol("P", (T.INT,))
P1 = PredicateSymbol("P1", (T.INT,))
Q2 = PredicateSymbol("Q", (T.INT, T.INT))


def norm(body, constraint, head):
    return normalize_clause(body, constraint, head, T.FreshNames())


def test_normalize_already_normal_fact_unchanged():
    c = norm([], T.TRUE, PredApp(P, (x,)))
    assert c.head == PredApp(P, (x,))
    assert c.constraint == T.TRUE
    assert classify(c) == ClauseKind.FACT


def test_normalize_rewrites_head_term():
    c = norm([], T.gt(x, T.num(0)), PredApp(P, (T.add(x, T.num(1)),)))
    (z,) = c.head.args
    assert isinstance(z, T.Var) and z.name.startswith(T.RESERVED_PREFIX)
    assert c.constraint == T.conj(T.gt(x, T.num(0)), T.eq(z, T.add(x, T.num(1))))


def test_normalize_duplicate_variable_brute_force_equivalence():
    # body [Q(y,y)], head false: normalized to Q(z1,z2) with z1=y, z2=y.
    # Equivalence checked over a 3-element domain for every interpretation.
    raw_body = [PredApp(Q2, (y, y))]
    c = norm(raw_body, T.TRUE, None)
    z1, z2 = c.body_preds[0].args
    assert z1 != z2
    domain = (-1, 0, 1)
    for interp in all_interpretations([Q2], domain):
        raw_ok = clause_holds_everywhere(raw_body, T.TRUE, None, interp,
                                         [y], domain)
        norm_ok = clause_holds_everywhere(
            list(c.body_preds), c.constraint, c.head, interp,
            sorted(c.variables(), key=lambda v: v.name), domain)
        assert raw_ok == norm_ok


def test_normalize_shared_head_body_variable():
    c = norm([PredApp(P, (x,))], T.TRUE, PredApp(P1, (x,)))
    head_var = c.head.args[0]
    body_var = c.body_preds[0].args[0]
    assert head_var != body_var
    all_vars = [a for atom in c.atoms() for a in atom.args]
    assert len(all_vars) == len(set(all_vars))


def test_normalize_idempotent_up_to_renaming():
    c = norm([PredApp(Q2, (y, T.add(y, T.num(1))))], T.gt(y, T.num(0)), None)
    again = normalize_clause(list(c.body_preds), c.constraint, c.head,
                             T.FreshNames("w"), clause_id=c.id)
    assert again.body_preds == c.body_preds
    assert again.constraint == c.constraint
    assert again.head == c.head


def test_normalize_sort_mismatch():
    with pytest.raises(ClauseError):
        norm([], T.TRUE, PredApp(P, (T.rat(1),)))


def test_classification_table():
    fact = norm([], T.TRUE, PredApp(P, (x,)))
    definite = norm([PredApp(P1, (x,))], T.TRUE, PredApp(P, (x,)))
    query = norm([PredApp(P1, (x,))], T.TRUE, None)
    assert classify(fact) == ClauseKind.FACT
    assert classify(definite) == ClauseKind.DEFINITE
    assert classify(query) == ClauseKind.QUERY


def test_classification_partitions():
    system = build_system(
        [([], T.eq(x, T.num(0)), PredApp(P, (x,))),
         ([PredApp(P, (x,))], T.TRUE, PredApp(P1, (x,))),
         ([PredApp(P1, (x,))], T.TRUE, None),
         ([], T.TRUE, None)],
        [P, P1])
    kinds = [classify(c) for c in system.clauses]
    assert kinds == [ClauseKind.FACT, ClauseKind.DEFINITE, ClauseKind.QUERY,
                     ClauseKind.QUERY]


def test_validate_clean_system():
    s = build_system(
        [([], T.eq(x, T.num(0)), PredApp(P, (x,))),
         ([PredApp(P, (x,))], T.TRUE, PredApp(P1, (x,))),
         ([PredApp(P1, (x,))], T.TRUE, None)],
        [P, P1])
    assert validate_system(s) == []


def test_validate_undeclared_predicate():
    s = build_system([([], T.TRUE, PredApp(P, (x,)))], [P1])
    diags = validate_system(s)
    assert any("undeclared predicate P" in str(d) for d in diags)


def test_validate_duplicate_ids():
    c = norm([], T.TRUE, PredApp(P, (x,)))
    s = ChcSystem(frozenset([P]), (c, c))
    diags = validate_system(s)
    assert any("duplicate clause id" in str(d) for d in diags)
    assert any("not dense" in str(d) for d in diags)


def test_random_clauses_normalize_equivalently():
    # raw clauses with arbitrary argument terms stay logically equivalent
    # argument terms stay inside the evaluation domain (variables and
    # domain constants); arithmetic lives in the constraint
    import random
    rng = random.Random(11)
    domain = (-1, 0, 1)
    for _ in range(25):
        arg1 = rng.choice([x, y, T.num(0), T.num(1), x])
        arg2 = rng.choice([x, y, T.num(-1), T.num(1), y])
        raw_body = [PredApp(P, (arg1,))]
        head = PredApp(P1, (arg2,)) if rng.random() < 0.5 else None
        constraint = rng.choice([T.TRUE, T.le(x, y), T.eq(x, T.num(0))])
        c = norm(raw_body, constraint, head)
        variables = sorted({x, y} | c.variables(), key=lambda v: v.name)
        for interp in all_interpretations([P, P1], domain):
            raw_ok = clause_holds_everywhere(raw_body, constraint, head,
                                             interp, [x, y], domain)
            norm_ok = clause_holds_everywhere(
                list(c.body_preds), c.constraint, c.head, interp, variables,
                domain)
            if raw_ok != norm_ok:
                assert False, f"normalization changed meaning: {c}"
