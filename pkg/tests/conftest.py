import itertools
import os
import random

import pytest

from chc_ta import automata as A
from chc_ta import terms as T

CORPUS_DIR = os.path.join(os.path.dirname(__file__), "..", "corpus")


@pytest.fixture(scope="session")
def corpus_dir():
    return os.path.abspath(CORPUS_DIR)


def corpus_files():
    d = os.path.abspath(CORPUS_DIR)
    return [os.path.join(d, f) for f in sorted(os.listdir(d))
            if f.endswith(".smt2")]


# --- random tree automata for oracle-equivalence testing

SYMBOLS = frozenset({A.RankedSymbol(0, 0), A.RankedSymbol(1, 1),
                     A.RankedSymbol(2, 2)})


def random_automaton(rng: random.Random, symbols=SYMBOLS, max_states=4):
    n = rng.randint(1, max_states)
    states = [f"s{i}" for i in range(n)]
    rules = set()
    for sym in sorted(symbols, key=lambda s: s.clause_id):
        for _ in range(rng.randint(0, 4)):
            srcs = tuple(rng.choice(states) for _ in range(sym.rank))
            rules.add(A.Rule(srcs, sym, rng.choice(states)))
    accepting = {q for q in states if rng.random() < 0.4}
    return A.make_automaton(states, symbols, rules, accepting)


# --- brute-force truth evaluation of clauses over a finite domain


def eval_term(term, asg):
    """Evaluate a (quantifier-free) term under a variable assignment."""
    if isinstance(term, T.Var):
        return asg[term]
    if isinstance(term, T.Const):
        return term.value
    assert isinstance(term, T.App)
    vals = [eval_term(a, asg) for a in term.args]
    op = term.op
    if op == "and":
        return all(vals)
    if op == "or":
        return any(vals)
    if op == "not":
        return not vals[0]
    if op == "=>":
        return (not all(vals[:-1])) or vals[-1]
    if op == "=":
        return all(v == vals[0] for v in vals)
    if op == "distinct":
        return len(set(vals)) == len(vals)
    if op == "ite":
        return vals[1] if vals[0] else vals[2]
    if op == "+":
        return sum(vals)
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - sum(vals[1:])
    if op == "*":
        out = 1
        for v in vals:
            out *= v
        return out
    if op == "<":
        return all(a < b for a, b in zip(vals, vals[1:]))
    if op == "<=":
        return all(a <= b for a, b in zip(vals, vals[1:]))
    if op == ">":
        return all(a > b for a, b in zip(vals, vals[1:]))
    if op == ">=":
        return all(a >= b for a, b in zip(vals, vals[1:]))
    raise NotImplementedError(op)


def clause_truth(body_atoms, constraint, head, interp, asg):
    """Truth of one ground clause instance under a predicate interpretation."""
    body_ok = all(
        tuple(eval_term(a, asg) for a in atom.args) in interp[atom.symbol]
        for atom in body_atoms)
    if not (body_ok and eval_term(constraint, asg)):
        return True
    if head is None:
        return False
    return tuple(eval_term(a, asg) for a in head.args) in interp[head.symbol]


def clause_holds_everywhere(body_atoms, constraint, head, interp, variables,
                            domain):
    for values in itertools.product(domain, repeat=len(variables)):
        asg = dict(zip(variables, values))
        if not clause_truth(body_atoms, constraint, head, interp, asg):
            return False
    return True


def all_interpretations(symbols, domain):
    """Every interpretation of the given predicate symbols over the domain."""
    spaces = []
    for sym in symbols:
        tuples = list(itertools.product(domain, repeat=sym.arity))
        subsets = []
        for bits in itertools.product((False, True), repeat=len(tuples)):
            subsets.append(frozenset(t for t, b in zip(tuples, bits) if b))
        spaces.append(subsets)
    for combo in itertools.product(*spaces):
        yield dict(zip(symbols, combo))
