"""Decision procedures for linear arithmetic over Int, Real and Bool.

Satisfiability, validity, model construction and quantifier elimination
for formulas whose atoms are linear constraints.  Integer quantifiers
are eliminated with Cooper's method (coefficient scaling, divisibility
constraints, test points over lower or upper bounds); real quantifiers
with virtual substitution over boundary test points (e, e + epsilon,
minus infinity).  Everything is exact: integers and Fractions, no
floating point.

This module backs the bundled solver process; it is independent of the
clause pipeline and is property-tested against brute-force enumeration
on bounded instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from .terms import (
    BOOL,
    INT,
    REAL,
    App,
    Const,
    Quant,
    Sort,
    Term,
    Var,
    conj,
    disj,
    exists,
    forall,
    mk_app,
    neg,
)


class Unsupported(Exception):
    """Formula is outside the supported linear fragment."""


Value = Union[bool, int, Fraction]
Coeffs = tuple  # tuple[tuple[str, number], ...] sorted by name

# ---------------------------------------------------------------------------
# Linear expressions as sorted coefficient tuples plus a constant.


def _freeze(coeffs: dict) -> Coeffs:
    return tuple(sorted((v, c) for v, c in coeffs.items() if c != 0))


def _thaw(coeffs: Coeffs) -> dict:
    return dict(coeffs)


def _lin_add(a: dict, b: dict, factor=1) -> dict:
    out = dict(a)
    for v, c in b.items():
        out[v] = out.get(v, 0) + factor * c
    return out


# ---------------------------------------------------------------------------
# Formula IR (negation normal form: negation lives inside atoms/literals).


class F:
    __slots__ = ()


class _TrueF(F):
    __slots__ = ()

    def __repr__(self):
        return "true"


class _FalseF(F):
    __slots__ = ()

    def __repr__(self):
        return "false"


TRUEF = _TrueF()
FALSEF = _FalseF()

# atom ops: le (sum<=0), lt (sum<0, Real only), eq, ne, dvd (mod | sum),
# ndvd (negated dvd)
_ATOM_OPS = ("le", "lt", "eq", "ne", "dvd", "ndvd")


@dataclass(frozen=True)
class Atom(F):
    op: str
    coeffs: Coeffs
    k: Value
    is_int: bool
    mod: int = 0

    def vars(self) -> list:
        return [v for v, _ in self.coeffs]

    def coef(self, var: str):
        for v, c in self.coeffs:
            if v == var:
                return c
        return 0

    def __repr__(self):
        s = " + ".join(f"{c}*{v}" for v, c in self.coeffs) or "0"
        if self.op in ("dvd", "ndvd"):
            return f"{'' if self.op == 'dvd' else '!'}({self.mod} | {s} + {self.k})"
        sym = {"le": "<=", "lt": "<", "eq": "=", "ne": "!="}[self.op]
        return f"({s} + {self.k} {sym} 0)"


@dataclass(frozen=True)
class BLit(F):
    name: str
    pos: bool

    def __repr__(self):
        return self.name if self.pos else f"!{self.name}"


@dataclass(frozen=True)
class And(F):
    args: tuple

    def __repr__(self):
        return "(" + " & ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Or(F):
    args: tuple

    def __repr__(self):
        return "(" + " | ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Q(F):
    kind: str  # "ex" | "all"
    var: str
    var_kind: str  # "int" | "real" | "bool"
    body: F

    def __repr__(self):
        return f"({self.kind} {self.var}. {self.body!r})"


def _finish_atom(op: str, coeffs: dict, k: Value, is_int: bool, mod: int = 0) -> F:
    """Normalize an atom; folds to a constant when ground or degenerate."""
    coeffs = {v: c for v, c in coeffs.items() if c != 0}
    if not coeffs:
        if op == "le":
            return TRUEF if k <= 0 else FALSEF
        if op == "lt":
            return TRUEF if k < 0 else FALSEF
        if op == "eq":
            return TRUEF if k == 0 else FALSEF
        if op == "ne":
            return TRUEF if k != 0 else FALSEF
        if op == "dvd":
            return TRUEF if k % mod == 0 else FALSEF
        return FALSEF if k % mod == 0 else TRUEF
    if is_int:
        if op == "lt":  # strict to non-strict over Int
            op, k = "le", k + 1
        g = math.gcd(*(abs(c) for c in coeffs.values()))
        if g > 1:
            if op == "le":
                # g*s + k <= 0  <=>  s <= floor(-k/g)  <=>  s + ceil(k/g) <= 0
                coeffs = {v: c // g for v, c in coeffs.items()}
                k = math.ceil(Fraction(k, g))
            elif op in ("eq", "ne"):
                if k % g != 0:
                    return TRUEF if op == "ne" else FALSEF
                coeffs = {v: c // g for v, c in coeffs.items()}
                k = k // g
            elif mod % g == 0:  # dvd/ndvd
                if k % g != 0:
                    return TRUEF if op == "ndvd" else FALSEF
                coeffs = {v: c // g for v, c in coeffs.items()}
                k = k // g
                mod = mod // g
        if op in ("dvd", "ndvd"):
            if mod == 1:
                return TRUEF if op == "dvd" else FALSEF
            k = k % mod
    else:
        # canonical leading coefficient of magnitude 1
        lead = abs(coeffs[min(coeffs)])
        if lead != 1:
            coeffs = {v: Fraction(c, 1) / lead for v, c in coeffs.items()}
            k = Fraction(k, 1) / lead
    if op in ("eq", "ne", "dvd", "ndvd"):
        first = min(coeffs)
        if coeffs[first] < 0:
            coeffs = {v: -c for v, c in coeffs.items()}
            k = (-k) % mod if mod else -k
    return Atom(op, _freeze(coeffs), k, is_int, mod)


def neg_f(f: F) -> F:
    """Negation, staying in negation normal form."""
    if f is TRUEF:
        return FALSEF
    if f is FALSEF:
        return TRUEF
    if isinstance(f, BLit):
        return BLit(f.name, not f.pos)
    if isinstance(f, Atom):
        c = _thaw(f.coeffs)
        if f.op == "le":
            if f.is_int:  # not(s+k<=0) == -s-k+1<=0
                return _finish_atom("le", {v: -x for v, x in c.items()},
                                    -f.k + 1, True)
            return _finish_atom("lt", {v: -x for v, x in c.items()}, -f.k, False)
        if f.op == "lt":
            return _finish_atom("le", {v: -x for v, x in c.items()}, -f.k, False)
        flip = {"eq": "ne", "ne": "eq", "dvd": "ndvd", "ndvd": "dvd"}
        return Atom(flip[f.op], f.coeffs, f.k, f.is_int, f.mod)
    if isinstance(f, And):
        return mk_or([neg_f(a) for a in f.args])
    if isinstance(f, Or):
        return mk_and([neg_f(a) for a in f.args])
    assert isinstance(f, Q)
    return Q("all" if f.kind == "ex" else "ex", f.var, f.var_kind, neg_f(f.body))


def mk_and(args: Iterable[F]) -> F:
    flat: list[F] = []
    for a in args:
        if a is TRUEF:
            continue
        if a is FALSEF:
            return FALSEF
        if isinstance(a, And):
            flat.extend(a.args)
        else:
            flat.append(a)
    seen = set()
    uniq = []
    for a in flat:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    for a in uniq:
        if isinstance(a, (Atom, BLit)) and neg_f(a) in seen:
            return FALSEF
    uniq = _tighten(uniq, keep_max_k=True)
    if not uniq:
        return TRUEF
    if len(uniq) == 1:
        return uniq[0]
    return And(tuple(sorted(uniq, key=_key)))


def mk_or(args: Iterable[F]) -> F:
    flat: list[F] = []
    for a in args:
        if a is FALSEF:
            continue
        if a is TRUEF:
            return TRUEF
        if isinstance(a, Or):
            flat.extend(a.args)
        else:
            flat.append(a)
    seen = set()
    uniq = []
    for a in flat:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    for a in uniq:
        if isinstance(a, (Atom, BLit)) and neg_f(a) in seen:
            return TRUEF
    uniq = _tighten(uniq, keep_max_k=False)
    if not uniq:
        return FALSEF
    if len(uniq) == 1:
        return uniq[0]
    return Or(tuple(sorted(uniq, key=_key)))


def _tighten(args: list, keep_max_k: bool) -> list:
    """Merge le/lt atoms over identical linear parts.

    In a conjunction `s + k1 <= 0` and `s + k2 <= 0` collapse to the larger
    k (tighter); in a disjunction to the smaller (weaker).
    """
    best: dict = {}
    others = []
    for a in args:
        if isinstance(a, Atom) and a.op in ("le", "lt"):
            key = (a.coeffs, a.is_int)
            cur = best.get(key)
            if cur is None:
                best[key] = a
            else:
                stronger = _cmp_bound(a, cur)
                best[key] = stronger if keep_max_k else (
                    cur if stronger is a else a)
        else:
            others.append(a)
    return others + list(best.values())


def _cmp_bound(a: Atom, b: Atom) -> Atom:
    """The stronger of two le/lt atoms over the same linear part."""
    if a.k != b.k:
        return a if a.k > b.k else b
    return a if a.op == "lt" else b


def _key(f: F):
    if isinstance(f, Atom):
        return (0, f.op, f.coeffs, repr(f.k), f.mod)
    if isinstance(f, BLit):
        return (1, f.name, f.pos)
    if isinstance(f, And):
        return (2,) + tuple(_key(a) for a in f.args)
    if isinstance(f, Or):
        return (3,) + tuple(_key(a) for a in f.args)
    if isinstance(f, Q):
        return (4, f.kind, f.var) + (_key(f.body),)
    return (5, repr(f))


def fvars(f: F) -> set:
    if isinstance(f, Atom):
        return set(f.vars())
    if isinstance(f, BLit):
        return {f.name}
    if isinstance(f, (And, Or)):
        out: set = set()
        for a in f.args:
            out |= fvars(a)
        return out
    if isinstance(f, Q):
        return fvars(f.body) - {f.var}
    return set()


def var_kind(f: F, var: str) -> str:
    """Infer int/real/bool for a variable from its occurrences."""
    if isinstance(f, Atom) and var in f.vars():
        return "int" if f.is_int else "real"
    if isinstance(f, BLit) and f.name == var:
        return "bool"
    if isinstance(f, (And, Or)):
        for a in f.args:
            k = var_kind(a, var)
            if k:
                return k
        return ""
    if isinstance(f, Q) and f.var != var:
        return var_kind(f.body, var)
    return ""


# ---------------------------------------------------------------------------
# Term -> IR translation


def _lift_ites(t: Term) -> Term:
    """Rewrite numeric ite below an atom into a case split above it."""
    if isinstance(t, (Var, Const)):
        return t
    if isinstance(t, Quant):
        return Quant(t.kind, t.bound, _lift_ites(t.body))
    assert isinstance(t, App)
    if t.sort == BOOL and all(a.sort == BOOL for a in t.args):
        return App(t.op, tuple(_lift_ites(a) for a in t.args), BOOL)
    if t.sort == BOOL:
        replaced, cond, then_t, else_t = _split_first_ite(t)
        if replaced is None:
            return t
        return disj(conj(_lift_ites(cond), _lift_ites(replaced(then_t))),
                    conj(neg(_lift_ites(cond)), _lift_ites(replaced(else_t))))
    return t


def _split_first_ite(t: Term):
    """Find the first non-Bool ite under t; returns a rebuild function."""
    if isinstance(t, App):
        if t.op == "ite" and t.sort != BOOL:
            return (lambda repl: repl), t.args[0], t.args[1], t.args[2]
        for i, a in enumerate(t.args):
            rebuild, c, x, y = _split_first_ite(a)
            if rebuild is not None:
                def outer(repl, _i=i, _rebuild=rebuild, _t=t):
                    args = list(_t.args)
                    args[_i] = _rebuild(repl)
                    return App(_t.op, tuple(args), _t.sort)
                return outer, c, x, y
    return None, None, None, None


def _lin(t: Term, rename: Mapping[str, str]) -> tuple[dict, Value, bool]:
    """Linearize a numeric term: (coefficients, constant, is_int)."""
    if isinstance(t, Var):
        if t.sort == INT:
            return {rename.get(t.name, t.name): 1}, 0, True
        if t.sort == REAL:
            return {rename.get(t.name, t.name): Fraction(1)}, Fraction(0), False
        raise Unsupported(f"variable of uninterpreted sort {t.sort.name}")
    if isinstance(t, Const):
        if t.sort == INT:
            return {}, t.value, True
        if t.sort == REAL:
            return {}, t.value, False
        raise Unsupported("Bool constant in numeric position")
    if not isinstance(t, App):
        raise Unsupported("quantifier in numeric position")
    if t.op == "+":
        coeffs: dict = {}
        k: Value = 0
        is_int = True
        for a in t.args:
            c2, k2, i2 = _lin(a, rename)
            coeffs = _lin_add(coeffs, c2)
            k += k2
            is_int = i2
        return coeffs, k, is_int
    if t.op == "-":
        if len(t.args) == 1:
            c, k, i = _lin(t.args[0], rename)
            return {v: -x for v, x in c.items()}, -k, i
        coeffs, k, is_int = _lin(t.args[0], rename)
        for a in t.args[1:]:
            c2, k2, _ = _lin(a, rename)
            coeffs = _lin_add(coeffs, c2, -1)
            k -= k2
        return coeffs, k, is_int
    if t.op == "*":
        coeffs, k, is_int = _lin(t.args[0], rename)
        for a in t.args[1:]:
            c2, k2, _ = _lin(a, rename)
            if not coeffs and not c2:
                k = k * k2
            elif not coeffs:
                coeffs = {v: x * k for v, x in c2.items()}
                k = k * k2
            elif not c2:
                coeffs = {v: x * k2 for v, x in coeffs.items()}
                k = k * k2
            else:
                raise Unsupported("nonlinear multiplication")
        return coeffs, k, is_int
    if t.op == "/":
        coeffs, k, is_int = _lin(t.args[0], rename)
        for a in t.args[1:]:
            c2, k2, _ = _lin(a, rename)
            if c2 or k2 == 0:
                raise Unsupported("division by a non-constant")
            coeffs = {v: Fraction(x, 1) / k2 for v, x in coeffs.items()}
            k = Fraction(k, 1) / k2
        return coeffs, k, False
    raise Unsupported(f"operator {t.op} in a linear term")


def _mod_pattern(t: App):
    """Recognize (= (mod e d) r) / (= r (mod e d)) with constant d, r."""
    if t.op != "=" or len(t.args) != 2:
        return None
    for lhs, rhs in ((t.args[0], t.args[1]), (t.args[1], t.args[0])):
        if (isinstance(lhs, App) and lhs.op == "mod" and len(lhs.args) == 2
                and isinstance(lhs.args[1], Const) and isinstance(rhs, Const)):
            return lhs.args[0], lhs.args[1].value, rhs.value
    return None


def translate(t: Term, pos: bool = True,
              rename: Optional[Mapping[str, str]] = None) -> F:
    """Translate a Bool term into NNF IR; raises Unsupported outside the fragment."""
    rename = rename or {}
    if isinstance(t, Const):
        val = t.value if pos else not t.value
        return TRUEF if val else FALSEF
    if isinstance(t, Var):
        if t.sort != BOOL:
            raise Unsupported("non-Bool variable as a formula")
        return BLit(rename.get(t.name, t.name), pos)
    if isinstance(t, Quant):
        bound_names = {}
        taken = set(rename.values()) | _all_names(t.body)
        chosen: set = set()
        inner = dict(rename)
        for v in t.bound:
            name = v.name
            if name in inner.values() or name in chosen:
                base = name
                i = 1
                while f"{base}!{i}" in taken or f"{base}!{i}" in chosen:
                    i += 1
                name = f"{base}!{i}"
            chosen.add(name)
            inner[v.name] = name
            kind = ("bool" if v.sort == BOOL else
                    "int" if v.sort == INT else
                    "real" if v.sort == REAL else None)
            if kind is None:
                raise Unsupported(f"quantifier over sort {v.sort.name}")
            bound_names[v] = (name, kind)
        kind_q = t.kind
        if not pos:
            kind_q = "exists" if kind_q == "forall" else "forall"
        body = translate(t.body, pos, inner)
        out = body
        for v in reversed(t.bound):
            name, k = bound_names[v]
            out = Q("ex" if kind_q == "exists" else "all", name, k, out)
        return out
    assert isinstance(t, App)
    op = t.op
    if op == "not":
        return translate(t.args[0], not pos, rename)
    if op == "and":
        parts = [translate(a, pos, rename) for a in t.args]
        return mk_and(parts) if pos else mk_or(parts)
    if op == "or":
        parts = [translate(a, pos, rename) for a in t.args]
        return mk_or(parts) if pos else mk_and(parts)
    if op == "=>":
        if pos:
            parts = [translate(a, False, rename) for a in t.args[:-1]]
            parts.append(translate(t.args[-1], True, rename))
            return mk_or(parts)
        parts = [translate(a, True, rename) for a in t.args[:-1]]
        parts.append(translate(t.args[-1], False, rename))
        return mk_and(parts)
    if op == "ite":
        c = translate(t.args[0], True, rename)
        nc = translate(t.args[0], False, rename)
        a = translate(t.args[1], pos, rename)
        b = translate(t.args[2], pos, rename)
        if pos:
            return mk_or([mk_and([c, a]), mk_and([nc, b])])
        return mk_and([mk_or([nc, a]), mk_or([c, b])])
    if op == "xor":
        out = translate(t.args[0], True, rename)
        for arg in t.args[1:]:
            g = translate(arg, True, rename)
            out = mk_or([mk_and([out, neg_f(g)]), mk_and([neg_f(out), g])])
        return out if pos else neg_f(out)
    if op in ("=", "distinct") and t.args[0].sort == BOOL:
        pairs = []
        for a, b in zip(t.args, t.args[1:]):
            fa, nfa = translate(a, True, rename), translate(a, False, rename)
            fb, nfb = translate(b, True, rename), translate(b, False, rename)
            iff = mk_or([mk_and([fa, fb]), mk_and([nfa, nfb])])
            pairs.append(iff if op == "=" else neg_f(iff))
        if op == "distinct" and len(t.args) > 2:
            out = FALSEF  # three or more pairwise-distinct Bools cannot exist
        else:
            out = mk_and(pairs)
        return out if pos else neg_f(out)
    if op in ("=", "distinct", "<", "<=", ">", ">="):
        mp = _mod_pattern(t) if op == "=" else None
        if mp is not None:
            e, d, r = mp
            if d <= 0:
                raise Unsupported("mod by a non-positive constant")
            coeffs, k, is_int = _lin(e, rename)
            atom = _finish_atom("dvd", coeffs, k - r, True, d)
            return atom if pos else neg_f(atom)
        if t.args[0].sort not in (INT, REAL):
            raise Unsupported(f"equality over sort {t.args[0].sort.name}")
        atoms = []
        if op == "distinct":
            for i in range(len(t.args)):
                for j in range(i + 1, len(t.args)):
                    atoms.append(_cmp_atom("ne", t.args[i], t.args[j], rename))
        else:
            cmp_op = {"=": "eq", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}[op]
            for a, b in zip(t.args, t.args[1:]):
                atoms.append(_cmp_atom(cmp_op, a, b, rename))
        out = mk_and(atoms)
        return out if pos else neg_f(out)
    raise Unsupported(f"operator {op} as a formula")


def _all_names(t: Term) -> set:
    out = set()

    def walk(x):
        if isinstance(x, Var):
            out.add(x.name)
        elif isinstance(x, App):
            for a in x.args:
                walk(a)
        elif isinstance(x, Quant):
            for v in x.bound:
                out.add(v.name)
            walk(x.body)

    walk(t)
    return out


def _cmp_atom(op: str, a: Term, b: Term, rename) -> F:
    ca, ka, ia = _lin(a, rename)
    cb, kb, ib = _lin(b, rename)
    if ia != ib:
        # a ground Int literal against Real terms: promote
        if not ca and isinstance(ka, int):
            ka, ia = Fraction(ka), ib
        elif not cb and isinstance(kb, int):
            kb, ib = Fraction(kb), ia
        else:
            raise Unsupported("mixed Int/Real atom")
    coeffs = _lin_add(ca, cb, -1)
    k = ka - kb
    if op == "gt":
        return _finish_atom("lt", {v: -c for v, c in coeffs.items()}, -k, ia)
    if op == "ge":
        return _finish_atom("le", {v: -c for v, c in coeffs.items()}, -k, ia)
    return _finish_atom(op, coeffs, k, ia)


# ---------------------------------------------------------------------------
# Quantifier elimination


def _subst_lin(f: F, var: str, coeffs: dict, k: Value) -> F:
    """Substitute var := (coeffs, k) into every atom."""
    if isinstance(f, Atom):
        c = f.coef(var)
        if c == 0:
            return f
        base = {v: x for v, x in f.coeffs if v != var}
        new = _lin_add(base, coeffs, c)
        return _finish_atom(f.op, new, f.k + c * k, f.is_int, f.mod)
    if isinstance(f, And):
        return mk_and([_subst_lin(a, var, coeffs, k) for a in f.args])
    if isinstance(f, Or):
        return mk_or([_subst_lin(a, var, coeffs, k) for a in f.args])
    if isinstance(f, Q):
        if f.var == var:
            return f
        return Q(f.kind, f.var, f.var_kind, _subst_lin(f.body, var, coeffs, k))
    return f


def _subst_blit(f: F, name: str, value: bool) -> F:
    if isinstance(f, BLit) and f.name == name:
        return TRUEF if f.pos == value else FALSEF
    if isinstance(f, And):
        return mk_and([_subst_blit(a, name, value) for a in f.args])
    if isinstance(f, Or):
        return mk_or([_subst_blit(a, name, value) for a in f.args])
    if isinstance(f, Q):
        if f.var == name:
            return f
        return Q(f.kind, f.var, f.var_kind, _subst_blit(f.body, name, value))
    return f


def _atoms_with(f: F, var: str, acc: set) -> None:
    if isinstance(f, Atom) and f.coef(var) != 0:
        acc.add(f)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            _atoms_with(a, var, acc)
    elif isinstance(f, Q):
        _atoms_with(f.body, var, acc)


def _map_atoms(f: F, fn) -> F:
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, And):
        return mk_and([_map_atoms(a, fn) for a in f.args])
    if isinstance(f, Or):
        return mk_or([_map_atoms(a, fn) for a in f.args])
    if isinstance(f, Q):
        return Q(f.kind, f.var, f.var_kind, _map_atoms(f.body, fn))
    return f


def qe_ex(var: str, kind: str, f: F) -> F:
    """Eliminate one existential quantifier over `var` from NNF body f."""
    if var not in fvars(f):
        return f
    if kind == "bool":
        return mk_or([_subst_blit(f, var, True), _subst_blit(f, var, False)])
    if isinstance(f, Or):
        return mk_or([qe_ex(var, kind, a) for a in f.args])
    if isinstance(f, And):
        free_part = [a for a in f.args if var not in fvars(a)]
        bound_part = [a for a in f.args if var in fvars(a)]
        sol = _solved_equality(bound_part, var, kind)
        if sol is not None:
            coeffs, k = sol
            return mk_and([_subst_lin(a, var, coeffs, k) for a in f.args])
        if free_part:
            inner = qe_ex(var, kind, mk_and(bound_part))
            return mk_and(free_part + [inner])
    if kind == "int":
        return _cooper_ex(var, f)
    return _lw_ex(var, f)


def _solved_equality(parts: list, var: str, kind: str):
    """A conjunct `c*var + t = 0` solvable for var exactly, if any."""
    for a in parts:
        if isinstance(a, Atom) and a.op == "eq":
            c = a.coef(var)
            if c == 0:
                continue
            if kind == "int" and abs(c) != 1:
                continue
            rest = {v: x for v, x in a.coeffs if v != var}
            if kind == "int":
                # var = -(rest + k)/c with c = +-1
                coeffs = {v: -x * c for v, x in rest.items()}
                k = -a.k * c
            else:
                coeffs = {v: -Fraction(x, 1) / c for v, x in rest.items()}
                k = -Fraction(a.k, 1) / c
            return coeffs, k
    return None


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _cooper_ex(var: str, f: F) -> F:
    """Cooper's elimination of an integer existential."""
    atoms: set = set()
    _atoms_with(f, var, atoms)
    if not atoms:
        return f
    scale = 1
    for a in atoms:
        scale = _lcm(scale, abs(a.coef(var)))

    def rescale(a: Atom) -> F:
        c = a.coef(var)
        if c == 0:
            return a
        m = scale // abs(c)
        sign = 1 if c > 0 else -1
        coeffs = {v: (x * m if v != var else sign) for v, x in a.coeffs}
        k = a.k * m
        mod = a.mod * m if a.mod else 0
        if a.op in ("dvd", "ndvd") and sign < 0:
            # normalize the var coefficient to +1 under divisibility
            coeffs = {v: -x for v, x in coeffs.items()}
            k = -k
        if a.op == "eq":  # split into two bounds
            up = Atom("le", _freeze(coeffs), k, True)
            dn = Atom("le", _freeze({v: -x for v, x in coeffs.items()}), -k, True)
            return And((up, dn))
        if a.op == "ne":
            up = Atom("le", _freeze(coeffs), k + 1, True)
            dn = Atom("le", _freeze({v: -x for v, x in coeffs.items()}), -k + 1, True)
            return Or((up, dn))
        if a.op in ("dvd", "ndvd"):
            return Atom(a.op, _freeze(coeffs), k % mod, True, mod)
        return Atom(a.op, _freeze(coeffs), k, True)

    g = _map_atoms(f, rescale)
    if scale > 1:
        g = mk_and([g, Atom("dvd", _freeze({var: 1}), 0, True, scale)])

    atoms2: set = set()
    _atoms_with(g, var, atoms2)
    delta = scale if scale > 1 else 1
    lower, upper = [], []
    for a in atoms2:
        if a.op in ("dvd", "ndvd"):
            delta = _lcm(delta, a.mod)
        elif a.op == "le":
            rest = {v: x for v, x in a.coeffs if v != var}
            if a.coef(var) > 0:
                upper.append(( {v: -x for v, x in rest.items()}, -a.k))  # var <= -t
            else:
                lower.append((rest, a.k))  # var >= t

    def subst_num(expr_coeffs: dict, expr_k) -> F:
        return _subst_lin(g, var, expr_coeffs, expr_k)

    def inf_version(from_below: bool, j: int) -> F:
        def fn(a: Atom) -> F:
            c = a.coef(var)
            if c == 0:
                return a
            if a.op in ("dvd", "ndvd"):
                rest = {v: x for v, x in a.coeffs if v != var}
                return _finish_atom(a.op, rest, a.k + j, True, a.mod)
            if from_below:  # x -> -inf: upper bounds hold, lower bounds fail
                return TRUEF if c > 0 else FALSEF
            return FALSEF if c > 0 else TRUEF
        return _map_atoms(g, fn)

    disjuncts = []
    if len(lower) <= len(upper):
        for j in range(1, delta + 1):
            disjuncts.append(inf_version(True, j))
            for coeffs_t, k_t in lower:
                # test point (t - 1) + j
                disjuncts.append(subst_num(coeffs_t, k_t - 1 + j))
    else:
        for j in range(1, delta + 1):
            disjuncts.append(inf_version(False, j))
            for coeffs_t, k_t in upper:
                # test point (t + 1) - j
                disjuncts.append(subst_num(coeffs_t, k_t + 1 - j))
    return mk_or(disjuncts)


def _lw_ex(var: str, f: F) -> F:
    """Real existential elimination with boundary and epsilon test points."""
    atoms: set = set()
    _atoms_with(f, var, atoms)
    if not atoms:
        return f

    def minus_inf(a: Atom) -> F:
        c = a.coef(var)
        if c == 0:
            return a
        if a.op in ("le", "lt"):
            return TRUEF if c > 0 else FALSEF
        return TRUEF if a.op == "ne" else FALSEF

    disjuncts = [_map_atoms(f, minus_inf)]
    boundaries = []
    for a in atoms:
        c = a.coef(var)
        rest = {v: Fraction(-x, 1) / c for v, x in a.coeffs if v != var}
        k = Fraction(-a.k, 1) / c
        boundaries.append((rest, k))
    for coeffs_e, k_e in boundaries:
        disjuncts.append(_subst_lin(f, var, coeffs_e, k_e))
        disjuncts.append(_subst_eps(f, var, coeffs_e, k_e))
    return mk_or(disjuncts)


def _subst_eps(f: F, var: str, coeffs_e: dict, k_e) -> F:
    """Virtual substitution var := e + epsilon with infinitesimal epsilon."""
    def fn(a: Atom) -> F:
        c = a.coef(var)
        if c == 0:
            return a
        base = {v: x for v, x in a.coeffs if v != var}
        new = _lin_add(base, coeffs_e, c)
        k = a.k + c * k_e
        if a.op in ("le", "lt"):
            if c > 0:
                return _finish_atom("lt", new, k, False)
            return _finish_atom("le", new, k, False)
        if a.op == "eq":
            return FALSEF
        return TRUEF  # ne
    return _map_atoms(f, fn)


def eliminate(f: F) -> F:
    """Remove every quantifier bottom-up."""
    if isinstance(f, And):
        return mk_and([eliminate(a) for a in f.args])
    if isinstance(f, Or):
        return mk_or([eliminate(a) for a in f.args])
    if isinstance(f, Q):
        body = eliminate(f.body)
        if f.kind == "ex":
            return qe_ex(f.var, f.var_kind, body)
        return neg_f(qe_ex(f.var, f.var_kind, neg_f(body)))
    return f


def _close(f: F) -> F:
    """Existentially eliminate all free variables; result is TRUEF/FALSEF."""
    f = eliminate(f)
    while True:
        vs = fvars(f)
        if not vs:
            break
        counts = {v: 0 for v in vs}

        def count(g: F):
            for v in fvars(g) & counts.keys():
                counts[v] += 1
        _walk_atoms(f, count)
        var = min(vs, key=lambda v: (counts.get(v, 0), v))
        f = qe_ex(var, var_kind(f, var) or "int", f)
    assert f is TRUEF or f is FALSEF
    return f


def _walk_atoms(f: F, fn) -> None:
    if isinstance(f, (Atom, BLit)):
        fn(f)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            _walk_atoms(a, fn)
    elif isinstance(f, Q):
        _walk_atoms(f.body, fn)


def ir_sat(f: F) -> bool:
    return _close(f) is TRUEF


def satisfiable(t: Term) -> bool:
    """Does the Bool term have a model (free variables existential)?"""
    return ir_sat(translate(_lift_ites(t)))


def valid(t: Term) -> bool:
    return not ir_sat(translate(_lift_ites(t), pos=False))


# ---------------------------------------------------------------------------
# Model construction


def eval_ground(f: F, asg: Mapping[str, Value]) -> bool:
    if f is TRUEF:
        return True
    if f is FALSEF:
        return False
    if isinstance(f, BLit):
        return bool(asg[f.name]) == f.pos
    if isinstance(f, Atom):
        s = f.k
        for v, c in f.coeffs:
            s += c * asg[v]
        if f.op == "le":
            return s <= 0
        if f.op == "lt":
            return s < 0
        if f.op == "eq":
            return s == 0
        if f.op == "ne":
            return s != 0
        if f.op == "dvd":
            return s % f.mod == 0
        return s % f.mod != 0
    if isinstance(f, And):
        return all(eval_ground(a, asg) for a in f.args)
    if isinstance(f, Or):
        return any(eval_ground(a, asg) for a in f.args)
    raise Unsupported("quantifier in ground evaluation")


def _univariate_candidates(f: F, var: str, is_int: bool) -> list:
    """Finite candidate set covering some solution of a univariate formula."""
    atoms: set = set()
    _atoms_with(f, var, atoms)
    delta = 1
    bounds = []
    for a in atoms:
        if a.op in ("dvd", "ndvd"):
            delta = _lcm(delta, a.mod)
        c = a.coef(var)
        if c and a.op not in ("dvd", "ndvd"):
            bounds.append(Fraction(-a.k, c))
    if is_int:
        out = set()
        if not bounds:
            out.update(range(0, delta))
        else:
            ivals = sorted({math.floor(b) for b in bounds}
                           | {math.ceil(b) for b in bounds})
            for b in ivals:
                for j in range(-delta, delta + 1):
                    out.add(b + j)
            lo, hi = min(ivals), max(ivals)
            for j in range(delta):
                out.add(lo - delta - 1 - j)
                out.add(hi + delta + 1 + j)
        return sorted(out)
    if not bounds:
        return [Fraction(0)]
    bs = sorted(set(bounds))
    out_r = [bs[0] - 1, bs[-1] + 1] + bs
    for x, y in zip(bs, bs[1:]):
        out_r.append((x + y) / 2)
    return sorted(set(out_r))


def get_model(t: Term) -> Optional[dict[str, Value]]:
    """A satisfying assignment of the term's free variables, or None."""
    f = eliminate(translate(_lift_ites(t)))
    if not ir_sat(f):
        return None
    kinds = {v: var_kind(f, v) or "int" for v in fvars(f)}
    asg: dict[str, Value] = {}
    g = f
    # Bool variables by branching
    for v in sorted(n for n, k in kinds.items() if k == "bool"):
        g_true = _subst_blit(g, v, True)
        if ir_sat(g_true):
            asg[v] = True
            g = g_true
        else:
            asg[v] = False
            g = _subst_blit(g, v, False)
    order = sorted(n for n, k in kinds.items() if k != "bool")
    asg.update(_numeric_model(g, order, kinds))
    # variables that vanished during simplification get defaults
    for v, k in kinds.items():
        if v not in asg:
            asg[v] = False if k == "bool" else 0 if k == "int" else Fraction(0)
    return asg


def _numeric_model(f: F, order: list, kinds: dict) -> dict:
    if not order:
        return {}
    var = order[0]
    rest = order[1:]
    if var not in fvars(f):
        m = _numeric_model(f, rest, kinds)
        m[var] = 0 if kinds[var] == "int" else Fraction(0)
        return m
    projected = qe_ex(var, kinds[var], f)
    m = _numeric_model(projected, rest, kinds)
    g = f
    for v, val in m.items():
        g = _subst_lin(g, v, {}, val)
    for cand in _univariate_candidates(g, var, kinds[var] == "int"):
        if eval_ground(g, {var: cand}):
            m[var] = cand if kinds[var] == "int" else Fraction(cand)
            return m
    raise AssertionError(f"no candidate value for {var} in a satisfiable formula")


# ---------------------------------------------------------------------------
# IR -> Term (for printing eliminated/simplified formulas)


def term_from_ir(f: F, sorts: Mapping[str, Sort]) -> Term:
    if f is TRUEF:
        return Const(True, BOOL)
    if f is FALSEF:
        return Const(False, BOOL)
    if isinstance(f, BLit):
        v = Var(f.name, BOOL)
        return v if f.pos else neg(v)
    if isinstance(f, Atom):
        return _atom_term(f, sorts)
    if isinstance(f, And):
        return conj(*[term_from_ir(a, sorts) for a in f.args])
    if isinstance(f, Or):
        return disj(*[term_from_ir(a, sorts) for a in f.args])
    assert isinstance(f, Q)
    sort = {"int": INT, "real": REAL, "bool": BOOL}[f.var_kind]
    v = Var(f.var, sort)
    body = term_from_ir(f.body, {**sorts, f.var: sort})
    return exists([v], body) if f.kind == "ex" else forall([v], body)


def _atom_term(a: Atom, sorts: Mapping[str, Sort]) -> Term:
    sort = INT if a.is_int else REAL
    mk_const = (lambda x: Const(int(x), INT)) if a.is_int \
        else (lambda x: Const(Fraction(x), REAL))

    def side(items, const) -> Term:
        parts = []
        for v, c in items:
            vt = Var(v, sorts.get(v, sort))
            parts.append(vt if c == 1 else mk_app("*", (mk_const(c), vt)))
        if const != 0 or not parts:
            parts.append(mk_const(const))
        return parts[0] if len(parts) == 1 else mk_app("+", parts)

    pos_items = [(v, c) for v, c in a.coeffs if c > 0]
    neg_items = [(v, -c) for v, c in a.coeffs if c < 0]
    if a.op in ("dvd", "ndvd"):
        e = side([(v, c) for v, c in a.coeffs], a.k)
        atom = mk_app("=", (mk_app("mod", (e, Const(a.mod, INT))), Const(0, INT)))
        return atom if a.op == "dvd" else neg(atom)
    lhs = side(pos_items, a.k if a.k > 0 else 0)
    rhs = side(neg_items, -a.k if a.k < 0 else 0)
    if a.op == "le":
        return mk_app("<=", (lhs, rhs))
    if a.op == "lt":
        return mk_app("<", (lhs, rhs))
    if a.op == "eq":
        return mk_app("=", (lhs, rhs))
    return neg(mk_app("=", (lhs, rhs)))


def project_onto(t: Term, keep: set, sorts: Mapping[str, Sort]) -> Term:
    """Strongest consequence of t over the `keep` variables (exact projection)."""
    f = translate(_lift_ites(t))
    f = eliminate(f)
    for v in sorted(fvars(f) - keep):
        f = qe_ex(v, var_kind(f, v) or "int", f)
    return term_from_ir(f, sorts)
