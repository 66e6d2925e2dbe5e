"""Sorted first-order terms for theory constraints.

Terms are immutable trees of function applications over variables and
literals.  Logical connectives and quantifiers are ordinary nodes, so a
constraint, a clause body, and an interpolant all live in the same
representation.  Bool, Int and Real are interpreted; any other sort is
carried opaquely and left to the solver backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

# Variable names starting with this prefix are reserved for generated
# variables (clause normalization, derivation instances).  The parser
# rejects them in user input, which keeps generated names collision-free.
RESERVED_PREFIX = "~"


class SortError(Exception):
    """Raised when an application or substitution is ill-sorted."""


@dataclass(frozen=True)
class Sort:
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise SortError("empty sort name")

    def __repr__(self) -> str:
        return self.name


BOOL = Sort("Bool")
INT = Sort("Int")
REAL = Sort("Real")

ConstValue = Union[bool, int, Fraction]


class Term:
    """Base class for term nodes.  Nodes are immutable and hash-cached."""

    __slots__ = ("sort", "_hash", "_fvs")

    sort: Sort

    def __hash__(self) -> int:
        return self._hash

    def free_vars(self) -> frozenset:
        """Set of free variables, cached per node."""
        fvs = self._fvs
        if fvs is None:
            fvs = self._compute_fvs()
            object.__setattr__(self, "_fvs", fvs)
        return fvs

    def _compute_fvs(self) -> frozenset:
        raise NotImplementedError

    def __repr__(self) -> str:
        return to_smtlib(self)


class Var(Term):
    __slots__ = ("name",)

    def __init__(self, name: str, sort: Sort):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "sort", sort)
        object.__setattr__(self, "_hash", hash(("v", name, sort.name)))
        object.__setattr__(self, "_fvs", None)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Var)
            and self._hash == other._hash
            and self.name == other.name
            and self.sort == other.sort
        )

    __hash__ = Term.__hash__

    def _compute_fvs(self) -> frozenset:
        return frozenset((self,))

    # dataclass-style immutability
    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Var is immutable")


class Const(Term):
    __slots__ = ("value",)

    def __init__(self, value: ConstValue, sort: Sort):
        if sort == BOOL and not isinstance(value, bool):
            raise SortError(f"bad Bool literal {value!r}")
        if sort == INT and (isinstance(value, bool) or not isinstance(value, int)):
            raise SortError(f"bad Int literal {value!r}")
        if sort == REAL and not isinstance(value, Fraction):
            raise SortError(f"bad Real literal {value!r}")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "sort", sort)
        object.__setattr__(self, "_hash", hash(("c", value, sort.name)))
        object.__setattr__(self, "_fvs", frozenset())

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Const)
            and self.sort == other.sort
            and self.value == other.value
        )

    __hash__ = Term.__hash__

    def _compute_fvs(self) -> frozenset:
        return frozenset()

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Const is immutable")


class App(Term):
    __slots__ = ("op", "args")

    def __init__(self, op: str, args: tuple, sort: Sort):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "sort", sort)
        object.__setattr__(self, "_hash", hash(("a", op, args, sort.name)))
        object.__setattr__(self, "_fvs", None)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.op == other.op
            and self.sort == other.sort
            and self.args == other.args
        )

    __hash__ = Term.__hash__

    def _compute_fvs(self) -> frozenset:
        out: frozenset = frozenset()
        for a in self.args:
            out = out | a.free_vars()
        return out

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("App is immutable")


class Quant(Term):
    __slots__ = ("kind", "bound", "body")

    def __init__(self, kind: str, bound: tuple, body: Term):
        if kind not in ("forall", "exists"):
            raise ValueError(f"bad quantifier {kind!r}")
        if body.sort != BOOL:
            raise SortError("quantifier body must be Bool")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "sort", BOOL)
        object.__setattr__(self, "_hash", hash(("q", kind, bound, body)))
        object.__setattr__(self, "_fvs", None)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Quant)
            and self._hash == other._hash
            and self.kind == other.kind
            and self.bound == other.bound
            and self.body == other.body
        )

    __hash__ = Term.__hash__

    def _compute_fvs(self) -> frozenset:
        return self.body.free_vars() - frozenset(self.bound)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Quant is immutable")


TRUE = Const(True, BOOL)
FALSE = Const(False, BOOL)


def num(value: int) -> Const:
    return Const(int(value), INT)


def rat(value) -> Const:
    return Const(Fraction(value), REAL)


_NUMERIC = (INT, REAL)

_BOOL_OPS = {"and", "or", "not", "=>", "xor"}
_CMP_OPS = {"<", "<=", ">", ">="}
_ARITH_OPS = {"+", "-", "*", "div", "mod", "abs", "/"}


def _result_sort(op: str, args: tuple) -> Sort:
    """Compute the sort of an application, raising SortError on misuse."""
    sorts = [a.sort for a in args]
    if op in _BOOL_OPS:
        if op == "not" and len(args) != 1:
            raise SortError("not takes one argument")
        if op == "=>" and len(args) < 2:
            raise SortError("=> takes at least two arguments")
        if any(s != BOOL for s in sorts):
            raise SortError(f"{op} applied to non-Bool")
        return BOOL
    if op in _CMP_OPS:
        if len(args) < 2 or any(s not in _NUMERIC for s in sorts) or len(set(sorts)) != 1:
            raise SortError(f"{op} needs numeric arguments of one sort")
        return BOOL
    if op in ("=", "distinct"):
        if len(args) < 2 or len(set(sorts)) != 1:
            raise SortError(f"{op} needs arguments of one sort")
        return BOOL
    if op == "ite":
        if len(args) != 3 or sorts[0] != BOOL or sorts[1] != sorts[2]:
            raise SortError("ite needs (Bool, T, T)")
        return sorts[1]
    if op in _ARITH_OPS:
        if op == "abs":
            if len(args) != 1 or sorts[0] != INT:
                raise SortError("abs takes one Int")
            return INT
        if op == "-" and len(args) == 1:
            if sorts[0] not in _NUMERIC:
                raise SortError("unary - needs a numeric argument")
            return sorts[0]
        if len(args) < 2 or len(set(sorts)) != 1 or sorts[0] not in _NUMERIC:
            raise SortError(f"{op} needs numeric arguments of one sort")
        if op in ("div", "mod") and sorts[0] != INT:
            raise SortError(f"{op} is Int-only")
        if op == "/" and sorts[0] != REAL:
            raise SortError("/ is Real-only")
        return sorts[0]
    raise SortError(f"unknown function symbol {op!r}")


def mk_app(op: str, args: Iterable[Term]) -> Term:
    args = tuple(args)
    return App(op, args, _result_sort(op, args))


# Convenience constructors used throughout the code base.


def conj(*parts: Term) -> Term:
    """Flattening, deduplicating conjunction; `true` when empty."""
    flat: list[Term] = []
    seen: set = set()
    for p in parts:
        items = p.args if isinstance(p, App) and p.op == "and" else (p,)
        for q in items:
            if q == TRUE or q in seen:
                continue
            seen.add(q)
            flat.append(q)
    if any(p == FALSE for p in flat):
        return FALSE
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return mk_app("and", flat)


def disj(*parts: Term) -> Term:
    flat: list[Term] = []
    seen: set = set()
    for p in parts:
        items = p.args if isinstance(p, App) and p.op == "or" else (p,)
        for q in items:
            if q == FALSE or q in seen:
                continue
            seen.add(q)
            flat.append(q)
    if any(p == TRUE for p in flat):
        return TRUE
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return mk_app("or", flat)


def neg(t: Term) -> Term:
    if t == TRUE:
        return FALSE
    if t == FALSE:
        return TRUE
    if isinstance(t, App) and t.op == "not":
        return t.args[0]
    return mk_app("not", (t,))


def implies(a: Term, b: Term) -> Term:
    return mk_app("=>", (a, b))


def eq(a: Term, b: Term) -> Term:
    return mk_app("=", (a, b))


def ite(c: Term, a: Term, b: Term) -> Term:
    return mk_app("ite", (c, a, b))


def add(*a: Term) -> Term:
    return mk_app("+", a)


def sub(a: Term, b: Term) -> Term:
    return mk_app("-", (a, b))


def mul(*a: Term) -> Term:
    return mk_app("*", a)


def lt(a: Term, b: Term) -> Term:
    return mk_app("<", (a, b))


def le(a: Term, b: Term) -> Term:
    return mk_app("<=", (a, b))


def gt(a: Term, b: Term) -> Term:
    return mk_app(">", (a, b))


def ge(a: Term, b: Term) -> Term:
    return mk_app(">=", (a, b))


def forall(bound: Iterable[Var], body: Term) -> Term:
    bound = tuple(bound)
    return Quant("forall", bound, body) if bound else body


def exists(bound: Iterable[Var], body: Term) -> Term:
    bound = tuple(bound)
    return Quant("exists", bound, body) if bound else body


class FreshNames:
    """Monotone counter producing reserved variable names.

    One instance is shared per clause system (or per derivation), so
    generated names never collide with each other or with user input.
    """

    def __init__(self, prefix: str = "z"):
        self._prefix = RESERVED_PREFIX + prefix
        self._next = 0

    def name(self, hint: str = "") -> str:
        n = self._next
        self._next += 1
        if hint:
            return f"{self._prefix}{n}.{hint.lstrip(RESERVED_PREFIX)}"
        return f"{self._prefix}{n}"

    def var(self, sort: Sort, hint: str = "") -> Var:
        return Var(self.name(hint), sort)


def _rename_away(v: Var, taken: set) -> Var:
    name = v.name
    while True:
        name = name + "'"
        if name not in taken:
            return Var(name, v.sort)


def substitute(term: Term, mapping: Mapping[Var, Term]) -> Term:
    """Capture-avoiding substitution of free variables.

    Bound variables are renamed (primed) when a substituted image would
    otherwise be captured.  Raises SortError on a sort-changing mapping.
    """
    for v, t in mapping.items():
        if v.sort != t.sort:
            raise SortError(f"substituting {t} of sort {t.sort} for {v} of sort {v.sort}")
    return _subst(term, dict(mapping))


def _subst(term: Term, mapping: dict) -> Term:
    if not mapping:
        return term
    if isinstance(term, Var):
        return mapping.get(term, term)
    if isinstance(term, Const):
        return term
    if isinstance(term, App):
        if not (term.free_vars() & mapping.keys()):
            return term
        return App(
            term.op,
            tuple(_subst(a, mapping) for a in term.args),
            term.sort,
        )
    assert isinstance(term, Quant)
    active = {v: t for v, t in mapping.items()
              if v not in term.bound and v in term.body.free_vars()}
    if not active:
        return term
    image_fvs = set()
    for t in active.values():
        image_fvs |= set(t.free_vars())
    bound = list(term.bound)
    renames: dict = {}
    taken = {v.name for v in image_fvs} | {v.name for v in term.body.free_vars()}
    for i, b in enumerate(bound):
        if b in image_fvs:
            fresh = _rename_away(b, taken)
            taken.add(fresh.name)
            renames[b] = fresh
            bound[i] = fresh
    body = term.body
    if renames:
        body = _subst(body, renames)
    return Quant(term.kind, tuple(bound), _subst(body, active))


def _needs_quoting(name: str) -> bool:
    ok = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
             "~!@$%^&*_-+=<>.?/")
    return not name or any(c not in ok for c in name) or name[0].isdigit()


def symbol_text(name: str) -> str:
    """Render a symbol, |quoting| it when it is not a simple symbol."""
    if _needs_quoting(name):
        return "|" + name + "|"
    return name


def to_smtlib(term: Term) -> str:
    """Print a term in SMT-LIB 2 concrete syntax."""
    if isinstance(term, Var):
        return symbol_text(term.name)
    if isinstance(term, Const):
        if term.sort == BOOL:
            return "true" if term.value else "false"
        if term.sort == INT:
            v = term.value
            return str(v) if v >= 0 else f"(- {-v})"
        v = term.value
        if v < 0:
            return f"(- {_real_text(-v)})"
        return _real_text(v)
    if isinstance(term, App):
        inner = " ".join(to_smtlib(a) for a in term.args)
        return f"({term.op} {inner})"
    assert isinstance(term, Quant)
    binders = " ".join(f"({symbol_text(v.name)} {v.sort.name})" for v in term.bound)
    return f"({term.kind} ({binders}) {to_smtlib(term.body)})"


def _real_text(v: Fraction) -> str:
    if v.denominator == 1:
        return f"{v.numerator}.0"
    return f"(/ {v.numerator}.0 {v.denominator}.0)"
