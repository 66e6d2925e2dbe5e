"""Constrained Horn clauses in normal form.

A clause is `P1(z̄1) ∧ ... ∧ Pn(z̄n) ∧ C → head` where the head is a
predicate application or false.  Normalization replaces every atom
argument by a fresh distinct variable and pushes all identifications
into the constraint, so instantiating a clause along a derivation is a
pure substitution.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .terms import (
    BOOL,
    FreshNames,
    Sort,
    Term,
    Var,
    conj,
    eq,
    substitute,
)


class ClauseError(Exception):
    """Malformed clause input (sort mismatch, bad arity)."""


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    param_sorts: tuple[Sort, ...]

    @property
    def arity(self) -> int:
        return len(self.param_sorts)

    def __repr__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True)
class PredApp:
    """Application of an uninterpreted predicate to argument terms.

    After normalization the arguments are pairwise-distinct variables;
    raw input may apply the predicate to arbitrary terms.
    """

    symbol: PredicateSymbol
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        if len(self.args) != self.symbol.arity:
            raise ClauseError(
                f"{self.symbol.name} expects {self.symbol.arity} arguments, got {len(self.args)}"
            )
        for a, s in zip(self.args, self.symbol.param_sorts):
            if a.sort != s:
                raise ClauseError(
                    f"{self.symbol.name}: argument {a} has sort {a.sort}, expected {s}"
                )

    @property
    def arg_vars(self) -> tuple[Var, ...]:
        assert all(isinstance(a, Var) for a in self.args)
        return self.args  # type: ignore[return-value]

    def __repr__(self) -> str:
        inner = ", ".join(map(repr, self.args))
        return f"{self.symbol.name}({inner})"


class ClauseKind(enum.Enum):
    FACT = "fact"
    DEFINITE = "definite"
    QUERY = "query"


@dataclass(frozen=True)
class HornClause:
    id: int
    body_preds: tuple[PredApp, ...]
    constraint: Term
    head: Optional[PredApp]  # None is the distinguished false head

    def __post_init__(self) -> None:
        if self.constraint.sort != BOOL:
            raise ClauseError(f"clause {self.id}: constraint is not Bool")

    @property
    def rank(self) -> int:
        """Number of body predicates; the clause's rank as an alphabet symbol."""
        return len(self.body_preds)

    @property
    def is_query(self) -> bool:
        return self.head is None

    def atoms(self) -> tuple[PredApp, ...]:
        return self.body_preds + ((self.head,) if self.head else ())

    def variables(self) -> frozenset:
        out = set(self.constraint.free_vars())
        for atom in self.atoms():
            for a in atom.args:
                out |= set(a.free_vars())
        return frozenset(out)

    def __repr__(self) -> str:
        body = " /\\ ".join(map(repr, self.body_preds))
        head = repr(self.head) if self.head else "false"
        sep = " /\\ " if body else ""
        return f"[{self.id}] {body}{sep}{self.constraint!r} -> {head}"


def classify(clause: HornClause) -> ClauseKind:
    if clause.head is None:
        return ClauseKind.QUERY
    if clause.body_preds:
        return ClauseKind.DEFINITE
    return ClauseKind.FACT


def normalize_clause(
    raw_body_atoms: Sequence[PredApp],
    raw_constraint: Term,
    raw_head: Optional[PredApp],
    fresh: FreshNames,
    clause_id: int = 0,
) -> HornClause:
    """Rewrite a raw clause into normal form.

    Every atom argument that is not already a distinct, unshared variable
    is replaced by a fresh variable z with a conjunct z = t added to the
    constraint.  The rewriting preserves logical equivalence and is
    idempotent on already-normal clauses.
    """
    if raw_constraint.sort != BOOL:
        raise ClauseError("constraint must be Bool")
    used: set = set()
    extra: list[Term] = []

    def rewrite(atom: PredApp) -> PredApp:
        new_args: list[Var] = []
        for t, s in zip(atom.args, atom.symbol.param_sorts):
            if t.sort != s:
                raise ClauseError(
                    f"{atom.symbol.name}: argument {t} has sort {t.sort}, expected {s}"
                )
            if isinstance(t, Var) and t not in used:
                new_args.append(t)
                used.add(t)
            else:
                z = fresh.var(s, t.name if isinstance(t, Var) else "")
                extra.append(eq(z, t))
                new_args.append(z)
                used.add(z)
        return PredApp(atom.symbol, tuple(new_args))

    head = rewrite(raw_head) if raw_head is not None else None
    body = tuple(rewrite(a) for a in raw_body_atoms)
    constraint = conj(raw_constraint, *extra)
    return HornClause(clause_id, body, constraint, head)


@dataclass(frozen=True)
class ChcSystem:
    predicates: frozenset[PredicateSymbol]
    clauses: tuple[HornClause, ...]
    logic: str = "HORN"

    def predicate(self, name: str) -> PredicateSymbol:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def clause(self, clause_id: int) -> HornClause:
        return self.clauses[clause_id]

    @property
    def queries(self) -> tuple[HornClause, ...]:
        return tuple(c for c in self.clauses if c.is_query)

    def opaque_sorts(self) -> list[Sort]:
        """Declared sorts other than the interpreted Bool/Int/Real."""
        seen: dict[str, Sort] = {}
        for p in sorted(self.predicates, key=lambda p: p.name):
            for s in p.param_sorts:
                if s.name not in ("Bool", "Int", "Real"):
                    seen.setdefault(s.name, s)
        return list(seen.values())


@dataclass(frozen=True)
class Diagnostic:
    clause_id: Optional[int]
    reason: str

    def __repr__(self) -> str:
        where = f"clause {self.clause_id}" if self.clause_id is not None else "system"
        return f"{where}: {self.reason}"


def validate_system(s: ChcSystem) -> list[Diagnostic]:
    """Check the ChcSystem invariants; returns one diagnostic per violation."""
    out: list[Diagnostic] = []
    if not s.clauses:
        out.append(Diagnostic(None, "system contains no clause"))
    names: dict[str, PredicateSymbol] = {}
    for p in s.predicates:
        if p.name in names:
            out.append(Diagnostic(None, f"duplicate predicate declaration {p.name}"))
        names[p.name] = p

    seen_ids: set[int] = set()
    for c in s.clauses:
        if c.id in seen_ids:
            out.append(Diagnostic(c.id, "duplicate clause id"))
        seen_ids.add(c.id)
        for atom in c.atoms():
            if atom.symbol not in s.predicates:
                out.append(Diagnostic(c.id, f"undeclared predicate {atom.symbol.name}"))
            args_ok = all(isinstance(a, Var) for a in atom.args)
            if not args_ok:
                out.append(Diagnostic(c.id, f"non-variable argument in {atom.symbol.name}"))
        all_arg_vars = [a for atom in c.atoms() for a in atom.args
                        if isinstance(a, Var)]
        if len(all_arg_vars) != len(set(all_arg_vars)):
            out.append(Diagnostic(c.id, "atom arguments are not pairwise-distinct variables"))
    if s.clauses and set(range(len(s.clauses))) != seen_ids:
        out.append(Diagnostic(None, "clause ids are not dense"))
    return out


def build_system(
    raw_clauses: Iterable[tuple[Sequence[PredApp], Term, Optional[PredApp]]],
    predicates: Iterable[PredicateSymbol],
    logic: str = "HORN",
) -> ChcSystem:
    """Normalize raw clauses and assemble a system with dense clause ids."""
    fresh = FreshNames()
    clauses = []
    for i, (body, constraint, head) in enumerate(raw_clauses):
        clauses.append(normalize_clause(body, constraint, head, fresh, clause_id=i))
    return ChcSystem(frozenset(predicates), tuple(clauses), logic)
