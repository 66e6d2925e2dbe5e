"""Frontend for clause files in the SMT-LIB 2 subset used by CHC-COMP.

Accepted scripts: one `(set-logic ...)`, predicate declarations via
`declare-fun` (result sort Bool), opaque sort declarations, asserts of
the shapes

    (assert (forall (vars) (=> body head)))
    (assert (forall (vars) (not body)))
    (assert <quantifier-free fact or query>)

and exactly one `(check-sat)`.  Bodies may conjoin predicate
applications and theory constraints; `and` may be nested or curried
through `=>`.  Every clause is normalized on the way in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import sexpr
from .clauses import (
    ChcSystem,
    ClauseError,
    HornClause,
    PredApp,
    PredicateSymbol,
    normalize_clause,
)
from .terms import (
    BOOL,
    INT,
    REAL,
    RESERVED_PREFIX,
    Const,
    FreshNames,
    Quant,
    Sort,
    SortError,
    Term,
    Var,
    conj,
    mk_app,
    symbol_text,
    to_smtlib,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0,
                 filename: str = "<input>", severity: str = "error"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        self.severity = severity

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.col}: {self.severity}: {self.message}"


class NotHornError(ParseError):
    """The asserted formula is outside the Horn fragment."""


_CORE_SORTS = {"Bool": BOOL, "Int": INT, "Real": REAL}

_THEORY_OPS = {
    "and", "or", "not", "=>", "xor", "=", "distinct", "ite",
    "+", "-", "*", "div", "mod", "abs", "/", "<", "<=", ">", ">=",
}


class TermReader:
    """Builds Terms from s-expressions under a declaration environment.

    `constants` maps 0-ary declared functions to variables (used by the
    solver-side reader); the clause frontend leaves it empty and supplies
    quantifier binders instead.
    """

    def __init__(self, sorts: dict[str, Sort], filename: str = "<input>",
                 allow_quantifiers: bool = False,
                 constants: Optional[dict[str, Var]] = None,
                 predicate_names: Optional[set[str]] = None):
        self.sorts = dict(sorts)
        self.filename = filename
        self.allow_quantifiers = allow_quantifiers
        self.constants = constants or {}
        self.predicate_names = predicate_names or set()

    def error(self, msg: str, node) -> ParseError:
        return ParseError(msg, getattr(node, "line", 0), getattr(node, "col", 0),
                          self.filename)

    def read_sort(self, node) -> Sort:
        if isinstance(node, sexpr.Atom) and node.kind == "symbol":
            if node.text in _CORE_SORTS:
                return _CORE_SORTS[node.text]
            if node.text in self.sorts:
                return self.sorts[node.text]
            raise self.error(f"unknown sort {node.text}", node)
        raise self.error("expected a sort", node)

    def read_term(self, node, env: dict[str, Term]) -> Term:
        if isinstance(node, sexpr.Atom):
            return self._read_atom(node, env)
        if not node.items:
            raise self.error("empty application", node)
        head = node[0]
        if isinstance(head, sexpr.SList):
            raise self.error("higher-order application", node)
        op = head.text
        if op == "let":
            return self._read_let(node, env)
        if op in ("forall", "exists"):
            if not self.allow_quantifiers:
                raise self.error("quantifier not allowed here", node)
            return self._read_quant(node, env)
        if op == "!":
            if len(node) < 2:
                raise self.error("malformed annotation", node)
            return self.read_term(node[1], env)
        if op in self.predicate_names:
            raise NotHornError(
                f"predicate {op} used inside a constraint", node.line, node.col,
                self.filename)
        if op not in _THEORY_OPS:
            raise self.error(f"unknown function symbol {op}", node)
        args = [self.read_term(a, env) for a in node.items[1:]]
        # (- 5) is a literal, not an application
        if op == "-" and len(args) == 1 and isinstance(args[0], Const):
            c = args[0]
            if c.sort == INT:
                return Const(-c.value, INT)
            if c.sort == REAL:
                return Const(-c.value, REAL)
        if op == "/" and len(args) == 2 and all(isinstance(a, Const) for a in args):
            p, q = args
            pv = Fraction(p.value) if p.sort in (INT, REAL) else None
            qv = Fraction(q.value) if q.sort in (INT, REAL) else None
            if pv is not None and qv is not None and qv != 0:
                return Const(pv / qv, REAL)
        args = _coerce_int_literals(op, args)
        try:
            return mk_app(op, args)
        except SortError as e:
            raise self.error(str(e), node) from None

    def _read_atom(self, node: sexpr.Atom, env: dict[str, Term]) -> Term:
        if node.kind == "numeral":
            try:
                return Const(int(node.text), INT)
            except ValueError:
                raise self.error(f"bad numeral {node.text!r}", node) from None
        if node.kind == "decimal":
            try:
                return Const(Fraction(node.text), REAL)
            except ValueError:
                raise self.error(f"bad decimal {node.text!r}", node) from None
        if node.kind == "string":
            raise self.error("string literal in a term", node)
        name = node.text
        if name == "true":
            return Const(True, BOOL)
        if name == "false":
            return Const(False, BOOL)
        if name in env:
            return env[name]
        if name in self.constants:
            return self.constants[name]
        if name in self.predicate_names:
            raise NotHornError(
                f"predicate {name} used inside a constraint",
                node.line, node.col, self.filename)
        raise self.error(f"unknown symbol {name}", node)

    def _read_let(self, node: sexpr.SList, env: dict[str, Term]) -> Term:
        if len(node) != 3 or not isinstance(node[1], sexpr.SList):
            raise self.error("malformed let", node)
        new_env = dict(env)
        for binding in node[1]:
            if not (isinstance(binding, sexpr.SList) and len(binding) == 2
                    and isinstance(binding[0], sexpr.Atom)):
                raise self.error("malformed let binding", binding)
            new_env[binding[0].text] = self.read_term(binding[1], env)
        return self.read_term(node[2], new_env)

    def read_binders(self, node, env: dict[str, Term]) -> tuple[list[Var], dict[str, Term]]:
        if not isinstance(node, sexpr.SList):
            raise self.error("expected a binder list", node)
        new_env = dict(env)
        out = []
        for b in node:
            if not (isinstance(b, sexpr.SList) and len(b) == 2
                    and isinstance(b[0], sexpr.Atom)):
                raise self.error("malformed binder", b)
            name = b[0].text
            if name.startswith(RESERVED_PREFIX):
                raise self.error(f"symbol {name} uses the reserved prefix", b[0])
            v = Var(name, self.read_sort(b[1]))
            new_env[name] = v
            out.append(v)
        return out, new_env

    def _read_quant(self, node: sexpr.SList, env: dict[str, Term]) -> Term:
        if len(node) != 3:
            raise self.error("malformed quantifier", node)
        bound, new_env = self.read_binders(node[1], env)
        body = self.read_term(node[2], new_env)
        if body.sort != BOOL:
            raise self.error("quantifier body must be Bool", node)
        if not bound:
            return body
        return Quant(node[0].text, tuple(bound), body)


def _coerce_int_literals(op: str, args: list[Term]) -> list[Term]:
    """Turn Int literals into Real ones when mixed with Real terms."""
    if op not in ("=", "distinct", "+", "-", "*", "/", "<", "<=", ">", ">=", "ite"):
        return args
    if not any(a.sort == REAL for a in args):
        return args
    out = []
    for a in args:
        if isinstance(a, Const) and a.sort == INT:
            out.append(Const(Fraction(a.value), REAL))
        else:
            out.append(a)
    return out


@dataclass
class _ScriptState:
    filename: str
    logic: Optional[str] = None
    sorts: dict[str, Sort] = field(default_factory=dict)
    predicates: dict[str, PredicateSymbol] = field(default_factory=dict)
    raw_clauses: list = field(default_factory=list)
    check_sats: int = 0
    warnings: list = field(default_factory=list)


def parse(text: str, filename: str = "<input>",
          warnings: Optional[list] = None) -> ChcSystem:
    """Parse a clause script into a normalized ChcSystem."""
    try:
        nodes = sexpr.read_all(text)
    except sexpr.SexprError as e:
        raise ParseError(e.message, e.line, e.col, filename) from None
    st = _ScriptState(filename)
    try:
        for node in nodes:
            if not (isinstance(node, sexpr.SList) and node.items
                    and isinstance(node[0], sexpr.Atom)):
                raise ParseError("expected a command", getattr(node, "line", 0),
                                 getattr(node, "col", 0), filename)
            _read_command(node, st)
    except RecursionError:
        raise ParseError("input is too deeply nested", 0, 0, filename) from None
    if st.logic is None:
        raise ParseError("missing set-logic", 0, 0, filename)
    if st.check_sats == 0:
        raise ParseError("missing check-sat", 0, 0, filename)
    if warnings is not None:
        warnings.extend(st.warnings)
    fresh = FreshNames()
    clauses = []
    for i, (body, constraint, head) in enumerate(st.raw_clauses):
        try:
            clauses.append(normalize_clause(body, constraint, head, fresh, clause_id=i))
        except ClauseError as e:
            raise ParseError(str(e), 0, 0, filename) from None
    return ChcSystem(frozenset(st.predicates.values()), tuple(clauses),
                     st.logic)


def parse_file(path: str, warnings: Optional[list] = None) -> ChcSystem:
    with open(path, encoding="utf-8", errors="replace") as f:
        return parse(f.read(), filename=path, warnings=warnings)


def expected_status(text: str) -> Optional[str]:
    """Read a `(set-info :status ...)` annotation, if present."""
    try:
        for node in sexpr.read_all(text):
            if (isinstance(node, sexpr.SList) and len(node) == 3
                    and isinstance(node[0], sexpr.Atom)
                    and node[0].text == "set-info"
                    and isinstance(node[1], sexpr.Atom)
                    and node[1].text == ":status"
                    and isinstance(node[2], sexpr.Atom)):
                return node[2].text
    except sexpr.SexprError:
        return None
    return None


def _read_command(node: sexpr.SList, st: _ScriptState) -> None:
    cmd = node[0].text
    err = lambda msg, at=node: ParseError(msg, getattr(at, "line", 0),
                                          getattr(at, "col", 0), st.filename)
    if cmd == "set-logic":
        if st.logic is not None:
            raise err("multiple set-logic commands")
        if len(node) != 2 or not isinstance(node[1], sexpr.Atom):
            raise err("malformed set-logic")
        st.logic = node[1].text
        if st.logic != "HORN":
            st.warnings.append(ParseError(
                f"logic {st.logic} is not HORN; continuing", node.line,
                node.col, st.filename, severity="warning"))
        return
    if cmd in ("set-info", "set-option"):
        return
    if cmd == "exit":
        return
    if cmd == "declare-sort":
        if len(node) not in (2, 3) or not isinstance(node[1], sexpr.Atom):
            raise err("malformed declare-sort")
        name = node[1].text
        if len(node) == 3 and node[2].text != "0":
            raise err("only arity-0 sorts are supported")
        if name.startswith(RESERVED_PREFIX):
            raise err(f"symbol {name} uses the reserved prefix")
        if name in _CORE_SORTS or name in st.sorts:
            raise err(f"sort {name} already declared")
        st.sorts[name] = Sort(name)
        return
    if cmd in ("declare-fun", "declare-const"):
        _read_declare(node, st)
        return
    if cmd == "assert":
        if len(node) != 2:
            raise err("malformed assert")
        if st.check_sats:
            raise err("assert after check-sat")
        st.raw_clauses.append(_read_assert(node[1], st))
        return
    if cmd == "check-sat":
        if st.check_sats:
            raise err("multiple check-sat commands; one query per file")
        st.check_sats += 1
        return
    raise err(f"unsupported command {cmd}")


def _read_declare(node: sexpr.SList, st: _ScriptState) -> None:
    err = lambda msg: ParseError(msg, node.line, node.col, st.filename)
    if node[0].text == "declare-const":
        raise err("free theory constants are not supported; use clause variables")
    if len(node) != 4 or not isinstance(node[1], sexpr.Atom) \
            or not isinstance(node[2], sexpr.SList):
        raise err("malformed declare-fun")
    name = node[1].text
    if name.startswith(RESERVED_PREFIX):
        raise err(f"symbol {name} uses the reserved prefix")
    if name in st.predicates:
        raise err(f"predicate {name} already declared")
    reader = TermReader(st.sorts, st.filename)
    param_sorts = tuple(reader.read_sort(s) for s in node[2])
    result = reader.read_sort(node[3])
    if result != BOOL:
        raise err(f"declared function {name} must return Bool")
    st.predicates[name] = PredicateSymbol(name, param_sorts)


def _read_assert(body, st: _ScriptState):
    """Split an asserted formula into (body atoms, constraint, head)."""
    reader = TermReader(st.sorts, st.filename,
                        predicate_names=set(st.predicates))
    env: dict[str, Term] = {}
    # strip (possibly nested) outer foralls
    while (isinstance(body, sexpr.SList) and body.items
           and isinstance(body[0], sexpr.Atom) and body[0].text == "forall"):
        if len(body) != 3:
            raise ParseError("malformed forall", body.line, body.col, st.filename)
        _, env = _merged_binders(reader, body[1], env)
        body = body[2]
    return _split_horn(body, env, reader, st)


def _merged_binders(reader: TermReader, node, env):
    bound, new_env = reader.read_binders(node, env)
    return bound, new_env


def _split_horn(node, env, reader: TermReader, st: _ScriptState):
    not_horn = lambda msg, at=node: NotHornError(
        msg, getattr(at, "line", 0), getattr(at, "col", 0), st.filename)

    # expand a let wrapping the clause structure (theory terms only)
    if (isinstance(node, sexpr.SList) and node.items
            and isinstance(node[0], sexpr.Atom) and node[0].text == "let"):
        if len(node) != 3 or not isinstance(node[1], sexpr.SList):
            raise ParseError("malformed let", node.line, node.col, st.filename)
        new_env = dict(env)
        for binding in node[1]:
            if not (isinstance(binding, sexpr.SList) and len(binding) == 2
                    and isinstance(binding[0], sexpr.Atom)):
                raise ParseError("malformed let binding",
                                 getattr(binding, "line", 0),
                                 getattr(binding, "col", 0), st.filename)
            new_env[binding[0].text] = reader.read_term(binding[1], env)
        return _split_horn(node[2], new_env, reader, st)

    def as_pred_app(n) -> Optional[PredApp]:
        if isinstance(n, sexpr.Atom) and n.text in st.predicates:
            sym = st.predicates[n.text]
            if sym.arity != 0:
                raise ParseError(f"{n.text} expects {sym.arity} arguments",
                                 n.line, n.col, st.filename)
            return PredApp(sym, ())
        if (isinstance(n, sexpr.SList) and n.items
                and isinstance(n[0], sexpr.Atom) and n[0].text in st.predicates):
            sym = st.predicates[n[0].text]
            args = tuple(reader.read_term(a, env) for a in n.items[1:])
            try:
                return PredApp(sym, args)
            except ClauseError as e:
                raise ParseError(str(e), n.line, n.col, st.filename) from None
        return None

    def read_body(n) -> tuple[list[PredApp], list[Term]]:
        """Flatten a conjunction of predicate applications and constraints."""
        if (isinstance(n, sexpr.SList) and n.items
                and isinstance(n[0], sexpr.Atom) and n[0].text == "and"):
            atoms, constraints = [], []
            for part in n.items[1:]:
                a, c = read_body(part)
                atoms.extend(a)
                constraints.extend(c)
            return atoms, constraints
        app = as_pred_app(n)
        if app is not None:
            return [app], []
        return [], [reader.read_term(n, env)]

    # (=> body head), possibly curried
    if (isinstance(node, sexpr.SList) and node.items
            and isinstance(node[0], sexpr.Atom) and node[0].text == "=>"):
        if len(node) < 3:
            raise ParseError("malformed =>", node.line, node.col, st.filename)
        atoms: list[PredApp] = []
        constraints: list[Term] = []
        for ant in node.items[1:-1]:
            a, c = read_body(ant)
            atoms.extend(a)
            constraints.extend(c)
        head_node = node.items[-1]
        while (isinstance(head_node, sexpr.SList) and head_node.items
               and isinstance(head_node[0], sexpr.Atom)
               and head_node[0].text == "=>"):
            for ant in head_node.items[1:-1]:
                a, c = read_body(ant)
                atoms.extend(a)
                constraints.extend(c)
            head_node = head_node.items[-1]
        return _finish_clause(atoms, constraints, head_node, env, reader, st)

    # (not body) is a query
    if (isinstance(node, sexpr.SList) and node.items
            and isinstance(node[0], sexpr.Atom) and node[0].text == "not"):
        if len(node) != 2:
            raise ParseError("malformed not", node.line, node.col, st.filename)
        atoms, constraints = read_body(node[1])
        return atoms, conj(*constraints), None

    # bare fact (possibly quantifier-free)
    app = as_pred_app(node)
    if app is not None:
        from .terms import TRUE
        return [], TRUE, app
    if isinstance(node, sexpr.Atom) and node.text == "false":
        from .terms import TRUE
        return [], TRUE, None
    raise not_horn("asserted formula is not a Horn clause")


def _finish_clause(atoms, constraints, head_node, env, reader, st):
    if isinstance(head_node, sexpr.Atom) and head_node.text == "false":
        return atoms, conj(*constraints), None
    if (isinstance(head_node, sexpr.SList) and head_node.items
            and isinstance(head_node[0], sexpr.Atom)
            and head_node[0].text in ("or",)):
        raise NotHornError("disjunctive head is not Horn", head_node.line,
                           head_node.col, st.filename)
    if isinstance(head_node, sexpr.Atom) and head_node.text in st.predicates:
        sym = st.predicates[head_node.text]
        if sym.arity == 0:
            return atoms, conj(*constraints), PredApp(sym, ())
    if (isinstance(head_node, sexpr.SList) and head_node.items
            and isinstance(head_node[0], sexpr.Atom)
            and head_node[0].text in st.predicates):
        sym = st.predicates[head_node[0].text]
        args = tuple(reader.read_term(a, env) for a in head_node.items[1:])
        try:
            return atoms, conj(*constraints), PredApp(sym, args)
        except ClauseError as e:
            raise ParseError(str(e), head_node.line, head_node.col,
                             st.filename) from None
    raise NotHornError("clause head must be a predicate application or false",
                       getattr(head_node, "line", 0), getattr(head_node, "col", 0),
                       st.filename)


def unparse(s: ChcSystem) -> str:
    """Print a system as a script that parses back to the same system."""
    lines = [f"(set-logic {s.logic})"]
    for sort in s.opaque_sorts():
        lines.append(f"(declare-sort {symbol_text(sort.name)} 0)")
    for p in sorted(s.predicates, key=lambda p: p.name):
        params = " ".join(sr.name for sr in p.param_sorts)
        lines.append(f"(declare-fun {symbol_text(p.name)} ({params}) Bool)")
    for c in s.clauses:
        lines.append(_unparse_clause(c))
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def _unparse_clause(c: HornClause) -> str:
    variables = sorted(c.variables(), key=lambda v: v.name)
    renaming = _public_names(variables)
    from .terms import substitute

    def atom_text(app: PredApp) -> str:
        args = " ".join(to_smtlib(renaming.get(a, a)) for a in app.args)
        name = symbol_text(app.symbol.name)
        return f"({name} {args})" if args else name

    constraint = substitute(c.constraint, renaming) if renaming else c.constraint
    body_parts = [atom_text(a) for a in c.body_preds] + [to_smtlib(constraint)]
    if len(body_parts) > 1:
        body = "(and " + " ".join(body_parts) + ")"
    else:
        body = body_parts[0]
    head = atom_text(c.head) if c.head else "false"
    if c.constraint == Const(True, BOOL) and not c.body_preds:
        formula = head
    else:
        formula = f"(=> {body} {head})"
    if variables:
        binders = " ".join(
            f"({symbol_text(renaming.get(v, v).name)} {v.sort.name})"
            for v in variables)
        formula = f"(forall ({binders}) {formula})"
    return f"(assert {formula})"


def _public_names(variables: Sequence[Var]) -> dict[Var, Var]:
    """Rename reserved (generated) variables to printable ones."""
    taken = {v.name for v in variables if not v.name.startswith(RESERVED_PREFIX)}
    renaming: dict[Var, Var] = {}
    counter = 0
    for v in variables:
        if not v.name.startswith(RESERVED_PREFIX):
            continue
        while f"z{counter}" in taken:
            counter += 1
        fresh = Var(f"z{counter}", v.sort)
        taken.add(fresh.name)
        renaming[v] = fresh
    return renaming
