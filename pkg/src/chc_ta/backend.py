"""Client for an external SMT solver process over the SMT-LIB 2 protocol.

A SolverHandle owns one solver subprocess and runs one query at a time:
satisfiability with optional model and unsat core, validity, and tree
interpolation.  Every query is written as a self-contained script
(reset, options, declarations, named asserts, check-sat) so transcripts
are reproducible; responses are read with a per-query timeout.

Tree interpolants come either from the solver's `get-interpolants`
command or from the built-in subtree-summary fallback: each node is
labeled with the existential projection of its subtree's constraints
onto the node's interface variables.  Both paths re-verify the three
defining interpolant conditions before returning.
"""

from __future__ import annotations

import logging
import os
import select
import shlex
import subprocess
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from . import sexpr
from .parser import TermReader
from .terms import (
    BOOL,
    INT,
    REAL,
    Const,
    FALSE,
    Quant,
    Sort,
    Term,
    TRUE,
    Var,
    conj,
    exists,
    neg,
    symbol_text,
    to_smtlib,
)

log = logging.getLogger(__name__)

DEFAULT_SOLVER_COMMAND = (sys.executable, "-m", "chc_ta.micro_smt")

# Documented command lines for mainstream external solvers.
KNOWN_SOLVERS = {
    "z3": "z3 -in -smt2",
    "cvc5": "cvc5 --lang smt2 --produce-models",
}


class BackendError(Exception):
    """Solver process failure or protocol garbage; carries the transcript."""

    def __init__(self, message: str, transcript: str = "", detail: str = ""):
        super().__init__(message)
        self.transcript = transcript
        self.detail = detail


class SolverUnknown(Exception):
    """The solver answered unknown where a definite answer was needed."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _Timeout(Exception):
    pass


@dataclass
class SolverStats:
    queries: int = 0
    wall_time: float = 0.0
    resets: int = 0


@dataclass(frozen=True)
class SmtVerdict:
    kind: str  # sat | unsat | unknown
    model: Optional[dict] = None  # Var -> value (Bool/Int/Real parsed)
    core: Optional[frozenset] = None  # assertion names
    reason: str = ""

    @property
    def is_sat(self) -> bool:
        return self.kind == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.kind == "unsat"


class SolverHandle:
    """One solver subprocess; at most one in-flight query."""

    def __init__(self, command: Union[str, Sequence[str], None] = None,
                 logic: str = "ALL", timeout: float = 10.0, seed: int = 0):
        if command is None:
            command = DEFAULT_SOLVER_COMMAND
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = tuple(command)
        self.logic = logic
        self.timeout = timeout
        self.seed = seed
        self.stats = SolverStats()
        self.last_script = ""
        self._proc: Optional[subprocess.Popen] = None
        self._buf = ""
        self._poisoned = False
        self._used = False

    # -- process management

    def _ensure_process(self) -> subprocess.Popen:
        if self._poisoned:
            raise BackendError("solver handle is unusable until reset",
                               self.last_script)
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command, stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE, stderr=subprocess.DEVNULL)
            except OSError as e:
                raise BackendError(f"cannot spawn solver {self.command}: {e}")
            self._buf = ""
            self._used = False
        return self._proc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def _poison(self) -> None:
        self._poisoned = True
        self.close()

    def __del__(self):  # pragma: no cover
        try:
            self.close()
        except Exception:
            pass

    # -- raw protocol

    def _write(self, script: str) -> None:
        proc = self._ensure_process()
        try:
            proc.stdin.write(script.encode())
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            self._poison()
            raise BackendError(f"solver process died: {e}", script)

    def _read_response(self, deadline: float) -> str:
        """One complete response token or s-expression, skipping acks."""
        proc = self._proc
        fd = proc.stdout.fileno()
        while True:
            end = sexpr.first_complete(self._buf)
            if end >= 0:
                text = self._buf[:end].strip()
                self._buf = self._buf[end:]
                if text == "success":
                    continue
                return text
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise _Timeout()
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise _Timeout()
            chunk = os.read(fd, 65536)
            if not chunk:
                raise BackendError("solver closed its output stream",
                                   self.last_script, self._buf)
            self._buf += chunk.decode(errors="replace")

    # -- script assembly

    def _preamble(self, opaque_sorts: Iterable[Sort], variables: Iterable[Var],
                  want_model: bool, want_core: bool) -> list[str]:
        lines = []
        if self._used:
            lines.append("(reset)")
        lines.append("(set-option :print-success true)")
        if want_model:
            lines.append("(set-option :produce-models true)")
        if want_core:
            lines.append("(set-option :produce-unsat-cores true)")
        lines.append(f"(set-option :random-seed {self.seed})")
        lines.append(f"(set-logic {self.logic})")
        for s in sorted(opaque_sorts, key=lambda s: s.name):
            lines.append(f"(declare-sort {symbol_text(s.name)} 0)")
        for v in sorted(variables, key=lambda v: v.name):
            lines.append(f"(declare-fun {symbol_text(v.name)} () {v.sort.name})")
        return lines

    def _run_script(self, lines: list[str], deadline: float) -> str:
        script = "\n".join(lines) + "\n"
        self.last_script = script
        self._write(script)
        return self._read_response(deadline)


def _named(assertions) -> list[tuple[str, Term]]:
    out = []
    for i, a in enumerate(assertions):
        if isinstance(a, tuple):
            out.append(a)
        else:
            out.append((f"c{i}", a))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValueError("duplicate assertion names")
    return out


def _declarations(terms: Iterable[Term]) -> tuple[set, set]:
    variables: set = set()
    opaque: set = set()

    def walk(t: Term) -> None:
        for v in t.free_vars():
            variables.add(v)
            if v.sort.name not in ("Bool", "Int", "Real"):
                opaque.add(v.sort)

    for t in terms:
        walk(t)
    return variables, opaque


def check_sat(assertions, handle: SolverHandle,
              want_model: bool = False, want_core: bool = False) -> SmtVerdict:
    """Satisfiability of named assertions through the solver process.

    Timeouts yield Unknown("timeout") and poison the handle until reset;
    protocol garbage raises BackendError with the transcript attached.
    """
    named = _named(assertions)
    variables, opaque = _declarations(t for _, t in named)
    lines = handle._preamble(opaque, variables, want_model, want_core)
    for name, t in named:
        lines.append(f"(assert (! {to_smtlib(t)} :named {symbol_text(name)}))")
    lines.append("(check-sat)")
    started = time.monotonic()
    deadline = started + handle.timeout
    handle.stats.queries += 1
    try:
        verdict = handle._run_script(lines, deadline)
        if verdict.startswith("(error"):
            raise BackendError("solver reported an error", handle.last_script,
                               verdict)
        if verdict == "sat":
            model = None
            if want_model:
                handle._write("(get-model)\n")
                model = _parse_model(handle._read_response(deadline), variables)
            result = SmtVerdict("sat", model=model)
        elif verdict == "unsat":
            core = None
            if want_core:
                handle._write("(get-unsat-core)\n")
                core = _parse_core(handle._read_response(deadline))
            result = SmtVerdict("unsat", core=core)
        elif verdict == "unknown":
            handle._write("(get-info :reason-unknown)\n")
            try:
                reason = _parse_reason(handle._read_response(deadline))
            except (_Timeout, BackendError):
                reason = ""
            result = SmtVerdict("unknown", reason=reason or "solver returned unknown")
        else:
            raise BackendError(f"unexpected solver answer {verdict!r}",
                               handle.last_script, verdict)
    except _Timeout:
        handle._poison()
        result = SmtVerdict("unknown", reason="timeout")
    finally:
        handle.stats.wall_time += time.monotonic() - started
    handle._used = True
    return result


def check_validity(premises: Sequence[Term], conclusion: Term,
                   handle: SolverHandle) -> str:
    """'valid' iff premises entail the conclusion; 'invalid' or 'unknown'."""
    assertions = [(f"p{i}", t) for i, t in enumerate(premises)]
    assertions.append(("goal", neg(conclusion)))
    verdict = check_sat(assertions, handle)
    if verdict.is_unsat:
        return "valid"
    if verdict.is_sat:
        return "invalid"
    return "unknown"


def reset(handle: SolverHandle) -> SolverHandle:
    """Fresh process, same configuration; statistics are preserved."""
    handle.close()
    handle._poisoned = False
    handle._buf = ""
    handle._used = False
    handle.stats.resets += 1
    return handle


# ---------------------------------------------------------------------------
# Interpolation


@dataclass(frozen=True)
class InterpolationNode:
    node_id: int
    formula: Term
    head_vars: tuple
    children: tuple

    def postorder(self) -> list:
        out = []
        for c in self.children:
            out.extend(c.postorder())
        out.append(self)
        return out


@dataclass(frozen=True)
class InterpolationProblem:
    """Rooted tree of labeled formulas whose conjunction is unsatisfiable.

    A node shares variables with its parent exactly through its
    head-argument variables; the derivation builder guarantees this.
    """

    root: InterpolationNode

    def nodes(self) -> list[InterpolationNode]:
        return self.root.postorder()

    def labels(self) -> list[Term]:
        return [n.formula for n in self.nodes()]


@dataclass(frozen=True)
class TreeInterpolant:
    problem: InterpolationProblem
    formulas: dict  # node_id -> Term

    def formula(self, node: InterpolationNode) -> Term:
        return self.formulas[node.node_id]


def _label_name(n: InterpolationNode) -> str:
    return f"c{n.node_id}"


def tree_interpolants(problem: InterpolationProblem, handle: SolverHandle,
                      mode: str = "external") -> TreeInterpolant:
    """Tree interpolant for an infeasible derivation's constraint tree.

    external: ask the solver (`get-interpolants`); on an unsupported
    command fall back to subtree mode with a logged notice.  subtree:
    label each node with the existential quantification, over the
    non-interface variables of its subtree, of the subtree constraints.
    Every returned interpolant is re-verified against the three defining
    conditions; a failure raises BackendError("bad interpolant ...").
    """
    nodes = problem.nodes()
    named = [(_label_name(n), n.formula) for n in nodes]
    pre = check_sat(named, handle)
    if pre.is_sat:
        raise BackendError("interpolation requested on a satisfiable problem")
    if not pre.is_unsat:
        raise SolverUnknown(pre.reason)

    formulas: Optional[dict] = None
    if mode == "external":
        formulas = _external_interpolants(problem, handle)
        if formulas is None:
            log.info("solver lacks get-interpolants; using subtree summaries")
    if formulas is None:
        formulas = _subtree_interpolants(problem)
    interpolant = TreeInterpolant(problem, formulas)
    _verify_interpolant(interpolant, handle)
    return interpolant


def _tree_expr(n: InterpolationNode) -> str:
    if not n.children:
        return _label_name(n)
    inner = " ".join(_tree_expr(c) for c in n.children)
    return f"({inner} {_label_name(n)})"


def _external_interpolants(problem: InterpolationProblem,
                           handle: SolverHandle) -> Optional[dict]:
    nodes = problem.nodes()
    named = [(_label_name(n), n.formula) for n in nodes]
    variables, opaque = _declarations(t for _, t in named)
    lines = handle._preamble(opaque, variables, want_model=False,
                             want_core=False)
    lines.append("(set-option :produce-interpolants true)")
    for name, t in named:
        lines.append(f"(assert (! {to_smtlib(t)} :named {symbol_text(name)}))")
    lines.append("(check-sat)")
    deadline = time.monotonic() + handle.timeout
    handle.stats.queries += 1
    try:
        verdict = handle._run_script(lines, deadline)
        if verdict != "unsat":
            return None
        handle._write(f"(get-interpolants {_tree_expr(problem.root)})\n")
        answer = handle._read_response(deadline)
    except _Timeout:
        handle._poison()
        raise SolverUnknown("timeout during interpolation")
    finally:
        handle._used = True
    if answer.startswith("(error") or answer == "unsupported":
        return None
    try:
        node = sexpr.read_one(answer)
    except sexpr.SexprError:
        raise BackendError("unparsable interpolant answer", handle.last_script,
                           answer)
    if not isinstance(node, sexpr.SList):
        raise BackendError("unparsable interpolant answer", handle.last_script,
                           answer)
    items = list(node.items)
    if len(items) == len(nodes) - 1:
        items.append(sexpr.Atom("false", "symbol"))
    if len(items) != len(nodes):
        raise BackendError(
            f"expected {len(nodes)} interpolants, got {len(items)}",
            handle.last_script, answer)
    consts = {}
    for _, t in named:
        for v in t.free_vars():
            consts[v.name] = v
    sorts = {s.name: s for s in _declarations(t for _, t in named)[1]}
    reader = TermReader(sorts, "<interpolants>", allow_quantifiers=True,
                        constants=consts)
    formulas = {}
    for n, item in zip(nodes, items):
        formulas[n.node_id] = reader.read_term(item, {})
    return formulas


def _subtree_interpolants(problem: InterpolationProblem) -> dict:
    formulas: dict = {}

    def subtree_constraints(n: InterpolationNode) -> list[Term]:
        out = [n.formula]
        for c in n.children:
            out.extend(subtree_constraints(c))
        return out

    for n in problem.nodes():
        constraints = subtree_constraints(n)
        keep = set(n.head_vars)
        bound = sorted(
            {v for t in constraints for v in t.free_vars()} - keep,
            key=lambda v: v.name)
        formulas[n.node_id] = exists(bound, conj(*constraints))
    formulas[problem.root.node_id] = FALSE
    return formulas


def _verify_interpolant(interpolant: TreeInterpolant,
                        handle: SolverHandle) -> None:
    """The three defining conditions, checked as validity queries."""
    for n in interpolant.problem.nodes():
        formula = interpolant.formula(n)
        extra = formula.free_vars() - set(n.head_vars)
        if extra:
            raise BackendError(
                f"bad interpolant at node {n.node_id}: "
                f"mentions non-interface variables {sorted(v.name for v in extra)}")
        premises = [interpolant.formula(c) for c in n.children] + [n.formula]
        outcome = check_validity(premises, formula, handle)
        if outcome == "unknown":
            raise SolverUnknown(f"interpolant check at node {n.node_id}")
        if outcome != "valid":
            raise BackendError(f"bad interpolant at node {n.node_id}",
                               handle.last_script)
    root_formula = interpolant.formula(interpolant.problem.root)
    outcome = check_validity([root_formula], FALSE, handle)
    if outcome == "unknown":
        raise SolverUnknown("interpolant root check")
    if outcome != "valid":
        raise BackendError("bad interpolant at the root: not equivalent to false",
                           handle.last_script)


# ---------------------------------------------------------------------------
# Response parsing


def _parse_model(text: str, variables: Iterable[Var]) -> dict:
    node = sexpr.read_one(text)
    if not isinstance(node, sexpr.SList):
        raise BackendError("unparsable model", detail=text)
    items = list(node.items)
    if items and isinstance(items[0], sexpr.Atom) and items[0].text == "model":
        items = items[1:]
    by_name = {v.name: v for v in variables}
    model: dict = {}
    for entry in items:
        if not (isinstance(entry, sexpr.SList) and len(entry) >= 5
                and isinstance(entry[0], sexpr.Atom)
                and entry[0].text == "define-fun"):
            continue
        name = entry[1].text if isinstance(entry[1], sexpr.Atom) else None
        if name not in by_name:
            continue
        var = by_name[name]
        model[var] = _parse_value(entry[4], var.sort)
    return model


def _parse_value(node, sort: Sort):
    if sort == BOOL and isinstance(node, sexpr.Atom):
        return node.text == "true"
    if isinstance(node, sexpr.Atom):
        if node.kind == "numeral":
            v = int(node.text)
            return v if sort == INT else Fraction(v)
        if node.kind == "decimal":
            return Fraction(node.text)
        return sexpr.write_node(node)
    if isinstance(node, sexpr.SList) and node.items \
            and isinstance(node[0], sexpr.Atom):
        op = node[0].text
        if op == "-" and len(node) == 2:
            inner = _parse_value(node[1], sort)
            if isinstance(inner, (int, Fraction)):
                return -inner
        if op == "/" and len(node) == 3:
            a = _parse_value(node[1], REAL)
            b = _parse_value(node[2], REAL)
            if isinstance(a, Fraction) and isinstance(b, Fraction) and b:
                return a / b
    return sexpr.write_node(node)


def _parse_core(text: str) -> frozenset:
    node = sexpr.read_one(text)
    if not isinstance(node, sexpr.SList):
        raise BackendError("unparsable unsat core", detail=text)
    return frozenset(a.text for a in node.items if isinstance(a, sexpr.Atom))


def _parse_reason(text: str) -> str:
    try:
        node = sexpr.read_one(text)
    except sexpr.SexprError:
        return text
    if isinstance(node, sexpr.SList) and len(node) == 2 \
            and isinstance(node[1], sexpr.Atom):
        return node[1].text.strip('"')
    return text
