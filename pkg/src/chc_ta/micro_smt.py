"""A small SMT-LIB 2 solver process for linear Int/Real/Bool arithmetic.

Run as `python -m chc_ta.micro_smt`; speaks the SMT-LIB text protocol on
stdin/stdout.  Decides quantified linear arithmetic with the exact
procedures in `qe`, produces models, deletion-minimized unsat cores and
tree interpolants, and is the default solver the clause engine spawns
when no external SMT solver is configured.

Tree interpolation dialect: `(get-interpolants P)` where

    P ::= <label> | (P+ <label>)

i.e. each node lists its children before its own assertion label.  The
response is one formula per node in post-order (root last, always
`false`); every formula mentions only the variables its node shares
with the rest of the tree.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Optional

from . import qe, sexpr
from .parser import TermReader
from .terms import (
    BOOL,
    INT,
    REAL,
    Const,
    Sort,
    Term,
    Var,
    conj,
    to_smtlib,
    symbol_text,
)

_CORE_SORTS = {"Bool": BOOL, "Int": INT, "Real": REAL}


@dataclass
class _Assertion:
    name: Optional[str]
    term: Term


@dataclass
class InterpNode:
    label: str
    children: list

    def postorder(self) -> list:
        out = []
        for c in self.children:
            out.extend(c.postorder())
        out.append(self)
        return out


class Server:
    def __init__(self, out=None):
        self.out = out or sys.stdout
        self._fresh_state()
        self.print_success = False

    def _fresh_state(self) -> None:
        self.logic: Optional[str] = None
        self.sorts: dict[str, Sort] = {}
        self.consts: dict[str, Var] = {}
        self.assertions: list[_Assertion] = []
        self.last_verdict: Optional[str] = None
        self.unknown_reason = ""
        self.model: Optional[dict] = None
        self.auto_name = 0

    # -- protocol plumbing

    def _reply(self, text: str) -> None:
        self.out.write(text + "\n")
        self.out.flush()

    def _ok(self) -> None:
        if self.print_success:
            self._reply("success")

    def _error(self, msg: str) -> None:
        msg = msg.replace("\\", "\\\\").replace('"', '""')
        self._reply(f'(error "{msg}")')

    def handle(self, node) -> bool:
        """Execute one command; returns False on exit."""
        if not (isinstance(node, sexpr.SList) and node.items
                and isinstance(node[0], sexpr.Atom)):
            self._error("expected a command")
            return True
        cmd = node[0].text
        try:
            return self._dispatch(cmd, node)
        except (sexpr.SexprError, qe.Unsupported) as e:
            self._error(str(e))
            return True
        except Exception as e:  # keep the process alive on internal errors
            self._error(f"internal: {type(e).__name__}: {e}")
            return True

    def _dispatch(self, cmd: str, node: sexpr.SList) -> bool:
        if cmd == "exit":
            return False
        if cmd == "reset":
            self._fresh_state()
            self.print_success = False
            self._ok()
            return True
        if cmd == "set-option":
            if len(node) >= 2 and isinstance(node[1], sexpr.Atom):
                opt = node[1].text
                val = node[2].text if len(node) > 2 and isinstance(node[2], sexpr.Atom) else ""
                if opt == ":print-success":
                    self.print_success = val == "true"
            self._ok()
            return True
        if cmd in ("set-info", "set-logic"):
            if cmd == "set-logic" and len(node) == 2:
                self.logic = node[1].text
            self._ok()
            return True
        if cmd == "get-info":
            self._get_info(node)
            return True
        if cmd == "declare-sort":
            if len(node) >= 2 and isinstance(node[1], sexpr.Atom):
                self.sorts[node[1].text] = Sort(node[1].text)
            self._ok()
            return True
        if cmd in ("declare-fun", "declare-const"):
            self._declare(cmd, node)
            return True
        if cmd == "assert":
            self._assert(node)
            return True
        if cmd == "check-sat":
            self._check_sat()
            return True
        if cmd == "get-model":
            self._get_model()
            return True
        if cmd == "get-unsat-core":
            self._get_unsat_core()
            return True
        if cmd == "get-interpolants":
            self._get_interpolants(node)
            return True
        if cmd == "echo":
            self._reply(node[1].text if len(node) > 1 else '""')
            return True
        self._error(f"unsupported command {cmd}")
        return True

    # -- declarations and assertions

    def _declare(self, cmd: str, node: sexpr.SList) -> None:
        reader = self._reader()
        if cmd == "declare-const":
            if len(node) != 3 or not isinstance(node[1], sexpr.Atom):
                self._error("malformed declare-const")
                return
            name, sort_node = node[1].text, node[2]
        else:
            if (len(node) != 4 or not isinstance(node[1], sexpr.Atom)
                    or not isinstance(node[2], sexpr.SList)):
                self._error("malformed declare-fun")
                return
            if node[2].items:
                self._error("uninterpreted functions are not supported")
                return
            name, sort_node = node[1].text, node[3]
        try:
            sort = reader.read_sort(sort_node)
        except Exception as e:
            self._error(str(e))
            return
        self.consts[name] = Var(name, sort)
        self._ok()

    def _reader(self) -> TermReader:
        return TermReader(self.sorts, "<smt>", allow_quantifiers=True,
                          constants=self.consts)

    def _assert(self, node: sexpr.SList) -> None:
        if len(node) != 2:
            self._error("malformed assert")
            return
        body = node[1]
        name = None
        if (isinstance(body, sexpr.SList) and body.items
                and isinstance(body[0], sexpr.Atom) and body[0].text == "!"):
            items = list(body.items[1:])
            term_node = items[0]
            i = 1
            while i < len(items):
                if (isinstance(items[i], sexpr.Atom)
                        and items[i].text == ":named" and i + 1 < len(items)):
                    name = items[i + 1].text
                    i += 2
                else:
                    i += 1
            body = term_node
        try:
            term = self._reader().read_term(body, {})
        except Exception as e:
            self._error(str(e))
            return
        if term.sort != BOOL:
            self._error("asserted term is not Bool")
            return
        if name is None:
            name = f"@a{self.auto_name}"
            self.auto_name += 1
        self.assertions.append(_Assertion(name, term))
        self.last_verdict = None
        self._ok()

    # -- queries

    def _conjunction(self) -> Term:
        return conj(*[a.term for a in self.assertions])

    def _check_sat(self) -> None:
        try:
            sat = qe.satisfiable(self._conjunction())
        except qe.Unsupported as e:
            self.last_verdict = "unknown"
            self.unknown_reason = str(e)
            self.model = None
            self._reply("unknown")
            return
        self.last_verdict = "sat" if sat else "unsat"
        self.model = None
        self._reply(self.last_verdict)

    def _get_info(self, node: sexpr.SList) -> None:
        key = node[1].text if len(node) > 1 and isinstance(node[1], sexpr.Atom) else ""
        if key == ":reason-unknown":
            reason = self.unknown_reason.replace('"', "'") or "unknown"
            self._reply(f'(:reason-unknown "{reason}")')
        elif key == ":name":
            self._reply('(:name "micro-smt")')
        elif key == ":version":
            self._reply('(:version "0.1")')
        else:
            self._error(f"unknown info flag {key}")

    def _get_model(self) -> None:
        if self.last_verdict != "sat":
            self._error("model is only available after a sat check-sat")
            return
        if self.model is None:
            self.model = qe.get_model(self._conjunction()) or {}
        parts = []
        for name, v in sorted(self.consts.items()):
            if v.sort == BOOL:
                val: object = bool(self.model.get(name, False))
            elif v.sort == INT:
                val = int(self.model.get(name, 0))
            else:
                from fractions import Fraction
                val = Fraction(self.model.get(name, 0))
            lit = to_smtlib(Const(val, v.sort))
            parts.append(
                f"(define-fun {symbol_text(name)} () {v.sort.name} {lit})")
        self._reply("(" + " ".join(parts) + ")")

    def _get_unsat_core(self) -> None:
        if self.last_verdict != "unsat":
            self._error("core is only available after an unsat check-sat")
            return
        kept = list(self.assertions)
        i = 0
        while i < len(kept):
            trial = kept[:i] + kept[i + 1:]
            try:
                still = not qe.satisfiable(conj(*[a.term for a in trial]))
            except qe.Unsupported:
                still = False
            if still:
                kept = trial
            else:
                i += 1
        names = " ".join(symbol_text(a.name) for a in kept if a.name)
        self._reply(f"({names})")

    # -- tree interpolation

    def _get_interpolants(self, node: sexpr.SList) -> None:
        if len(node) != 2:
            self._error("get-interpolants takes one tree argument")
            return
        labels = {a.name: a.term for a in self.assertions}
        try:
            tree = _parse_interp_tree(node[1])
        except ValueError as e:
            self._error(str(e))
            return
        order = tree.postorder()
        used = [n.label for n in order]
        if len(set(used)) != len(used):
            self._error("duplicate label in interpolation tree")
            return
        missing = [l for l in used if l not in labels]
        if missing:
            self._error(f"unknown assertion label {missing[0]}")
            return
        whole = conj(*[labels[l] for l in used])
        try:
            if qe.satisfiable(whole):
                self._error("assertions are not jointly unsatisfiable")
                return
            interpolants = self._subtree_interpolants(tree, labels)
        except qe.Unsupported as e:
            self._error(f"unsupported: {e}")
            return
        self._reply("(" + " ".join(to_smtlib(i) for i in interpolants) + ")")

    def _subtree_interpolants(self, tree: InterpNode, labels: dict) -> list[Term]:
        order = tree.postorder()
        subtree_labels: dict[int, set] = {}

        def collect(n: InterpNode) -> set:
            out = {n.label}
            for c in n.children:
                out |= collect(c)
            subtree_labels[id(n)] = out
            return out

        all_labels = collect(tree)
        out = []
        for n in order:
            inside = subtree_labels[id(n)]
            outside = all_labels - inside
            in_vars = set()
            for l in inside:
                in_vars |= {v.name for v in labels[l].free_vars()}
            out_vars = set()
            for l in outside:
                out_vars |= {v.name for v in labels[l].free_vars()}
            shared = in_vars & out_vars
            sort_env = {}
            for l in inside:
                for v in labels[l].free_vars():
                    sort_env[v.name] = v.sort
            formula = qe.project_onto(conj(*[labels[l] for l in inside]),
                                      shared, sort_env)
            out.append(formula)
        return out


def _parse_interp_tree(node) -> InterpNode:
    if isinstance(node, sexpr.Atom):
        return InterpNode(node.text, [])
    if isinstance(node, sexpr.SList) and node.items:
        last = node.items[-1]
        if not isinstance(last, sexpr.Atom):
            raise ValueError("interpolation tree node must end with a label")
        return InterpNode(last.text,
                          [_parse_interp_tree(c) for c in node.items[:-1]])
    raise ValueError("malformed interpolation tree")


def main() -> int:
    server = Server()
    buffer = ""
    stdin = sys.stdin
    while True:
        end = sexpr.first_complete(buffer)
        if end < 0:
            chunk = stdin.readline()
            if not chunk:
                break
            buffer += chunk
            continue
        text, buffer = buffer[:end], buffer[end:]
        if not text.strip():
            continue
        try:
            node = sexpr.read_one(text)
        except sexpr.SexprError as e:
            server._error(str(e))
            continue
        if not server.handle(node):
            break
    return 0


if __name__ == "__main__":
    sys.exit(main())
