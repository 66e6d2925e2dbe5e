"""Bottom-up nondeterministic finite tree automata over clause alphabets.

Symbols are ranked by the body length of the clause they name.  States
are opaque hashables (predicate names, interpolant formulas, product
pairs, subsets).  Operations: membership, emptiness with a canonical
minimal witness, reachable product intersection, subset-construction
determinization, complement, difference (eager and lazy against a rule
oracle), and two minimizations.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional


class AlphabetMismatch(Exception):
    pass


class UnknownSymbol(Exception):
    pass


@dataclass(frozen=True)
class RankedSymbol:
    clause_id: int
    rank: int

    def __repr__(self) -> str:
        return f"f{self.clause_id}/{self.rank}"


class Tree:
    """Ranked tree; height of a leaf is 1."""

    __slots__ = ("symbol", "children", "height", "size", "_pre", "_hash")

    def __init__(self, symbol: RankedSymbol, children: tuple = ()):
        if len(children) != symbol.rank:
            raise ValueError(f"{symbol} expects {symbol.rank} children")
        self.symbol = symbol
        self.children = children
        self.height = 1 + max((c.height for c in children), default=0)
        self.size = 1 + sum(c.size for c in children)
        self._pre = (symbol.clause_id,) + tuple(
            i for c in children for i in c._pre)
        self._hash = hash((symbol, self._pre))

    def key(self) -> tuple:
        """Total order used for canonical witnesses."""
        return (self.height, self.size, self._pre)

    def preorder_ids(self) -> tuple:
        return self._pre

    def __eq__(self, other) -> bool:
        return (isinstance(other, Tree) and self._hash == other._hash
                and self.symbol == other.symbol and self._pre == other._pre
                and self.children == other.children)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if not self.children:
            return f"({self.symbol.clause_id})"
        inner = " ".join(map(repr, self.children))
        return f"({self.symbol.clause_id} {inner})"


@dataclass(frozen=True)
class Rule:
    sources: tuple
    symbol: RankedSymbol
    target: object

    def __post_init__(self) -> None:
        if len(self.sources) != self.symbol.rank:
            raise ValueError(f"rule sources do not match rank of {self.symbol}")

    def __repr__(self) -> str:
        src = " ".join(map(str, self.sources))
        return f"{src} -{self.symbol}-> {self.target}"


@dataclass(frozen=True)
class TreeAutomaton:
    states: frozenset
    symbols: frozenset
    rules: frozenset
    accepting: frozenset

    def __post_init__(self) -> None:
        for r in self.rules:
            if r.target not in self.states or any(s not in self.states for s in r.sources):
                raise ValueError(f"rule {r} mentions an unknown state")
            if r.symbol not in self.symbols:
                raise ValueError(f"rule {r} uses a symbol outside the alphabet")
        if not self.accepting <= self.states:
            raise ValueError("accepting states outside the state set")

    def rules_by_symbol(self) -> dict:
        out: dict = {}
        for r in self.rules:
            out.setdefault(r.symbol, []).append(r)
        return out

    def stats(self) -> tuple[int, int]:
        return len(self.states), len(self.rules)


def make_automaton(states: Iterable, symbols: Iterable, rules: Iterable[Rule],
                   accepting: Iterable) -> TreeAutomaton:
    return TreeAutomaton(frozenset(states), frozenset(symbols),
                         frozenset(rules), frozenset(accepting))


def accepts(a: TreeAutomaton, t: Tree) -> bool:
    """True iff some bottom-up run labels the root with an accepting state."""
    by_symbol = a.rules_by_symbol()
    cache: dict[Tree, frozenset] = {}

    def states_of(node: Tree) -> frozenset:
        got = cache.get(node)
        if got is not None:
            return got
        if node.symbol not in a.symbols:
            raise UnknownSymbol(f"{node.symbol} is not in the automaton alphabet")
        child_sets = [states_of(c) for c in node.children]
        out = set()
        for r in by_symbol.get(node.symbol, ()):
            if all(s in cs for s, cs in zip(r.sources, child_sets)):
                out.add(r.target)
        result = frozenset(out)
        cache[node] = result
        return result

    return bool(states_of(t) & a.accepting)


def is_empty(a: TreeAutomaton) -> Optional[Tree]:
    """None iff the language is empty, else a canonical minimal witness.

    The witness minimizes (height, node count, preorder clause ids); it is
    computed with a least-witness fixpoint over the rule hypergraph.
    """
    best: dict = {}
    rules_by_source: dict = {}
    counter = itertools.count()
    heap: list = []
    for r in a.rules:
        for s in set(r.sources):
            rules_by_source.setdefault(s, []).append(r)
        if not r.sources:
            t = Tree(r.symbol)
            heapq.heappush(heap, (t.key(), next(counter), t, r.target))
    while heap:
        key, _, tree, target = heapq.heappop(heap)
        if target in best:
            continue
        best[target] = tree
        for r in rules_by_source.get(target, ()):
            if all(s in best for s in r.sources):
                t = Tree(r.symbol, tuple(best[s] for s in r.sources))
                if r.target not in best:
                    heapq.heappush(heap, (t.key(), next(counter), t, r.target))
    winners = [best[q] for q in a.accepting if q in best]
    if not winners:
        return None
    return min(winners, key=Tree.key)


def intersect(a: TreeAutomaton, b: TreeAutomaton) -> TreeAutomaton:
    """Reachable product automaton; L = L(a) ∩ L(b)."""
    if a.symbols != b.symbols:
        raise AlphabetMismatch("intersect over different alphabets")
    a_by = a.rules_by_symbol()
    b_by = b.rules_by_symbol()
    discovered: set = set()
    rules: set = set()
    changed = True
    while changed:
        changed = False
        for sym in a.symbols:
            for ra in a_by.get(sym, ()):
                for rb in b_by.get(sym, ()):
                    srcs = tuple(zip(ra.sources, rb.sources))
                    if all(s in discovered for s in srcs):
                        tgt = (ra.target, rb.target)
                        rule = Rule(srcs, sym, tgt)
                        if rule not in rules:
                            rules.add(rule)
                            changed = True
                        if tgt not in discovered:
                            discovered.add(tgt)
                            changed = True
    accepting = {s for s in discovered
                 if s[0] in a.accepting and s[1] in b.accepting}
    return make_automaton(discovered, a.symbols, rules, accepting)


def determinize(a: TreeAutomaton) -> TreeAutomaton:
    """Bottom-up subset construction over reachable non-empty subsets.

    The result is deterministic; tuples with no explicit rule go to an
    implicit sink (materialized by `complete`, which `complement` uses).
    """
    by_symbol = a.rules_by_symbol()
    subsets: set = set()
    rules: set = set()

    def target_of(sym: RankedSymbol, srcs: tuple) -> frozenset:
        out = set()
        for r in by_symbol.get(sym, ()):
            if all(s in ss for s, ss in zip(r.sources, srcs)):
                out.add(r.target)
        return frozenset(out)

    for sym in a.symbols:
        if sym.rank == 0:
            tgt = target_of(sym, ())
            if tgt:
                subsets.add(tgt)
                rules.add(Rule((), sym, tgt))
    added = True
    while added:
        added = False
        for sym in a.symbols:
            if sym.rank == 0:
                continue
            for srcs in itertools.product(sorted(subsets, key=_state_key),
                                          repeat=sym.rank):
                tgt = target_of(sym, srcs)
                if not tgt:
                    continue
                rule = Rule(srcs, sym, tgt)
                if rule not in rules:
                    rules.add(rule)
                    added = True
                if tgt not in subsets:
                    subsets.add(tgt)
                    added = True
    accepting = {s for s in subsets if s & a.accepting}
    return make_automaton(subsets, a.symbols, rules, accepting)


_SINK = "<sink>"


def complete(a: TreeAutomaton, sink=_SINK) -> TreeAutomaton:
    """Add a sink so every (source tuple, symbol) has at least one rule."""
    have = {(r.sources, r.symbol) for r in a.rules}
    states = set(a.states) | {sink}
    rules = set(a.rules)
    for sym in a.symbols:
        for srcs in itertools.product(sorted(states, key=_state_key),
                                      repeat=sym.rank):
            if (srcs, sym) not in have:
                rules.add(Rule(srcs, sym, sink))
    return make_automaton(states, a.symbols, rules, a.accepting)


def complement(a: TreeAutomaton) -> TreeAutomaton:
    """All trees over the alphabet not in L(a): determinize, complete, flip."""
    d = complete(determinize(a))
    return make_automaton(d.states, d.symbols, d.rules,
                          d.states - d.accepting)


def difference(a: TreeAutomaton, b: TreeAutomaton) -> TreeAutomaton:
    """L(a) minus L(b), via the product with the complement."""
    if a.symbols != b.symbols:
        raise AlphabetMismatch("difference over different alphabets")
    return intersect(a, complement(b))


class RuleOracle:
    """Query interface onto an automaton that may not be materialized.

    `targets` must be deterministic across repeated calls with the same
    arguments.  `state_universe` describes (an overapproximation of) the
    states that can ever be returned.
    """

    def targets(self, sources: tuple, symbol: RankedSymbol) -> frozenset:
        raise NotImplementedError

    def is_accepting(self, state) -> bool:
        raise NotImplementedError

    def state_universe(self) -> frozenset:
        raise NotImplementedError


class AutomatonOracle(RuleOracle):
    """Wrap an explicit automaton as an oracle; logs every query."""

    def __init__(self, automaton: TreeAutomaton):
        self.automaton = automaton
        self.query_log: list[tuple[tuple, RankedSymbol]] = []
        self._index: dict = {}
        for r in automaton.rules:
            self._index.setdefault((r.sources, r.symbol), set()).add(r.target)

    def targets(self, sources: tuple, symbol: RankedSymbol) -> frozenset:
        self.query_log.append((sources, symbol))
        return frozenset(self._index.get((sources, symbol), ()))

    def is_accepting(self, state) -> bool:
        return state in self.automaton.accepting

    def state_universe(self) -> frozenset:
        return self.automaton.states


def difference_lazy(a: TreeAutomaton, oracle: RuleOracle) -> TreeAutomaton:
    """L(a) minus the oracle's language, querying only reachable tuples.

    Product states pair an `a` state with the subset of oracle states
    reachable on the same subtree; the oracle is consulted only for
    source tuples drawn from subsets that are paired with reachable `a`
    states, which is what makes on-demand construction cheap.
    """
    a_by = a.rules_by_symbol()
    discovered: set = set()
    rules: set = set()
    query_cache: dict = {}

    def oracle_targets(srcs: tuple, sym: RankedSymbol) -> frozenset:
        key = (srcs, sym)
        got = query_cache.get(key)
        if got is None:
            got = oracle.targets(srcs, sym)
            query_cache[key] = got
        return got

    def subset_target(sym: RankedSymbol, subset_srcs: tuple) -> frozenset:
        out: set = set()
        for combo in itertools.product(*subset_srcs) if subset_srcs else [()]:
            out |= oracle_targets(tuple(combo), sym)
        return frozenset(out)

    changed = True
    while changed:
        changed = False
        for sym in sorted(a.symbols, key=lambda s: s.clause_id):
            for ra in a_by.get(sym, ()):
                candidate_pairs = []
                ok = True
                for s in ra.sources:
                    options = [p for p in discovered if p[0] == s]
                    if not options:
                        ok = False
                        break
                    candidate_pairs.append(options)
                if not ok:
                    continue
                for pairs in itertools.product(*candidate_pairs) if candidate_pairs else [()]:
                    subset_srcs = tuple(p[1] for p in pairs)
                    tgt_subset = subset_target(sym, subset_srcs)
                    tgt = (ra.target, tgt_subset)
                    rule = Rule(tuple(pairs), sym, tgt)
                    if rule not in rules:
                        rules.add(rule)
                        changed = True
                    if tgt not in discovered:
                        discovered.add(tgt)
                        changed = True
    accepting = {p for p in discovered
                 if p[0] in a.accepting
                 and not any(oracle.is_accepting(q) for q in p[1])}
    return make_automaton(discovered, a.symbols, rules, accepting)


def _reachable(a: TreeAutomaton) -> TreeAutomaton:
    by_symbol = a.rules_by_symbol()
    reach: set = set()
    changed = True
    while changed:
        changed = False
        for r in a.rules:
            if r.target not in reach and all(s in reach for s in r.sources):
                reach.add(r.target)
                changed = True
    rules = {r for r in a.rules
             if r.target in reach and all(s in reach for s in r.sources)}
    return make_automaton(reach, a.symbols, rules, a.accepting & reach)


def _is_deterministic_complete(a: TreeAutomaton) -> bool:
    keys = {(r.sources, r.symbol) for r in a.rules}
    if len(keys) != len(a.rules):
        return False
    n = len(a.states)
    for sym in a.symbols:
        expected = n ** sym.rank
        got = sum(1 for k in keys if k[1] == sym)
        if got != expected:
            return False
    return True


def minimize_naive(a: TreeAutomaton, stats: Optional[dict] = None) -> TreeAutomaton:
    """Myhill-Nerode state merging by iterated splitting.

    Requires a deterministic complete automaton and determinizes the
    input otherwise (noted in `stats`).  If determinization makes the
    automaton larger than the input, the input is returned unchanged so
    the state count never increases.
    """
    original = a
    if not _is_deterministic_complete(a):
        if stats is not None:
            stats["determinized"] = stats.get("determinized", 0) + 1
        a = complete(determinize(a))
    a = _reachable_det(a)
    block: dict = {}
    for q in a.states:
        block[q] = 0 if q in a.accepting else 1
    while True:
        sigs: dict = {}
        for q in a.states:
            sigs[q] = []
        for r in a.rules:
            for i, s in enumerate(r.sources):
                ctx = (r.symbol, i,
                       tuple(block[x] for j, x in enumerate(r.sources) if j != i),
                       block[r.target])
                sigs[s].append(ctx)
        new_ids: dict = {}
        new_block: dict = {}
        for q in sorted(a.states, key=_state_key):
            key = (block[q], frozenset(sigs[q]))
            if key not in new_ids:
                new_ids[key] = len(new_ids)
            new_block[q] = new_ids[key]
        if len(set(new_block.values())) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    result = _quotient(a, block)
    if len(result.states) > len(original.states):
        if stats is not None:
            stats["kept_input"] = stats.get("kept_input", 0) + 1
        return original
    return result


def _reachable_det(a: TreeAutomaton) -> TreeAutomaton:
    """Reachability pruning that preserves completeness via the sink."""
    pruned = _reachable(a)
    if _is_deterministic_complete(pruned):
        return pruned
    return complete(pruned)


def minimize_bisim(a: TreeAutomaton) -> TreeAutomaton:
    """Quotient by the coarsest backward bisimulation (works on NTAs)."""
    a = _reachable(a)
    if not a.states:
        return a
    block: dict = {q: 0 for q in a.states}
    while True:
        incoming: dict = {q: [] for q in a.states}
        for r in a.rules:
            incoming[r.target].append(
                (r.symbol, tuple(block[s] for s in r.sources)))
        new_ids: dict = {}
        new_block: dict = {}
        for q in sorted(a.states, key=_state_key):
            key = (block[q], frozenset(incoming[q]))
            if key not in new_ids:
                new_ids[key] = len(new_ids)
            new_block[q] = new_ids[key]
        if len(set(new_block.values())) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    return _quotient(a, block)


def _quotient(a: TreeAutomaton, block: dict) -> TreeAutomaton:
    states = set(block.values())
    rules = {Rule(tuple(block[s] for s in r.sources), r.symbol, block[r.target])
             for r in a.rules}
    accepting = {block[q] for q in a.accepting}
    return make_automaton(states, a.symbols, rules, accepting)


def _state_key(s) -> str:
    if isinstance(s, str):
        return "s:" + s
    if isinstance(s, bool):
        return f"b:{s}"
    if isinstance(s, int):
        return f"i:{s:020d}"
    if isinstance(s, tuple):
        return "t(" + ",".join(_state_key(x) for x in s) + ")"
    if isinstance(s, frozenset):
        return "f{" + ",".join(sorted(_state_key(x) for x in s)) + "}"
    return "r:" + repr(s)


def dump(a: TreeAutomaton) -> str:
    """Stable textual form: one rule per line, accepting states starred."""
    ordered = sorted(a.states, key=_state_key)
    names = {s: f"q{i}" for i, s in enumerate(ordered)}
    header = "states: " + " ".join(
        ("*" if s in a.accepting else "") + names[s] for s in ordered)
    lines = []
    for r in a.rules:
        src = " ".join(names[s] for s in r.sources)
        sep = " " if src else ""
        lines.append(f"{src}{sep}-f{r.symbol.clause_id}-> {names[r.target]}")
    return header + "\n" + "\n".join(sorted(lines)) + ("\n" if lines else "\n")


def enumerate_trees(symbols: Iterable[RankedSymbol], max_height: int) -> list[Tree]:
    """Every tree over the alphabet with height <= max_height."""
    symbols = sorted(symbols, key=lambda s: (s.rank, s.clause_id))
    levels: list[list[Tree]] = []
    for h in range(1, max_height + 1):
        level: list[Tree] = []
        below = [t for lvl in levels for t in lvl]
        prev = levels[-1] if levels else []
        for sym in symbols:
            if sym.rank == 0:
                if h == 1:
                    level.append(Tree(sym))
                continue
            if h == 1:
                continue
            for combo in itertools.product(below, repeat=sym.rank):
                if max(c.height for c in combo) == h - 1:
                    level.append(Tree(sym, combo))
        levels.append(level)
    return [t for lvl in levels for t in lvl]


def language_upto(a: TreeAutomaton, max_height: int) -> frozenset:
    return frozenset(t for t in enumerate_trees(a.symbols, max_height)
                     if accepts(a, t))
