"""Trace-abstraction refinement loop for constrained Horn clause systems.

The solver represents all structurally well-formed derivations of false
as a tree automaton over the clause alphabet, then repeatedly samples a
minimal derivation, checks its feasibility with the SMT backend, and on
infeasibility subtracts a generalized automaton built from a tree
interpolant.  An empty language proves satisfiability; a feasible
derivation refutes the system.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import qe
from .automata import (
    RankedSymbol,
    Rule,
    RuleOracle,
    Tree,
    TreeAutomaton,
    accepts,
    difference,
    difference_lazy,
    is_empty,
    make_automaton,
    minimize_bisim,
    minimize_naive,
)
from .backend import (
    BackendError,
    InterpolationNode,
    InterpolationProblem,
    SolverHandle,
    SolverUnknown,
    TreeInterpolant,
    check_sat,
    check_validity,
    reset,
    tree_interpolants,
)
from .clauses import ChcSystem, HornClause, PredicateSymbol, validate_system
from .terms import (
    FALSE,
    Sort,
    Term,
    TRUE,
    Var,
    conj,
    substitute,
)


class EngineError(Exception):
    """Internal invariant violation (a bug, not an input problem)."""


FALSE_STATE_NAME = "<false>"


# ---------------------------------------------------------------------------
# Derivations


class DerivationNode:
    """One clause instance in a derivation of false."""

    __slots__ = ("node_id", "clause", "subst", "head_instance", "children")

    def __init__(self, node_id: int, clause: HornClause, subst: dict,
                 head_instance: tuple, children: tuple):
        self.node_id = node_id
        self.clause = clause
        self.subst = subst  # clause variable -> instance variable
        self.head_instance = head_instance
        self.children = children

    def constraint_instance(self) -> Term:
        return substitute(self.clause.constraint, self.subst)

    def postorder(self) -> list:
        out = []
        for c in self.children:
            out.extend(c.postorder())
        out.append(self)
        return out


class DerivationTree:
    """A resolution tree over the clauses with root false, fully instantiated."""

    def __init__(self, shape: Tree, system: ChcSystem):
        root_clause = system.clauses[shape.symbol.clause_id]
        if not root_clause.is_query:
            raise EngineError("derivation root must be a query clause")
        counter = [0]
        self.system = system
        self.shape = shape
        self.root = self._build(shape, system, (), counter)

    def _build(self, shape: Tree, system: ChcSystem, head_instance: tuple,
               counter: list) -> DerivationNode:
        clause = system.clauses[shape.symbol.clause_id]
        if len(shape.children) != clause.rank:
            raise EngineError(
                f"node for clause {clause.id} has {len(shape.children)} children, "
                f"expected {clause.rank}")
        node_id = counter[0]
        counter[0] += 1
        subst: dict = {}
        if clause.head is not None:
            if len(head_instance) != clause.head.symbol.arity:
                raise EngineError(f"arity mismatch at clause {clause.id}")
            for v, inst in zip(clause.head.arg_vars, head_instance):
                subst[v] = inst
        for v in sorted(clause.variables(), key=lambda v: v.name):
            if v not in subst:
                subst[v] = Var(f"~i{node_id}.{v.name.lstrip('~')}", v.sort)
        children = []
        for atom, child_shape in zip(clause.body_preds, shape.children):
            child_clause = self.system.clauses[child_shape.symbol.clause_id]
            if child_clause.head is None \
                    or child_clause.head.symbol != atom.symbol:
                raise EngineError(
                    f"child clause {child_clause.id} does not produce "
                    f"{atom.symbol.name}")
            child_head = tuple(subst[v] for v in atom.arg_vars)
            children.append(
                self._build(child_shape, system, child_head, counter))
        return DerivationNode(node_id, clause, subst, tuple(head_instance),
                              tuple(children))

    def nodes(self) -> list:
        return self.root.postorder()

    def witness_text(self) -> str:
        return repr(self.shape)


def build_initial_automaton(s: ChcSystem) -> TreeAutomaton:
    """States are the predicates plus an accepting false state; one rule
    per clause; the language is every structurally well-formed derivation
    of false (constraints ignored)."""
    states = {p.name for p in s.predicates} | {FALSE_STATE_NAME}
    symbols = {RankedSymbol(c.id, c.rank) for c in s.clauses}
    rules = set()
    for c in s.clauses:
        srcs = tuple(a.symbol.name for a in c.body_preds)
        tgt = c.head.symbol.name if c.head is not None else FALSE_STATE_NAME
        rules.add(Rule(srcs, RankedSymbol(c.id, c.rank), tgt))
    return make_automaton(states, symbols, rules, {FALSE_STATE_NAME})


def derivation_constraints(d: DerivationTree) -> InterpolationProblem:
    """Per-node instantiated clause constraints as an interpolation problem.

    Body-atom variables are identified with the child's head variables by
    construction, so the conjunction over all nodes is exactly the
    derivation's accumulated constraint.
    """

    def convert(n: DerivationNode) -> InterpolationNode:
        return InterpolationNode(
            n.node_id,
            n.constraint_instance(),
            n.head_instance,
            tuple(convert(c) for c in n.children),
        )

    return InterpolationProblem(convert(d.root))


@dataclass(frozen=True)
class Feasible:
    assignment: dict


@dataclass(frozen=True)
class Infeasible:
    pass


def check_feasibility(d: DerivationTree, handle: SolverHandle):
    """Satisfiability of the derivation's accumulated constraints."""
    problem = derivation_constraints(d)
    named = [(f"c{n.node_id}", n.formula) for n in problem.nodes()]
    verdict = check_sat(named, handle, want_model=True)
    if verdict.is_sat:
        return Feasible(verdict.model or {})
    if verdict.is_unsat:
        return Infeasible()
    raise SolverUnknown(verdict.reason)


# ---------------------------------------------------------------------------
# Generalization: the interpolant automaton


@dataclass(frozen=True)
class IState:
    """Interpolant automaton state: a formula over canonical parameters.

    `sig` is the predicate signature the formula belongs to; the constant
    true/false states carry no signature and fit every position.
    """

    sig: Optional[tuple]
    formula: Term

    def __repr__(self) -> str:
        return f"<{self.formula!r}>"


TRUE_STATE = IState(None, TRUE)
FALSE_STATE = IState(None, FALSE)


def canonical_params(sig: Sequence[Sort]) -> tuple:
    return tuple(Var(f"v{i}", s) for i, s in enumerate(sig))


def canonical_formula(formula: Term, instance_vars: Sequence[Var],
                      sig: Sequence[Sort]) -> Term:
    """Rewrite onto canonical parameters and normalize.

    Normalization folds constants, sorts conjuncts and eliminates
    quantifiers where the linear engine can; formulas outside the linear
    fragment are kept as written.
    """
    params = canonical_params(sig)
    mapping = dict(zip(instance_vars, params))
    term = substitute(formula, mapping)
    try:
        f = qe.eliminate(qe.translate(term))
        sorts = {v.name: v.sort for v in params}
        return qe.term_from_ir(f, sorts)
    except qe.Unsupported:
        return term


class InterpolantAutomaton:
    """Candidate-rule generator shared by eager and on-demand modes.

    A rule (phi_1 .. phi_n) --clause--> phi is admitted when
    phi_1 s_1 /\\ ... /\\ phi_n s_n /\\ C entails phi s_head, where the
    substitutions map canonical parameters to the clause's atom
    variables.  Rules coming from the sampled derivation itself are
    seeded as valid without a solver call.  Validity answers are cached;
    unknown answers drop the candidate (sound: the automaton only
    shrinks).
    """

    def __init__(self, system: ChcSystem, handle: SolverHandle,
                 states: list, seeded: set):
        self.system = system
        self.handle = handle
        self.states = states  # deterministic order: true, false, formulas
        self.cache: dict = {rule: True for rule in seeded}
        self.checks = 0
        self.dropped = 0

    def compatible(self, state: IState, sig: tuple) -> bool:
        return state.sig is None or state.sig == sig

    def sources_for(self, clause: HornClause) -> list[list[IState]]:
        out = []
        for atom in clause.body_preds:
            sig = atom.symbol.param_sorts
            out.append([st for st in self.states if self.compatible(st, sig)])
        return out

    def targets_for(self, clause: HornClause) -> list[IState]:
        if clause.head is None:
            return [FALSE_STATE]
        sig = clause.head.symbol.param_sorts
        return [st for st in self.states if self.compatible(st, sig)]

    def rule_valid(self, sources: tuple, clause: HornClause,
                   target: IState) -> bool:
        key = (sources, clause.id, target)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        result = self._check(sources, clause, target)
        self.cache[key] = result
        return result

    def _check(self, sources: tuple, clause: HornClause,
               target: IState) -> bool:
        if target is TRUE_STATE:
            return True
        if any(st.formula == FALSE for st in sources):
            return True
        premises = []
        for st, atom in zip(sources, clause.body_preds):
            premises.append(self._instantiate(st, atom.arg_vars))
        premises.append(clause.constraint)
        if clause.head is None or target is FALSE_STATE:
            conclusion = FALSE
        else:
            conclusion = self._instantiate(target, clause.head.arg_vars)
        self.checks += 1
        answer = check_validity(premises, conclusion, self.handle)
        if answer == "unknown":
            self.dropped += 1
            return False
        return answer == "valid"

    @staticmethod
    def _instantiate(state: IState, args: tuple) -> Term:
        if state.sig is None:
            return state.formula
        mapping = dict(zip(canonical_params(state.sig), args))
        return substitute(state.formula, mapping)


class InterpolantOracle(RuleOracle):
    """On-demand rule oracle over the interpolant states."""

    def __init__(self, gen: InterpolantAutomaton):
        self.gen = gen
        self.queries = 0

    def targets(self, sources: tuple, symbol: RankedSymbol) -> frozenset:
        self.queries += 1
        clause = self.gen.system.clauses[symbol.clause_id]
        out = set()
        for target in self.gen.targets_for(clause):
            if self.gen.rule_valid(sources, clause, target):
                out.add(target)
        return frozenset(out)

    def is_accepting(self, state) -> bool:
        return state == FALSE_STATE

    def state_universe(self) -> frozenset:
        return frozenset(self.gen.states)

    def materialized_rules(self) -> int:
        return sum(1 for v in self.gen.cache.values() if v)


def generalize(d: DerivationTree, interpolant: TreeInterpolant,
               s: ChcSystem, handle: SolverHandle,
               mode: str = "eager",
               stats_out: Optional[dict] = None
               ) -> Union[TreeAutomaton, InterpolantOracle]:
    """Automaton of infeasible derivations containing d (eager), or a
    rule oracle answering the same rules lazily (on_demand)."""
    node_state: dict = {}
    states: list = [TRUE_STATE, FALSE_STATE]
    formulas = dict(interpolant.formulas)
    for n in d.nodes():
        formula = formulas[n.node_id]
        if n.clause.head is None:
            st = FALSE_STATE
        else:
            sig = n.clause.head.symbol.param_sorts
            canon = canonical_formula(formula, n.head_instance, sig)
            if canon == TRUE:
                st = TRUE_STATE
            elif canon == FALSE:
                st = FALSE_STATE
            else:
                st = IState(sig, canon)
        node_state[n.node_id] = st
        if st not in states:
            states.append(st)
    seeded = set()
    for n in d.nodes():
        sources = tuple(node_state[c.node_id] for c in n.children)
        seeded.add((sources, n.clause.id, node_state[n.node_id]))
    gen = InterpolantAutomaton(s, handle, states, seeded)
    if stats_out is not None:
        stats_out["generator"] = gen
    if mode == "on_demand":
        return InterpolantOracle(gen)
    result = _materialize(gen, d, node_state)
    if stats_out is not None:
        stats_out["candidates_checked"] = gen.checks
    return result


def _materialize(gen: InterpolantAutomaton, d: DerivationTree,
                 node_state: dict) -> TreeAutomaton:
    symbols = {RankedSymbol(c.id, c.rank) for c in gen.system.clauses}
    rules = set()
    for n in d.nodes():
        sources = tuple(node_state[c.node_id] for c in n.children)
        rules.add(Rule(sources, RankedSymbol(n.clause.id, n.clause.rank),
                       node_state[n.node_id]))
    index = {st: i for i, st in enumerate(gen.states)}
    for clause in gen.system.clauses:
        source_options = gen.sources_for(clause)
        target_options = gen.targets_for(clause)
        ordered_sources = [sorted(opts, key=index.get) for opts in source_options]
        for combo in itertools.product(*ordered_sources) if ordered_sources else [()]:
            for target in sorted(target_options, key=index.get):
                if gen.rule_valid(tuple(combo), clause, target):
                    rules.add(Rule(tuple(combo),
                                   RankedSymbol(clause.id, clause.rank), target))
    states = set(gen.states)
    return make_automaton(states, symbols, rules, {FALSE_STATE})


# ---------------------------------------------------------------------------
# Outcome, statistics, main loop


@dataclass
class IterationStats:
    iteration: int
    automaton_states: int
    automaton_rules: int
    generalized_states: int
    generalized_rules: int
    smt_queries: int
    smt_time_ms: int
    candidates_checked: int
    witness_height: int

    def kv_line(self) -> str:
        return " ".join(f"{k}={v}" for k, v in vars(self).items())


@dataclass
class SolveStats:
    iterations: list = field(default_factory=list)
    total_queries: int = 0
    total_time_ms: int = 0
    peak_states: int = 0
    candidate_checks: int = 0
    witness_log: list = field(default_factory=list)

    def add(self, it: IterationStats) -> None:
        self.iterations.append(it)
        self.peak_states = max(self.peak_states, it.automaton_states)
        self.candidate_checks += it.candidates_checked

    def kv_text(self) -> str:
        lines = [it.kv_line() for it in self.iterations]
        lines.append(f"total iterations={len(self.iterations)} "
                     f"smt_queries={self.total_queries} "
                     f"wall_ms={self.total_time_ms} "
                     f"peak_states={self.peak_states} "
                     f"candidate_checks={self.candidate_checks}")
        return "\n".join(lines)

    CSV_HEADER = ("iteration,automaton_states,automaton_rules,"
                  "generalized_states,generalized_rules,smt_queries,"
                  "smt_time_ms,candidates_checked,witness_height")

    def csv_text(self) -> str:
        rows = [self.CSV_HEADER]
        for it in self.iterations:
            rows.append(",".join(str(v) for v in vars(it).values()))
        return "\n".join(rows)


@dataclass
class SolveOutcome:
    status: str  # sat | unsat | unknown
    model: Optional[dict] = None  # PredicateSymbol -> Term over canonical params
    witness: Optional[DerivationTree] = None
    assignment: Optional[dict] = None
    reason: str = ""
    iterations: int = 0
    stats: SolveStats = field(default_factory=SolveStats)


@dataclass
class SolveConfig:
    solver_command: Optional[object] = None
    interpolation: str = "external"  # external | subtree
    minimize: str = "bisim"  # none | naive | bisim
    on_demand: bool = True
    max_iterations: int = 1000
    timeout: float = 60.0  # overall wall clock, seconds
    query_timeout: float = 10.0
    seed: int = 0
    extract_model: bool = True
    fresh_solver_per_iteration: bool = False
    model_state_cap: int = 20000


def refine_loop(s: ChcSystem, config: Optional[SolveConfig] = None) -> SolveOutcome:
    """Run the refinement scheme to a verdict.

    Unsat witnesses are re-verified with a fresh solver process before
    being reported; sat outcomes attempt a verified predicate model.
    Budget exhaustion or solver unknowns give an unknown outcome.
    """
    config = config or SolveConfig()
    problems = validate_system(s)
    if problems:
        raise ValueError("; ".join(map(str, problems)))
    handle = SolverHandle(config.solver_command, timeout=config.query_timeout,
                          seed=config.seed)
    stats = SolveStats()
    started = time.monotonic()
    automaton = build_initial_automaton(s)
    seen_witnesses: set = set()
    history: list[InterpolantOracle] = []
    iteration = 0
    try:
        while True:
            if iteration >= config.max_iterations:
                return _unknown(f"iteration budget ({config.max_iterations}) exhausted",
                                iteration, stats, handle, started)
            if config.timeout and time.monotonic() - started > config.timeout:
                return _unknown("wall-clock budget exhausted", iteration, stats,
                                handle, started)
            witness_tree = is_empty(automaton)
            if witness_tree is None:
                model = None
                if config.extract_model:
                    try:
                        model = extract_model(history, s, handle,
                                              config.model_state_cap)
                    except (SolverUnknown, BackendError):
                        model = None
                _finish(stats, handle, started)
                return SolveOutcome("sat", model=model, iterations=iteration,
                                    stats=stats)
            key = (witness_tree.preorder_ids(),)
            if key in seen_witnesses:
                raise EngineError(
                    f"progress violation: derivation sampled twice: {witness_tree}")
            seen_witnesses.add(key)
            stats.witness_log.append(witness_tree.preorder_ids())
            if config.fresh_solver_per_iteration and iteration > 0:
                reset(handle)
            d = DerivationTree(witness_tree, s)
            queries_before = handle.stats.queries
            time_before = handle.stats.wall_time
            try:
                feasibility = check_feasibility(d, handle)
                if isinstance(feasibility, Feasible):
                    assignment = _reverify_witness(d, config)
                    if assignment is None:
                        return _unknown("witness failed re-verification",
                                        iteration, stats, handle, started)
                    _finish(stats, handle, started)
                    return SolveOutcome("unsat", witness=d,
                                        assignment=assignment,
                                        iterations=iteration + 1, stats=stats)
                problem = derivation_constraints(d)
                interpolant = tree_interpolants(problem, handle,
                                                mode=config.interpolation)
                mode = "on_demand" if config.on_demand else "eager"
                gen_stats: dict = {}
                generalized = generalize(d, interpolant, s, handle, mode,
                                         stats_out=gen_stats)
                if isinstance(generalized, InterpolantOracle):
                    automaton = difference_lazy(automaton, generalized)
                    g_states = len(generalized.state_universe())
                    g_rules = generalized.materialized_rules()
                    candidates = generalized.gen.checks
                    history.append(generalized)
                else:
                    automaton = difference(automaton, generalized)
                    g_states, g_rules = generalized.stats()
                    candidates = gen_stats.get("candidates_checked", 0)
                    history.append(InterpolantOracle(gen_stats["generator"]))
                if accepts(automaton, witness_tree):
                    raise EngineError("progress violation: witness survived "
                                      "the difference")
                if config.minimize == "bisim":
                    automaton = minimize_bisim(automaton)
                elif config.minimize == "naive":
                    automaton = minimize_naive(automaton)
            except SolverUnknown as e:
                return _unknown(f"solver unknown: {e.reason}", iteration, stats,
                                handle, started)
            except BackendError as e:
                return _unknown(f"backend failure: {e}", iteration, stats,
                                handle, started)
            a_states, a_rules = automaton.stats()
            stats.add(IterationStats(
                iteration=iteration + 1,
                automaton_states=a_states,
                automaton_rules=a_rules,
                generalized_states=g_states,
                generalized_rules=g_rules,
                smt_queries=handle.stats.queries - queries_before,
                smt_time_ms=int((handle.stats.wall_time - time_before) * 1000),
                candidates_checked=candidates,
                witness_height=witness_tree.height,
            ))
            iteration += 1
    finally:
        handle.close()


def _reverify_witness(d: DerivationTree, config: SolveConfig) -> Optional[dict]:
    """Check the witness again with a brand new solver process."""
    fresh = SolverHandle(config.solver_command, timeout=config.query_timeout,
                         seed=config.seed)
    try:
        outcome = check_feasibility(d, fresh)
        if isinstance(outcome, Feasible):
            return outcome.assignment
        return None
    except (SolverUnknown, BackendError):
        return None
    finally:
        fresh.close()


def _unknown(reason: str, iteration: int, stats: SolveStats,
             handle: SolverHandle, started: float) -> SolveOutcome:
    _finish(stats, handle, started)
    return SolveOutcome("unknown", reason=reason, iterations=iteration,
                        stats=stats)


def _finish(stats: SolveStats, handle: SolverHandle, started: float) -> None:
    stats.total_queries = handle.stats.queries
    stats.total_time_ms = int((time.monotonic() - started) * 1000)


# ---------------------------------------------------------------------------
# Model extraction (satisfiability certificate)


def extract_model(history: list, s: ChcSystem, handle: SolverHandle,
                  state_cap: int = 20000) -> Optional[dict]:
    """Best-effort predicate model from the interpolant automata history.

    Rebuilds the joint reachable product of the initial automaton with
    the determinized view of each subtracted automaton; each predicate is
    interpreted as the disjunction, over its reachable product states, of
    the conjunction of the interpolant formulas co-reachable with it.
    The candidate is returned only if every clause verifies.
    """
    initial = build_initial_automaton(s)
    k = len(history)
    discovered: set = set()
    by_symbol = initial.rules_by_symbol()
    changed = True
    while changed:
        changed = False
        for sym in sorted(initial.symbols, key=lambda x: x.clause_id):
            for rule in by_symbol.get(sym, ()):
                opts = []
                ok = True
                for src in rule.sources:
                    cands = [p for p in discovered if p[0] == src]
                    if not cands:
                        ok = False
                        break
                    opts.append(cands)
                if not ok:
                    continue
                for combo in itertools.product(*opts) if opts else [()]:
                    subsets = []
                    for idx in range(k):
                        srcs_k = tuple(p[1][idx] for p in combo)
                        subsets.append(_det_targets(history[idx], srcs_k, sym))
                    tgt = (rule.target, tuple(subsets))
                    if tgt not in discovered:
                        discovered.add(tgt)
                        changed = True
                        if len(discovered) > state_cap:
                            return None
    by_pred: dict = {}
    for state in discovered:
        name, subsets = state
        if name == FALSE_STATE_NAME:
            continue
        by_pred.setdefault(name, []).append(subsets)
    model: dict = {}
    from .terms import disj as term_disj
    for p in sorted(s.predicates, key=lambda p: p.name):
        tuples = by_pred.get(p.name, [])
        disjuncts = []
        for subsets in sorted(tuples, key=repr):
            parts = []
            for subset in subsets:
                for st in sorted(subset, key=repr):
                    parts.append(st.formula)
            disjuncts.append(conj(*parts))
        model[p] = term_disj(*disjuncts)
    if not _verify_model(model, s, handle):
        return None
    return model


def _det_targets(oracle: InterpolantOracle, source_subsets: tuple,
                 sym: RankedSymbol) -> frozenset:
    out: set = set()
    for combo in itertools.product(*source_subsets) if source_subsets else [()]:
        out |= oracle.targets(tuple(combo), sym)
    return frozenset(out)


def _verify_model(model: dict, s: ChcSystem, handle: SolverHandle) -> bool:
    for clause in s.clauses:
        premises = []
        for atom in clause.body_preds:
            interp = model[atom.symbol]
            mapping = dict(zip(canonical_params(atom.symbol.param_sorts),
                               atom.arg_vars))
            premises.append(substitute(interp, mapping))
        premises.append(clause.constraint)
        if clause.head is None:
            conclusion = FALSE
        else:
            interp = model[clause.head.symbol]
            mapping = dict(zip(canonical_params(clause.head.symbol.param_sorts),
                               clause.head.arg_vars))
            conclusion = substitute(interp, mapping)
        if check_validity(premises, conclusion, handle) != "valid":
            return False
    return True
