"""Pre-mappability checks and the constraint push-down rewrite."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .core import (
    AggregateHead,
    Atom,
    IsMin,
    Program,
    RelationStore,
    Rule,
    ValidationError,
    Var,
    validate_program,
)
from .engine import (
    DEFAULT_ITERATION_CAP,
    Constraint,
    Interpretation,
    IterationCapExceeded,
    KeyedRelation,
    apply_constraint,
    immediate_consequence,
    reduce_tuples,
)


@dataclass(frozen=True)
class DiscriminatingSet:
    predicate: str
    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.positions:
            raise ValueError("a discriminating set needs at least one position")
        if len(set(self.positions)) != len(self.positions) or min(self.positions) < 0:
            raise ValueError(f"bad discriminating positions {self.positions}")


@dataclass
class PremReport:
    constraint: Constraint
    holds: bool
    iterations_checked: int
    counterexample: tuple[dict[str, frozenset], tuple] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        assert self.holds == (self.counterexample is None)


def _gamma_set(gamma: Constraint, interp: Interpretation) -> frozenset:
    return frozenset(reduce_tuples(gamma, interp.relation(gamma.predicate)))


def _equation_witness(
    program: Program, gamma: Constraint, interp: Interpretation, edb: RelationStore
) -> tuple | None:
    """First tuple on which γ(T(I)) and γ(T(γ(I))) disagree, or None."""
    lhs = _gamma_set(gamma, immediate_consequence(program, interp, edb, include_input=False))
    # Only γ's predicate changes, so share the other relations.
    reduced = Interpretation({**interp.relations, gamma.predicate: _gamma_set(gamma, interp)})
    rhs = _gamma_set(gamma, immediate_consequence(program, reduced, edb, include_input=False))
    if lhs == rhs:
        return None
    return min(lhs ^ rhs)


PROBE_KEYS = 8


def _probe(
    rng: random.Random, gamma: Constraint, keys: list[tuple], costs: range, base: Interpretation
) -> Interpretation:
    # Small probes: a violation needs only a handful of tuples, and extra
    # tuples tend to mask it.
    cp = gamma.cost_position
    tuples = set()
    for key in rng.sample(keys, min(len(keys), rng.randint(1, PROBE_KEYS))):
        for _ in range(rng.randint(1, 2)):
            cost = rng.choice(costs)
            t = list(key)
            t.insert(cp, cost)
            tuples.add(tuple(t))
    out = base.copy()
    out.relations[gamma.predicate] = tuples
    return out


def check_prem_on_trace(
    program: Program,
    gamma: Constraint,
    edb: RelationStore,
    iteration_cap: int = DEFAULT_ITERATION_CAP,
    *,
    probes: int = 16,
    seed: int = 0,
) -> PremReport:
    """Check γ(T(I)) = γ(T(γ(I))) along the constrained naive fixpoint on ``edb``.

    At every iteration the equation is tested on the unreduced one-step image
    J = T(I) ∪ I of the current iterate and on ``probes`` random
    interpretations drawn from J's keys and cost range.  Passing is evidence
    for this EDB only, never a proof.
    """
    rng = random.Random(seed)
    current = Interpretation()
    iterations = 0
    recursive = gamma.predicate in {
        p for c in validate_program(program).cliques if c.recursive for p in c.predicates
    }
    if not recursive:
        # T never reads the constrained predicate when deriving it.
        return PremReport(gamma, True, 1)
    while True:
        iterations += 1
        if iterations > iteration_cap:
            raise IterationCapExceeded(f"PreM trace did not converge within {iteration_cap} iterations")
        expanded = immediate_consequence(program, current, edb)
        candidates = [expanded]
        rel = list(expanded.relation(gamma.predicate))
        if recursive and rel and probes:
            keys = sorted({tuple(t[p] for p in range(len(t)) if p != gamma.cost_position) for t in rel})
            cost_values = [t[gamma.cost_position] for t in rel]
            costs = range(min(cost_values), max(cost_values) + 1)
            candidates.extend(_probe(rng, gamma, keys, costs, expanded) for _ in range(probes))
        for interp in candidates:
            witness = _equation_witness(program, gamma, interp, edb)
            if witness is not None:
                return PremReport(gamma, False, iterations, (interp.snapshot(), witness))
        nxt = apply_constraint(gamma, expanded)
        if nxt == current:
            return PremReport(gamma, True, iterations)
        current = nxt


def check_half_fd(store: Interpretation | set | KeyedRelation, gamma: Constraint) -> bool:
    """True iff no two tuples share a group-by key with different costs."""
    rel = store.relation(gamma.predicate) if isinstance(store, Interpretation) else store
    if isinstance(rel, KeyedRelation):
        return True
    seen: dict[tuple, int] = {}
    cp = gamma.cost_position
    for t in rel:
        k = gamma.key(t)
        if seen.setdefault(k, t[cp]) != t[cp]:
            return False
    return True


def satisfying_tuples(tuples, gamma: Constraint) -> set:
    """Tuples satisfying the half-FD ``group-by ⇀ cost`` over ``tuples``."""
    return reduce_tuples(gamma, tuples)


def push_constraint(program: Program, gamma: Constraint) -> Program:
    """Move a stratified aggregate into the recursion that feeds it.

    ``q(G, min<D>) <- p(G, D).`` above a recursive clique defining ``p``
    becomes a plain copy, and every rule of ``p`` gains the aggregate.
    Purely syntactic: soundness is the caller's (or the checker's) business.
    """
    report = validate_program(program)
    matches = [
        r
        for r in program.rules
        if r.head.predicate == gamma.predicate
        and r.head_aggregate is not None
        and r.head_aggregate.kind == gamma.kind
        and r.head_aggregate.cost_position == gamma.cost_position
    ]
    if not matches:
        raise ValidationError(f"no stratified aggregate rule matches {gamma}")
    sources = set()
    for r in matches:
        atoms = r.body_atoms
        if len(atoms) != 1 or atoms[0].args != r.head.args:
            raise ValidationError(f"aggregate rule is not a plain copy of one predicate: {r.format()}")
        sources.add(atoms[0].predicate)
    cliques = {report.clique_of(s).predicates for s in sources}
    if len(cliques) != 1:
        raise ValidationError("aggregate ranges over more than one recursive clique")
    (src,) = sources
    clique = report.clique_of(src)
    if not clique.recursive:
        raise ValidationError(f"{src!r} is not recursive; nothing to push into")
    agg = AggregateHead(gamma.kind, gamma.cost_position, tuple(gamma.groupby_positions))
    rules = []
    for r in program.rules:
        if r in matches:
            rules.append(Rule(r.head, None, r.body, r.line))
        elif r.head.predicate == src:
            rules.append(Rule(r.head, agg, r.body, r.line))
        else:
            rules.append(r)
    return Program(tuple(rules), program.prem_pushed | {src})


def inject_is_min(program: Program, gamma: Constraint) -> Program:
    """Add an ``is_min``/``is_max`` goal after every body occurrence of γ's predicate."""
    rules = []
    for r in program.rules:
        body = []
        for goal in r.body:
            body.append(goal)
            if isinstance(goal, Atom) and goal.predicate == gamma.predicate:
                cost = goal.args[gamma.cost_position]
                key = [goal.args[p] for p in gamma.groupby_positions]
                if isinstance(cost, Var) and all(isinstance(k, Var) for k in key):
                    body.append(IsMin(gamma.kind, tuple(key), cost))
        rules.append(Rule(r.head, r.head_aggregate, tuple(body), r.line))
    return Program(tuple(rules), program.prem_pushed)


def check_partition_precondition(gamma: Constraint, s: DiscriminatingSet) -> bool:
    """Partitioning on ``s`` keeps each group-by key on one worker iff S ⊆ group-by."""
    if gamma.predicate != s.predicate:
        raise ValueError(
            f"constraint is on {gamma.predicate!r} but the discriminating set is on {s.predicate!r}"
        )
    return set(s.positions) <= set(gamma.groupby_positions)
