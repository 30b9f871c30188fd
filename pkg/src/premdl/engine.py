"""Single-executor bottom-up evaluation with min/max constraints.

The constraint stores enforce the half functional dependency by
representation: a :class:`KeyedRelation` keeps exactly one cost per
group-by key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

from .core import (
    MAX,
    MIN,
    Arithmetic,
    Atom,
    Comparison,
    Const,
    Guard,
    IsMin,
    Program,
    RelationStore,
    Rule,
    ValidationError,
    Var,
    checked_add,
    validate_program,
)

DEFAULT_ITERATION_CAP = 10**6

INSERTED = "inserted"
IMPROVED = "improved"

Tuple = tuple[int, ...]


class IterationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Constraint:
    predicate: str
    kind: str
    groupby_positions: tuple[int, ...]
    cost_position: int

    def __post_init__(self) -> None:
        if self.kind not in (MIN, MAX):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.cost_position in self.groupby_positions:
            raise ValueError("cost position overlaps the group-by positions")
        if len(set(self.groupby_positions)) != len(self.groupby_positions):
            raise ValueError("duplicate group-by position")

    @classmethod
    def on(cls, predicate: str, kind: str, cost_position: int, arity: int) -> Constraint:
        """Constraint grouping by every position except ``cost_position``."""
        groupby = tuple(p for p in range(arity) if p != cost_position)
        return cls(predicate, kind, groupby, cost_position)

    def covers(self, arity: int) -> bool:
        return sorted((*self.groupby_positions, self.cost_position)) == list(range(arity))

    def key(self, t: Tuple) -> Tuple:
        return tuple(t[p] for p in self.groupby_positions)

    def better(self, a: int, b: int) -> bool:
        """True when cost ``a`` is strictly better than ``b``."""
        return a < b if self.kind == MIN else a > b

    def best(self, a: int, b: int) -> int:
        return min(a, b) if self.kind == MIN else max(a, b)

    def __str__(self) -> str:
        return (
            f"{self.kind}[{self.predicate}: group-by {list(self.groupby_positions)}, "
            f"cost {self.cost_position}]"
        )


class KeyedRelation:
    """Group-by key -> best cost, for constraints covering the full arity."""

    __slots__ = ("constraint", "costs", "_split")

    def __init__(self, constraint: Constraint, costs: dict[Tuple, int] | None = None):
        self.constraint = constraint
        self.costs: dict[Tuple, int] = dict(costs or {})
        self._split = constraint.cost_position

    def tuple_of(self, key: Tuple, cost: int) -> Tuple:
        c = self._split
        return (*key[:c], cost, *key[c:])

    def offer(self, t: Tuple) -> tuple[str, int | None] | None:
        """Insert or improve; returns (change, old cost) or None when dominated."""
        c = self._split
        key = t[:c] + t[c + 1 :]
        cost = t[c]
        old = self.costs.get(key)
        if old is None:
            self.costs[key] = cost
            return INSERTED, None
        if self.constraint.better(cost, old):
            self.costs[key] = cost
            return IMPROVED, old
        return None

    def get(self, key: Tuple) -> int | None:
        return self.costs.get(key)

    def copy(self) -> KeyedRelation:
        return KeyedRelation(self.constraint, self.costs)

    def __iter__(self) -> Iterator[Tuple]:
        c = self._split
        for key, cost in self.costs.items():
            yield (*key[:c], cost, *key[c:])

    def __len__(self) -> int:
        return len(self.costs)

    def __contains__(self, t: object) -> bool:
        if not isinstance(t, tuple):
            return False
        c = self._split
        return self.costs.get(t[:c] + t[c + 1 :]) == t[c]

    def __repr__(self) -> str:
        return f"KeyedRelation({self.constraint.predicate}, {len(self)} keys)"


Relation = Union[set, KeyedRelation]


def new_relation(constraint: Constraint | None, arity: int) -> Relation:
    if constraint is not None and constraint.covers(arity):
        return KeyedRelation(constraint)
    return set()


def reduce_tuples(constraint: Constraint, tuples: Iterable[Tuple]) -> set[Tuple]:
    """Keep, per group-by key, every tuple carrying the best cost."""
    best: dict[Tuple, int] = {}
    items = list(tuples)
    cp = constraint.cost_position
    for t in items:
        k = constraint.key(t)
        old = best.get(k)
        best[k] = t[cp] if old is None else constraint.best(old, t[cp])
    return {t for t in items if best[constraint.key(t)] == t[cp]}


class Interpretation:
    """Per-predicate fact store; constrained predicates use a KeyedRelation."""

    def __init__(self, relations: Mapping[str, Relation] | None = None):
        self.relations: dict[str, Relation] = dict(relations or {})

    def relation(self, predicate: str) -> Relation:
        return self.relations.get(predicate, set())

    def tuples(self, predicate: str) -> frozenset[Tuple]:
        return frozenset(self.relation(predicate))

    def snapshot(self) -> dict[str, frozenset[Tuple]]:
        return {p: frozenset(r) for p, r in sorted(self.relations.items()) if len(r)}

    def copy(self) -> Interpretation:
        return Interpretation(
            {p: (r.copy() if isinstance(r, KeyedRelation) else set(r)) for p, r in self.relations.items()}
        )

    @property
    def predicates(self) -> list[str]:
        return sorted(self.relations)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interpretation):
            return NotImplemented
        return self.snapshot() == other.snapshot()

    def __len__(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def __repr__(self) -> str:
        sizes = ", ".join(f"{p}: {len(r)}" for p, r in sorted(self.relations.items()))
        return f"Interpretation({sizes})"


@dataclass
class DeltaEntry:
    tuple: Tuple
    change: str
    old_cost: int | None = None


@dataclass
class Delta:
    iteration: int
    entries: list[DeltaEntry] = field(default_factory=list)


@dataclass
class FixpointResult:
    interpretation: Interpretation
    iterations: int
    derivations_total: int = 0
    derivations_discarded: int = 0
    deltas: list[Delta] = field(default_factory=list)


# ------------------------------------------------------------- join machinery


class TupleSource:
    """A tuple collection with lazily built hash indexes."""

    __slots__ = ("tuples", "_indexes", "_best")

    def __init__(self, tuples: Iterable[Tuple]):
        self.tuples = tuples if isinstance(tuples, list) else list(tuples)
        self._indexes: dict[tuple[int, ...], dict[Tuple, list[Tuple]]] = {}
        self._best: dict[tuple, dict[Tuple, int]] = {}

    def index(self, positions: tuple[int, ...]) -> dict[Tuple, list[Tuple]]:
        idx = self._indexes.get(positions)
        if idx is None:
            idx = {}
            for t in self.tuples:
                idx.setdefault(tuple(t[p] for p in positions), []).append(t)
            self._indexes[positions] = idx
        return idx

    def best(self, key_positions: tuple[int, ...], cost_position: int, kind: str) -> dict[Tuple, int]:
        sig = (key_positions, cost_position, kind)
        best = self._best.get(sig)
        if best is None:
            best = {}
            pick = min if kind == MIN else max
            for t in self.tuples:
                k = tuple(t[p] for p in key_positions)
                old = best.get(k)
                best[k] = t[cost_position] if old is None else pick(old, t[cost_position])
            self._best[sig] = best
        return best

    def __len__(self) -> int:
        return len(self.tuples)


EMPTY = TupleSource([])


class Stats:
    __slots__ = ("steps", "derived")

    def __init__(self) -> None:
        self.steps = 0
        self.derived = 0


GuardHash = Callable[[Tuple], int]


class CompiledRule:
    """Left-to-right join plan; filters and assignments run as soon as their inputs are bound."""

    def __init__(self, rule: Rule):
        self.rule = rule
        self.atoms: list[Atom] = rule.body_atoms
        slots: dict[Var, int] = {}

        def slot(v: Var) -> int:
            if v not in slots:
                slots[v] = len(slots)
            return slots[v]

        bound: set[Var] = set()
        pending = [g for g in rule.body if not isinstance(g, Atom)]
        # per atom: (lookup positions, lookup sources, bind list, post-bind equality checks)
        self.steps: list[tuple] = []
        self.goal_stages: list[list[tuple]] = []

        def place_ready() -> list[tuple]:
            stage = []
            progress = True
            while progress:
                progress = False
                for g in list(pending):
                    op = self._compile_goal(g, bound, slot)
                    if op is not None:
                        stage.append(op)
                        pending.remove(g)
                        progress = True
            return stage

        self.goal_stages.append(place_ready())
        for atom in self.atoms:
            lookup_pos, lookup_src, binds, checks = [], [], [], []
            newly: dict[Var, int] = {}
            for pos, term in enumerate(atom.args):
                if isinstance(term, Const):
                    lookup_pos.append(pos)
                    lookup_src.append(("c", term.value))
                elif term in bound:
                    lookup_pos.append(pos)
                    lookup_src.append(("v", slot(term)))
                elif term in newly:
                    checks.append((pos, newly[term]))
                else:
                    newly[term] = pos
                    binds.append((pos, slot(term)))
            for v in newly:
                bound.add(v)
            self.steps.append((tuple(lookup_pos), tuple(lookup_src), tuple(binds), tuple(checks)))
            self.goal_stages.append(place_ready())
        if pending:
            raise ValidationError(f"goals never become evaluable in rule: {rule.format()}")
        agg_head = []
        for term in rule.head.args:
            if isinstance(term, Const):
                agg_head.append(("c", term.value))
            else:
                agg_head.append(("v", slots[term]))
        self.head = tuple(agg_head)
        self.nslots = len(slots)
        self.has_guard = any(isinstance(g, Guard) for g in rule.body)
        self.ismin_atoms = self._ismin_atoms()

    def _ismin_atoms(self) -> dict[int, tuple[int, tuple[int, ...], int]]:
        out = {}
        for g in self.rule.body:
            if isinstance(g, IsMin):
                for k, atom in enumerate(self.atoms):
                    if g.cost in atom.args and all(v in atom.args for v in g.key):
                        key_pos = tuple(atom.args.index(v) for v in g.key)
                        out[id(g)] = (k, key_pos, atom.args.index(g.cost))
                        break
                else:
                    raise ValidationError(
                        f"{g} needs one body atom binding its key and cost: {self.rule.format()}"
                    )
        return out

    def _compile_goal(self, g, bound: set[Var], slot) -> tuple | None:
        def ref(t):
            return ("c", t.value) if isinstance(t, Const) else ("v", slot(t))

        def ok(t) -> bool:
            return isinstance(t, Const) or t in bound

        if isinstance(g, Arithmetic):
            if all(ok(o) for o in g.operands):
                operands = tuple(ref(o) for o in g.operands)
                if g.target in bound:
                    return ("sum_eq", slot(g.target), operands)
                bound.add(g.target)
                return ("sum_set", slot(g.target), operands)
            return None
        if isinstance(g, Comparison):
            if ok(g.left) and ok(g.right):
                return ("cmp", g.op, ref(g.left), ref(g.right))
            if g.op == "=":
                if ok(g.left) and isinstance(g.right, Var):
                    bound.add(g.right)
                    return ("set", slot(g.right), ref(g.left))
                if ok(g.right) and isinstance(g.left, Var):
                    bound.add(g.left)
                    return ("set", slot(g.left), ref(g.right))
            return None
        if isinstance(g, Guard):
            if all(ok(a) for a in g.args):
                return ("guard", tuple(ref(a) for a in g.args), g.worker)
            return None
        if isinstance(g, IsMin):
            if all(ok(v) for v in (*g.key, g.cost)):
                return ("ismin", g, tuple(slot(v) for v in g.key), slot(g.cost))
            return None
        raise TypeError(g)

    def fire(
        self,
        sources: Sequence[TupleSource],
        *,
        guard_hash: GuardHash | None = None,
        full_sources: Sequence[TupleSource] | None = None,
        stats: Stats | None = None,
    ) -> list[Tuple]:
        """All head tuples derivable with body atom ``k`` read from ``sources[k]``."""
        if self.has_guard and guard_hash is None:
            raise ValidationError(f"rule has a partition guard but no partition function: {self.rule.format()}")
        full_sources = full_sources or sources
        env: list = [None] * self.nslots
        out: list[Tuple] = []
        steps = self.steps
        stages = self.goal_stages
        head = self.head
        natoms = len(steps)
        counter = [0]

        def val(r):
            return r[1] if r[0] == "c" else env[r[1]]

        def run_goals(stage) -> bool:
            for op in stage:
                kind = op[0]
                if kind == "sum_set" or kind == "sum_eq":
                    total = 0
                    for r in op[2]:
                        total = checked_add(total, val(r))
                    if kind == "sum_set":
                        env[op[1]] = total
                    elif env[op[1]] != total:
                        return False
                elif kind == "cmp":
                    a, b = val(op[2]), val(op[3])
                    if op[1] == "<":
                        if not a < b:
                            return False
                    elif op[1] == "<=":
                        if not a <= b:
                            return False
                    elif a != b:
                        return False
                elif kind == "set":
                    env[op[1]] = val(op[2])
                elif kind == "guard":
                    if guard_hash(tuple(val(r) for r in op[1])) != op[2]:
                        return False
                else:
                    g = op[1]
                    k, key_pos, cost_pos = self.ismin_atoms[id(g)]
                    best = full_sources[k].best(key_pos, cost_pos, g.kind)
                    if best.get(tuple(env[s] for s in op[2])) != env[op[3]]:
                        return False
            return True

        def step(k: int) -> None:
            if k == natoms:
                out.append(tuple(val(r) for r in head))
                return
            lookup_pos, lookup_src, binds, checks = steps[k]
            src = sources[k]
            if lookup_pos:
                key = tuple(val(r) for r in lookup_src)
                candidates = src.index(lookup_pos).get(key, ())
            else:
                candidates = src.tuples
            stage = stages[k + 1]
            for t in candidates:
                counter[0] += 1
                for pos, s in binds:
                    env[s] = t[pos]
                if checks and any(t[pos] != env[s] for pos, s in checks):
                    continue
                if stage and not run_goals(stage):
                    continue
                step(k + 1)

        if run_goals(stages[0]):
            step(0)
        if stats is not None:
            stats.steps += counter[0] + 1
            stats.derived += len(out)
        return out


_COMPILED: dict[int, tuple[Rule, CompiledRule]] = {}


def compile_rule(rule: Rule) -> CompiledRule:
    hit = _COMPILED.get(id(rule))
    if hit is not None and hit[0] is rule:
        return hit[1]
    compiled = CompiledRule(rule)
    _COMPILED[id(rule)] = (rule, compiled)
    return compiled


# --------------------------------------------------------- constraint plumbing


def constraints_for(program: Program, gamma: Constraint | None = None) -> dict[str, Constraint]:
    arities = program.arities()
    out: dict[str, Constraint] = {}
    for pred in sorted(program.idb_predicates):
        agg = program.aggregate_of(pred)
        if agg is not None:
            out[pred] = Constraint(pred, agg.kind, agg.groupby_positions, agg.cost_position)
    if gamma is not None:
        if gamma.predicate not in arities:
            raise ValidationError(f"constraint predicate {gamma.predicate!r} not in program")
        out[gamma.predicate] = gamma
    return out


def apply_candidates(
    store: Relation, candidates: list[Tuple], constraint: Constraint | None
) -> tuple[Relation, list[DeltaEntry]]:
    """Merge candidate tuples into ``store``; returns the (possibly new) store and its changes."""
    if isinstance(store, KeyedRelation):
        best: dict[Tuple, Tuple] = {}
        c = constraint
        assert c is not None
        cp = c.cost_position
        for t in candidates:
            k = c.key(t)
            old = best.get(k)
            if old is None or c.better(t[cp], old[cp]):
                best[k] = t
        changes = []
        for t in best.values():
            res = store.offer(t)
            if res is not None:
                changes.append(DeltaEntry(t, res[0], res[1]))
        return store, changes
    if constraint is None:
        changes = []
        for t in candidates:
            if t not in store:
                store.add(t)
                changes.append(DeltaEntry(t, INSERTED))
        return store, changes
    merged = reduce_tuples(constraint, list(store) + candidates)
    changes = [DeltaEntry(t, INSERTED) for t in merged - store]
    return merged, changes


def apply_constraint(gamma: Constraint, interp: Interpretation) -> Interpretation:
    """γ(I): keep only the best cost per group-by key of ``gamma.predicate``."""
    out = interp.copy()
    rel = interp.relation(gamma.predicate)
    tuples = list(rel)
    arity = len(tuples[0]) if tuples else None
    if arity is not None and gamma.covers(arity):
        keyed = KeyedRelation(gamma)
        apply_candidates(keyed, tuples, gamma)
        out.relations[gamma.predicate] = keyed
    elif isinstance(rel, KeyedRelation) and rel.constraint == gamma:
        out.relations[gamma.predicate] = rel.copy()
    else:
        out.relations[gamma.predicate] = reduce_tuples(gamma, tuples)
    return out


def _db_sources(
    edb: RelationStore | None, interp: Interpretation, extra: Mapping[str, Relation] | None = None
) -> dict[str, TupleSource]:
    srcs: dict[str, TupleSource] = {}
    if edb is not None:
        for pred in edb.predicates:
            srcs[pred] = TupleSource(list(edb.relation(pred)))
    for pred, rel in (extra or {}).items():
        srcs[pred] = TupleSource(list(rel))
    for pred, rel in interp.relations.items():
        srcs[pred] = TupleSource(list(rel))
    return srcs


def immediate_consequence(
    program: Program,
    interp: Interpretation,
    edb: RelationStore | None = None,
    *,
    include_input: bool = True,
    guard_hash: GuardHash | None = None,
) -> Interpretation:
    """One application of T to ``interp`` (joined with ``edb``), without constraints.

    Returns T(I) ∪ I by default; ``include_input=False`` gives the bare T(I).
    """
    srcs = _db_sources(edb, interp)
    out: dict[str, set[Tuple]] = {}
    if include_input:
        for pred in program.idb_predicates:
            out[pred] = set(interp.relation(pred))
    for rule in program.rules:
        cr = compile_rule(rule)
        sources = [srcs.get(a.predicate, EMPTY) for a in cr.atoms]
        out.setdefault(rule.head.predicate, set()).update(cr.fire(sources, guard_hash=guard_hash))
    return Interpretation(out)


# ----------------------------------------------------------- fixpoint drivers


def _check_program(program: Program) -> list[tuple[str, ...]]:
    return validate_program(program).strata


def _stratum_rules(program: Program, stratum: tuple[str, ...]) -> list[Rule]:
    members = set(stratum)
    return [r for r in program.rules if r.head.predicate in members]


def _full_sources(
    base: dict[str, TupleSource], stores: dict[str, Relation]
) -> dict[str, TupleSource]:
    srcs = dict(base)
    for pred, rel in stores.items():
        srcs[pred] = TupleSource(list(rel))
    return srcs


def differential_sources(
    full: Sequence[TupleSource],
    old: Sequence[TupleSource],
    atoms: Sequence[Atom],
    recursive: set[str] | frozenset[str],
    v: int,
    delta: list[Tuple],
) -> list[TupleSource]:
    """Sources for the v-th differential rule: Δ at v, the previous state before v, current after.

    Every combination containing at least one new fact is then enumerated once.
    """
    srcs = list(full)
    for k in range(v):
        if atoms[k].predicate in recursive:
            srcs[k] = old[k]
    srcs[v] = TupleSource(delta)
    return srcs


def _run_fixpoint(
    program: Program,
    edb: RelationStore | None,
    gamma: Constraint | None,
    iteration_cap: int,
    seminaive: bool,
    record_deltas: bool,
    on_iteration: Callable[[str | None, int, Interpretation], None] | None,
    guard_hash: GuardHash | None,
) -> FixpointResult:
    strata = _check_program(program)
    constraints = constraints_for(program, gamma)
    arities = program.arities()
    base: dict[str, TupleSource] = {}
    if edb is not None:
        for pred in edb.predicates:
            base[pred] = TupleSource(list(edb.relation(pred)))
    result = Interpretation()
    iterations = 0
    total = discarded = 0
    deltas: list[Delta] = []

    for stratum in strata:
        members = set(stratum)
        rules = _stratum_rules(program, stratum)
        compiled = [compile_rule(r) for r in rules]
        stores: dict[str, Relation] = {
            p: new_relation(constraints.get(p), arities[p]) for p in stratum
        }
        delta_tuples: dict[str, list[Tuple]] = {}
        prev_full: dict[str, TupleSource] = {}
        local_iter = 0
        while True:
            local_iter += 1
            iterations += 1
            if local_iter > iteration_cap:
                raise IterationCapExceeded(
                    f"no fixpoint for stratum {list(stratum)} within {iteration_cap} iterations"
                )
            full = _full_sources(base, stores)
            candidates: dict[str, list[Tuple]] = {p: [] for p in stratum}
            for cr in compiled:
                head = cr.rule.head.predicate
                full_srcs = [full.get(a.predicate, EMPTY) for a in cr.atoms]
                if not seminaive or local_iter == 1:
                    candidates[head].extend(cr.fire(full_srcs, guard_hash=guard_hash))
                    continue
                old_srcs = [prev_full.get(a.predicate, EMPTY) for a in cr.atoms]
                for v, atom in enumerate(cr.atoms):
                    if atom.predicate not in members:
                        continue
                    d = delta_tuples.get(atom.predicate)
                    if not d:
                        continue
                    srcs = differential_sources(full_srcs, old_srcs, cr.atoms, members, v, d)
                    candidates[head].extend(
                        cr.fire(srcs, guard_hash=guard_hash, full_sources=full_srcs)
                    )
            delta = Delta(iterations)
            new_delta: dict[str, list[Tuple]] = {}
            for pred in stratum:
                cands = candidates[pred]
                total += len(cands)
                stores[pred], changes = apply_candidates(stores[pred], cands, constraints.get(pred))
                discarded += len(cands) - len(changes)
                if changes:
                    new_delta[pred] = [e.tuple for e in changes]
                    if record_deltas:
                        delta.entries.extend(changes)
            if record_deltas:
                deltas.append(delta)
            if on_iteration is not None:
                snap = Interpretation({**result.relations, **stores})
                on_iteration(stratum[0], local_iter, snap)
            if not new_delta:
                break
            delta_tuples = new_delta
            prev_full = full
        for pred in stratum:
            result.relations[pred] = stores[pred]
            base[pred] = TupleSource(list(stores[pred]))
    return FixpointResult(result, iterations, total, discarded, deltas)


def naive_fixpoint(
    program: Program,
    edb: RelationStore | None,
    gamma: Constraint | None = None,
    iteration_cap: int = DEFAULT_ITERATION_CAP,
    *,
    on_iteration: Callable[[str | None, int, Interpretation], None] | None = None,
    guard_hash: GuardHash | None = None,
) -> FixpointResult:
    """Iterate I <- γ(T(I) ∪ I) from the empty interpretation, stratum by stratum."""
    return _run_fixpoint(
        program, edb, gamma, iteration_cap, False, False, on_iteration, guard_hash
    )


def seminaive_fixpoint(
    program: Program,
    edb: RelationStore | None,
    gamma: Constraint | None = None,
    iteration_cap: int = DEFAULT_ITERATION_CAP,
    *,
    record_deltas: bool = False,
    on_iteration: Callable[[str | None, int, Interpretation], None] | None = None,
    guard_hash: GuardHash | None = None,
) -> FixpointResult:
    """Differential evaluation: each recursive body atom in turn reads the last delta.

    Under a constraint a derivation is discarded unless it inserts a new key
    or strictly improves the stored cost; equal-cost rederivations are dropped.
    """
    return _run_fixpoint(
        program, edb, gamma, iteration_cap, True, record_deltas, on_iteration, guard_hash
    )


def stratified_eval(
    program: Program,
    edb: RelationStore | None,
    iteration_cap: int = DEFAULT_ITERATION_CAP,
) -> Interpretation:
    """Oracle evaluation for programs whose aggregates sit above the recursion."""
    report = validate_program(program)
    for clique in report.cliques:
        if not clique.recursive:
            continue
        for pred in clique.predicates:
            if program.aggregate_of(pred) is not None:
                raise ValidationError(
                    f"stratified_eval needs aggregate-free recursion, but {pred!r} has a pushed aggregate"
                )
    return naive_fixpoint(program, edb, None, iteration_cap).interpretation


def is_gamma_cover(cover: Mapping[Tuple, int], covered: Mapping[Tuple, int], kind: str) -> bool:
    """Every key of ``covered`` exists in ``cover`` with an equal-or-better cost."""
    for key, cost in covered.items():
        c = cover.get(key)
        if c is None:
            return False
        if (c > cost) if kind == MIN else (c < cost):
            return False
    return True


def keyed_view(rel: Relation, constraint: Constraint) -> dict[Tuple, int]:
    if isinstance(rel, KeyedRelation):
        return dict(rel.costs)
    out: dict[Tuple, int] = {}
    cp = constraint.cost_position
    for t in rel:
        k = constraint.key(t)
        out[k] = t[cp] if k not in out else constraint.best(out[k], t[cp])
    return out
