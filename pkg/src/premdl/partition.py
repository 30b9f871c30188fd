"""Hash partitioning over discriminating sets and the parallel plan rewrites."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping

from .core import (
    Atom,
    Const,
    Guard,
    Program,
    RelationStore,
    Rule,
    ValidationError,
    Var,
    validate_program,
)
from .prem import DiscriminatingSet

MIRROR_SUFFIX = "__m1"

Tuple = tuple[int, ...]


class PlanError(ValidationError):
    pass


class GuardUnbindableError(PlanError):
    pass


def stable_hash(values: Tuple, seed: int = 0) -> int:
    """Seeded 64-bit BLAKE2b over the little-endian int64 encoding of ``values``."""
    data = b"".join(v.to_bytes(8, "little", signed=True) for v in values)
    key = (seed % 2**64).to_bytes(8, "little")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8, key=key).digest(), "little")


@dataclass(frozen=True)
class PartitionFn:
    """Maps a projection onto the discriminating positions to a worker in [0, W).

    ``assignment`` pins explicit projections to workers (used to lay out
    small hand-made graphs); everything else is hashed.
    """

    discriminating: DiscriminatingSet
    worker_count: int
    seed: int = 0
    assignment: Mapping[Tuple, int] | None = field(default=None, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")
        for w in (self.assignment or {}).values():
            if not 0 <= w < self.worker_count:
                raise ValueError(f"assignment names worker {w} outside [0, {self.worker_count})")

    def worker_of(self, values: Tuple) -> int:
        if self.worker_count == 1:
            return 0
        if self.assignment is not None:
            w = self.assignment.get(values)
            if w is not None:
                return w
        return stable_hash(values, self.seed) % self.worker_count

    __call__ = worker_of


def partition_tuple(f: PartitionFn, tup: Tuple, positions: tuple[int, ...] | None = None) -> int:
    positions = positions or f.discriminating.positions
    return f.worker_of(tuple(tup[p] for p in positions))


@dataclass
class PlanShard:
    worker_id: int
    program: Program
    edb_shard: RelationStore
    replicated_edb: RelationStore
    partition: PartitionFn
    positions: dict[str, tuple[int, ...]]

    @property
    def edb(self) -> RelationStore:
        return self.edb_shard.union(self.replicated_edb)

    def owner(self, predicate: str, tup: Tuple) -> int:
        return partition_tuple(self.partition, tup, self.positions[predicate])


def shard_edb(
    store: RelationStore,
    f: PartitionFn,
    positions: Mapping[str, tuple[int, ...]] | None = None,
) -> list[RelationStore]:
    """Split every relation of ``store`` into W pairwise-disjoint shards."""
    shards = [RelationStore() for _ in range(f.worker_count)]
    for pred in store.predicates:
        pos = (positions or {}).get(pred, f.discriminating.positions)
        for shard in shards:
            shard._rel.setdefault(pred, set())
        for t in store.relation(pred):
            shards[partition_tuple(f, t, pos)]._rel[pred].add(t)
    return shards


def idb_positions(
    program: Program,
    f: PartitionFn,
    overrides: Mapping[str, tuple[int, ...]] | None = None,
) -> dict[str, tuple[int, ...]]:
    report = validate_program(program)
    mirrors = {m: s for c in report.cliques for m, s in c.mirrors.items()}
    overrides = dict(overrides or {})
    out: dict[str, tuple[int, ...]] = {}
    for pred in sorted(program.idb_predicates):
        if pred in overrides:
            out[pred] = tuple(overrides[pred])
        elif pred == f.discriminating.predicate:
            out[pred] = f.discriminating.positions
        else:
            out[pred] = (0,)
    for m, s in mirrors.items():
        if m not in overrides:
            out[m] = out[s]
    return out


def rewrite_lockfree(
    program: Program,
    f: PartitionFn,
    edb: RelationStore | None = None,
    positions: Mapping[str, tuple[int, ...]] | None = None,
) -> list[PlanShard]:
    """Guard every IDB rule with ``h(discriminating head args) = i``, one shard per worker.

    Non-mirror IDB body atoms must carry the same discriminating arguments as
    the head so that each worker reads only its own partition; mirror
    predicates (``p__m1``) are the units exchanged between workers.
    """
    report = validate_program(program)
    mirrors = {m for c in report.cliques for m in c.mirrors}
    pos = idb_positions(program, f, positions)
    arities = program.arities()
    for pred, p in pos.items():
        if max(p) >= arities[pred]:
            raise PlanError(f"discriminating positions {p} exceed arity of {pred!r}")

    guard_args: list[tuple] = []
    for rule in program.rules:
        if rule.guards:
            raise PlanError(f"rule is already partitioned: {rule.format()}")
        head_args = tuple(rule.head.args[p] for p in pos[rule.head.predicate])
        atom_vars = {v for a in rule.body_atoms for v in a.variables()}
        for t in head_args:
            if isinstance(t, Var) and t not in atom_vars:
                raise GuardUnbindableError(
                    f"discriminating head variable {t} is not bound by a body atom, "
                    f"so the plan is not decomposable: {rule.format()}"
                )
        for atom in rule.body_atoms:
            if atom.predicate in pos and atom.predicate not in mirrors:
                args = tuple(atom.args[p] for p in pos[atom.predicate])
                if args != head_args:
                    raise PlanError(
                        f"atom {atom} reads another worker's partition of {atom.predicate!r}; "
                        f"rewrite the clique into decomposable form first: {rule.format()}"
                    )
        guard_args.append(head_args)

    edb_pos = _edb_positions(program, guard_args, pos)
    edb = edb if edb is not None else RelationStore()
    sharded = RelationStore({p: edb.relation(p) for p in edb.predicates if p in edb_pos})
    replicated = RelationStore({p: edb.relation(p) for p in edb.predicates if p not in edb_pos})
    pieces = shard_edb(sharded, f, edb_pos)

    shards = []
    for i in range(f.worker_count):
        rules = tuple(
            Rule(r.head, r.head_aggregate, (*r.body, Guard(args, i)), r.line)
            for r, args in zip(program.rules, guard_args)
        )
        shards.append(
            PlanShard(i, Program(rules, program.prem_pushed), pieces[i], replicated, f, dict(pos))
        )
    return shards


def _edb_positions(
    program: Program, guard_args: list[tuple], pos: Mapping[str, tuple[int, ...]]
) -> dict[str, tuple[int, ...]]:
    """EDB predicates every use of which is aligned with the rule's guard."""
    found: dict[str, tuple[int, ...] | None] = {}
    for rule, gargs in zip(program.rules, guard_args):
        for atom in rule.body_atoms:
            if atom.predicate in pos:
                continue
            cand: tuple[int, ...] | None = None
            if all(isinstance(t, Var) and t in atom.args for t in gargs):
                cand = tuple(atom.args.index(t) for t in gargs)
            prev = found.get(atom.predicate, cand)
            found[atom.predicate] = cand if prev == cand else None
    return {p: v for p, v in found.items() if v is not None}


def mirror_name(predicate: str) -> str:
    return predicate + MIRROR_SUFFIX


def rewrite_decomposable_nonlinear(program: Program) -> Program:
    """Replace all but the first clique atom of each non-linear body by a mirror copy.

    Adds ``p__m1(args) <- p(args).`` (keeping p's aggregate) after the
    clique's last rule.
    """
    report = validate_program(program)
    new_mirrors: dict[str, str] = {}
    out: list[Rule] = []
    touched = False
    for clique in report.cliques:
        if not clique.recursive or clique.linear:
            continue
        members = set(clique.predicates) - set(clique.mirrors)
        for rule in program.rules:
            if rule.head.predicate not in members:
                continue
            if sum(1 for a in rule.body_atoms if a.predicate in members) > 1:
                touched = True
    if not touched:
        raise PlanError("no non-linear recursive rule to rewrite (the clique is already linear)")

    last_index: dict[str, int] = {}
    for k, rule in enumerate(program.rules):
        last_index[report.clique_of(rule.head.predicate).predicates[0]] = k

    pending_copies: dict[int, list[Rule]] = {}
    for rule in program.rules:
        clique = report.clique_of(rule.head.predicate)
        members = set(clique.predicates) - set(clique.mirrors)
        body = []
        seen_first = False
        for goal in rule.body:
            if isinstance(goal, Atom) and clique.recursive and goal.predicate in members:
                if seen_first:
                    m = mirror_name(goal.predicate)
                    new_mirrors[m] = goal.predicate
                    goal = Atom(m, goal.args)
                seen_first = True
            body.append(goal)
        out.append(Rule(rule.head, rule.head_aggregate, tuple(body), rule.line))

    for m, src in sorted(new_mirrors.items()):
        if m in program.idb_predicates:
            raise PlanError(f"mirror predicate {m!r} already exists")
        k = last_index[report.clique_of(src).predicates[0]]
        pending_copies.setdefault(k, []).append(_copy_rule(program, src, m))

    rules: list[Rule] = []
    for k, rule in enumerate(out):
        rules.append(rule)
        rules.extend(pending_copies.get(k, ()))
    pushed = program.prem_pushed | {m for m, s in new_mirrors.items() if s in program.prem_pushed}
    return Program(tuple(rules), frozenset(pushed))


def _copy_rule(program: Program, src: str, mirror: str) -> Rule:
    first = program.rules_for(src)[0]
    args = first.head.args
    if not all(isinstance(a, Var) for a in args) or len(set(args)) != len(args):
        args = tuple(Var(f"A{k}") for k in range(len(args)))
    agg = program.aggregate_of(src)
    return Rule(Atom(mirror, args), agg, (Atom(src, args),))


def strip_guards(program: Program) -> Program:
    rules = tuple(
        Rule(r.head, r.head_aggregate, tuple(g for g in r.body if not isinstance(g, Guard)), r.line)
        for r in program.rules
    )
    return Program(rules, program.prem_pushed)


__all__ = [
    "Const",
    "GuardUnbindableError",
    "MIRROR_SUFFIX",
    "PartitionFn",
    "PlanError",
    "PlanShard",
    "mirror_name",
    "partition_tuple",
    "rewrite_decomposable_nonlinear",
    "rewrite_lockfree",
    "shard_edb",
    "stable_hash",
    "strip_guards",
]
