"""Deterministic multi-worker execution of partitioned plans (sequential, BSP, SSP).

Everything runs on one thread under a discrete-event scheduler with a
virtual clock.  A worker's round is: absorb delivered peer updates, run up
to ``local_cap`` semi-naive iterations, send one condensed update.  BSP is
the same loop with ``slack=0`` and ``local_cap=1``.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .core import Program, RelationStore, ValidationError, is_copy_rule, validate_program
from .engine import (
    DEFAULT_ITERATION_CAP,
    EMPTY,
    Constraint,
    Interpretation,
    IterationCapExceeded,
    KeyedRelation,
    Relation,
    Stats,
    TupleSource,
    apply_candidates,
    compile_rule,
    constraints_for,
    differential_sources,
    is_gamma_cover,
    keyed_view,
    new_relation,
    seminaive_fixpoint,
)
from .partition import PlanShard, strip_guards
from .prem import DiscriminatingSet, check_partition_precondition

Tuple = tuple[int, ...]

SEQ, BSP, SSP = "seq", "bsp", "ssp"
MODES = (SEQ, BSP, SSP)
RUNNING, FINISHED = "running", "finished"
CONTINUE, TERMINATE = "continue", "terminate"


class InvariantViolation(AssertionError):
    pass


class DeadlockError(InvariantViolation):
    pass


class PreconditionError(ValidationError):
    pass


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class StragglerConfig:
    """Poisson-arriving slowdown episodes; ``duration`` is the length of one episode."""

    rate: float
    slowdown: float = 2.0
    duration: float = 1.0

    def __post_init__(self) -> None:
        if self.rate < 0 or self.slowdown < 1 or self.duration < 0:
            raise ValueError("straggler rate and duration must be >= 0 and slowdown >= 1")


@dataclass(frozen=True)
class RunConfig:
    mode: str = SSP
    slack: int = 3
    local_cap: int = 4
    workers: int | None = None
    rng_seed: int = 0
    straggler: StragglerConfig | None = None
    virtual_time: bool = True
    verify: bool = True
    record_snapshots: bool = False
    trace: bool = False
    unit_cost: float = 1e-3
    latency: float = 5e-3
    per_tuple_cost: float = 1e-5
    iteration_cap: int = DEFAULT_ITERATION_CAP

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.slack < 0 or self.local_cap < 1:
            raise ValueError("slack must be >= 0 and local_cap >= 1")
        if not self.virtual_time:
            raise ValueError("only virtual-time execution is implemented")

    @property
    def effective_slack(self) -> int:
        return 0 if self.mode == BSP else self.slack

    @property
    def effective_cap(self) -> int:
        return 1 if self.mode == BSP else self.local_cap

    def to_dict(self) -> dict:
        d = asdict(self)
        d["effective_slack"] = self.effective_slack
        d["effective_local_cap"] = self.effective_cap
        return d


# ------------------------------------------------------------- stragglers


class StragglerSchedule:
    """Lazily sampled, merged slowdown intervals for one worker."""

    def __init__(self, cfg: StragglerConfig | None, seed: int, worker: int):
        self.cfg = cfg
        self.episodes: list[tuple[float, float]] = []
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, worker]))
        self._next = self._gap() if self.active else float("inf")

    @property
    def active(self) -> bool:
        return self.cfg is not None and self.cfg.rate > 0

    def _gap(self) -> float:
        return float(self._rng.exponential(1.0 / self.cfg.rate))

    def extend(self, horizon: float) -> None:
        while self._next <= horizon:
            start, end = self._next, self._next + self.cfg.duration
            if self.episodes and start <= self.episodes[-1][1]:
                s0, e0 = self.episodes[-1]
                self.episodes[-1] = (s0, max(e0, end))
            else:
                self.episodes.append((start, end))
            self._next += self._gap()

    def elapsed(self, start: float, work: float) -> float:
        """Virtual time needed to do ``work`` seconds of full-speed compute from ``start``."""
        if not self.active or self.cfg.slowdown == 1 or work <= 0:
            return work
        slow = self.cfg.slowdown
        t, left = start, work
        k = 0
        while True:
            self.extend(t + left * slow + self.cfg.duration)
            while k < len(self.episodes) and self.episodes[k][1] <= t:
                k += 1
            if k < len(self.episodes) and self.episodes[k][0] <= t:
                end = self.episodes[k][1]
                if t + left * slow <= end:
                    return t + left * slow - start
                left -= (end - t) / slow
                t = end
            else:
                nxt = self.episodes[k][0] if k < len(self.episodes) else float("inf")
                if t + left <= nxt:
                    return t + left - start
                left -= nxt - t
                t = nxt


def inject_stragglers(cfg: RunConfig, horizon: float, workers: int | None = None) -> list[list[tuple[float, float]]]:
    """Per-worker merged slowdown intervals starting before ``horizon``."""
    n = workers if workers is not None else (cfg.workers or 1)
    out = []
    for w in range(n):
        sched = StragglerSchedule(cfg.straggler, cfg.rng_seed, w)
        if sched.active:
            sched.extend(horizon)
        out.append([e for e in sched.episodes if e[0] < horizon])
    return out


# ----------------------------------------------------------------- messages


@dataclass(frozen=True)
class VersionedUpdate:
    sender: int
    round: int
    payload: tuple[tuple[str, tuple[Tuple, ...]], ...]
    idle: bool = False

    @property
    def size(self) -> int:
        return sum(len(ts) for _, ts in self.payload)


@dataclass
class RoundOutcome:
    payload: tuple[tuple[str, tuple[Tuple, ...]], ...]
    steps: int
    iterations: int
    changed: bool
    absorbed: int


# ------------------------------------------------------------ worker state


class WorkerState:
    """One worker's shard, local interpretation and protocol bookkeeping."""

    def __init__(
        self,
        shard: PlanShard,
        constraints: Mapping[str, Constraint],
        peers: Sequence[int],
    ):
        self.shard = shard
        self.worker_id = shard.worker_id
        self.program = shard.program
        self.report = validate_program(self.program)
        self.constraints = dict(constraints)
        self.arities = self.program.arities()
        self.guard_hash = shard.partition.worker_of
        edb = shard.edb
        self.base: dict[str, TupleSource] = {
            p: TupleSource(sorted(edb.relation(p))) for p in edb.predicates
        }
        self.stores: dict[str, Relation] = {}
        self.peers = list(peers)
        self.r = 0
        self.last_round = {j: 0 for j in self.peers}
        self.peer_idle = {j: False for j in self.peers}
        self.inbox: deque[VersionedUpdate] = deque()
        self.status = RUNNING
        self.derivations_total = 0
        self.derivations_discarded = 0
        self._phase: tuple[str, ...] | None = None

    # -- strata

    def eval_local(self, stratum: tuple[str, ...]) -> int:
        """Single pass over a non-recursive stratum; returns join steps."""
        stats = Stats()
        rules = [r for r in self.program.rules if r.head.predicate in stratum]
        full = self._sources()
        for pred in stratum:
            self.stores[pred] = new_relation(self.constraints.get(pred), self.arities[pred])
        cands: dict[str, list[Tuple]] = {p: [] for p in stratum}
        for rule in rules:
            cr = compile_rule(rule)
            srcs = [full.get(a.predicate, EMPTY) for a in cr.atoms]
            cands[rule.head.predicate].extend(cr.fire(srcs, guard_hash=self.guard_hash, stats=stats))
        for pred in stratum:
            self._merge(pred, cands[pred])
        return stats.steps

    def begin_phase(self, stratum: tuple[str, ...]) -> None:
        clique = self.report.clique_of(stratum[0])
        self._phase = stratum
        self.mirrors = dict(clique.mirrors)
        self.members = [p for p in stratum if p not in self.mirrors]
        self.mirror_of: dict[str, list[str]] = {}
        for m, src in sorted(self.mirrors.items()):
            self.mirror_of.setdefault(src, []).append(m)
        rules = []
        for r in self.program.rules:
            if r.head.predicate not in stratum:
                continue
            if r.head.predicate in self.mirrors:
                if not is_copy_rule(r):
                    raise PreconditionError(f"mirror predicate is defined by a non-copy rule: {r.format()}")
                continue
            rules.append(r)
        self.compiled = [compile_rule(r) for r in rules]
        for pred in self.members:
            self.stores[pred] = new_relation(self.constraints.get(pred), self.arities[pred])
        self.views = {
            m: new_relation(self.constraints.get(m), self.arities[m]) for m in self.mirrors
        }
        self.delta: dict[str, list[Tuple]] = {}
        self.dirty: dict[str, dict] = {src: {} for src in self.mirror_of}
        self.first = True
        self.prev_full: dict[str, TupleSource] = {}
        self.r = 0
        self.last_round = {j: 0 for j in self.peers}
        self.peer_idle = {j: False for j in self.peers}
        self.status = RUNNING

    def _sources(self) -> dict[str, TupleSource]:
        srcs = dict(self.base)
        for pred, rel in self.stores.items():
            srcs[pred] = TupleSource(list(rel))
        for m, rel in getattr(self, "views", {}).items():
            srcs[m] = TupleSource(list(rel))
        return srcs

    def _merge(self, pred: str, cands: list[Tuple]) -> list[Tuple]:
        self.derivations_total += len(cands)
        self.stores[pred], changes = apply_candidates(self.stores[pred], cands, self.constraints.get(pred))
        self.derivations_discarded += len(cands) - len(changes)
        return [e.tuple for e in changes]

    # -- one round

    def absorb(self) -> tuple[int, int]:
        """Apply every delivered update; returns (tuples that changed the view, tuples read)."""
        changed = read = 0
        while self.inbox:
            upd = self.inbox.popleft()
            for src, tuples in upd.payload:
                read += len(tuples)
                for t in tuples:
                    owner = self.shard.owner(src, t)
                    if owner != upd.sender or owner == self.worker_id:
                        raise InvariantViolation(
                            f"worker {self.worker_id} received {src}{t} from worker {upd.sender}, "
                            f"but the key belongs to worker {owner}"
                        )
                for m in self.mirror_of.get(src, ()):
                    self.views[m], changes = apply_candidates(
                        self.views[m], list(tuples), self.constraints.get(m)
                    )
                    if changes:
                        changed += len(changes)
                        self.delta.setdefault(m, []).extend(e.tuple for e in changes)
        return changed, read

    def has_delta(self) -> bool:
        return self.first or any(self.delta.values())

    def iterate(self) -> tuple[int, bool]:
        """One semi-naive iteration of the current phase; returns (join steps, changed)."""
        stats = Stats()
        full = self._sources()
        recursive = set(self._phase)
        cands: dict[str, list[Tuple]] = {p: [] for p in self.members}
        for cr in self.compiled:
            head = cr.rule.head.predicate
            full_srcs = [full.get(a.predicate, EMPTY) for a in cr.atoms]
            if self.first:
                cands[head].extend(cr.fire(full_srcs, guard_hash=self.guard_hash, stats=stats))
                continue
            old_srcs = [self.prev_full.get(a.predicate, EMPTY) for a in cr.atoms]
            for v, atom in enumerate(cr.atoms):
                d = self.delta.get(atom.predicate)
                if not d:
                    continue
                srcs = differential_sources(full_srcs, old_srcs, cr.atoms, recursive, v, d)
                cands[head].extend(
                    cr.fire(srcs, guard_hash=self.guard_hash, full_sources=full_srcs, stats=stats)
                )
        self.first = False
        self.prev_full = full
        new_delta: dict[str, list[Tuple]] = {}
        for pred in self.members:
            changes = self._merge(pred, cands[pred])
            if not changes:
                continue
            new_delta[pred] = changes
            if pred in self.dirty:
                dirty = self.dirty[pred]
                c = self.constraints.get(pred)
                keyed = isinstance(self.stores[pred], KeyedRelation)
                for t in changes:
                    dirty[c.key(t) if keyed else t] = t
            for m in self.mirror_of.get(pred, ()):
                self.views[m], mchanges = apply_candidates(self.views[m], list(changes), self.constraints.get(m))
                if mchanges:
                    new_delta.setdefault(m, []).extend(e.tuple for e in mchanges)
        self.delta = new_delta
        return stats.steps, bool(new_delta)

    def take_payload(self) -> tuple[tuple[str, tuple[Tuple, ...]], ...]:
        """Net changes to exchanged predicates since the last send, one tuple per key."""
        out = []
        for src in sorted(self.dirty):
            d = self.dirty[src]
            store = self.stores[src]
            tuples = tuple(sorted(t for t in d.values() if t in store))
            self.dirty[src] = {}
            if tuples:
                out.append((src, tuples))
        return tuple(out)

    def stale_peers(self, slack: int) -> list[int]:
        return [j for j in self.peers if not self.peer_idle[j] and self.r - self.last_round[j] > slack]

    def pending_payload(self) -> bool:
        return any(u.size for u in self.inbox)

    # -- views

    def export(self) -> dict[str, set[Tuple]]:
        """This worker's own facts; mirrors hold copies of the own partition only."""
        out = {p: set(rel) for p, rel in self.stores.items()}
        for rules_head in self.program.idb_predicates - set(self.stores):
            out[rules_head] = set()
        for clique in self.report.cliques:
            for m, src in clique.mirrors.items():
                rel = new_relation(self.constraints.get(m), self.arities[m])
                rel, _ = apply_candidates(rel, list(self.stores.get(src, ())), self.constraints.get(m))
                out[m] = set(rel)
        return out

    def snapshot(self) -> dict[str, object]:
        snap: dict[str, object] = {}
        for pred in self.members:
            rel = self.stores[pred]
            c = self.constraints.get(pred)
            snap[pred] = keyed_view(rel, c) if c is not None else frozenset(rel)
        return snap


def worker_local_round(state: WorkerState, local_cap: int) -> RoundOutcome:
    """Absorb delivered updates, iterate to local fixpoint or ``local_cap``, condense the changes."""
    if state.status != RUNNING:
        raise InvariantViolation(f"worker {state.worker_id} computes while {state.status}")
    absorbed, read = state.absorb()
    steps = read
    iterations = 0
    changed = False
    if state.has_delta():
        while iterations < local_cap:
            s, changed = state.iterate()
            steps += s
            iterations += 1
            if not changed:
                break
    return RoundOutcome(state.take_payload(), steps, iterations, changed, absorbed)


def coordinator_step(statuses: Sequence[str], in_flight: int) -> str:
    if all(s == FINISHED for s in statuses) and in_flight == 0:
        return TERMINATE
    return CONTINUE


# ------------------------------------------------------------------ results


@dataclass
class WorkerMetrics:
    id: int
    compute_time: float = 0.0
    wait_time: float = 0.0
    rounds: int = 0
    updates_sent: int = 0
    tuples_sent: int = 0
    derivations_total: int = 0
    derivations_discarded: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compute_time"] = round(self.compute_time, 9)
        d["wait_time"] = round(self.wait_time, 9)
        return d


@dataclass
class RunResult:
    interpretation: Interpretation
    per_worker: list[WorkerMetrics]
    rounds: int
    terminated_cleanly: bool
    run_time: float
    config: RunConfig
    worker_facts: list[dict[str, set[Tuple]]] = field(default_factory=list, repr=False)
    snapshots: list[list[dict]] = field(default_factory=list, repr=False)
    trace: list[str] = field(default_factory=list, repr=False)

    @property
    def checksum(self) -> int:
        return result_checksum(self.interpretation)

    def metrics(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "per_worker": [m.to_dict() for m in self.per_worker],
            "global": {
                "rounds": self.rounds,
                "run_time": round(self.run_time, 9),
                "terminated_cleanly": self.terminated_cleanly,
                "result_checksum": self.checksum,
            },
        }

    def metrics_json(self) -> str:
        return json.dumps(self.metrics(), sort_keys=True, indent=2) + "\n"

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)


def result_checksum(interp: Interpretation) -> int:
    """Order-independent 64-bit fold: sum of per-fact BLAKE2b digests mod 2**64."""
    total = 0
    for pred, tuples in interp.snapshot().items():
        prefix = pred.encode() + b"\x00"
        for t in tuples:
            data = prefix + b"".join(v.to_bytes(8, "little", signed=True) for v in t)
            total += int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")
    return total % 2**64


# --------------------------------------------------------------- scheduler


@dataclass(frozen=True)
class _Compute:
    steps: int


_WAIT = "wait"
_FINISH = "finish"


class _Simulator:
    def __init__(self, states: list[WorkerState], cfg: RunConfig):
        self.states = states
        self.cfg = cfg
        self.W = len(states)
        self.now = 0.0
        self.heap: list = []
        self.seq = 0
        self.in_flight = 0
        self.metrics = [WorkerMetrics(s.worker_id) for s in states]
        self.stragglers = [StragglerSchedule(cfg.straggler, cfg.rng_seed, i) for i in range(self.W)]
        self.channel_clock: dict[tuple[int, int], float] = {}
        self.trace: list[str] = []
        self.snapshots: list[list[dict]] = [[] for _ in states]
        self.waiting_since: list[float | None] = [None] * self.W
        self.procs: list[Iterator] = []

    def log(self, worker: int, event: str, detail: str = "") -> None:
        if self.cfg.trace:
            self.trace.append(f"{self.now:.6f} {worker} {event} {detail}".rstrip())

    def _push(self, t: float, kind: str, data) -> None:
        heapq.heappush(self.heap, (t, self.seq, kind, data))
        self.seq += 1

    def send(self, upd: VersionedUpdate) -> None:
        m = self.metrics[upd.sender]
        for j in range(self.W):
            if j == upd.sender:
                continue
            arrive = self.now + self.cfg.latency + self.cfg.per_tuple_cost * upd.size
            ch = (upd.sender, j)
            arrive = max(arrive, self.channel_clock.get(ch, 0.0))
            self.channel_clock[ch] = arrive
            self.in_flight += 1
            m.tuples_sent += upd.size
            self._push(arrive, "deliver", (j, upd))
        m.updates_sent += 1
        m.rounds += 1

    def _process(self, i: int) -> Iterator:
        st = self.states[i]
        slack, cap = self.cfg.effective_slack, self.cfg.effective_cap
        iterations = 0
        while True:
            while st.stale_peers(slack):
                yield _WAIT
            stale = st.stale_peers(slack)
            if stale:
                raise InvariantViolation(f"worker {i} computes with stale peers {stale} at round {st.r}")
            out = worker_local_round(st, cap)
            iterations += out.iterations
            if iterations > self.cfg.iteration_cap:
                raise IterationCapExceeded(
                    f"worker {i} exceeded {self.cfg.iteration_cap} local iterations"
                )
            if out.steps:
                yield _Compute(out.steps)
            idle = not out.changed and not st.pending_payload()
            st.r += 1
            upd = VersionedUpdate(i, st.r, out.payload, idle)
            self.send(upd)
            self.log(i, "send", f"round={st.r} tuples={upd.size} iterations={out.iterations}{' idle' if idle else ''}")
            if self.cfg.record_snapshots:
                self.snapshots[i].append(st.snapshot())
            if idle:
                yield _FINISH

    def _advance(self, i: int) -> None:
        instr = next(self.procs[i])
        st = self.states[i]
        if isinstance(instr, _Compute):
            work = instr.steps * self.cfg.unit_cost
            dt = self.stragglers[i].elapsed(self.now, work)
            self.metrics[i].compute_time += dt
            self._push(self.now + dt, "resume", i)
        elif instr == _WAIT:
            self.waiting_since[i] = self.now
            self.log(i, "wait", f"round={st.r}")
        else:
            st.status = FINISHED
            self.waiting_since[i] = self.now
            self.log(i, "finish", f"round={st.r}")

    def _wake(self, i: int) -> None:
        since = self.waiting_since[i]
        self.metrics[i].wait_time += self.now - since
        self.waiting_since[i] = None
        self._push(self.now, "resume", i)

    def _deliver(self, j: int, upd: VersionedUpdate) -> None:
        st = self.states[j]
        self.in_flight -= 1
        if upd.round <= st.last_round[upd.sender]:
            raise InvariantViolation(f"out-of-order update from {upd.sender} to {j}")
        st.inbox.append(upd)
        st.last_round[upd.sender] = upd.round
        st.peer_idle[upd.sender] = upd.idle
        self.log(j, "recv", f"from={upd.sender} round={upd.round} tuples={upd.size}")
        if self.waiting_since[j] is None:
            return
        if st.status == FINISHED:
            if upd.size:
                st.status = RUNNING
                self.log(j, "resume", f"round={st.r}")
                self._wake(j)
        else:
            self._wake(j)

    def run_phase(self) -> None:
        self.procs = [self._process(i) for i in range(self.W)]
        for i in range(self.W):
            self._push(self.now, "resume", i)
        while True:
            if coordinator_step([s.status for s in self.states], self.in_flight) == TERMINATE:
                break
            if not self.heap:
                raise DeadlockError(
                    "no pending events but the coordinator has not observed termination: "
                    + ", ".join(f"{s.worker_id}:{s.status}@{s.r}" for s in self.states)
                )
            t, _, kind, data = heapq.heappop(self.heap)
            self.now = t
            if kind == "resume":
                self._advance(data)
            else:
                self._deliver(*data)
        for i in range(self.W):
            if self.waiting_since[i] is not None:
                self.metrics[i].wait_time += self.now - self.waiting_since[i]
                self.waiting_since[i] = None
        for p in self.procs:
            p.close()
        self.log(-1, "terminate", f"in_flight={self.in_flight}")


# --------------------------------------------------------------------- run


def _check_preconditions(plan: Sequence[PlanShard], constraints: Mapping[str, Constraint]) -> None:
    if not plan:
        raise PreconditionError("empty plan")
    if [s.worker_id for s in plan] != list(range(len(plan))):
        raise PreconditionError("plan shards must be numbered 0..W-1 in order")
    if plan[0].partition.worker_count != len(plan):
        raise PreconditionError("partition function and plan disagree on the worker count")
    positions = plan[0].positions
    for pred, c in constraints.items():
        if pred not in positions:
            continue
        if not check_partition_precondition(c, DiscriminatingSet(pred, positions[pred])):
            raise PreconditionError(
                f"discriminating positions {positions[pred]} of {pred!r} are not inside the "
                f"group-by positions {c.groupby_positions} of its constraint"
            )


def run(plan: Sequence[PlanShard], gamma: Constraint | None = None, cfg: RunConfig | None = None) -> RunResult:
    cfg = cfg or RunConfig()
    program = plan[0].program if plan else None
    constraints = constraints_for(program, gamma) if program is not None else {}
    _check_preconditions(plan, constraints)
    if cfg.mode == SEQ:
        return _run_sequential(plan, gamma, cfg)

    W = len(plan)
    states = [WorkerState(s, constraints, [j for j in range(W) if j != s.worker_id]) for s in plan]
    sim = _Simulator(states, cfg)
    report = states[0].report
    for stratum in report.strata:
        if report.clique_of(stratum[0]).recursive:
            for st in states:
                st.begin_phase(stratum)
            sim.run_phase()
        else:
            for st in states:
                st.eval_local(stratum)

    facts = [st.export() for st in states]
    union: dict[str, set[Tuple]] = {}
    for f in facts:
        for pred, ts in f.items():
            union.setdefault(pred, set()).update(ts)
    for m, st in zip(sim.metrics, states):
        m.derivations_total = st.derivations_total
        m.derivations_discarded = st.derivations_discarded
    result = RunResult(
        interpretation=Interpretation(union),
        per_worker=sim.metrics,
        rounds=max(m.rounds for m in sim.metrics),
        terminated_cleanly=sim.in_flight == 0,
        run_time=sim.now,
        config=cfg,
        worker_facts=facts,
        snapshots=sim.snapshots,
        trace=sim.trace,
    )
    if cfg.verify:
        verify_partitioned_result(plan, gamma, result, cfg.iteration_cap)
    return result


def _union_edb(plan: Sequence[PlanShard]) -> RelationStore:
    edb = RelationStore()
    for s in plan:
        edb = edb.union(s.edb_shard)
    return edb.union(plan[0].replicated_edb)


def sequential_reference(plan: Sequence[PlanShard], gamma: Constraint | None, cap: int = DEFAULT_ITERATION_CAP):
    return seminaive_fixpoint(strip_guards(plan[0].program), _union_edb(plan), gamma, cap)


def _run_sequential(plan: Sequence[PlanShard], gamma: Constraint | None, cfg: RunConfig) -> RunResult:
    res = sequential_reference(plan, gamma, cfg.iteration_cap)
    m = WorkerMetrics(
        0,
        compute_time=res.derivations_total * cfg.unit_cost,
        rounds=res.iterations,
        derivations_total=res.derivations_total,
        derivations_discarded=res.derivations_discarded,
    )
    return RunResult(res.interpretation, [m], res.iterations, True, m.compute_time, cfg)


def verify_partitioned_result(
    plan: Sequence[PlanShard], gamma: Constraint | None, result: RunResult, cap: int = DEFAULT_ITERATION_CAP
) -> None:
    """Disjoint per-worker partitions whose union is the sequential fixpoint."""
    for i, facts in enumerate(result.worker_facts):
        for pred, ts in facts.items():
            for t in ts:
                owner = plan[i].owner(pred, t)
                if owner != i:
                    raise InvariantViolation(f"worker {i} holds {pred}{t}, which belongs to worker {owner}")
    expected = sequential_reference(plan, gamma, cap).interpretation
    if expected.snapshot() != result.interpretation.snapshot():
        exp, got = expected.snapshot(), result.interpretation.snapshot()
        for pred in sorted(set(exp) | set(got)):
            diff = exp.get(pred, frozenset()) ^ got.get(pred, frozenset())
            if diff:
                raise InvariantViolation(
                    f"union of worker fixpoints differs from the sequential fixpoint on {pred}: "
                    f"first differing fact {min(diff)}"
                )


def gamma_cover_violations(
    ssp: RunResult, bsp: RunResult, constraints: Mapping[str, Constraint]
) -> list[tuple[int, int, str]]:
    """(worker, round, predicate) where the SSP state fails to cover the BSP state of the same round.

    Both runs need ``record_snapshots``.  A run that stopped earlier is
    represented by its final snapshot in later rounds.
    """
    bad = []
    for w, (s_snaps, b_snaps) in enumerate(zip(ssp.snapshots, bsp.snapshots)):
        for r in range(1, len(b_snaps) + 1):
            b = b_snaps[r - 1]
            s = s_snaps[min(r, len(s_snaps)) - 1] if s_snaps else {}
            for pred, covered in b.items():
                cover = s.get(pred, {} if isinstance(covered, dict) else frozenset())
                c = constraints.get(pred)
                ok = is_gamma_cover(cover, covered, c.kind) if c is not None else cover >= covered
                if not ok:
                    bad.append((w, r, pred))
    return bad


__all__ = [
    "BSP",
    "DeadlockError",
    "InvariantViolation",
    "PreconditionError",
    "RoundOutcome",
    "RunConfig",
    "RunResult",
    "SEQ",
    "SSP",
    "StragglerConfig",
    "StragglerSchedule",
    "VersionedUpdate",
    "WorkerMetrics",
    "WorkerState",
    "coordinator_step",
    "gamma_cover_violations",
    "inject_stragglers",
    "result_checksum",
    "run",
    "sequential_reference",
    "verify_partitioned_result",
    "worker_local_round",
]
