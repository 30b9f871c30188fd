"""``premdl`` command line: run, compare, bench."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import (
    ArithmeticOverflow,
    DatalogError,
    Program,
    RelationStore,
    SymbolTable,
    load_edb,
    parse_program,
    read_tuples,
    sniff_arity,
    validate_program,
)
from ..engine import Constraint, IterationCapExceeded, constraints_for, stratified_eval
from ..partition import PartitionFn, rewrite_lockfree
from ..prem import DiscriminatingSet, check_prem_on_trace, push_constraint
from ..queries import (
    APSP_NONLINEAR_STRATIFIED,
    APSP_STRATIFIED,
    QUERY_NAMES,
    TC_NONLINEAR,
    builtin_program,
    output_predicate,
)
from ..runtime import BSP, SEQ, SSP, InvariantViolation, RunConfig, RunResult, StragglerConfig, run
from .oracles import ORACLES

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_INVARIANT = 0, 1, 2, 3
CLI_ITERATION_CAP = 1000
# Fraction of virtual run time a worker should spend slowed down when the
# straggler rate is left to the bench's calibration.
STRAGGLER_DISRUPTED = 0.3
STRAGGLER_EPISODE = 0.1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ loading


@dataclass
class Job:
    program: Program
    edb: RelationStore
    output: str
    symbols: SymbolTable
    partitioned: str


def _parse_partition_on(text: str | None) -> dict[str, tuple[int, ...]]:
    out: dict[str, list[int]] = {}
    if not text:
        return {}
    for item in text.split(","):
        pred, _, pos = item.partition(":")
        if not pred or not pos.strip().isdigit():
            raise UsageError(f"bad --partition-on entry {item!r}; expected pred:position")
        out.setdefault(pred.strip(), []).append(int(pos))
    return {p: tuple(v) for p, v in out.items()}


def _push_all(program: Program, edb: RelationStore) -> Program:
    """Push every stratified aggregate that sits directly on a recursive predicate, after checking PreM."""
    report = validate_program(program)
    for rule in program.rules:
        agg = rule.head_aggregate
        atoms = rule.body_atoms
        if agg is None or len(atoms) != 1 or report.clique_of(rule.head.predicate).recursive:
            continue
        if not report.clique_of(atoms[0].predicate).recursive:
            continue
        gamma = Constraint(rule.head.predicate, agg.kind, agg.groupby_positions, agg.cost_position)
        pushed = push_constraint(program, gamma)
        src = atoms[0].predicate
        src_gamma = Constraint(src, agg.kind, agg.groupby_positions, agg.cost_position)
        stripped = Program(
            tuple(r for r in program.rules if report.stratum_of(r.head.predicate) <= report.stratum_of(src)),
            program.prem_pushed,
        )
        verdict = check_prem_on_trace(stripped, src_gamma, edb, iteration_cap=CLI_ITERATION_CAP)
        if not verdict.holds:
            raise DatalogError(
                f"constraint {src_gamma} is not pre-mappable on this input "
                f"(counterexample fact {verdict.counterexample[1]})"
            )
        program = pushed
        report = validate_program(program)
    return program


def _load_job(args) -> Job:
    symbols = SymbolTable()
    if args.query:
        program = builtin_program(args.query, push_prem=args.push_prem, symbols=symbols)
        output = output_predicate(args.query)
    else:
        program = parse_program(Path(args.program).read_text(), symbols)
        output = None
    edb_preds = sorted(program.edb_predicates)
    pred = args.edb_predicate or (edb_preds[0] if len(edb_preds) == 1 else None)
    if pred is None:
        raise UsageError(f"program reads {edb_preds}; choose one with --edb-predicate")
    arity = program.arities()[pred]
    file_arity = sniff_arity(args.edb)
    if args.query == "tc" and file_arity is not None and file_arity > arity:
        wide = RelationStore({pred: read_tuples(args.edb, file_arity, symbols)})
        edb = RelationStore({pred: [t[:arity] for t in wide.relation(pred)]})
        if args.undirected:
            edb = RelationStore({pred: list(edb.relation(pred)) + [(t[1], t[0]) for t in edb.relation(pred)]})
    else:
        edb = load_edb(args.edb, pred, arity, undirected=args.undirected, symbols=symbols)
    if args.query and args.query.startswith("apsp") and not args.allow_negative:
        negative = sorted(t for t in edb.relation(pred) if t[2] < 0)
        if negative:
            raise UsageError(f"negative weight in {negative[0]}; pass --allow-negative to accept it")
    if args.program and args.push_prem:
        program = _push_all(program, edb)
    if output is None:
        output = args.output_predicate or validate_program(program).strata[-1][0]
    partitioned = validate_program(program).strata
    recursive = [s for s in partitioned if validate_program(program).clique_of(s[0]).recursive]
    part_pred = recursive[0][0] if recursive else output
    return Job(program, edb, output, symbols, part_pred)


def _config(args, mode: str | None = None, seed: int | None = None, straggler=None) -> RunConfig:
    if straggler is None and args.straggler_rate:
        straggler = StragglerConfig(args.straggler_rate, args.straggler_slowdown, args.straggler_duration)
    return RunConfig(
        mode=mode or args.mode,
        slack=args.slack,
        local_cap=args.local_cap,
        workers=args.workers,
        rng_seed=args.seed if seed is None else seed,
        straggler=straggler,
        trace=bool(getattr(args, "trace", None)),
        iteration_cap=args.iteration_cap,
    )


def execute(job: Job, args, cfg: RunConfig) -> RunResult:
    workers = 1 if cfg.mode == SEQ else args.workers
    overrides = _parse_partition_on(args.partition_on)
    disc_positions = overrides.get(job.partitioned, (0,))
    f = PartitionFn(DiscriminatingSet(job.partitioned, disc_positions), workers, args.hash_seed)
    plan = rewrite_lockfree(job.program, f, job.edb, overrides)
    return run(plan, None, cfg)


def render_rows(rows, symbols: SymbolTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for t in sorted(rows):
        w.writerow([symbols.render(v) for v in t])
    return buf.getvalue()


# -------------------------------------------------------------------- run


def cmd_run(args) -> int:
    job = _load_job(args)
    result = execute(job, args, _config(args))
    text = render_rows(result.interpretation.tuples(job.output), job.symbols)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.metrics:
        Path(args.metrics).write_text(result.metrics_json())
    if args.trace:
        Path(args.trace).write_text(result.trace_text())
    return EXIT_OK


# ---------------------------------------------------------------- compare


def _read_csv(path: str) -> set[tuple]:
    out = set()
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                out.add(tuple(int(v) if _is_int(v) else v for v in row))
    return out


def _is_int(text: str) -> bool:
    return text.lstrip("+-").isdigit()


def _oracle_rows(args) -> set[tuple]:
    symbols = SymbolTable()
    arity = sniff_arity(args.edb) or 2
    tuples = read_tuples(args.edb, arity, symbols)
    if args.undirected:
        tuples = list(tuples) + [(t[1], t[0], *t[2:]) for t in tuples]
    if args.oracle == "warshall":
        rows = ORACLES["warshall"]([t[:2] for t in tuples])
    elif args.oracle == "stratified":
        text = {
            "tc": TC_NONLINEAR,
            "apsp-linear": APSP_STRATIFIED,
            "apsp-nonlinear": APSP_NONLINEAR_STRATIFIED,
        }[args.query]
        program = parse_program(text, symbols)
        arity_needed = program.arities()["arc"]
        edb = RelationStore({"arc": [t[:arity_needed] for t in tuples]})
        interp = stratified_eval(program, edb, CLI_ITERATION_CAP)
        rows = interp.tuples(output_predicate(args.query))
    else:
        if arity < 3:
            raise UsageError(f"oracle {args.oracle} needs a weighted (3-column) edge file")
        rows = ORACLES[args.oracle]([t[:3] for t in tuples])
    return {tuple(int(v) if _is_int(s := symbols.render(v)) else s for v in t) for t in rows}


def first_difference(a: set[tuple], b: set[tuple], key_arity: int | None = None) -> str | None:
    if a == b:
        return None
    if key_arity is None:
        arities = {len(t) for t in a | b}
        key_arity = 2 if arities == {3} else None
    if key_arity is not None:
        ka = {t[:key_arity]: t[key_arity:] for t in a}
        kb = {t[:key_arity]: t[key_arity:] for t in b}
        for key in sorted(set(ka) | set(kb), key=repr):
            if ka.get(key) != kb.get(key):
                left = ",".join(map(str, ka[key])) if key in ka else "missing"
                right = ",".join(map(str, kb[key])) if key in kb else "missing"
                return f"key {','.join(map(str, key))}: {left} != {right}"
    t = min(a ^ b, key=repr)
    side = "only in first" if t in a else "only in second"
    return f"{','.join(map(str, t))} {side}"


def cmd_compare(args) -> int:
    a = _read_csv(args.first)
    if args.oracle:
        if not args.edb:
            raise UsageError("--oracle needs --edb")
        if args.oracle == "stratified" and not args.query:
            raise UsageError("--oracle stratified needs --query")
        b = _oracle_rows(args)
    elif args.second:
        b = _read_csv(args.second)
    else:
        raise UsageError("compare needs a second CSV or --oracle")
    diff = first_difference(a, b)
    if diff is None:
        print(f"identical ({len(a)} rows)")
        return EXIT_OK
    print(f"mismatch: {diff}")
    return EXIT_VALIDATION


# ------------------------------------------------------------------ bench


@dataclass
class BenchmarkRow:
    workload: str
    mode: str
    slack: int
    stragglers: bool
    avg_compute_time: float
    avg_wait_time: float
    run_time: float
    rounds: float
    tuples_sent: float


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def bench_rows_csv(rows: Sequence[BenchmarkRow]) -> str:
    names = [f.name for f in fields(BenchmarkRow)]
    lines = [",".join(names)]
    lines += [",".join(_fmt(getattr(r, n)) for n in names) for r in rows]
    return "\n".join(lines) + "\n"


def trend_checks(rows: Sequence[BenchmarkRow]) -> list[tuple[str, bool | None]]:
    """Directional checks; ``None`` when the grid lacks the cells a check needs."""
    cell = {(r.workload, r.slack, r.stragglers): r for r in rows}
    workloads = sorted({r.workload for r in rows})
    out: list[tuple[str, bool | None]] = []
    for wl in workloads:
        strag = False if (wl, 0, False) in cell else True
        chain = [cell.get((wl, s, strag)) for s in (0, 3, 6)]
        if all(chain):
            ok = chain[0].avg_compute_time <= chain[1].avg_compute_time <= chain[2].avg_compute_time
            out.append((f"(a) {wl}: avg_compute bsp <= ssp3 <= ssp6", ok))
        if wl.startswith("apsp"):
            b, s3 = cell.get((wl, 0, True)), cell.get((wl, 3, True))
            if b and s3:
                out.append((f"(b) {wl} with stragglers: run_time ssp3 < bsp", s3.run_time < b.run_time))
        if wl == "tc":
            b, s6 = cell.get((wl, 0, False)), cell.get((wl, 6, False))
            if b and s6:
                out.append((f"(c) {wl} without stragglers: run_time bsp <= ssp6", b.run_time <= s6.run_time))
            sent = {s: cell[(wl, s, False)].tuples_sent for s in (0, 3, 6) if (wl, s, False) in cell}
            if len(sent) > 1:
                out.append((f"tc tuples_sent equal across slacks", len(set(sent.values())) == 1))
    return out


def calibrated_straggler(base_run_time: float, slowdown: float) -> StragglerConfig:
    """Episodes of a tenth of the BSP run, arriving so that ~30% of the time is disrupted."""
    duration = STRAGGLER_EPISODE * base_run_time
    rate = -np.log(1 - STRAGGLER_DISRUPTED) / duration
    return StragglerConfig(float(rate), slowdown, duration)


def bench(job: Job, args, workload: str) -> list[BenchmarkRow]:
    slacks = [int(s) for s in args.slacks.split(",")]
    modes = [m.strip() for m in args.stragglers.split(",")]
    if any(m not in ("on", "off") for m in modes):
        raise UsageError("--stragglers takes a list of on/off")
    straggler = None
    if "on" in modes:
        if args.straggler_rate:
            straggler = StragglerConfig(args.straggler_rate, args.straggler_slowdown, args.straggler_duration)
        else:
            base = execute(job, args, _config(args, mode=BSP, seed=args.seed))
            straggler = calibrated_straggler(base.run_time, args.straggler_slowdown)
    rows = []
    for strag in modes:
        for s in slacks:
            mode = BSP if s == 0 else SSP
            acc = []
            reps = args.repeats if strag == "on" else 1
            for k in range(args.repeats):
                if k >= reps:
                    acc.append(acc[0])
                    continue
                cfg = _config(args, mode=mode, seed=args.seed * 1000 + k,
                              straggler=straggler if strag == "on" else None)
                cfg = RunConfig(**{**cfg.__dict__, "slack": s, "verify": k == 0})
                res = execute(job, args, cfg)
                acc.append((
                    float(np.mean([m.compute_time for m in res.per_worker])),
                    float(np.mean([m.wait_time for m in res.per_worker])),
                    res.run_time,
                    res.rounds,
                    sum(m.tuples_sent for m in res.per_worker),
                ))
            means = np.mean(np.array(acc, dtype=float), axis=0)
            rows.append(BenchmarkRow(workload, mode, s, strag == "on", *map(float, means)))
    return rows


def cmd_bench(args) -> int:
    args.query, args.program, args.push_prem = args.workload, None, True
    args.edb_predicate, args.output_predicate = None, None
    job = _load_job(args)
    rows = bench(job, args, args.workload.replace("-", "_"))
    report = bench_rows_csv(rows)
    if args.out:
        Path(args.out).write_text(report)
    else:
        sys.stdout.write(report)
    for name, ok in trend_checks(rows):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edb", required=True, help="whitespace-separated edge file")
    p.add_argument("--undirected", action="store_true", help="also load every edge reversed")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--slack", type=int, default=3)
    p.add_argument("--local-cap", type=int, default=4)
    p.add_argument("--partition-on", help="discriminating positions, e.g. path:0")
    p.add_argument("--hash-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0, help="straggler RNG seed")
    p.add_argument("--straggler-rate", type=float, default=0.0, help="episodes per virtual second")
    p.add_argument("--straggler-slowdown", type=float, default=2.0)
    p.add_argument("--straggler-duration", type=float, default=1.0, help="virtual seconds per episode")
    p.add_argument("--iteration-cap", type=int, default=CLI_ITERATION_CAP)
    p.add_argument("--allow-negative", action="store_true", help="accept negative edge weights")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="premdl", description="Recursive Datalog with min/max in recursion, on simulated workers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="evaluate a program or built-in query")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--program", help="Datalog program file")
    src.add_argument("--query", choices=QUERY_NAMES)
    _common(p)
    p.add_argument("--edb-predicate", help="predicate the edge file populates (default: the only EDB predicate)")
    p.add_argument("--output-predicate", help="predicate written to the result CSV")
    p.add_argument("--mode", choices=(SEQ, BSP, SSP), default=SSP)
    p.add_argument("--push-prem", action="store_true", help="push the min/max aggregate into the recursion")
    p.add_argument("--out", help="result CSV (default: stdout)")
    p.add_argument("--metrics", help="metrics JSON")
    p.add_argument("--trace", help="event trace log")
    p.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="diff a result CSV against another or an oracle")
    c.add_argument("first")
    c.add_argument("second", nargs="?")
    c.add_argument("--oracle", choices=(*ORACLES, "stratified"))
    c.add_argument("--edb")
    c.add_argument("--undirected", action="store_true")
    c.add_argument("--query", choices=QUERY_NAMES, help="query for the stratified oracle")
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="sweep slack and straggler settings")
    b.add_argument("--workload", choices=QUERY_NAMES, required=True)
    _common(b)
    b.add_argument("--slacks", default="0,3,6")
    b.add_argument("--stragglers", default="on,off")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out", help="report CSV (default: stdout)")
    b.set_defaults(func=cmd_bench, mode=SSP, partition_on=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DatalogError, OSError) as exc:
        print(f"premdl: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IterationCapExceeded, ArithmeticOverflow) as exc:
        print(f"premdl: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except InvariantViolation as exc:
        print(f"premdl: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
