import pytest

from conftest import PATH_MIN, make_plan
from premdl.cli.oracles import dijkstra
from premdl.engine import Constraint, constraints_for, keyed_view, seminaive_fixpoint
from premdl.graphs import TOY_ASSIGNMENT, random_weighted_graph, toy_arcs
from premdl.partition import strip_guards
from premdl.runtime import (
    BSP,
    CONTINUE,
    FINISHED,
    RUNNING,
    SEQ,
    SSP,
    TERMINATE,
    InvariantViolation,
    PreconditionError,
    RunConfig,
    StragglerConfig,
    StragglerSchedule,
    WorkerState,
    coordinator_step,
    gamma_cover_violations,
    inject_stragglers,
    run,
    verify_partitioned_result,
    worker_local_round,
)

BSP_CFG = RunConfig(mode=BSP)
SSP_CFG = RunConfig(mode=SSP, slack=3, local_cap=4)


def _toy_plan(query="apsp-nonlinear"):
    return make_plan(query, toy_arcs(), 2, assignment=TOY_ASSIGNMENT)


def _recursive_stratum(state):
    return next(s for s in state.report.strata if state.report.clique_of(s[0]).recursive)


def _fresh_worker(plan, i=0):
    state = WorkerState(plan[i], constraints_for(plan[i].program), [j for j in range(len(plan)) if j != i])
    state.begin_phase(_recursive_stratum(state))
    return state


def test_toy_bsp_shortest_4_to_8():
    res = run(_toy_plan(), None, BSP_CFG)
    sp = {t[:2]: t[2] for t in res.interpretation.tuples("shortestpath")}
    assert sp[(4, 8)] == 10
    assert sp[(1, 4)] == 5
    assert set(res.interpretation.tuples("shortestpath")) == dijkstra(toy_arcs())
    assert res.terminated_cleanly


def test_toy_ssp_matches_bsp_in_fewer_rounds():
    plan = _toy_plan()
    bsp = run(plan, None, BSP_CFG)
    ssp = run(plan, None, SSP_CFG)
    assert ssp.interpretation == bsp.interpretation
    for s, b in zip(ssp.per_worker, bsp.per_worker):
        assert s.rounds <= b.rounds


@pytest.mark.parametrize("mode", [SEQ, BSP, SSP])
@pytest.mark.parametrize("query", ["apsp-linear", "apsp-nonlinear", "tc"])
def test_single_worker_is_sequential(mode, query):
    _, arcs = random_weighted_graph(11)
    arcs = [a[:2] for a in arcs] if query == "tc" else arcs
    plan = make_plan(query, arcs, 1)
    res = run(plan, None, RunConfig(mode=mode))
    expected = seminaive_fixpoint(strip_guards(plan[0].program), plan[0].edb).interpretation
    assert res.interpretation == expected


def test_condensed_round_skips_intermediate_costs():
    state = _fresh_worker(_toy_plan())
    out = worker_local_round(state, 3)
    sent = {t[:2]: t[2] for pred, ts in out.payload for t in ts}
    assert sent[(1, 4)] == 5
    assert all(t != (1, 4, 7) and t != (1, 4, 10) for _, ts in out.payload for t in ts)


def test_unit_cap_rounds_send_every_milestone():
    state = _fresh_worker(_toy_plan())
    seen = []
    for _ in range(3):
        out = worker_local_round(state, 1)
        seen += [t[2] for _, ts in out.payload for t in ts if t[:2] == (1, 4)]
    assert seen == [10, 7, 5]


def test_quiescent_worker_sends_empty_payload():
    state = _fresh_worker(make_plan("apsp-nonlinear", [(1, 2, 3)], 1))
    worker_local_round(state, 10)
    out = worker_local_round(state, 10)
    assert out.payload == () and not out.changed


def test_compute_while_finished_is_invariant_violation():
    state = _fresh_worker(_toy_plan())
    state.status = FINISHED
    with pytest.raises(InvariantViolation):
        worker_local_round(state, 1)


def test_ssp_zero_slack_unit_cap_is_bsp():
    plan = _toy_plan()
    bsp = run(plan, None, RunConfig(mode=BSP, trace=True))
    ssp = run(plan, None, RunConfig(mode=SSP, slack=0, local_cap=1, trace=True))
    assert [m.to_dict() for m in ssp.per_worker] == [m.to_dict() for m in bsp.per_worker]
    assert ssp.trace == bsp.trace


def test_coordinator_step():
    assert coordinator_step([FINISHED, FINISHED], 0) == TERMINATE
    assert coordinator_step([FINISHED, FINISHED], 1) == CONTINUE
    assert coordinator_step([RUNNING, FINISHED], 0) == CONTINUE


def test_no_stragglers_at_zero_rate():
    cfg = RunConfig(workers=3, straggler=StragglerConfig(0.0))
    assert inject_stragglers(cfg, 100.0) == [[], [], []]


def test_unit_slowdown_changes_nothing():
    cfg = StragglerConfig(rate=2.0, slowdown=1.0)
    sched = StragglerSchedule(cfg, 0, 0)
    sched.extend(10.0)
    assert sched.episodes
    assert sched.elapsed(0.0, 5.0) == 5.0


def test_straggler_golden_trace():
    cfg = RunConfig(workers=2, rng_seed=42, straggler=StragglerConfig(0.1))
    got = [[(round(a, 6), round(b, 6)) for a, b in w] for w in inject_stragglers(cfg, 100.0)]
    assert got == [
        [(24.042086, 25.042086), (47.403983, 48.403983), (71.251593, 72.251593),
         (74.049535, 75.913909), (89.440515, 90.440515)],
        [(5.369661, 6.369661), (12.372992, 13.372992), (17.169183, 18.169183),
         (24.741917, 25.741917), (53.870462, 54.870462), (80.69007, 81.69007),
         (86.750546, 87.750546)],
    ]


def test_slowdown_stretches_work_inside_episode():
    sched = StragglerSchedule(StragglerConfig(rate=0.1, slowdown=3.0), 42, 0)
    sched.extend(30.0)
    start, end = sched.episodes[0]
    assert sched.elapsed(start, 0.1) == pytest.approx(0.3)
    # Work spilling past the episode end runs at full speed afterwards.
    assert sched.elapsed(end - 0.3, 0.5) == pytest.approx(0.3 + 0.4)


def test_stragglers_slow_the_run():
    plan = _toy_plan()
    calm = run(plan, None, BSP_CFG)
    slow = run(plan, None, RunConfig(mode=BSP, straggler=StragglerConfig(rate=50.0, slowdown=4.0, duration=0.05)))
    assert slow.interpretation == calm.interpretation
    assert slow.run_time > calm.run_time


def test_same_seed_same_metrics_bytes():
    plan = make_plan("apsp-nonlinear", random_weighted_graph(5)[1], 3)
    cfg = RunConfig(mode=SSP, rng_seed=9, straggler=StragglerConfig(rate=20.0, duration=0.01))
    assert run(plan, None, cfg).metrics_json() == run(plan, None, cfg).metrics_json()


def test_precondition_rejects_key_splitting_partition():
    plan = _toy_plan("apsp-linear")
    by_destination = Constraint("path", "min", (1,), 2)
    with pytest.raises(PreconditionError):
        run(plan, by_destination, BSP_CFG)


def test_misplaced_fact_is_detected():
    plan = _toy_plan()
    res = run(plan, None, BSP_CFG)
    moved = next(iter(res.worker_facts[0]["path"]))
    res.worker_facts[0]["path"].discard(moved)
    res.worker_facts[1]["path"].add(moved)
    with pytest.raises(InvariantViolation):
        verify_partitioned_result(plan, None, res)


def test_wrong_union_is_detected():
    plan = _toy_plan()
    res = run(plan, None, BSP_CFG)
    res.interpretation.relations["shortestpath"] = set()
    with pytest.raises(InvariantViolation):
        verify_partitioned_result(plan, None, res)


def test_linear_ssp_covers_bsp_each_round():
    plan = _toy_plan("apsp-linear")
    bsp = run(plan, None, RunConfig(mode=BSP, record_snapshots=True))
    ssp = run(plan, None, RunConfig(mode=SSP, slack=3, local_cap=4, record_snapshots=True))
    assert gamma_cover_violations(ssp, bsp, constraints_for(plan[0].program)) == []
    assert keyed_view(ssp.interpretation.relation("path"), PATH_MIN)[(4, 8)] == 10


def test_metrics_shape():
    res = run(_toy_plan(), None, SSP_CFG)
    m = res.metrics()
    assert set(m) == {"config", "per_worker", "global"}
    assert set(m["per_worker"][0]) == {
        "id", "compute_time", "wait_time", "rounds", "updates_sent",
        "tuples_sent", "derivations_total", "derivations_discarded",
    }
    assert m["global"]["rounds"] == max(w["rounds"] for w in m["per_worker"])
    assert res.metrics_json().endswith("\n")
