from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PATH_MIN, apsp_recursive_only
from premdl.core import IsMin, ValidationError, parse_program
from premdl.engine import (
    Constraint,
    Interpretation,
    immediate_consequence,
    keyed_view,
    seminaive_fixpoint,
)
from premdl.graphs import arc_store, random_weighted_graph, toy_arcs
from premdl.partition import PartitionFn
from premdl.prem import (
    DiscriminatingSet,
    check_half_fd,
    check_prem_on_trace,
    check_partition_precondition,
    inject_is_min,
    push_constraint,
)
from premdl.queries import APSP_LINEAR, APSP_NONLINEAR, APSP_NONLINEAR_STRATIFIED, APSP_STRATIFIED

WITNESS_ARCS = [(1, 2, 10), (1, 3, 10), (2, 3, 1)]
PATH_MIN_BY_SOURCE = Constraint("path", "min", (0,), 2)


def _min_by_source(tuples):
    """γ for 'min cost per source', written out by hand for the brute force."""
    best = {}
    for x, _, d in tuples:
        best[x] = min(best.get(x, d), d)
    return {t for t in tuples if t[2] == best[t[0]]}


def test_prem_holds_for_apsp_min():
    program = apsp_recursive_only()
    for seed in range(10):
        _, arcs = random_weighted_graph(seed)
        report = check_prem_on_trace(program, PATH_MIN, arc_store(arcs))
        assert report.holds and report.counterexample is None


def test_prem_holds_on_toy():
    report = check_prem_on_trace(apsp_recursive_only(), PATH_MIN, arc_store(toy_arcs()))
    assert report.holds and report.iterations_checked >= 3


def test_min_per_source_brute_force_witness_exists():
    program = apsp_recursive_only()
    store = arc_store(WITNESS_ARCS)
    universe = [(1, y, c) for y in (2, 3) for c in range(1, 11)]
    found = None
    for size in (1, 2):
        for subset in combinations(universe, size):
            i = set(subset)
            lhs = _min_by_source(
                immediate_consequence(program, Interpretation({"path": i}), store, include_input=False).tuples("path")
            )
            reduced = Interpretation({"path": _min_by_source(i)})
            rhs = _min_by_source(
                immediate_consequence(program, reduced, store, include_input=False).tuples("path")
            )
            if lhs != rhs:
                found = i
                break
        if found:
            break
    assert found is not None


def test_min_per_source_rejected():
    report = check_prem_on_trace(apsp_recursive_only(), PATH_MIN_BY_SOURCE, arc_store(WITNESS_ARCS))
    assert not report.holds
    snapshot, tup = report.counterexample
    assert "path" in snapshot and len(tup) == 3


def test_non_recursive_gamma_vacuous():
    program = parse_program(APSP_STRATIFIED)
    gamma = Constraint("shortestpath", "min", (0, 1), 2)
    report = check_prem_on_trace(program, gamma, arc_store(WITNESS_ARCS))
    assert report.holds and report.iterations_checked == 1


def test_half_fd_examples():
    assert not check_half_fd({(1, 4, 10), (1, 4, 7)}, PATH_MIN)
    assert check_half_fd({(1, 4, 7), (1, 3, 4)}, PATH_MIN)
    assert check_half_fd(set(), PATH_MIN)


def test_half_fd_holds_on_fixpoint():
    res = seminaive_fixpoint(parse_program(APSP_NONLINEAR), arc_store(toy_arcs()))
    assert check_half_fd(res.interpretation, PATH_MIN)


def test_push_linear():
    gamma = Constraint("shortestpath", "min", (0, 1), 2)
    pushed = push_constraint(parse_program(APSP_STRATIFIED), gamma)
    assert pushed == parse_program(APSP_LINEAR)


def test_push_nonlinear():
    gamma = Constraint("shortestpath", "min", (0, 1), 2)
    pushed = push_constraint(parse_program(APSP_NONLINEAR_STRATIFIED), gamma)
    assert pushed == parse_program(APSP_NONLINEAR)


def test_push_without_aggregate():
    with pytest.raises(ValidationError):
        push_constraint(apsp_recursive_only(), PATH_MIN)


def test_partition_precondition():
    assert check_partition_precondition(PATH_MIN, DiscriminatingSet("path", (0,)))
    assert check_partition_precondition(PATH_MIN, DiscriminatingSet("path", (0, 1)))
    assert not check_partition_precondition(PATH_MIN_BY_SOURCE, DiscriminatingSet("path", (0, 1)))


def test_inject_is_min_adds_goal():
    program = inject_is_min(parse_program(APSP_LINEAR), PATH_MIN)
    rec = program.rules[1]
    assert any(isinstance(g, IsMin) for g in rec.body)
    assert parse_program(program.format()) == program


def test_inject_is_min_same_fixpoint():
    store = arc_store(toy_arcs())
    plain = seminaive_fixpoint(parse_program(APSP_LINEAR), store).interpretation
    guarded = seminaive_fixpoint(inject_is_min(parse_program(APSP_LINEAR), PATH_MIN), store).interpretation
    assert plain == guarded


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(0, 2**32))
def test_partition_on_group_by_keeps_keys_whole(seed, workers, hash_seed):
    _, arcs = random_weighted_graph(seed)
    full = keyed_view(
        seminaive_fixpoint(apsp_recursive_only(APSP_LINEAR), arc_store(arcs)).interpretation.relation("path"),
        PATH_MIN,
    )
    f = PartitionFn(DiscriminatingSet("path", (0,)), workers, seed=hash_seed)
    parts = [dict() for _ in range(workers)]
    for key, cost in full.items():
        parts[f((key[0],))][key] = cost
    # γ applied per worker then unioned equals γ on the whole.
    merged = {}
    for p in parts:
        assert not merged.keys() & p.keys()
        merged.update(p)
    assert merged == full
