import pytest

from premdl.core import RelationStore, parse_program
from premdl.engine import Constraint
from premdl.graphs import arc_store, toy_arcs
from premdl.partition import PartitionFn, rewrite_lockfree
from premdl.prem import DiscriminatingSet
from premdl.queries import APSP_LINEAR, APSP_STRATIFIED, builtin_program

THREE_ARCS = [(1, 4, 10), (1, 3, 4), (3, 4, 3)]
PATH_MIN = Constraint("path", "min", (0, 1), 2)


def apsp_recursive_only(text: str = APSP_STRATIFIED):
    """The two path rules without the shortestpath stratum."""
    return parse_program("\n".join(line for line in text.splitlines() if "shortestpath" not in line))


@pytest.fixture
def three_arcs():
    return arc_store(THREE_ARCS)


@pytest.fixture
def toy_store():
    return arc_store(toy_arcs())


@pytest.fixture
def apsp_linear():
    return parse_program(APSP_LINEAR)


def make_plan(query, arcs, workers, *, assignment=None, hash_seed=0):
    """Lock-free plan for a built-in query, partitioned on the first column."""
    program = builtin_program(query)
    pred = "tc" if query == "tc" else "path"
    f = PartitionFn(DiscriminatingSet(pred, (0,)), workers, hash_seed, assignment)
    return rewrite_lockfree(program, f, RelationStore({"arc": [tuple(a) for a in arcs]}))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(test_acceptance.RESULTS.items()):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
