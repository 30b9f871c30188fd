"""Built-in query programs used by the CLI and the benchmarks."""

from __future__ import annotations

from .core import Program, SymbolTable, parse_program
from .partition import rewrite_decomposable_nonlinear

APSP_STRATIFIED = """\
path(X, Y, D) <- arc(X, Y, D).
path(X, Y, D) <- path(X, Z, Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, min<D>) <- path(X, Y, D).
"""

APSP_LINEAR = """\
@prem_pushed path.
path(X, Y, min<D>) <- arc(X, Y, D).
path(X, Y, min<D>) <- path(X, Z, Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, D) <- path(X, Y, D).
"""

APSP_NONLINEAR_STRATIFIED = """\
path(X, Y, D) <- arc(X, Y, D).
path(X, Y, D) <- path(X, Z, Dxz), path(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, min<D>) <- path(X, Y, D).
"""

APSP_NONLINEAR = """\
@prem_pushed path.
path(X, Y, min<D>) <- arc(X, Y, D).
path(X, Y, min<D>) <- path(X, Z, Dxz), path(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, D) <- path(X, Y, D).
"""

TC_NONLINEAR = """\
tc(X, Y) <- arc(X, Y).
tc(X, Y) <- tc(X, Z), tc(Z, Y).
"""

QUERY_NAMES = ("apsp-linear", "apsp-nonlinear", "tc")


def builtin_program(name: str, *, push_prem: bool = True, symbols: SymbolTable | None = None) -> Program:
    """The named query, ready for ``rewrite_lockfree``.

    Non-linear queries come back already in decomposable (mirror) form.
    Without ``push_prem`` the APSP queries keep the aggregate stratified above
    the recursion, which only terminates on acyclic inputs.
    """
    if name == "apsp-linear":
        text = APSP_LINEAR if push_prem else APSP_STRATIFIED
    elif name == "apsp-nonlinear":
        text = APSP_NONLINEAR if push_prem else APSP_NONLINEAR_STRATIFIED
    elif name == "tc":
        text = TC_NONLINEAR
    else:
        raise ValueError(f"unknown query {name!r}; expected one of {', '.join(QUERY_NAMES)}")
    program = parse_program(text, symbols)
    if name != "apsp-linear":
        program = rewrite_decomposable_nonlinear(program)
    return program


def output_predicate(name: str) -> str:
    return "tc" if name == "tc" else "shortestpath"
