import pytest

from premdl.core import (
    INTERN_BASE,
    ArityError,
    AggregateHead,
    ArithmeticOverflow,
    Arithmetic,
    Atom,
    Comparison,
    Const,
    EdbError,
    Guard,
    IsMin,
    ParseError,
    SymbolTable,
    UnsafeRuleError,
    ValidationError,
    Var,
    checked_add,
    load_edb,
    parse_program,
    validate_program,
)

R1 = """
path(X, Y, D) <- arc(X, Y, D).
path(X, Y, D) <- path(X, Z, Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, min<D>) <- path(X, Y, D).
"""

R2 = """
@prem_pushed path.
path(X, Y, min<D>) <- arc(X, Y, D).
path(X, Y, min<D>) <- path(X, Z, Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, D) <- path(X, Y, D).
"""

R2_ISMIN = """
@prem_pushed path.
path(X, Y, min<D>) <- path(X, Z, Dxz), is_min((X, Z), Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy.
"""

R3 = """
path(X, Y, D) <- arc(X, Y, D), h(X) = 0.
path(X, Y, D) <- path(X, Z, Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy, h(X) = 0.
shortestpath(X, Y, min<D>) <- path(X, Y, D), h(X) = 0.
"""

R5 = """
@prem_pushed path.
path(X, Y, min<D>) <- arc(X, Y, D).
path(X, Y, min<D>) <- path(X, Z, Dxz), path(Z, Y, Dzy), D = Dxz + Dzy.
shortestpath(X, Y, D) <- path(X, Y, D).
"""

R6 = """
@prem_pushed path, path__m1.
path(X, Y, min<D>) <- arc(X, Y, D), h(X) = 1.
path(X, Y, min<D>) <- path(X, Z, Dxz), path__m1(Z, Y, Dzy), D = Dxz + Dzy, h(X) = 1.
path__m1(X, Y, min<D>) <- path(X, Y, D), h(X) = 1.
shortestpath(X, Y, D) <- path(X, Y, D), h(X) = 1.
"""

R7 = """
tc(X, Y) <- arc(X, Y), h(X) = 0.
tc(X, Y) <- tc(X, Z), tc__m1(Z, Y), h(X) = 0.
tc__m1(X, Y) <- tc(X, Y), h(X) = 0.
"""

CORPUS = [R1, R2, R2_ISMIN, R3, R5, R6, R7]


def test_min_head_aggregate():
    (rule,) = parse_program("path(X,Y,min<D>) <- arc(X,Y,D).").rules
    assert rule.head_aggregate == AggregateHead("min", 2, (0, 1))
    assert rule.body == (Atom("arc", (Var("X"), Var("Y"), Var("D"))),)


def test_angle_bracket_and_max_aggregates():
    (rule,) = parse_program("q(X, max⟨D⟩) :- e(X, D).").rules
    assert rule.head_aggregate == AggregateHead("max", 1, (0,))


def test_identity_rule_is_recursive():
    p = parse_program("p(X) <- p(X).")
    (clique,) = validate_program(p).cliques
    assert clique.recursive and clique.linear
    assert p.rules[0].head_aggregate is None


def test_unsafe_head_variable():
    with pytest.raises(UnsafeRuleError):
        parse_program("p(X,min<D>) <- q(Y,D).")


def test_arithmetic_binds_head_variable():
    (rule,) = parse_program("p(X, D) <- q(X, A), r(X, B), D = A + B + 1.").rules
    assert rule.arithmetic == [Arithmetic(Var("D"), (Var("A"), Var("B"), Const(1)))]


def test_unbound_arithmetic_input_is_unsafe():
    with pytest.raises(UnsafeRuleError):
        parse_program("p(X, D) <- q(X, A), D = A + B.")


def test_comparisons_normalised():
    (rule,) = parse_program("b(X, Y, D) <- p(X, Y, D), p(X, Y, E), D > E.").rules
    assert rule.comparisons == [Comparison(Var("E"), "<", Var("D"))]


def test_guard_and_is_min_goals():
    p = parse_program(R2_ISMIN + "q(X) <- e(X), h(X) = 3.")
    assert any(isinstance(g, IsMin) for g in p.rules[0].body)
    assert p.rules[1].guards == [Guard((Var("X"),), 3)]


def test_arity_conflict():
    with pytest.raises(ArityError):
        parse_program("p(X) <- e(X).\np(X, Y) <- e(X), e(Y).")


def test_syntax_error_position():
    with pytest.raises(ParseError) as info:
        parse_program("p(X) <- e(X).\np(X) <- e(X)")
    assert info.value.line == 2


@pytest.mark.parametrize("text", CORPUS)
def test_print_parse_round_trip(text):
    once = parse_program(text)
    twice = parse_program(once.format())
    assert twice == once
    assert twice.format() == once.format()


def test_strings_interned():
    symbols = SymbolTable()
    p = parse_program('likes(alice, "bob smith").', symbols)
    a, b = p.rules[0].head.args
    assert a.value >= INTERN_BASE and b.value >= INTERN_BASE
    assert symbols.render(a.value) == "alice"
    assert parse_program(p.format(), symbols) == p


def test_checked_add_overflow():
    assert checked_add(2**62, 2**62 - 1) == 2**63 - 1
    with pytest.raises(ArithmeticOverflow):
        checked_add(2**62, 2**62)


# --- validation


def test_stratified_apsp_strata():
    report = validate_program(parse_program(R1))
    assert report.strata == [("path",), ("shortestpath",)]
    assert report.clique_of("path").linear and report.clique_of("path").recursive


def test_nonlinear_clique():
    assert not validate_program(parse_program(R5)).clique_of("path").linear


def test_mirror_copy_keeps_clique_linear():
    report = validate_program(parse_program(R6))
    clique = report.clique_of("path")
    assert set(clique.predicates) == {"path", "path__m1"}
    assert clique.linear
    assert clique.mirrors == {"path__m1": "path"}


def test_empty_program():
    report = validate_program(parse_program(""))
    assert report.strata == [] and report.cliques == []


def test_aggregate_in_recursion_needs_marker():
    with pytest.raises(ValidationError):
        validate_program(parse_program(R2.replace("@prem_pushed path.", "")))


def test_rules_disagree_on_aggregate():
    text = "p(X, min<D>) <- e(X, D).\np(X, D) <- f(X, D)."
    with pytest.raises(ValidationError):
        validate_program(parse_program(text))


# --- EDB loading


def test_load_three_arcs(tmp_path):
    f = tmp_path / "arc.tsv"
    f.write_text("1 4 10\n1 3 4\n3 4 3")
    store = load_edb(f, "arc", 3)
    assert store.relation("arc") == {(1, 4, 10), (1, 3, 4), (3, 4, 3)}


def test_comment_only_file(tmp_path):
    f = tmp_path / "arc.tsv"
    f.write_text("# comment only")
    assert len(load_edb(f, "arc", 3)) == 0


def test_arity_mismatch_line(tmp_path):
    f = tmp_path / "arc.tsv"
    f.write_text("1 4\n")
    with pytest.raises(EdbError) as info:
        load_edb(f, "arc", 3)
    assert info.value.line == 1


def test_overflow_and_float_rejected(tmp_path):
    f = tmp_path / "arc.tsv"
    f.write_text("1 2 3\n1 2 9223372036854775808\n")
    with pytest.raises(EdbError) as info:
        load_edb(f, "arc", 3)
    assert info.value.line == 2
    f.write_text("1 2 0.5\n")
    with pytest.raises(EdbError):
        load_edb(f, "arc", 3)


def test_undirected_and_dedup(tmp_path):
    f = tmp_path / "arc.tsv"
    f.write_text("1 2 5\n1 2 5\n\t2  3 1\n")
    store = load_edb(f, "arc", 3, undirected=True)
    assert store.relation("arc") == {(1, 2, 5), (2, 1, 5), (2, 3, 1), (3, 2, 1)}


def test_load_is_deterministic(tmp_path):
    f = tmp_path / "arc.tsv"
    f.write_text("a b 1\nb c 2\n")
    s1, s2 = SymbolTable(), SymbolTable()
    assert load_edb(f, "arc", 3, symbols=s1) == load_edb(f, "arc", 3, symbols=s2)
