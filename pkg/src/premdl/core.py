"""Datalog dialect: terms, rules, programs, the text grammar and EDB loading.

Grammar (one rule per ``.``)::

    path(X, Y, min<D>) <- path(X, Z, Dxz), arc(Z, Y, Dzy), D = Dxz + Dzy.
    @prem_pushed path.

Body goals are atoms, arithmetic (``V = A + B``), comparisons (``<``, ``<=``,
``=``), partition guards (``h(X) = 3``) and ``is_min((X, Z), D)`` /
``is_max(...)`` filters.  ``%`` and ``#`` start comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Union

import networkx as nx

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
# interned strings live above every integer a user is likely to write
INTERN_BASE = 2**62

MIN = "min"
MAX = "max"


class DatalogError(Exception):
    """Base class for parse, validation and load errors."""


class ParseError(DatalogError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ArityError(DatalogError):
    pass


class UnsafeRuleError(DatalogError):
    pass


class ValidationError(DatalogError):
    pass


class EdbError(DatalogError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"{message} (line {line})" if line is not None else message)
        self.line = line


class ArithmeticOverflow(ArithmeticError):
    pass


def checked_add(a: int, b: int) -> int:
    s = a + b
    if s < INT64_MIN or s > INT64_MAX:
        raise ArithmeticOverflow(f"64-bit overflow computing {a} + {b}")
    return s


class SymbolTable:
    """Interns strings to integers so runtime tuples are all-integer."""

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []

    def intern(self, name: str) -> int:
        ident = self._ids.get(name)
        if ident is None:
            ident = INTERN_BASE + len(self._names)
            self._ids[name] = ident
            self._names.append(name)
        return ident

    def name(self, value: int) -> str | None:
        idx = value - INTERN_BASE
        if 0 <= idx < len(self._names):
            return self._names[idx]
        return None

    def render(self, value: int) -> str:
        name = self.name(value)
        return str(value) if name is None else name


SYMBOLS = SymbolTable()


# --------------------------------------------------------------------- terms


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Const:
    value: int
    text: str | None = field(default=None, compare=False)

    def __str__(self) -> str:
        if self.text is None:
            return str(self.value)
        if re.fullmatch(r"[a-z][A-Za-z0-9_]*", self.text):
            return self.text
        return '"' + self.text.replace('"', '\\"') + '"'


Term = Union[Var, Const]


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> Iterator[Var]:
        return (a for a in self.args if isinstance(a, Var))

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(map(str, self.args))})"


@dataclass(frozen=True, slots=True)
class AggregateHead:
    kind: str
    cost_position: int
    groupby_positions: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Arithmetic:
    target: Var
    operands: tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.target} = {' + '.join(map(str, self.operands))}"


@dataclass(frozen=True, slots=True)
class Comparison:
    left: Term
    op: str
    right: Term

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True, slots=True)
class Guard:
    """Partition guard ``h(args) = worker``."""

    args: tuple[Term, ...]
    worker: int

    def __str__(self) -> str:
        return f"h({', '.join(map(str, self.args))}) = {self.worker}"


@dataclass(frozen=True, slots=True)
class IsMin:
    """``is_min((K...), C)``: C is the best cost for key K among the atom that binds C."""

    kind: str
    key: tuple[Var, ...]
    cost: Var

    def __str__(self) -> str:
        return f"is_{self.kind}(({', '.join(map(str, self.key))}), {self.cost})"


Goal = Union[Atom, Arithmetic, Comparison, Guard, IsMin]


@dataclass(frozen=True)
class Rule:
    head: Atom
    head_aggregate: AggregateHead | None = None
    body: tuple[Goal, ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def body_atoms(self) -> list[Atom]:
        return [g for g in self.body if isinstance(g, Atom)]

    @property
    def arithmetic(self) -> list[Arithmetic]:
        return [g for g in self.body if isinstance(g, Arithmetic)]

    @property
    def comparisons(self) -> list[Comparison]:
        return [g for g in self.body if isinstance(g, Comparison)]

    @property
    def guards(self) -> list[Guard]:
        return [g for g in self.body if isinstance(g, Guard)]

    def format(self) -> str:
        args = []
        agg = self.head_aggregate
        for pos, term in enumerate(self.head.args):
            if agg is not None and pos == agg.cost_position:
                args.append(f"{agg.kind}<{term}>")
            else:
                args.append(str(term))
        head = f"{self.head.predicate}({', '.join(args)})"
        if not self.body:
            return head + "."
        return f"{head} <- {', '.join(map(str, self.body))}."

    __str__ = format


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...] = ()
    prem_pushed: frozenset[str] = frozenset()

    @property
    def idb_predicates(self) -> frozenset[str]:
        return frozenset(r.head.predicate for r in self.rules)

    @property
    def edb_predicates(self) -> frozenset[str]:
        idb = self.idb_predicates
        return frozenset(
            a.predicate for r in self.rules for a in r.body_atoms if a.predicate not in idb
        )

    def arities(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rules:
            for atom in [r.head, *r.body_atoms]:
                out.setdefault(atom.predicate, atom.arity)
        return out

    def rules_for(self, predicate: str) -> list[Rule]:
        return [r for r in self.rules if r.head.predicate == predicate]

    def aggregate_of(self, predicate: str) -> AggregateHead | None:
        for r in self.rules_for(predicate):
            if r.head_aggregate is not None:
                return r.head_aggregate
        return None

    def format(self) -> str:
        lines = []
        if self.prem_pushed:
            lines.append(f"@prem_pushed {', '.join(sorted(self.prem_pushed))}.")
        lines.extend(r.format() for r in self.rules)
        return "\n".join(lines) + ("\n" if lines else "")

    __str__ = format


def format_program(program: Program) -> str:
    return program.format()


# -------------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>[%#][^\n]*)
  | (?P<arrow><-|:-)
  | (?P<op><=|>=|≤|≥|<|>|=)
  | (?P<langle>⟨)
  | (?P<rangle>⟩)
  | (?P<int>-?\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<punct>[(),.+@])
    """,
    re.VERBOSE,
)


@dataclass(slots=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        assert kind is not None
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            kind = m.group() if kind == "punct" else kind
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, symbols: SymbolTable):
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols
        self.anon = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return ParseError(f"{message}, found {found!r}", tok.line, tok.col)

    def expect(self, kind: str) -> _Tok:
        tok = self.tok
        if tok.kind != kind:
            raise self.error(f"expected {kind!r}")
        self.i += 1
        return tok

    def accept(self, kind: str) -> _Tok | None:
        if self.tok.kind == kind:
            self.i += 1
            return self.toks[self.i - 1]
        return None

    def program(self) -> Program:
        rules: list[Rule] = []
        pushed: set[str] = set()
        while self.tok.kind != "eof":
            if self.accept("@"):
                name = self.expect("ident")
                if name.text != "prem_pushed":
                    raise self.error("unknown directive", name)
                pushed.add(self.expect("ident").text)
                while self.accept(","):
                    pushed.add(self.expect("ident").text)
                self.expect(".")
            else:
                rules.append(self.rule())
        return Program(tuple(rules), frozenset(pushed))

    def rule(self) -> Rule:
        start = self.tok
        head, agg = self.head()
        body: list[Goal] = []
        if self.accept("arrow"):
            body.append(self.goal())
            while self.accept(","):
                body.append(self.goal())
        self.expect(".")
        return Rule(head, agg, tuple(body), line=start.line)

    def head(self) -> tuple[Atom, AggregateHead | None]:
        name = self.expect("ident")
        self.expect("(")
        args: list[Term] = []
        agg_kind: str | None = None
        cost_pos = -1
        while True:
            tok = self.tok
            if (
                tok.kind == "ident"
                and tok.text in (MIN, MAX)
                and self.peek().text in ("<", "⟨")
            ):
                if agg_kind is not None:
                    raise self.error("only one aggregate per head is allowed")
                self.i += 2
                var = self.expect("var")
                if self.tok.text not in (">", "⟩"):
                    raise self.error("expected '>' closing the aggregate")
                self.i += 1
                agg_kind, cost_pos = tok.text, len(args)
                args.append(Var(var.text))
            else:
                term = self.term()
                if isinstance(term, Var) and term.name.startswith("_"):
                    raise self.error("anonymous variable in rule head", tok)
                args.append(term)
            if not self.accept(","):
                break
        self.expect(")")
        atom = Atom(name.text, tuple(args))
        if agg_kind is None:
            return atom, None
        groupby = tuple(p for p in range(len(args)) if p != cost_pos)
        return atom, AggregateHead(agg_kind, cost_pos, groupby)

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            if tok.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return Var(tok.text)
        if tok.kind == "int":
            self.i += 1
            value = int(tok.text)
            if not INT64_MIN <= value <= INT64_MAX:
                raise self.error("integer constant out of 64-bit range", tok)
            return Const(value)
        if tok.kind == "string":
            self.i += 1
            text = bytes(tok.text[1:-1], "utf-8").decode("unicode_escape")
            return Const(self.symbols.intern(text), text)
        if tok.kind == "ident":
            self.i += 1
            return Const(self.symbols.intern(tok.text), tok.text)
        raise self.error("expected a term")

    def goal(self) -> Goal:
        tok = self.tok
        if tok.kind == "ident" and self.peek().kind == "(":
            if tok.text in ("is_min", "is_max"):
                return self.is_min()
            if tok.text == "h" and self._guard_ahead():
                return self.guard()
            return self.atom()
        left = self.term()
        op_tok = self.expect("op")
        op = {"≤": "<=", "≥": ">="}.get(op_tok.text, op_tok.text)
        operands = [self.term()]
        while self.accept("+"):
            operands.append(self.term())
        if len(operands) > 1:
            if op != "=" or not isinstance(left, Var):
                raise self.error("arithmetic must have the form Var = A + B", op_tok)
            return Arithmetic(left, tuple(operands))
        right = operands[0]
        if op == ">":
            return Comparison(right, "<", left)
        if op == ">=":
            return Comparison(right, "<=", left)
        return Comparison(left, op, right)

    def _guard_ahead(self) -> bool:
        depth, j = 0, self.i + 1
        while j < len(self.toks):
            kind = self.toks[j].kind
            if kind == "(":
                depth += 1
            elif kind == ")":
                depth -= 1
                if depth == 0:
                    return self.toks[j + 1].text == "="
            elif kind == "eof":
                return False
            j += 1
        return False

    def atom(self) -> Atom:
        name = self.expect("ident")
        self.expect("(")
        args = [self.term()]
        while self.accept(","):
            args.append(self.term())
        self.expect(")")
        return Atom(name.text, tuple(args))

    def guard(self) -> Guard:
        self.expect("ident")
        self.expect("(")
        args = [self.term()]
        while self.accept(","):
            args.append(self.term())
        self.expect(")")
        op = self.expect("op")
        if op.text != "=":
            raise self.error("expected '=' in partition guard", op)
        worker = self.expect("int")
        return Guard(tuple(args), int(worker.text))

    def is_min(self) -> IsMin:
        kind = self.expect("ident").text[3:]
        self.expect("(")
        key: list[Var] = []
        if self.accept("("):
            key.append(Var(self.expect("var").text))
            while self.accept(","):
                key.append(Var(self.expect("var").text))
            self.expect(")")
        else:
            key.append(Var(self.expect("var").text))
        self.expect(",")
        cost = Var(self.expect("var").text)
        self.expect(")")
        return IsMin(kind, tuple(key), cost)


def parse_program(text: str, symbols: SymbolTable | None = None) -> Program:
    """Parse program text, then check arities and rule safety."""
    program = _Parser(text, symbols or SYMBOLS).program()
    check_arities(program)
    for rule in program.rules:
        check_safety(rule)
    return program


def check_arities(program: Program) -> dict[str, int]:
    seen: dict[str, int] = {}
    for rule in program.rules:
        for atom in [rule.head, *rule.body_atoms]:
            known = seen.setdefault(atom.predicate, atom.arity)
            if known != atom.arity:
                raise ArityError(
                    f"predicate {atom.predicate!r} used with arity {atom.arity} "
                    f"but earlier with arity {known} (line {rule.line})"
                )
    return seen


def bound_variables(rule: Rule) -> set[Var]:
    """Variables bound by positive atoms, then closed under arithmetic and equality."""
    bound = {v for atom in rule.body_atoms for v in atom.variables()}
    changed = True
    while changed:
        changed = False
        for goal in rule.body:
            if isinstance(goal, Arithmetic) and goal.target not in bound:
                if all(not isinstance(o, Var) or o in bound for o in goal.operands):
                    bound.add(goal.target)
                    changed = True
            elif isinstance(goal, Comparison) and goal.op == "=":
                left, right = goal.left, goal.right
                if isinstance(left, Var) and left not in bound and (
                    isinstance(right, Const) or right in bound
                ):
                    bound.add(left)
                    changed = True
                elif isinstance(right, Var) and right not in bound and (
                    isinstance(left, Const) or left in bound
                ):
                    bound.add(right)
                    changed = True
    return bound


def check_safety(rule: Rule) -> None:
    bound = bound_variables(rule)

    def need(terms: Iterable[Term], what: str) -> None:
        for t in terms:
            if isinstance(t, Var) and t not in bound:
                raise UnsafeRuleError(
                    f"variable {t} in {what} is not bound by the body: {rule.format()}"
                )

    need(rule.head.args, "the head")
    for goal in rule.body:
        if isinstance(goal, Arithmetic):
            need(goal.operands, "an arithmetic goal")
        elif isinstance(goal, Comparison):
            need((goal.left, goal.right), "a comparison")
        elif isinstance(goal, Guard):
            need(goal.args, "a partition guard")
        elif isinstance(goal, IsMin):
            need((*goal.key, goal.cost), "an is_min goal")
    agg = rule.head_aggregate
    if agg is not None and not isinstance(rule.head.args[agg.cost_position], Var):
        raise UnsafeRuleError(f"aggregate cost must be a variable: {rule.format()}")


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Clique:
    predicates: tuple[str, ...]
    recursive: bool
    linear: bool
    mirrors: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationReport:
    strata: list[tuple[str, ...]]
    cliques: list[Clique]

    def stratum_of(self, predicate: str) -> int:
        for k, stratum in enumerate(self.strata):
            if predicate in stratum:
                return k
        raise KeyError(predicate)

    def clique_of(self, predicate: str) -> Clique:
        for clique in self.cliques:
            if predicate in clique.predicates:
                return clique
        raise KeyError(predicate)


def dependency_graph(program: Program) -> nx.DiGraph:
    graph = nx.DiGraph()
    idb = sorted(program.idb_predicates)
    graph.add_nodes_from(idb)
    for rule in program.rules:
        for atom in rule.body_atoms:
            if atom.predicate in program.idb_predicates:
                graph.add_edge(atom.predicate, rule.head.predicate)
    return graph


def is_copy_rule(rule: Rule) -> bool:
    atoms = rule.body_atoms
    others = [g for g in rule.body if not isinstance(g, (Atom, Guard))]
    return (
        len(atoms) == 1
        and not others
        and atoms[0].args == rule.head.args
        and atoms[0].predicate != rule.head.predicate
        and len(set(rule.head.args)) == len(rule.head.args)
    )


def find_mirrors(program: Program, clique: Iterable[str]) -> dict[str, str]:
    """Predicates of a clique defined only by copy rules from another clique member."""
    members = set(clique)
    mirrors: dict[str, str] = {}
    for pred in sorted(members):
        rules = program.rules_for(pred)
        if rules and all(is_copy_rule(r) for r in rules):
            sources = {r.body_atoms[0].predicate for r in rules}
            if len(sources) == 1:
                (src,) = sources
                if src in members:
                    mirrors[pred] = src
    return mirrors


def validate_program(program: Program) -> ValidationReport:
    check_arities(program)
    graph = dependency_graph(program)
    sccs = [tuple(sorted(c)) for c in nx.strongly_connected_components(graph)]
    index = {p: k for k, comp in enumerate(sccs) for p in comp}
    cond = nx.DiGraph()
    cond.add_nodes_from(range(len(sccs)))
    for u, v in graph.edges:
        if index[u] != index[v]:
            cond.add_edge(index[u], index[v])
    order = list(nx.lexicographical_topological_sort(cond, key=lambda k: sccs[k]))
    strata = [sccs[k] for k in order]

    cliques = []
    for stratum in strata:
        members = set(stratum)
        recursive = len(stratum) > 1 or graph.has_edge(stratum[0], stratum[0])
        mirrors = find_mirrors(program, stratum) if recursive else {}
        linear = True
        for rule in program.rules:
            if rule.head.predicate in members:
                n = sum(
                    1
                    for a in rule.body_atoms
                    if a.predicate in members and a.predicate not in mirrors
                )
                if n > 1:
                    linear = False
        cliques.append(Clique(stratum, recursive, linear, mirrors))

    for pred in sorted(program.idb_predicates):
        aggs = {r.head_aggregate for r in program.rules_for(pred)}
        if len(aggs) > 1:
            raise ValidationError(
                f"rules for {pred!r} disagree on their head aggregate: {sorted(map(str, aggs))}"
            )
        (agg,) = aggs
        clique = next(c for c in cliques if pred in c.predicates)
        if agg is not None and clique.recursive and pred not in program.prem_pushed:
            raise ValidationError(
                f"aggregate on {pred!r} is used inside recursion without @prem_pushed; "
                "compute it in a higher stratum or mark the predicate prem_pushed"
            )
    return ValidationReport(strata, cliques)


# ------------------------------------------------------------ relation store


class RelationStore:
    """Per-predicate sets of fixed-arity integer tuples."""

    def __init__(self, relations: dict[str, Iterable[tuple[int, ...]]] | None = None):
        self._rel: dict[str, set[tuple[int, ...]]] = {}
        for pred, tuples in (relations or {}).items():
            for t in tuples:
                self.add(pred, t)
            self._rel.setdefault(pred, set())

    def add(self, predicate: str, tup: tuple[int, ...]) -> bool:
        rel = self._rel.setdefault(predicate, set())
        if rel:
            arity = len(next(iter(rel)))
            if len(tup) != arity:
                raise ArityError(f"tuple {tup} does not match arity {arity} of {predicate!r}")
        if tup in rel:
            return False
        rel.add(tup)
        return True

    def relation(self, predicate: str) -> set[tuple[int, ...]]:
        return self._rel.get(predicate, set())

    @property
    def predicates(self) -> list[str]:
        return sorted(self._rel)

    def union(self, other: RelationStore) -> RelationStore:
        out = RelationStore()
        for store in (self, other):
            for pred in store.predicates:
                out._rel.setdefault(pred, set()).update(store.relation(pred))
        return out

    def __len__(self) -> int:
        return sum(len(r) for r in self._rel.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RelationStore):
            return NotImplemented
        preds = set(self._rel) | set(other._rel)
        return all(self.relation(p) == other.relation(p) for p in preds)

    def __repr__(self) -> str:
        sizes = ", ".join(f"{p}: {len(self._rel[p])}" for p in self.predicates)
        return f"RelationStore({sizes})"


def _parse_field(text: str, lineno: int, symbols: SymbolTable) -> int:
    if re.fullmatch(r"[+-]?\d+", text):
        value = int(text)
        if not INT64_MIN <= value <= INT64_MAX:
            raise EdbError(f"integer {text} overflows 64 bits", lineno)
        return value
    if re.fullmatch(r"[+-]?\d*\.\d*([eE][+-]?\d+)?", text):
        raise EdbError(f"non-integer numeric field {text!r}", lineno)
    return symbols.intern(text)


def read_tuples(
    path: str | Path, arity: int, symbols: SymbolTable | None = None
) -> list[tuple[int, ...]]:
    symbols = symbols or SYMBOLS
    out = []
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EdbError(f"file is not UTF-8: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != arity:
            raise EdbError(f"expected {arity} fields, found {len(fields)}", lineno)
        out.append(tuple(_parse_field(f, lineno, symbols) for f in fields))
    return out


def load_edb(
    path: str | Path,
    predicate: str,
    arity: int,
    *,
    undirected: bool = False,
    symbols: SymbolTable | None = None,
    store: RelationStore | None = None,
) -> RelationStore:
    """Load a whitespace-separated tuple file into ``predicate``.

    With ``undirected`` the first two fields are also inserted swapped.
    """
    store = store if store is not None else RelationStore()
    store._rel.setdefault(predicate, set())
    for tup in read_tuples(path, arity, symbols):
        store.add(predicate, tup)
        if undirected and arity >= 2:
            store.add(predicate, (tup[1], tup[0], *tup[2:]))
    return store


def sniff_arity(path: str | Path) -> int | None:
    """Field count of the first data line, or None for an empty file."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                return len(stripped.split())
    return None
