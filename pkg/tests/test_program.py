import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastplp.program import (
    Atom,
    Clause,
    Deterministic,
    Fixed,
    Learnable,
    Literal,
    ParseError,
    Program,
    parse_atom,
    parse_program,
)


def test_fixed_fact():
    prog = parse_program("0.3::neighbor(X,Y).")
    (clause,) = prog.clauses
    assert clause.label == Fixed(0.3)
    assert clause.head == Atom("neighbor", ("X", "Y"))
    assert clause.is_fact


def test_deterministic_rule():
    prog = parse_program("calls(X,Y) :- alarm(X), neighbor(X,Y).")
    (clause,) = prog.clauses
    assert clause.label == Deterministic()
    assert clause.body == (
        Literal(Atom("alarm", ("X",))),
        Literal(Atom("neighbor", ("X", "Y"))),
    )


def test_learnable_default_init():
    prog = parse_program("t(_)::alarm(X) :- fire(X).")
    assert prog.clauses[0].label == Learnable(0.5, 0)
    assert prog.params == [(0, 0.5)]


def test_learnable_ids_follow_source_order():
    prog = parse_program("t(0.2)::a.\n0.4::b.\nt(_)::c :- a.\nd :- b.\nt(0.9)::d :- c.\n")
    assert [c.label for c in prog.clauses] == [
        Learnable(0.2, 0), Fixed(0.4), Learnable(0.5, 1), Deterministic(), Learnable(0.9, 2),
    ]
    assert prog.init_theta() == [0.2, 0.5, 0.9]


def test_comments_whitespace_negation_and_propositional_atoms():
    text = """
    % a comment line
    0.5::b.   % trailing comment
    h :- \\+ b , c.
    """
    prog = parse_program(text)
    assert len(prog.clauses) == 2
    assert prog.clauses[1].body[0] == Literal(Atom("b"), negated=True)
    assert prog.clauses[1].body[1] == Literal(Atom("c"))


def test_constants_harvested():
    prog = parse_program("p(a, X).\nq(1) :- p(b, Y).")
    assert prog.constants == {"a", "b", "1"}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("h :- b", "expected dot"),
        ("1.5::h.", "outside [0,1]"),
        ("t(0)::h.", "outside (0,1)"),
        ("t(1.0)::h.", "outside (0,1)"),
        ("p(a).\np(a,b).", "arity"),
        ("h :- ?b.", "unexpected character"),
        ("q(x)::h.", "invalid probability label"),
        ("h(.", "expected a term"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment.replace("(", r"\(").replace(")", r"\)").replace("[", r"\[").replace("]", r"\]")):
        parse_program(text)


def test_error_position():
    with pytest.raises(ParseError) as info:
        parse_program("a.\nb :- c d.")
    assert (info.value.line, info.value.col) == (2, 8)


def test_anonymous_variables_are_distinct():
    clause = parse_program("p(X) :- q(X,_), r(_).").clauses[0]
    assert len(clause.variables()) == 3


def test_parse_atom():
    assert parse_atom("calls(a,b)") == Atom("calls", ("a", "b"))
    assert parse_atom("h") == Atom("h")


# ---------------------------------------------------------------------------
# Round trip
# ---------------------------------------------------------------------------

PREDICATES = {"p": 0, "q": 1, "r": 2, "s": 1}
terms = st.sampled_from(["a", "b", "c1", "7", "X", "Y", "Zed"])


@st.composite
def atoms(draw):
    pred = draw(st.sampled_from(sorted(PREDICATES)))
    args = tuple(draw(terms) for _ in range(PREDICATES[pred]))
    return Atom(pred, args)


labels = st.one_of(
    st.just(Deterministic()),
    st.floats(0, 1).map(Fixed),
    st.floats(0.001, 0.999).map(lambda p: Learnable(p, -1)),
)


@st.composite
def programs(draw):
    clauses = []
    n_params = 0
    for _ in range(draw(st.integers(1, 6))):
        label = draw(labels)
        if isinstance(label, Learnable):
            label = Learnable(label.init, n_params)
            n_params += 1
        body = tuple(
            Literal(draw(atoms()), draw(st.booleans())) for _ in range(draw(st.integers(0, 3)))
        )
        clauses.append(Clause(draw(atoms()), body, label))
    return clauses


@settings(max_examples=150, deadline=None)
@given(programs())
def test_round_trip(clauses):
    text = "".join(f"{c}\n" for c in clauses)
    prog = parse_program(text)
    assert list(prog.clauses) == clauses
    again = parse_program(str(prog))
    assert again == prog


def test_program_str_reparses_identically():
    prog = parse_program("t(_)::h.\n0.25::h :- b, \\+c.\nc.\n")
    assert parse_program(str(prog)) == prog
    assert isinstance(prog, Program)
