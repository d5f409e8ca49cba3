from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastplp.grounding import (
    CycleError,
    GroundingError,
    count_instances,
    ground,
    head_groups,
)
from fastplp.program import Atom, parse_program


def test_alarm_two_constants(alarm_program):
    gp = ground(alarm_program, ["a", "b"])
    per_pred = Counter(a.predicate for a in gp.atoms)
    assert gp.n_atoms == 14
    assert per_pred == {"fire": 2, "burglary": 2, "neighbor": 4, "alarm": 2, "calls": 4}
    assert len(gp.clauses) == 16
    per_source = Counter(gc.source for gc in gp.clauses)
    assert [per_source[i] for i in range(6)] == [2, 2, 4, 2, 2, 4]


def test_reflexive_pairs_are_grounded(alarm_program):
    gp = ground(alarm_program, ["a", "b"])
    assert Atom("neighbor", ("a", "a")) in gp.index


def test_atoms_sorted_lexicographically(alarm_program):
    gp = ground(alarm_program, ["b", "a"])
    assert list(gp.atoms) == sorted(gp.atoms)


def test_propositional_identity():
    prog = parse_program("0.5::b.\nt(_)::h :- b, \\+c.\nc.\n")
    gp = ground(prog, ["x", "y"])
    assert len(gp.clauses) == len(prog.clauses)
    for gc, clause in zip(gp.clauses, prog.clauses):
        assert gp.atoms[gc.head] == clause.head
        assert [(gp.atoms[a], not pos) for a, pos in gc.body] == [
            (lit.atom, lit.negated) for lit in clause.body
        ]


def test_cycle_rejected():
    with pytest.raises(CycleError) as info:
        ground(parse_program("a :- b.\nb :- a.\n"))
    names = [str(a) for a in info.value.cycle]
    assert names[0] == names[-1]
    assert set(names) == {"a", "b"}
    assert "a -> b -> a" in str(info.value) or "b -> a -> b" in str(info.value)


def test_relational_cycle_through_grounding():
    prog = parse_program("p(X) :- q(X).\nq(X) :- p(X).\n")
    with pytest.raises(CycleError):
        ground(prog, ["a"])


def test_empty_domain_with_variables():
    with pytest.raises(GroundingError):
        ground(parse_program("0.3::p(X)."))


def test_duplicates_removed():
    prog = parse_program("h :- b, b.\nh :- b, b.\n")
    gp = ground(prog)
    # same body from two different source clauses is kept, within a clause it is unique
    assert len(gp.clauses) == 2
    prog = parse_program("p(a) :- q(X).\n")
    gp = ground(prog, ["a"])
    assert len(gp.clauses) == 1


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 5), arities=st.lists(st.integers(0, 3), min_size=1, max_size=3))
def test_grounding_count_law(n, arities):
    """n ** v instances for a clause with v distinct variables, before deduplication."""
    variables = ["X", "Y", "Z"]
    body = ", ".join(
        f"b{i}(" + ",".join(variables[:a]) + ")" if a else f"b{i}" for i, a in enumerate(arities)
    )
    head_vars = variables[: max(arities)]
    head = "h(" + ",".join(head_vars) + ")" if head_vars else "h"
    prog = parse_program(f"t(_)::{head} :- {body}.")
    constants = [f"k{i}" for i in range(n)]
    gp = ground(prog, constants)
    v = len(prog.clauses[0].variables())
    assert count_instances(prog.clauses[0], n) == n ** v
    # every variable of this clause occurs in the head, so nothing collapses
    assert len(gp.clauses) == n ** v


def test_topological_order_respects_dependencies(alarm_program):
    gp = ground(alarm_program, ["a", "b", "c"])
    position = {atom: i for i, atom in enumerate(gp.order)}
    assert sorted(gp.order) == list(range(gp.n_atoms))
    for gc in gp.clauses:
        for b, _ in gc.body:
            assert position[b] < position[gc.head]


# ---------------------------------------------------------------------------
# Head groups
# ---------------------------------------------------------------------------

def test_alarm_groups(alarm_program):
    gp = ground(alarm_program, ["a", "b"])
    groups = head_groups(gp)
    assert [g.head_predicate for g in groups] == ["fire", "burglary", "neighbor", "alarm", "calls"]
    calls = groups[-1]
    assert len(calls.ground_heads) == 4
    assert all(len(bodies) == 1 and len(bodies[0]) == 1 for _, bodies in calls.ground_heads)
    alarm = groups[3]
    assert alarm.schema_clauses == (3, 4)


def test_body_only_variable_gives_multiplicity():
    gp = ground(parse_program("t(_)::p(X) :- q(X,Y)."), ["a", "b"])
    (group,) = head_groups(gp)
    assert len(group.ground_heads) == 2
    for _, (bodies,) in group.ground_heads:
        assert len(bodies) == 2


def test_two_clause_group(two_clause):
    program, gp = two_clause
    (group,) = head_groups(gp)
    assert group.schema_clauses == (0, 1)
    ((head, (fact_bodies, rule_bodies)),) = group.ground_heads
    assert gp.atoms[head] == Atom("h")
    assert fact_bodies == ((),)
    assert len(rule_bodies) == 1


def test_every_ground_clause_in_exactly_one_group_entry(alarm_program):
    gp = ground(alarm_program, ["a", "b", "c"])
    seen = Counter()
    for group in head_groups(gp):
        for head, per_clause in group.ground_heads:
            for cid, bodies in zip(group.schema_clauses, per_clause):
                for body in bodies:
                    seen[(head, body, cid)] += 1
    expected = Counter((gc.head, gc.body, gc.source) for gc in gp.clauses)
    assert seen == expected
