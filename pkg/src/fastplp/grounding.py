"""Grounding over a constant domain, dependency graph and head groups."""

from __future__ import annotations

import heapq
import itertools
from collections import defaultdict
from dataclasses import dataclass, field

from .program import Atom, Clause, Label, Program


class GroundingError(ValueError):
    pass


class CycleError(GroundingError):
    def __init__(self, cycle: list[Atom]):
        self.cycle = cycle
        path = " -> ".join(str(a) for a in cycle)
        super().__init__(f"dependency graph is cyclic: {path}")


# A signed body literal: (atom index, positive?)
SignedAtom = tuple[int, bool]


@dataclass(frozen=True)
class GroundClause:
    head: int
    body: tuple[SignedAtom, ...]
    label: Label
    source: int


@dataclass(frozen=True)
class GroundProgram:
    """Ground atoms, ground clauses and the subgoal -> head dependency graph.

    Atoms are indexed in lexicographic order of (predicate, arguments) when
    built by :func:`ground`.  ``order`` is a topological order of atom indices
    in which every body atom precedes the heads it supports.
    """

    atoms: tuple[Atom, ...]
    clauses: tuple[GroundClause, ...]
    edges: frozenset[tuple[int, int]]
    order: tuple[int, ...]
    program: Program
    index: dict[Atom, int] = field(compare=False, repr=False)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_params(self) -> int:
        return self.program.n_params

    def atom_index(self, atom: Atom) -> int:
        return self.index[atom]

    def clauses_by_head(self) -> dict[int, list[GroundClause]]:
        out: dict[int, list[GroundClause]] = defaultdict(list)
        for gc in self.clauses:
            out[gc.head].append(gc)
        return out


def _instances(clause: Clause, constants: list[str]):
    variables = clause.variables()
    for values in itertools.product(constants, repeat=len(variables)):
        binding = dict(zip(variables, values))
        head = clause.head.substitute(binding)
        body = tuple((lit.atom.substitute(binding), not lit.negated) for lit in clause.body)
        yield head, body


def count_instances(clause: Clause, n_constants: int) -> int:
    return n_constants ** len(clause.variables())


def topological_order(n: int, edges) -> tuple[int, ...]:
    """Kahn's algorithm, smallest index first; raises CycleError on a cycle."""
    succ: dict[int, list[int]] = defaultdict(list)
    indeg = [0] * n
    for u, v in edges:
        succ[u].append(v)
        indeg[v] += 1
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) < n:
        raise CycleError(_find_cycle(n, succ, indeg))
    return tuple(order)


def _find_cycle(n, succ, indeg) -> list[int]:
    # every remaining node has an unresolved predecessor, so walking
    # predecessors inside the residual graph must revisit a node
    remaining = {i for i in range(n) if indeg[i] > 0}
    pred: dict[int, int] = {}
    for u in remaining:
        for v in succ[u]:
            if v in remaining:
                pred.setdefault(v, u)
    node = min(remaining)
    seen: dict[int, int] = {}
    path = []
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = pred[node]
    cycle = path[seen[node]:]
    cycle.reverse()
    return cycle + [cycle[0]]


def ground(program: Program, constants=None) -> GroundProgram:
    """Ground every clause over the constant domain in every possible way.

    The domain is the program's own constants plus ``constants``.  Repeated
    constants are substituted too, so ``neighbor(a,a)`` is produced.
    Duplicate ground clauses (same head, body and source clause) are dropped.
    """
    domain = sorted(program.constants | frozenset(constants or ()))
    if not domain and any(c.variables() for c in program.clauses):
        raise GroundingError("empty constant set for a program with variables")

    raw = []
    seen = set()
    atoms: set[Atom] = set()
    for cid, clause in enumerate(program.clauses):
        for head, body in _instances(clause, domain):
            key = (head, body, cid)
            if key in seen:
                continue
            seen.add(key)
            raw.append(key)
            atoms.add(head)
            atoms.update(a for a, _ in body)

    atom_list = tuple(sorted(atoms))
    index = {a: i for i, a in enumerate(atom_list)}
    clauses = tuple(
        GroundClause(
            index[head],
            tuple((index[a], pos) for a, pos in body),
            program.clauses[cid].label,
            cid,
        )
        for head, body, cid in raw
    )
    edges = frozenset((b, gc.head) for gc in clauses for b, _ in gc.body)
    try:
        order = topological_order(len(atom_list), edges)
    except CycleError as err:
        raise CycleError([atom_list[i] for i in err.cycle]) from None
    return GroundProgram(atom_list, clauses, edges, order, program, index)


@dataclass(frozen=True)
class HeadGroup:
    """All schema clauses sharing one head predicate.

    ``ground_heads`` holds ``(head atom index, bodies)`` where ``bodies[i]``
    lists the ground body instances of ``schema_clauses[i]`` for that head.
    A fact contributes one empty body per ground head it produces.
    """

    head_predicate: str
    schema_clauses: tuple[int, ...]
    ground_heads: tuple[tuple[int, tuple[tuple[tuple[SignedAtom, ...], ...], ...]], ...]

    @property
    def k(self) -> int:
        return len(self.schema_clauses)

    def labels(self, program: Program) -> tuple[Label, ...]:
        return tuple(program.clauses[c].label for c in self.schema_clauses)


def head_groups(gp: GroundProgram) -> list[HeadGroup]:
    """One group per head predicate, in order of first appearance in the program."""
    by_pred: dict[str, list[int]] = {}
    for cid, clause in enumerate(gp.program.clauses):
        by_pred.setdefault(clause.head.predicate, []).append(cid)

    per_head: dict[int, dict[int, list]] = defaultdict(lambda: defaultdict(list))
    for gc in gp.clauses:
        per_head[gc.head][gc.source].append(gc.body)

    heads_of: dict[str, list[int]] = defaultdict(list)
    for h in sorted(per_head):
        heads_of[gp.atoms[h].predicate].append(h)

    groups = []
    for pred, cids in by_pred.items():
        heads = heads_of.get(pred, [])
        ground_heads = tuple(
            (h, tuple(tuple(per_head[h].get(cid, ())) for cid in cids)) for h in heads
        )
        groups.append(HeadGroup(pred, tuple(cids), ground_heads))
    return groups
