"""Complete-data interpretations, sufficient statistics and forward sampling."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grounding import GroundProgram, HeadGroup
from .program import Deterministic, Fixed, Label, Learnable, ParseError, parse_atom

GENERATOR_ID = "numpy-PCG64"


class DataError(ValueError):
    pass


class InconsistentDataError(DataError):
    """A record is impossible under the program for every parameter value."""


@dataclass(frozen=True)
class InterpretationSet:
    """Truth assignments over all ground atoms, one row per record.

    ``records`` is a boolean ``(n_records, n_atoms)`` array; ``weights`` holds
    the multiplicity of each row (1 unless the set was compressed).
    """

    records: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.records.ndim != 2:
            raise ValueError("records must be a 2-d array")
        if len(self.weights) != len(self.records):
            raise ValueError("one weight per record required")
        if len(self.weights) and self.weights.min() <= 0:
            raise ValueError("record weights must be positive")

    @classmethod
    def from_rows(cls, rows, n_atoms: int, weights=None, meta=None) -> "InterpretationSet":
        records = np.asarray(rows, dtype=bool).reshape(-1, n_atoms)
        if weights is None:
            weights = np.ones(len(records), dtype=np.int64)
        return cls(records, np.asarray(weights, dtype=np.int64), dict(meta or {}))

    @property
    def n_atoms(self) -> int:
        return self.records.shape[1]

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    def __len__(self) -> int:
        return len(self.records)

    def compress(self) -> "InterpretationSet":
        """Merge identical records, keeping first-occurrence order."""
        if not len(self):
            return self
        packed = np.packbits(self.records, axis=1)
        keys = np.ascontiguousarray(packed).view(np.dtype((np.void, packed.shape[1]))).ravel()
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        w = np.bincount(inverse, weights=self.weights, minlength=len(first))
        order = np.argsort(first)
        return InterpretationSet(
            self.records[first[order]], w[order].astype(np.int64), self.meta
        )

    def expand(self) -> np.ndarray:
        return np.repeat(self.records, self.weights, axis=0)

    def subset(self, mask) -> "InterpretationSet":
        mask = np.asarray(mask)
        return InterpretationSet(self.records[mask], self.weights[mask], self.meta)

    def __add__(self, other: "InterpretationSet") -> "InterpretationSet":
        return InterpretationSet(
            np.concatenate([self.records, other.records]),
            np.concatenate([self.weights, other.weights]),
            self.meta,
        )


# ---------------------------------------------------------------------------
# Parsing and writing
# ---------------------------------------------------------------------------

def _looks_like_csv(text: str) -> bool:
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in "#%":
            continue
        return not line.endswith(".")
    return False


def parse_interpretations(text: str, gp: GroundProgram, fmt: str | None = None) -> InterpretationSet:
    """Read complete interpretations in block or CSV format.

    Block format: one ``atom.`` or ``\\+atom.`` per line, records separated
    by a line holding ``---``.  Lines starting with ``#`` or ``%`` are
    comments.  CSV: a header of 0-ary atom names and one 0/1 row per record.
    """
    fmt = fmt or ("csv" if _looks_like_csv(text) else "blocks")
    if fmt == "csv":
        return _parse_csv(text, gp)
    if fmt != "blocks":
        raise ValueError(f"unknown data format {fmt!r}")
    return _parse_blocks(text, gp)


def _lookup(gp: GroundProgram, text: str, where: str) -> int:
    try:
        atom = parse_atom(text)
    except ParseError as err:
        raise DataError(f"{where}: cannot parse atom {text!r}: {err}") from None
    try:
        return gp.atom_index(atom)
    except KeyError:
        raise DataError(f"{where}: unknown atom {atom}") from None


def _finish_record(values: dict[int, bool], gp: GroundProgram, where: str) -> list[bool]:
    if len(values) < gp.n_atoms:
        missing = next(i for i in range(gp.n_atoms) if i not in values)
        raise DataError(f"incomplete interpretation: {gp.atoms[missing]} unassigned ({where})")
    return [values[i] for i in range(gp.n_atoms)]


def _parse_blocks(text: str, gp: GroundProgram) -> InterpretationSet:
    rows = []
    values: dict[int, bool] = {}
    dirty = False
    meta = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line[0] in "#%":
            for token in line[1:].split():
                if "=" in token:
                    key, val = token.split("=", 1)
                    meta[key] = val
            continue
        block = len(rows)
        if line == "---":
            rows.append(_finish_record(values, gp, f"block {block}"))
            values, dirty = {}, False
            continue
        where = f"block {block}, line {lineno}"
        if not line.endswith("."):
            raise DataError(f"{where}: expected 'atom.' or '\\+atom.', got {line!r}")
        body = line[:-1].strip()
        truth = True
        if body.startswith("\\+"):
            truth, body = False, body[2:].strip()
        idx = _lookup(gp, body, where)
        if idx in values:
            raise DataError(f"{where}: duplicate atom {gp.atoms[idx]}")
        values[idx] = truth
        dirty = True
    if dirty:
        rows.append(_finish_record(values, gp, f"block {len(rows)}"))
    return InterpretationSet.from_rows(rows, gp.n_atoms, meta=meta)


def _parse_csv(text: str, gp: GroundProgram) -> InterpretationSet:
    lines = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in "#%"]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        return InterpretationSet.from_rows([], gp.n_atoms)
    columns = [_lookup(gp, name.strip(), "csv header") for name in header]
    if len(set(columns)) != len(columns):
        raise DataError("csv header: duplicate atom")
    if len(columns) < gp.n_atoms:
        missing = next(i for i in range(gp.n_atoms) if i not in set(columns))
        raise DataError(f"incomplete interpretation: {gp.atoms[missing]} unassigned (csv header)")
    rows = []
    for r, cells in enumerate(reader):
        if len(cells) != len(columns):
            raise DataError(f"csv row {r}: expected {len(columns)} values, got {len(cells)}")
        row = [False] * gp.n_atoms
        for col, cell in zip(columns, cells):
            cell = cell.strip()
            if cell not in ("0", "1"):
                raise DataError(f"csv row {r}: value {cell!r} is not 0/1")
            row[col] = cell == "1"
        rows.append(row)
    return InterpretationSet.from_rows(rows, gp.n_atoms)


def format_interpretations(data: InterpretationSet, gp: GroundProgram, header: str | None = None) -> str:
    out = io.StringIO()
    if header:
        out.write(f"# {header}\n")
    names = [str(a) for a in gp.atoms]
    for row in data.expand():
        for name, value in zip(names, row):
            out.write(f"{name}.\n" if value else f"\\+{name}.\n")
        out.write("---\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Sufficient statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupTable:
    """Counts over (configuration, head value) for one head group.

    Row ``c`` of ``configs`` is a multiplicity vector (satisfied ground bodies
    per schema clause); ``n_true[c]`` / ``n_false[c]`` count the
    (record, ground head) pairs showing that configuration with the head
    true / false.  Rows are sorted lexicographically.
    """

    head_predicate: str
    clause_ids: tuple[int, ...]
    labels: tuple[Label, ...]
    n_heads: int
    configs: np.ndarray
    n_true: np.ndarray
    n_false: np.ndarray

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def total(self) -> int:
        return int(self.n_true.sum() + self.n_false.sum())

    @property
    def param_ids(self) -> list[int]:
        return sorted(l.param_id for l in self.labels if isinstance(l, Learnable))

    @property
    def table(self) -> dict[tuple[int, ...], tuple[int, int]]:
        return {
            tuple(int(m) for m in cfg): (int(t), int(f))
            for cfg, t, f in zip(self.configs, self.n_true, self.n_false)
        }

    @classmethod
    def from_table(cls, head_predicate, clause_ids, labels, n_heads, table: dict) -> "GroupTable":
        k = len(labels)
        keys = sorted(table)
        configs = np.array(keys, dtype=np.int64).reshape(len(keys), k)
        n_true = np.array([table[c][0] for c in keys], dtype=np.int64)
        n_false = np.array([table[c][1] for c in keys], dtype=np.int64)
        return cls(head_predicate, tuple(clause_ids), tuple(labels), n_heads, configs, n_true, n_false)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupTable):
            return NotImplemented
        return (
            (self.head_predicate, self.clause_ids, self.labels, self.n_heads)
            == (other.head_predicate, other.clause_ids, other.labels, other.n_heads)
            and self.table == other.table
        )

    __hash__ = None

    def _with_table(self, table) -> "GroupTable":
        table = {c: v for c, v in table.items() if v[0] or v[1]}
        return GroupTable.from_table(
            self.head_predicate, self.clause_ids, self.labels, self.n_heads, table
        )

    def __add__(self, other: "GroupTable") -> "GroupTable":
        if other.clause_ids != self.clause_ids:
            raise ValueError("cannot merge tables of different groups")
        merged = dict(self.table)
        for cfg, (t, f) in other.table.items():
            t0, f0 = merged.get(cfg, (0, 0))
            merged[cfg] = (t0 + t, f0 + f)
        return self._with_table(merged)

    def scaled(self, factor: int) -> "GroupTable":
        return self._with_table({c: (t * factor, f * factor) for c, (t, f) in self.table.items()})


@dataclass(frozen=True)
class SufficientStats:
    groups: tuple[GroupTable, ...]
    total_weight: int

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        if len(self.groups) != len(other.groups):
            raise ValueError("statistics over different programs")
        return SufficientStats(
            tuple(a + b for a, b in zip(self.groups, other.groups)),
            self.total_weight + other.total_weight,
        )

    def group(self, head_predicate: str) -> GroupTable:
        for g in self.groups:
            if g.head_predicate == head_predicate:
                return g
        raise KeyError(head_predicate)


class _Instances:
    """Flat arrays describing every ground body instance of one group."""

    def __init__(self, group: HeadGroup):
        heads, clauses, bodies = [], [], []
        self.head_atoms = np.array([h for h, _ in group.ground_heads], dtype=np.int64)
        for pos, (_, per_clause) in enumerate(group.ground_heads):
            for i, instances in enumerate(per_clause):
                for body in instances:
                    heads.append(pos)
                    clauses.append(i)
                    bodies.append(body)
        self.head = np.array(heads, dtype=np.int64)
        self.clause = np.array(clauses, dtype=np.int64)
        width = max((len(b) for b in bodies), default=0)
        self.atoms = np.zeros((len(bodies), width), dtype=np.int64)
        self.signs = np.ones((len(bodies), width), dtype=bool)
        self.valid = np.zeros((len(bodies), width), dtype=bool)
        for j, body in enumerate(bodies):
            for col, (atom, positive) in enumerate(body):
                self.atoms[j, col] = atom
                self.signs[j, col] = positive
                self.valid[j, col] = True

    def satisfied(self, records: np.ndarray) -> np.ndarray:
        """Boolean ``(n_records, n_instances)``: body true in each record."""
        sat = np.ones((len(records), len(self.head)), dtype=bool)
        for col in range(self.atoms.shape[1]):
            lit = records[:, self.atoms[:, col]] == self.signs[:, col]
            sat &= lit | ~self.valid[:, col]
        return sat

    def multiplicities(self, records: np.ndarray, n_heads: int, k: int) -> np.ndarray:
        """Integer ``(n_records, n_heads, k)`` count of satisfied bodies."""
        sat = self.satisfied(records).astype(np.int64)
        out = np.zeros((len(records), n_heads * k), dtype=np.int64)
        if len(self.head):
            # instances are generated sorted by (head, clause)
            cell = self.head * k + self.clause
            cells, starts = np.unique(cell, return_index=True)
            out[:, cells] = np.add.reduceat(sat, starts, axis=1)
        return out.reshape(len(records), n_heads, k)


def group_table(data: InterpretationSet, group: HeadGroup, gp: GroundProgram) -> GroupTable:
    labels = group.labels(gp.program)
    k, n_heads = group.k, len(group.ground_heads)
    inst = _Instances(group)
    mult = inst.multiplicities(data.records, n_heads, k).reshape(-1, k)
    head_true = data.records[:, inst.head_atoms].reshape(-1)
    w = np.repeat(data.weights, n_heads)
    if not len(mult):
        return GroupTable.from_table(group.head_predicate, group.schema_clauses, labels, n_heads, {})
    # encode (multiplicities, head value) as one integer per row
    radix = mult.max(axis=0) + 1
    strides = np.cumprod(np.concatenate([[2], radix[::-1]]))[:-1][::-1]
    codes = mult @ strides + head_true
    uniq, inverse = np.unique(codes, return_inverse=True)
    counts = np.bincount(inverse, weights=w, minlength=len(uniq)).astype(np.int64)
    table: dict[tuple[int, ...], list[int]] = {}
    for code, n in zip(uniq, counts):
        cfg = tuple(int(v) for v in (code // strides) % radix)
        cell = table.setdefault(cfg, [0, 0])
        cell[0 if code % 2 else 1] += int(n)
    return GroupTable.from_table(
        group.head_predicate, group.schema_clauses, labels, n_heads,
        {c: tuple(v) for c, v in table.items()},
    )


def sufficient_stats(data: InterpretationSet, groups: list[HeadGroup], gp: GroundProgram) -> SufficientStats:
    """Reduce complete data to per-group configuration counts.

    Groundings of one schema clause pool into the same column, so all of
    them share that clause's parameter.  Negated literals are read directly
    from the record.
    """
    if data.n_atoms != gp.n_atoms:
        raise DataError(f"data has {data.n_atoms} atoms, program has {gp.n_atoms}")
    tables = tuple(group_table(data, g, gp) for g in groups)
    return SufficientStats(tables, data.total_weight)


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------

def _can_fire(label: Label) -> bool:
    return not (isinstance(label, Fixed) and label.p == 0.0)


def _must_fire(label: Label) -> bool:
    return isinstance(label, Deterministic) or (isinstance(label, Fixed) and label.p == 1.0)


def record_consistency(data: InterpretationSet, groups: list[HeadGroup], gp: GroundProgram) -> np.ndarray:
    """Boolean mask of records that have nonzero probability for some parameters.

    A record is impossible when a ground head is true but none of its
    satisfied clauses can fire, or false while a satisfied clause must fire.
    """
    ok = np.ones(len(data), dtype=bool)
    for group in groups:
        labels = group.labels(gp.program)
        can = np.array([_can_fire(l) for l in labels])
        must = np.array([_must_fire(l) for l in labels])
        inst = _Instances(group)
        mult = inst.multiplicities(data.records, len(group.ground_heads), group.k)
        head = data.records[:, inst.head_atoms]
        fires_possible = (mult[:, :, can] > 0).any(axis=2)
        fires_certain = (mult[:, :, must] > 0).any(axis=2)
        bad = (head & ~fires_possible) | (~head & fires_certain)
        ok &= ~bad.any(axis=1)
    return ok


def drop_inconsistent(data: InterpretationSet, groups: list[HeadGroup], gp: GroundProgram):
    """Return ``(consistent records, number of dropped records)`` and warn on drops."""
    mask = record_consistency(data, groups, gp)
    dropped = int(data.weights[~mask].sum())
    if dropped:
        warnings.warn(f"dropped {dropped} inconsistent record(s)", stacklevel=2)
    return data.subset(mask), dropped


# ---------------------------------------------------------------------------
# Forward sampling
# ---------------------------------------------------------------------------

def clause_probability(label: Label, theta) -> float:
    if isinstance(label, Deterministic):
        return 1.0
    if isinstance(label, Fixed):
        return label.p
    return float(theta[label.param_id])


def forward_sample(gp: GroundProgram, params, n: int, seed: int) -> InterpretationSet:
    """Draw ``n`` complete interpretations from the program at ``params``.

    Atoms are visited in topological order; each ground clause whose body
    holds fires independently with its probability, and an atom is true iff
    at least one of its clauses fires.  One uniform draw is taken per
    (ground clause, record) whether or not the body holds, so the stream is
    a fixed function of ``seed``.
    """
    params = np.asarray(params, dtype=float)
    if len(params) != gp.n_params:
        raise ValueError(f"expected {gp.n_params} parameters, got {len(params)}")
    rng = np.random.default_rng(seed)
    values = np.zeros((n, gp.n_atoms), dtype=bool)
    by_head = gp.clauses_by_head()
    for atom in gp.order:
        for gc in by_head.get(atom, ()):
            p = clause_probability(gc.label, params)
            fires = rng.random(n) < p
            for b, positive in gc.body:
                fires &= values[:, b] == positive
            values[:, atom] |= fires
    return InterpretationSet.from_rows(
        values, gp.n_atoms, meta={"seed": str(seed), "generator": GENERATOR_ID}
    )
