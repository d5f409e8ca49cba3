import math

import numpy as np
import pytest
from scipy.optimize import minimize

from fastplp import InterpretationSet, ground, parse_program
from fastplp.data import GroupTable
from fastplp.program import Deterministic, Fixed, Learnable, parse_atom
from fastplp.programs import load

ALARM_TRUTH = [0.1, 0.2, 0.3, 0.6, 0.7, 0.8]
TWO_CLAUSE = "t(_)::h.\nt(_)::h :- b.\n"
# (h, b) -> count, the 12-record dataset used throughout
TWO_CLAUSE_COUNTS = {(0, 0): 6, (0, 1): 2, (1, 0): 2, (1, 1): 2}


@pytest.fixture
def alarm_program():
    return parse_program(load("alarm"))


@pytest.fixture
def two_clause():
    program = parse_program(TWO_CLAUSE)
    return program, ground(program)


def two_clause_data(gp, counts=TWO_CLAUSE_COUNTS):
    h, b = gp.atom_index(parse_atom("h")), gp.atom_index(parse_atom("b"))
    rows = []
    for (hv, bv), n in counts.items():
        row = [False] * gp.n_atoms
        row[h], row[b] = bool(hv), bool(bv)
        rows += [row] * n
    return InterpretationSet.from_rows(rows, gp.n_atoms)


# ---------------------------------------------------------------------------
# Oracles.  These never touch sufficient statistics or the fitting code.
# ---------------------------------------------------------------------------

def _prob(label, theta):
    if isinstance(label, Deterministic):
        return 1.0
    if isinstance(label, Fixed):
        return label.p
    return theta[label.param_id]


def oracle_loglik(gp, data, theta):
    """Log-probability of every ground head, record by record."""
    by_head = {}
    for gc in gp.clauses:
        by_head.setdefault(gc.head, []).append(gc)
    total = 0.0
    for row, w in zip(data.records, data.weights):
        for head, clauses in by_head.items():
            p_false = 1.0
            for gc in clauses:
                if all(row[a] == pos for a, pos in gc.body):
                    p_false *= 1.0 - _prob(gc.label, theta)
            p = 1.0 - p_false if row[head] else p_false
            total += w * (math.log(p) if p > 0 else -math.inf)
    return total


def table_loglik(table: GroupTable, theta_learn):
    """Per-configuration likelihood with plain powers; ``theta_learn`` by param_id order."""
    theta = dict(zip(table.param_ids, theta_learn))
    ll = 0.0
    for cfg, (nt, nf) in table.table.items():
        p_false = 1.0
        for m, label in zip(cfg, table.labels):
            if isinstance(label, Learnable):
                p_false *= (1.0 - theta[label.param_id]) ** m
            else:
                p_false *= (1.0 - _prob(label, None)) ** m
        if nf:
            ll += nf * math.log(p_false) if p_false > 0 else -math.inf
        if nt:
            ll += nt * math.log(1.0 - p_false) if p_false < 1 else -math.inf
    return ll


def longdouble_loglik(table: GroupTable, theta_learn):
    """``table_loglik`` in extended precision, for finite differences."""
    theta = dict(zip(table.param_ids, theta_learn))
    ll = np.longdouble(0)
    for cfg, (nt, nf) in table.table.items():
        q = np.longdouble(1)
        for m, label in zip(cfg, table.labels):
            p = theta[label.param_id] if isinstance(label, Learnable) else np.longdouble(_prob(label, None))
            q *= (1 - p) ** m
        if nf:
            ll += nf * np.log(q)
        if nt:
            ll += nt * np.log1p(-q)
    return ll


def _grid_loglik(table: GroupTable, points):
    """Vectorised ``table_loglik`` over an ``(n, k)`` array of points."""
    ids = table.param_ids
    ll = np.zeros(len(points))
    for cfg, (nt, nf) in table.table.items():
        log_pf = np.zeros(len(points))
        for m, label in zip(cfg, table.labels):
            if not m:
                continue
            if isinstance(label, Learnable):
                log_pf = log_pf + m * np.log1p(-points[:, ids.index(label.param_id)])
            else:
                q = 1.0 - _prob(label, None)
                log_pf = log_pf + (m * math.log(q) if q > 0 else -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            if nf:
                ll += nf * log_pf
            if nt:
                ll += nt * np.log(-np.expm1(log_pf))
    return np.nan_to_num(ll, nan=-np.inf)


def _mesh(axes):
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def grid_oracle(table: GroupTable):
    """Grid search (step 1e-3, coarse-to-fine above two parameters) plus L-BFGS-B polish.

    Returns ``(best point, best log-likelihood)``.
    """
    k = len(table.param_ids)
    eps = 1e-6  # the box the iterative fitters work in
    if k <= 2:
        axis = np.linspace(0.0005, 0.9995, 1000)
        pts = _mesh([axis] * k)
    else:
        coarse = np.linspace(0.01, 0.99, 50)
        pts = _mesh([coarse] * k)
        best = pts[np.argmax(_grid_loglik(table, pts))]
        fine = [np.clip(np.arange(c - 0.02, c + 0.0201, 1e-3), eps, 1 - eps) for c in best]
        pts = _mesh(fine)
    values = _grid_loglik(table, pts)
    start = pts[np.argmax(values)]
    res = minimize(
        lambda x: -table_loglik(table, x),
        start,
        method="L-BFGS-B",
        bounds=[(eps, 1 - eps)] * k,
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000},
    )
    candidates = [(values.max(), start), (-res.fun, res.x)]
    ll, x = max(candidates, key=lambda c: c[0])
    return np.asarray(x), float(ll)


def random_table(rng, k, with_fixed=False, max_mult=2, n_rows=None):
    """A random group table with ``k`` learnable clauses (param ids 0..k-1)."""
    labels = [Learnable(0.5, i) for i in range(k)]
    if with_fixed:
        labels.append(Fixed(float(rng.uniform(0.05, 0.6))))
    width = len(labels)
    n_rows = n_rows or k
    # configurations with at least one learnable clause active
    n_rows = min(n_rows, (max_mult + 1) ** width - (max_mult + 1) ** (width - k))
    table = {}
    while len(table) < n_rows:
        cfg = tuple(int(v) for v in rng.integers(0, max_mult + 1, size=width))
        if not any(cfg[:k]):
            continue
        table[cfg] = (int(rng.integers(1, 60)), int(rng.integers(1, 60)))
    if rng.random() < 0.5:
        # a row no learnable clause can explain, head always false
        table.setdefault((0,) * width, (0, int(rng.integers(1, 30))))
    return GroupTable.from_table("h", tuple(range(width)), tuple(labels), 1, table)


def random_program(rng):
    """A small random propositional program with learnable roots and one noisy-OR head."""
    n_roots = int(rng.integers(2, 5))
    roots = [f"r{i}" for i in range(n_roots)]
    lines = [f"t({rng.uniform(0.2, 0.8):.3f})::{r}." for r in roots]
    for _ in range(int(rng.integers(1, 4))):
        size = int(rng.integers(0, 3))
        body = []
        for r in rng.choice(roots, size=size, replace=False):
            body.append(("\\+" if rng.random() < 0.3 else "") + str(r))
        rule = f"t({rng.uniform(0.2, 0.9):.3f})::h"
        lines.append(rule + (" :- " + ", ".join(body) if body else "") + ".")
    if rng.random() < 0.5:
        lines.append(f"{rng.uniform(0.1, 0.5):.3f}::h :- {roots[0]}, {roots[1]}.")
    return parse_program("\n".join(lines) + "\n")
