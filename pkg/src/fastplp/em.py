"""EM baseline over latent auxiliary facts.

Each probabilistic rule ``p::h :- body.`` is rewritten into a fresh
auxiliary fact ``p::x.`` and the deterministic rule ``h :- body, x.``.
The auxiliary atoms are never observed, so even complete data leave one
latent variable per probabilistic rule grounding, and learning has to
alternate posterior inference with re-estimation.  Because the latent layer
is a noisy-OR per ground head, the posterior of each auxiliary is available
in closed form and no knowledge compilation is needed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import InconsistentDataError, InterpretationSet, sufficient_stats
from .grounding import GroundClause, GroundProgram, head_groups, topological_order
from .mle import CLAMP_HI, CLAMP_LO, FitResult, Method, clamp, log_likelihood
from .program import Atom, Deterministic, Fixed, Label, Learnable, is_probabilistic

AUX_PREFIX = "$aux"


@dataclass(frozen=True)
class AuxAtom:
    atom: int
    label: Label
    head: int
    source: int


@dataclass(frozen=True)
class DesugaredProgram:
    """``ground`` extended with one auxiliary fact per probabilistic rule grounding.

    Auxiliary atoms are appended after the original atoms, so indices of the
    original ground program stay valid.
    """

    ground: GroundProgram
    aux: tuple[AuxAtom, ...]
    n_original: int
    _plan: dict = field(default_factory=dict, compare=False, repr=False)


def desugar(gp: GroundProgram) -> DesugaredProgram:
    atoms = list(gp.atoms)
    clauses: list[GroundClause] = []
    aux = []
    for gc in gp.clauses:
        if not gc.body or not is_probabilistic(gc.label):
            clauses.append(gc)
            continue
        idx = len(atoms)
        atoms.append(Atom(f"{AUX_PREFIX}{gc.source}_{len(aux)}"))
        aux.append(AuxAtom(idx, gc.label, gc.head, gc.source))
        clauses.append(GroundClause(idx, (), gc.label, gc.source))
        clauses.append(GroundClause(gc.head, gc.body + ((idx, True),), Deterministic(), gc.source))
    edges = frozenset((b, c.head) for c in clauses for b, _ in c.body)
    extended = GroundProgram(
        tuple(atoms),
        tuple(clauses),
        edges,
        topological_order(len(atoms), edges),
        gp.program,
        {a: i for i, a in enumerate(atoms)},
    )
    return DesugaredProgram(extended, tuple(aux), gp.n_atoms)


class _Choices:
    """Every way an original head can become true, as flat arrays.

    A choice is an auxiliary fact guarding a rule, a probabilistic fact on
    the head itself (latent whenever the head has other clauses), or a
    deterministic clause that fires as soon as its body holds.
    """

    def __init__(self, dp: DesugaredProgram):
        n0 = dp.n_original
        aux_label = {a.atom: a.label for a in dp.aux}
        rows = []
        for gc in dp.ground.clauses:
            if gc.head >= n0:
                continue
            body = tuple((b, s) for b, s in gc.body if b < n0)
            guards = [b for b, _ in gc.body if b >= n0]
            label = aux_label[guards[0]] if guards else gc.label
            rows.append((gc.head, body, label))
        rows.sort(key=lambda r: r[0])

        self.head = np.array([r[0] for r in rows], dtype=np.int64)
        heads, self.head_start = np.unique(self.head, return_index=True)
        self.heads = heads
        self.head_pos = np.searchsorted(heads, self.head)
        self.param = np.array(
            [r[2].param_id if isinstance(r[2], Learnable) else -1 for r in rows], dtype=np.int64
        )
        self.fixed_logq = np.array([_label_logq(r[2]) for r in rows])
        width = max((len(r[1]) for r in rows), default=0)
        self.atoms = np.zeros((len(rows), width), dtype=np.int64)
        self.signs = np.ones((len(rows), width), dtype=bool)
        self.valid = np.zeros((len(rows), width), dtype=bool)
        for j, (_, body, _) in enumerate(rows):
            for col, (a, s) in enumerate(body):
                self.atoms[j, col] = a
                self.signs[j, col] = s
                self.valid[j, col] = True
        self.learnable = self.param >= 0

    def active(self, records: np.ndarray) -> np.ndarray:
        act = np.ones((len(records), len(self.head)), dtype=bool)
        for col in range(self.atoms.shape[1]):
            act &= (records[:, self.atoms[:, col]] == self.signs[:, col]) | ~self.valid[:, col]
        return act


def _label_logq(label: Label) -> float:
    if isinstance(label, Deterministic):
        return -np.inf
    if isinstance(label, Fixed):
        return np.log1p(-label.p) if label.p < 1.0 else -np.inf
    return np.nan


@dataclass
class _Prepared:
    choices: _Choices
    active: np.ndarray
    head_value: np.ndarray
    weights: np.ndarray


def _prepare(dp: DesugaredProgram, data: InterpretationSet) -> _Prepared:
    key = id(data)
    cached = dp._plan.get("prepared")
    if cached is not None and cached[0] == key:
        return cached[1]
    choices = dp._plan.get("choices")
    if choices is None:
        choices = dp._plan["choices"] = _Choices(dp)
    records = data.records
    prep = _Prepared(choices, choices.active(records), records[:, choices.head], data.weights.astype(float))
    dp._plan["prepared"] = (key, prep)
    return prep


@dataclass
class ExpectedCounts:
    successes: np.ndarray
    totals: np.ndarray


def e_step(dp: DesugaredProgram, data: InterpretationSet, theta, include_unconstrained: bool = True) -> ExpectedCounts:
    """Expected number of firing latent facts per parameter, and instance counts.

    With the head false every active latent fact is off.  With the head true
    an active fact ``i`` is on with probability ``theta_i / (1 - P)``, ``P``
    being the probability that no active clause of the head fires.  Latent
    facts guarding an unsatisfied body keep their prior ``theta_i``; they are
    left out of both counts when ``include_unconstrained`` is false.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0) or np.any(theta >= 1.0):
        raise ValueError("e_step requires interior parameters")
    prep = _prepare(dp, data)
    ch = prep.choices
    logq = np.where(ch.learnable, np.log1p(-theta[np.maximum(ch.param, 0)]), ch.fixed_logq)
    contrib = np.where(prep.active, logq, 0.0)
    if contrib.shape[1]:
        s = np.add.reduceat(contrib, ch.head_start, axis=1)
    else:
        s = np.zeros((len(contrib), 0))
    s_choice = s[:, ch.head_pos]
    hv = prep.head_value

    if np.any(hv & (s_choice == 0.0)) or np.any(~hv & np.isneginf(s_choice)):
        raise InconsistentDataError(
            "a record is impossible for every parameter value "
            "(head true with no clause able to fire, or false with a clause certain to fire)"
        )

    th = theta[np.maximum(ch.param, 0)]
    with np.errstate(divide="ignore", invalid="ignore"):
        post_true = th / -np.expm1(s_choice)
    expected = np.where(prep.active, np.where(hv, post_true, 0.0), th)
    counted = np.ones_like(expected) if include_unconstrained else prep.active.astype(float)
    expected = expected * counted

    w = prep.weights
    learn = ch.learnable
    n_params = len(theta)
    successes = np.bincount(ch.param[learn], weights=w @ expected[:, learn], minlength=n_params)
    totals = np.bincount(ch.param[learn], weights=w @ counted[:, learn], minlength=n_params)
    return ExpectedCounts(successes, totals)


@dataclass
class EMStep:
    iteration: int
    loglik: float
    delta: float
    theta: np.ndarray


@dataclass
class EMTrace:
    steps: list[EMStep]
    result: FitResult

    def to_csv(self) -> str:
        n = len(self.result.theta)
        lines = [",".join(["iteration", "loglik", "delta"] + [f"theta_{i}" for i in range(n)])]
        for st in self.steps:
            lines.append(
                ",".join([str(st.iteration), repr(st.loglik), repr(st.delta)] + [repr(float(t)) for t in st.theta])
            )
        return "\n".join(lines) + "\n"


def fit_em(
    gp: GroundProgram,
    data: InterpretationSet,
    init,
    *,
    tol: float = 1e-6,
    max_iter: int = 1000,
    include_unconstrained: bool = True,
) -> EMTrace:
    """Run EM from ``init`` until the log-likelihood gains less than ``tol``.

    The log-likelihood is that of the observed atoms, the same function
    the direct learner maximizes.
    """
    start = time.perf_counter()
    dp = desugar(gp)
    data = data.compress()
    groups = head_groups(gp)
    stats = sufficient_stats(data, groups, gp)

    theta = clamp(init)
    loglik = log_likelihood(stats, theta)
    steps = []
    for it in range(1, max_iter + 1):
        counts = e_step(dp, data, theta, include_unconstrained)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = np.where(counts.totals > 0, counts.successes / counts.totals, theta)
        new = np.clip(new, CLAMP_LO, CLAMP_HI)
        new_ll = log_likelihood(stats, new)
        delta = new_ll - loglik
        theta, loglik = new, new_ll
        steps.append(EMStep(it, loglik, delta, theta.copy()))
        if abs(delta) < tol:
            break

    result = FitResult(theta, loglik)
    for table in stats.groups:
        if table.param_ids:
            result.methods[table.head_predicate] = Method.EM
    result.iterations["em"] = len(steps)
    result.wall_time = time.perf_counter() - start
    return EMTrace(steps, result)
