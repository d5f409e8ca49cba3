"""Direct maximization of the complete-data log-likelihood.

Every head group is a noisy-OR: a ground head is false exactly when none of
its satisfied clause groundings fires, so a configuration with multiplicities
``m`` has failure probability ``prod_i q_i ** m_i`` with ``q_i = 1 - theta_i``.
The log-likelihood of a group is therefore

    sum_c  n_false(c) * sum_i m_ci log q_i  +  n_true(c) * log(1 - prod_i q_i ** m_ci)

which depends on the data only through the configuration counts.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .data import GroupTable, InconsistentDataError, SufficientStats
from .program import Deterministic, Fixed, Learnable, Program

CLAMP_LO = 1e-6
CLAMP_HI = 1.0 - 1e-6


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    GRADIENT = "gradient"
    DEGENERATE = "degenerate"
    EM = "em"

    def __str__(self) -> str:
        return self.value


@dataclass
class FitResult:
    theta: np.ndarray
    loglik: float
    methods: dict[str, Method] = field(default_factory=dict)
    identifiable: dict[str, bool] = field(default_factory=dict)
    iterations: dict[str, int] = field(default_factory=dict)
    wall_time: float = 0.0
    dropped_records: int = 0

    @property
    def total_iterations(self) -> int:
        return sum(self.iterations.values())

    def to_text(self) -> str:
        lines = [
            f"loglik={self.loglik!r}",
            f"wall_time_s={self.wall_time:.6f}",
            f"iterations={self.total_iterations}",
            f"dropped_records={self.dropped_records}",
        ]
        lines += [f"theta[{i}]={float(t)!r}" for i, t in enumerate(self.theta)]
        for name, method in self.methods.items():
            parts = [f"method:{method}"]
            if name in self.identifiable:
                parts.append(f"identifiable:{str(self.identifiable[name]).lower()}")
            if name in self.iterations:
                parts.append(f"iterations:{self.iterations[name]}")
            lines.append(f"group.{name}=" + " ".join(parts))
        return "\n".join(lines) + "\n"

    def to_csv(self, program: Program | None = None) -> str:
        rows = ["param_id,estimate,clause"]
        for i, t in enumerate(self.theta):
            clause = ""
            if program is not None:
                clause = '"' + str(program.clauses[program.param_clause(i)]) + '"'
            rows.append(f"{i},{float(t)!r},{clause}")
        return "\n".join(rows) + "\n"


def clamp(theta):
    return np.clip(np.asarray(theta, dtype=float), CLAMP_LO, CLAMP_HI)


# ---------------------------------------------------------------------------
# Per-group objective
# ---------------------------------------------------------------------------

def _fixed_log_q(label) -> float:
    if isinstance(label, Deterministic):
        return -math.inf
    if isinstance(label, Fixed):
        return math.log1p(-label.p) if label.p < 1.0 else -math.inf
    raise TypeError(label)


class GroupObjective:
    """Log-likelihood of one group as a function of its learnable parameters.

    Parameters are ordered by param_id.  Configurations are split into
    *informative* rows (some learnable clause active and the fixed clauses
    do not force the head) and constant rows whose contribution does not
    depend on the learnable parameters.
    """

    def __init__(self, table: GroupTable):
        self.table = table
        learn = [i for i, l in enumerate(table.labels) if isinstance(l, Learnable)]
        learn.sort(key=lambda i: table.labels[i].param_id)
        fixed = [i for i, l in enumerate(table.labels) if not isinstance(l, Learnable)]
        self.learn_cols = learn
        self.param_ids = [table.labels[i].param_id for i in learn]

        configs = table.configs.reshape(len(table.configs), table.k)
        fixed_logq = np.array([_fixed_log_q(table.labels[i]) for i in fixed])
        mf = configs[:, fixed]
        with np.errstate(invalid="ignore"):
            s_fixed = np.where(mf > 0, mf * fixed_logq, 0.0).sum(axis=1)
        ml = configs[:, learn]
        nt, nf = table.n_true.astype(float), table.n_false.astype(float)

        active = (ml > 0).any(axis=1)
        forced = np.isneginf(s_fixed)
        self.inconsistent = [
            tuple(int(m) for m in configs[c])
            for c in range(len(configs))
            if (nt[c] > 0 and not active[c] and s_fixed[c] == 0.0) or (nf[c] > 0 and forced[c])
        ]
        informative = active & ~forced & (nt + nf > 0)
        const_rows = ~informative
        with np.errstate(divide="ignore", invalid="ignore"):
            const = np.where(nf[const_rows] > 0, nf[const_rows] * s_fixed[const_rows], 0.0).sum()
            const += np.where(
                nt[const_rows] > 0, nt[const_rows] * np.log(-np.expm1(s_fixed[const_rows])), 0.0
            ).sum()
        self.constant = float(const) if not self.inconsistent else -math.inf

        self.M = ml[informative].astype(float)
        self.M_int = ml[informative]
        self.s_fixed = s_fixed[informative]
        self.nt = nt[informative]
        self.nf = nf[informative]

    @property
    def n_params(self) -> int:
        return len(self.param_ids)

    @property
    def n_rows(self) -> int:
        return len(self.M)

    def check_consistent(self):
        if self.inconsistent:
            raise InconsistentDataError(
                f"group {self.table.head_predicate}: configuration {self.inconsistent[0]} "
                "is impossible for every parameter value (head observed true with no "
                "clause able to fire, or false with a clause certain to fire)"
            )

    def _s(self, x):
        return self.s_fixed + self.M @ np.log1p(-np.asarray(x, dtype=float))

    def value(self, x) -> float:
        if self.inconsistent:
            return -math.inf
        s = self._s(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            tf = np.where(self.nf > 0, self.nf * s, 0.0)
            tt = np.where(self.nt > 0, self.nt * np.log(-np.expm1(s)), 0.0)
        return float(self.constant + tf.sum() + tt.sum())

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0) or np.any(x >= 1.0):
            raise ValueError("gradient requires interior parameters; clamp first")
        self.check_consistent()
        s = self._s(x)
        odds = np.exp(s) / -np.expm1(s)  # P(false) / P(true)
        r = self.nt * odds - self.nf
        return (self.M.T @ r) / (1.0 - x)

    def difference(self, x, y) -> float:
        """``value(y) - value(x)`` computed without cancellation."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = self._s(x)
        du = np.log1p((x - y) / (1.0 - x))
        ds = self.M @ du
        p = np.exp(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            dt = np.log1p(-p * np.expm1(ds) / -np.expm1(s))
            tt = np.where(self.nt > 0, self.nt * dt, 0.0)
        return float(self.nf @ ds + tt.sum())


# ---------------------------------------------------------------------------
# Whole-program likelihood and gradient
# ---------------------------------------------------------------------------

def _sub(theta, objective: GroupObjective):
    return np.asarray([theta[p] for p in objective.param_ids], dtype=float)


def _check_theta(stats: SufficientStats, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    needed = max((p for g in stats.groups for p in g.param_ids), default=-1) + 1
    if theta.ndim != 1 or len(theta) < needed:
        raise ValueError(f"theta has length {len(theta)}, need at least {needed}")
    return theta


def log_likelihood(stats: SufficientStats, theta) -> float:
    """Complete-data log-likelihood; ``-inf`` when some record is impossible."""
    theta = _check_theta(stats, theta)
    total = 0.0
    for g in stats.groups:
        obj = GroupObjective(g)
        total += obj.value(_sub(theta, obj))
    return total


def inconsistencies(stats: SufficientStats) -> dict[str, list[tuple[int, ...]]]:
    out = {}
    for g in stats.groups:
        bad = GroupObjective(g).inconsistent
        if bad:
            out[g.head_predicate] = bad
    return out


def gradient(stats: SufficientStats, theta) -> np.ndarray:
    """Analytic gradient of :func:`log_likelihood` in the learnable parameters."""
    theta = _check_theta(stats, theta)
    grad = np.zeros(len(theta))
    for g in stats.groups:
        obj = GroupObjective(g)
        if obj.n_params:
            grad[obj.param_ids] += obj.gradient(_sub(theta, obj))
    return grad


# ---------------------------------------------------------------------------
# Closed form
# ---------------------------------------------------------------------------

def exact_rank(matrix) -> int:
    """Rank over the rationals by fraction-exact Gaussian elimination."""
    rows = [[Fraction(int(v)) for v in row] for row in np.asarray(matrix)]
    rank = 0
    n_cols = len(rows[0]) if rows else 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                factor = rows[r][col] / rows[rank][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def closed_form(group: GroupTable | GroupObjective):
    """Exact maximizer when the per-configuration system is square and invertible.

    Each informative configuration pins its own failure probability to the
    observed rate ``n_false / (n_true + n_false)``.  Taking logs turns this
    into a linear system in ``log q``; when it has a unique solution inside
    the box every configuration's likelihood term is maximized at once.
    Returns the learnable estimates ordered by param_id, or ``None``.
    """
    obj = group if isinstance(group, GroupObjective) else GroupObjective(group)
    k = obj.n_params
    if k == 0 or obj.n_rows != k or obj.inconsistent:
        return None
    if exact_rank(obj.M_int) < k:
        return None
    f = obj.nf / (obj.nt + obj.nf)
    if np.any(f <= 0.0) or np.any(f >= 1.0):
        return None
    log_g = np.log(f) - obj.s_fixed
    if np.any(log_g > 0.0):
        return None
    u = np.linalg.solve(obj.M, log_g)
    theta = -np.expm1(u)
    if np.any(theta < -1e-12) or np.any(theta > 1.0):
        return None
    return np.clip(theta, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Projected gradient ascent
# ---------------------------------------------------------------------------

def gradient_fit(
    group: GroupTable | GroupObjective,
    init,
    *,
    tol: float = 1e-8,
    max_iter: int = 500,
    armijo: float = 1e-4,
    shrink: float = 0.5,
    step0: float = 1.0,
    spectral: bool = True,
    trace: list | None = None,
):
    """Projected gradient ascent on the box ``[1e-6, 1 - 1e-6]``.

    Each iteration backtracks (factor ``shrink``) from a trial step until the
    Armijo condition holds.  The first trial step is ``step0``; later ones
    use the Barzilai-Borwein ratio ``s.s / -s.y`` of the previous move when
    ``spectral`` is set, and ``step0`` otherwise.  Stops when the infinity
    norm of the projected gradient drops below ``tol``.

    Returns ``(estimates, iterations)``.  If ``trace`` is a list, the
    log-likelihood at the start and after every accepted step is appended.
    """
    obj = group if isinstance(group, GroupObjective) else GroupObjective(group)
    obj.check_consistent()
    x = clamp(init)
    if obj.n_params == 0:
        return x, 0
    if trace is not None:
        trace.append(obj.value(x))
    g = obj.gradient(x)
    t = step0
    for it in range(max_iter):
        if np.max(np.abs(clamp(x + g) - x)) < tol:
            return x, it
        while True:
            y = clamp(x + t * g)
            d = y - x
            slope = float(g @ d)
            if slope <= 0.0 or not np.any(d):
                # no representable ascent step left
                return x, it
            if obj.difference(x, y) >= armijo * slope:
                break
            t *= shrink
        g_new = obj.gradient(y)
        sy = float(d @ (g_new - g))
        if spectral and sy < 0.0:
            t = min(max(float(d @ d) / -sy, 1e-12), 1e12)
        else:
            t = step0
        x, g = y, g_new
        if trace is not None:
            trace.append(obj.value(x))
    return x, max_iter


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def fit_direct(stats: SufficientStats, program: Program, init=None) -> FitResult:
    """Fit every head group independently: closed form if possible, else gradient.

    Groups whose data never activate a learnable clause keep their initial
    values and are reported as degenerate.
    """
    start = time.perf_counter()
    theta = np.asarray(program.init_theta() if init is None else init, dtype=float).copy()
    result = FitResult(theta, 0.0)
    for table in stats.groups:
        obj = GroupObjective(table)
        obj.check_consistent()
        if obj.n_params == 0:
            continue
        name = table.head_predicate
        if obj.n_rows == 0:
            result.methods[name] = Method.DEGENERATE
            result.identifiable[name] = False
            result.iterations[name] = 0
            continue
        est = closed_form(obj)
        if est is not None:
            result.methods[name] = Method.CLOSED_FORM
            result.identifiable[name] = True
            result.iterations[name] = 0
        else:
            est, n_iter = gradient_fit(obj, _sub(theta, obj))
            result.methods[name] = Method.GRADIENT
            result.identifiable[name] = exact_rank(obj.M_int) == obj.n_params
            result.iterations[name] = n_iter
        theta[obj.param_ids] = est
    result.loglik = log_likelihood(stats, theta)
    result.wall_time = time.perf_counter() - start
    return result
