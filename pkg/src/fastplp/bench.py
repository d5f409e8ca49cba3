"""Size sweeps comparing the direct learner with the EM baseline."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import forward_sample
from .grounding import ground
from .learn import learn_direct, learn_em
from .program import Program, parse_program

log = logging.getLogger(__name__)

CSV_HEADER = "method,size,wall_time_s,loglik,iterations"
METHODS = ("direct", "em")


@dataclass
class BenchRow:
    method: str
    size: int
    wall_time: float = float("nan")
    loglik: float = float("nan")
    iterations: int = 0
    groups: dict[str, str] = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv(self) -> str:
        if self.failed:
            return f"{self.method},{self.size},,failed,failed"
        return f"{self.method},{self.size},{self.wall_time:.6f},{self.loglik!r},{self.iterations}"


def make_constants(n: int) -> list[str]:
    return [f"c{i}" for i in range(1, n + 1)]


def size_seed(seed: int, size: int) -> int:
    return int(np.random.SeedSequence([seed, size]).generate_state(1)[0])


def run_size(program_text: str, mode: str, size: int, seed: int, records: int = 1,
             init: float = 0.5, truth=None, em_options: dict | None = None) -> list[BenchRow]:
    """Sample one dataset for ``size`` and fit it with both learners."""
    program = parse_program(program_text)
    if mode == "relational":
        gp = ground(program, make_constants(size))
        n = records
    elif mode == "propositional":
        gp = ground(program)
        n = size
    else:
        raise ValueError(f"unknown mode {mode!r}")
    truth = program.init_theta() if truth is None else truth
    data = forward_sample(gp, truth, n, size_seed(seed, size))
    start = np.full(program.n_params, init)

    rows = []
    try:
        res = learn_direct(gp, data, start)
        rows.append(BenchRow("direct", size, res.wall_time, res.loglik, res.total_iterations,
                             {k: str(v) for k, v in res.methods.items()}))
    except Exception as err:  # a failed row must not stop the sweep
        rows.append(BenchRow("direct", size, error=str(err)))
    try:
        trace = learn_em(gp, data, start, **(em_options or {}))
        res = trace.result
        rows.append(BenchRow("em", size, res.wall_time, res.loglik, len(trace.steps),
                             {k: str(v) for k, v in res.methods.items()}))
    except Exception as err:
        rows.append(BenchRow("em", size, error=str(err)))
    for row in rows:
        log.info("%s size=%d time=%.4fs loglik=%s", row.method, size, row.wall_time, row.loglik)
    return rows


def run_sweep(program: Program | str, mode: str, sizes, seed: int, records: int = 1,
              init: float = 0.5, truth=None, jobs: int = 1, em_options=None) -> list[BenchRow]:
    text = program if isinstance(program, str) else str(program)
    args = [(text, mode, s, seed, records, init, truth, em_options) for s in sizes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_size, *zip(*args)))
    else:
        results = [run_size(*a) for a in args]
    return [row for rows in results for row in rows]


def format_csv(rows: list[BenchRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"


def write_report(rows: list[BenchRow], out: Path) -> list[Path]:
    """Write the CSV plus one ``size wall_time`` data file per method."""
    out = Path(out)
    out.write_text(format_csv(rows), encoding="utf-8")
    written = [out]
    for method in METHODS:
        path = out.with_name(f"{out.stem}.{method}.dat")
        lines = [f"# size wall_time_s ({method})"]
        lines += [f"{r.size} {r.wall_time:.6f}" for r in rows if r.method == method and not r.failed]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written
