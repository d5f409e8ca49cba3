"""Command line: ``learn``, ``sample`` and ``bench``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, programs
from .data import (
    DataError,
    InconsistentDataError,
    format_interpretations,
    forward_sample,
    parse_interpretations,
    sufficient_stats,
)
from .grounding import GroundingError, ground, head_groups
from .learn import learn_direct, learn_em
from .mle import log_likelihood
from .program import Learnable, ParseError, Program, parse_program

EXIT_OK, EXIT_ERROR, EXIT_INCONSISTENT = 0, 1, 2


class UsageError(Exception):
    pass


def read_program(spec: str) -> Program:
    """Load a program file, or a bundled program by name (``alarm``, ``ship``)."""
    path = Path(spec)
    if path.exists():
        return parse_program(path.read_text(encoding="utf-8"))
    if spec in programs.NAMES:
        return parse_program(programs.load(spec))
    raise UsageError(f"no such program file: {spec}")


def parse_constants(spec: str | None) -> list[str]:
    """``"a,b,c"`` lists constants; a bare integer ``n`` means ``c1..cn``."""
    if not spec:
        return []
    if spec.isdigit():
        return bench.make_constants(int(spec))
    return [c.strip() for c in spec.split(",") if c.strip()]


def parse_floats(spec: str | None):
    if spec is None:
        return None
    return [float(v) for v in spec.split(",")]


def fitted_program(program: Program, theta) -> str:
    """Program text with learnable labels replaced by 6-decimal estimates."""
    lines = []
    for clause in program.clauses:
        text = str(clause)
        if isinstance(clause.label, Learnable):
            prefix = str(clause.label)
            text = f"{theta[clause.label.param_id]:.6f}::" + text[len(prefix):]
        lines.append(text)
    return "\n".join(lines) + "\n"


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _true_theta(program: Program, override):
    theta = program.init_theta() if override is None else override
    if len(theta) != program.n_params:
        raise UsageError(f"expected {program.n_params} parameter values, got {len(theta)}")
    return theta


def cmd_learn(args) -> int:
    program = read_program(args.program)
    gp = ground(program, parse_constants(args.constants))
    if args.data:
        data = parse_interpretations(Path(args.data).read_text(encoding="utf-8"), gp)
    elif args.sample_n is not None:
        data = forward_sample(gp, _true_theta(program, parse_floats(args.theta)), args.sample_n, args.seed)
    else:
        raise UsageError("learn needs --data or --sample-n")
    init = None
    if args.init is not None:
        init = np.full(program.n_params, args.init)

    if program.n_params == 0:
        stats = sufficient_stats(data, head_groups(gp), gp)
        print("nothing to learn")
        print(f"loglik={log_likelihood(stats, []) !r}")
        _write(str(program), args.out)
        return EXIT_OK

    results = {}
    if args.method in ("direct", "both"):
        results["direct"] = learn_direct(gp, data, init, args.on_inconsistent)
    if args.method in ("em", "both"):
        trace = learn_em(gp, data, init, args.on_inconsistent)
        results["em"] = trace.result
        if args.trace:
            Path(args.trace).write_text(trace.to_csv(), encoding="utf-8")

    for name, res in results.items():
        print(f"[{name}]")
        sys.stdout.write(res.to_text())
    if len(results) == 2:
        diff = abs(results["direct"].loglik - results["em"].loglik)
        print(f"loglik_difference={diff!r}")
    best = results.get("direct") or results["em"]
    _write(fitted_program(program, best.theta), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    program = read_program(args.program)
    gp = ground(program, parse_constants(args.constants))
    theta = _true_theta(program, parse_floats(args.theta))
    data = forward_sample(gp, theta, args.n, args.seed)
    header = f"seed={args.seed} generator={data.meta['generator']}"
    _write(format_interpretations(data, gp, header), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    program = read_program(args.program)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = bench.run_sweep(
        program, args.mode, sizes, args.seed,
        records=args.records, init=args.init, truth=parse_floats(args.theta),
        jobs=args.jobs, em_options={"max_iter": args.em_max_iter},
    )
    if args.out:
        for path in bench.write_report(rows, Path(args.out)):
            logging.getLogger(__name__).info("wrote %s", path)
    else:
        sys.stdout.write(bench.format_csv(rows))
    for row in rows:
        if row.failed:
            print(f"# {row.method} size={row.size} failed: {row.error}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastplp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="estimate parameters from complete data")
    p.add_argument("--program", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data")
    src.add_argument("--sample-n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", help="comma-separated parameters used with --sample-n")
    p.add_argument("--init", type=float, help="start every learnable parameter here")
    p.add_argument("--method", choices=("direct", "em", "both"), default="direct")
    p.add_argument("--constants")
    p.add_argument("--on-inconsistent", choices=("error", "drop"), default="error")
    p.add_argument("--out")
    p.add_argument("--trace", help="write the EM trace as CSV")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("sample", help="forward-sample complete interpretations")
    p.add_argument("--program", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--constants")
    p.add_argument("--theta")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", help="time both learners over a size sweep")
    p.add_argument("--program", required=True)
    p.add_argument("--mode", choices=("propositional", "relational"), required=True)
    p.add_argument("--sizes", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--records", type=int, default=1, help="records per relational dataset")
    p.add_argument("--init", type=float, default=0.5)
    p.add_argument("--theta")
    p.add_argument("--jobs", type=int, default=1, help="run sizes in parallel processes")
    p.add_argument("--em-max-iter", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InconsistentDataError as err:
        print(f"error: inconsistent data: {err}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (OSError, ParseError, DataError, GroundingError, UsageError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
