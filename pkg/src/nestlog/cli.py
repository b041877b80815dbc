"""Command-line front end.

    nestlog run graph.pl -q "path(b,f)" --inference exact
    nestlog run graph.pl -q "path(b,X)" --result answers
    nestlog oracle graph.pl -q "path(b,f)"

Exit status is 0 on success, 1 on a usage error and 2 when the program or
query cannot be loaded or evaluated.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

from .engine import InferenceKind, InferenceOptions, ResultType, problog_inference, session_new
from .errors import InvalidOptions, NestlogError
from .exact import format_info, formula_to_json
from .metacalls import problog_answers
from .oracle import brute_force_answer_probabilities, brute_force_success_probability
from .programs import EXAMPLE_NAMES, bundled_source
from .resolution import DEFAULT_DEPTH_LIMIT, Solver, apply
from .sampling import SampleEstimate
from .syntax import Program, format_term, parse_program, parse_query
from .terms import Term

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROGRAM = 2

_KINDS = {"exact": InferenceKind.EXACT, "sample": InferenceKind.PROGRAM_SAMPLING}


@dataclass(frozen=True)
class CliConfig:
    program_path: str
    query_text: str
    inference: str = "exact"
    result: str = "probability"
    samples: int = InferenceOptions.DEFAULT_SAMPLES
    max_delta: float | None = None
    seed: int = 0
    depth_limit: int = DEFAULT_DEPTH_LIMIT
    json: bool = False

    def validate(self) -> None:
        if self.inference not in ("exact", "sample", "oracle"):
            raise InvalidOptions(f"unknown inference {self.inference!r}")
        if self.result not in ("probability", "info", "answers"):
            raise InvalidOptions(f"unknown result type {self.result!r}")
        if self.inference == "oracle" and self.result == "info":
            raise InvalidOptions("the oracle has no info result")
        if self.samples < 1:
            raise InvalidOptions("--samples must be at least 1")
        if self.max_delta is not None and not self.max_delta > 0:
            raise InvalidOptions("--max-delta must be positive")
        if self.depth_limit < 1:
            raise InvalidOptions("--depth-limit must be positive")

    def options(self) -> InferenceOptions:
        if self.max_delta is not None:
            return InferenceOptions(max_delta=self.max_delta, depth_limit=self.depth_limit)
        return InferenceOptions(sample_count=self.samples, depth_limit=self.depth_limit)


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(f"{self.prog}: {message}")


class _StageError(Exception):
    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nestlog", description="Probabilistic logic programs with nested inference.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a query")
    run.add_argument("file", help="program file, or the name of a bundled example")
    run.add_argument("-q", "--query", required=True, help="goal to evaluate, e.g. 'path(b,X)'")
    run.add_argument("--inference", choices=sorted(_KINDS), default="exact")
    run.add_argument("--result", choices=["probability", "info", "answers"], default="probability")
    run.add_argument("--samples", type=int, default=InferenceOptions.DEFAULT_SAMPLES,
                     help="number of sampled worlds")
    run.add_argument("--max-delta", type=float, help="sample in batches until the interval width is below this")
    run.add_argument("--seed", type=int, default=0, help="seed of the sampling generator")
    run.add_argument("--depth-limit", type=int, default=DEFAULT_DEPTH_LIMIT, help="resolution step budget")
    run.add_argument("--json", action="store_true", help="print JSON with full precision")

    oracle = sub.add_parser("oracle", help="evaluate a query by enumerating possible worlds")
    oracle.add_argument("file", help="program file, or the name of a bundled example")
    oracle.add_argument("-q", "--query", required=True)
    oracle.add_argument("--answers", action="store_true", help="list every answer with its probability")
    oracle.add_argument("--depth-limit", type=int, default=DEFAULT_DEPTH_LIMIT)
    oracle.add_argument("--json", action="store_true")
    return parser


def config_from_args(ns: argparse.Namespace) -> CliConfig:
    if ns.command == "oracle":
        return CliConfig(ns.file, ns.query, "oracle", "answers" if ns.answers else "probability",
                         depth_limit=ns.depth_limit, json=ns.json)
    return CliConfig(ns.file, ns.query, ns.inference, ns.result, ns.samples, ns.max_delta,
                     ns.seed, ns.depth_limit, ns.json)


def load_program_text(path: str) -> str:
    """Read a program file; bare example names fall back to the bundled copies."""
    p = Path(path)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    if p.name in EXAMPLE_NAMES and not p.parent.parts:
        return bundled_source(p.name)
    raise FileNotFoundError(f"no such program file: {path}")


def _staged(stage, fn, *args):
    try:
        return fn(*args)
    except (NestlogError, OSError, RecursionError) as e:
        raise _StageError(stage, e) from e


def fmt_probability(p: float) -> str:
    return f"P = {p:#.6g}"


def _answer_order(program: Program, goal: Term, depth_limit: int) -> list[Term]:
    """Distinct answers of ``goal`` in SLD discovery order, on a pure engine."""
    session = session_new(program)
    seen: dict[str, Term] = {}
    for subst in Solver(session, depth_limit).solve(goal):
        inst = apply(goal, subst)
        seen.setdefault(format_term(inst), inst)
    return list(seen.values())


def evaluate(config: CliConfig, program: Program, goal: Term):
    """Compute the result for ``config``; returns a (kind, value) pair."""
    if config.inference == "oracle":
        if config.result == "answers":
            probs = {format_term(t): p for t, p in
                     brute_force_answer_probabilities(program, goal, config.depth_limit).items()}
            order = _answer_order(program, goal, config.depth_limit)
            return "answers", [(t, probs.get(format_term(t), 0.0)) for t in order]
        return "probability", brute_force_success_probability(program, goal, config.depth_limit)

    session = session_new(program, config.seed, config.options())
    kind = _KINDS[config.inference]
    if config.result == "answers":
        return "answers", [(r.answer, r.probability) for r in problog_answers(session, kind, goal)]
    if kind is InferenceKind.PROGRAM_SAMPLING:
        # a sampled probability is always reported with its sample count and width
        estimate = problog_inference(session, kind, goal, ResultType.INFO).payload
        if config.json and config.result == "probability":
            return "probability", estimate.p
        return "info", estimate
    result = problog_inference(session, kind, goal, ResultType(config.result))
    if config.result == "probability":
        return "probability", result.value
    return "info", result.payload


def render(config: CliConfig, kind: str, value) -> str:
    if config.json:
        if kind == "answers":
            return json.dumps({"answers": [{"term": format_term(t), "p": p} for t, p in value]})
        if kind == "info":
            if isinstance(value, SampleEstimate):
                value = {"p": value.p, "n": value.n, "delta": value.delta, "successes": value.successes}
            else:
                value = formula_to_json(value)
        return json.dumps({"query": config.query_text, "inference": config.inference,
                           "result": config.result, "value": value})
    if kind == "answers":
        return "\n".join(f"{format_term(t)}  {fmt_probability(p)}" for t, p in value)
    if kind == "info":
        return str(value) if isinstance(value, SampleEstimate) else format_info(value)
    return fmt_probability(value)


def run(config: CliConfig) -> str:
    config.validate()
    text = _staged("load", load_program_text, config.program_path)
    program = _staged("parse", parse_program, text)
    goal = _staged("query", parse_query, config.query_text)
    kind, value = _staged("inference", evaluate, config, program, goal)
    return render(config, kind, value)


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        config = config_from_args(build_parser().parse_args(argv))
        text = run(config)
    except _Usage as e:
        print(e, file=err)
        return EXIT_USAGE
    except InvalidOptions as e:
        print(f"nestlog: usage: {e}", file=err)
        return EXIT_USAGE
    except _StageError as e:
        print(f"nestlog: {e.stage} error: {e.__cause__}", file=err)
        return EXIT_PROGRAM
    print(text, file=out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
