"""Probabilistic negation and per-answer probabilities, built on engine nesting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .engine import (
    EngineSession,
    InferenceKind,
    InferenceOptions,
    ResultType,
    engine_pop,
    engine_push,
    engine_swap_top,
    kind_from_term,
    resolve_kind,
)
from .errors import InvalidOptions, NoAnswers, NonCallableError
from .resolution import Solver, apply, meta_predicate
from .syntax import format_term
from .terms import Float, Term, is_callable


@dataclass(frozen=True)
class AnswerRecord:
    answer: Term
    probability: float


def problog_not(solver: Solver, goal: Term):
    """Negate ``goal`` inside the derivation run by ``solver``.

    What that means depends on the active engine: exact inference embeds the
    negated formula of ``goal`` in the current explanation, sampling uses
    negation as failure in the current world.
    """
    goal = solver.resolve(goal)
    if not is_callable(goal):
        raise NonCallableError(f"problog_not of a non-callable term: {format_term(goal)}")
    return solver.session.active.hooks.negate(solver, goal)


@meta_predicate("problog_not", 1, 2)
def _problog_not_goal(solver: Solver, args: tuple):
    if len(args) == 2:
        session = solver.session
        wanted = resolve_kind(session, kind_from_term(solver.deref(args[0])))
        if wanted != session.active.kind:
            raise InvalidOptions(
                f"problog_not({wanted}, ...) called while a {session.active.kind} engine is active")
    return problog_not(solver, args[-1])


def problog_answers(session: EngineSession, kind, goal: Term,
                    options: InferenceOptions | None = None) -> Iterator[AnswerRecord]:
    """Answers of ``goal`` in discovery order, each with its success probability.

    Answers are enumerated by a pure engine; for every new answer the parent
    engine is swapped back in to compute the probability. Close the iterator
    to stop early; the engine stack is restored either way.
    """
    if options is None:
        options = session.options
    if not is_callable(goal):
        raise NonCallableError(f"goal is not callable: {format_term(goal)}")
    # resolved now, against the caller's engine, not the enumerating one
    return _answers(session, resolve_kind(session, kind), goal, options)


def _answers(session, kind, goal, options):
    pure = engine_push(session, InferenceKind.PURE)
    pure_active = True
    answers = Solver(session, options.depth_limit).solve(goal)
    memo: dict[str, float] = {}
    try:
        for subst in answers:
            instance = apply(goal, subst)
            key = format_term(instance)
            if key in memo:
                continue
            engine_swap_top(session)
            pure_active = False
            p = session.active.hooks.nested_inference(
                session, kind, instance, ResultType.PROBABILITY, options).value
            memo[key] = p
            yield AnswerRecord(instance, p)
            engine_swap_top(session)
            pure_active = True
    finally:
        if not pure_active:
            engine_swap_top(session)
        answers.close()
        assert session.active is pure
        engine_pop(session)


@meta_predicate("problog_answers", 2, 3)
def _problog_answers_goal(solver: Solver, args: tuple):
    if len(args) == 2:
        kind, goal, out = InferenceKind.CURRENT.value, args[0], args[1]
    else:
        kind, goal, out = kind_from_term(solver.deref(args[0])), args[1], args[2]
    session = solver.session
    stream = problog_answers(session, kind, solver.resolve(goal), session.options)
    try:
        for record in stream:
            mark = len(solver.trail)
            if solver.unify(goal, record.answer) and solver.unify(out, Float(record.probability)):
                yield True
            else:
                solver.undo_to(mark)
    finally:
        stream.close()


def find_most_probable_answer(session: EngineSession, kind, goal: Term,
                              options: InferenceOptions | None = None) -> AnswerRecord:
    best = None
    for record in problog_answers(session, kind, goal, options):
        if best is None or record.probability > best.probability:
            best = record
    if best is None:
        raise NoAnswers(f"{format_term(goal)} has no answers")
    return best
