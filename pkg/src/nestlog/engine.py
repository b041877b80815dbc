"""Parametrised inference engines and the engine stack.

An engine is a pair of hooks plus two registers and an id. The SLD kernel
only ever talks to ``session.active``; nesting an inference pushes the active
engine onto the session stack, runs the new one to completion and pops it,
so the suspended engine's hooks and registers come back untouched.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from typing import Any

from .errors import (
    CurrentWithoutContext,
    EngineStackError,
    InvalidOptions,
    NonCallableError,
    UnknownInferenceKind,
)
from .resolution import (
    DEFAULT_DEPTH_LIMIT,
    META_PREDICATES,
    Outcome,
    Solver,
    meta_predicate,
)
from .syntax import Program, format_term
from .terms import Atom, Float, Struct, Term, is_callable


class InferenceKind(str, enum.Enum):
    PURE = "pure"
    EXACT = "exact"
    PROGRAM_SAMPLING = "program_sampling"
    CURRENT = "current"


class ResultType(str, enum.Enum):
    PROBABILITY = "probability"
    INFO = "info"


@dataclass
class InferenceOptions:
    sample_count: int | None = None
    max_delta: float | None = None
    batch: int = 1000
    cap: int = 10_000_000
    depth_limit: int = DEFAULT_DEPTH_LIMIT

    DEFAULT_SAMPLES = 10_000

    def validate(self) -> None:
        if self.sample_count is not None and self.sample_count <= 0:
            raise InvalidOptions(f"sample_count must be positive, got {self.sample_count}")
        if self.max_delta is not None and not self.max_delta > 0:
            raise InvalidOptions(f"max_delta must be positive, got {self.max_delta}")
        if self.batch < 1 or self.cap < self.batch:
            raise InvalidOptions("need batch >= 1 and cap >= batch")
        if self.depth_limit < 1:
            raise InvalidOptions("depth_limit must be positive")


@dataclass(frozen=True)
class Probability:
    value: float


@dataclass(frozen=True)
class Info:
    payload: Any


InferenceResult = Probability | Info


class Hooks:
    """Inference method: the two continuation hooks plus register setup and a driver.

    Subclass and pass an instance to :func:`register_inference_kind` to add a
    new method. Hooks are stateless; everything mutable lives in the engine.
    """

    kind: str = ""

    def init_registers(self, engine: Engine, session: EngineSession) -> None:
        engine.register1 = None
        engine.register2 = None

    def on_annotated_fact(self, engine: Engine, fact, probability) -> Outcome:
        raise NotImplementedError

    def on_derivation_success(self, engine: Engine) -> None:
        pass

    def run(self, session: EngineSession, engine: Engine, goal: Term,
            result_type: ResultType, options: InferenceOptions) -> InferenceResult:
        raise InvalidOptions(f"inference kind {self.kind!r} cannot answer a probabilistic query")

    def negate(self, solver: Solver, goal: Term):
        """Outcome of ``problog_not(goal)`` while this engine is active."""
        for _ in Solver(solver.session, solver.depth_limit).solve(goal):
            return False
        return True

    def nested_inference(self, session: EngineSession, kind, goal: Term,
                         result_type: ResultType, options: InferenceOptions) -> InferenceResult:
        """How a ``problog_inference`` body goal is answered while this engine is active."""
        return problog_inference(session, kind, goal, result_type, options)


class PureHooks(Hooks):
    """Plain Prolog: annotated facts simply succeed."""

    kind = InferenceKind.PURE.value

    def on_annotated_fact(self, engine, fact, probability):
        return Outcome.SUCCEED

    def negate(self, solver, goal):
        # probabilities are ignored here, so the negation is kept whenever it
        # could hold in some world: fail only if goal is certain
        info = problog_inference(solver.session, InferenceKind.EXACT, goal, ResultType.INFO,
                                 solver.session.options)
        from .exact import TRUE_FORMULA
        return info.payload != TRUE_FORMULA


_KINDS: dict[str, Hooks] = {InferenceKind.PURE.value: PureHooks()}


def register_inference_kind(name: str, hooks: Hooks) -> None:
    if name == InferenceKind.CURRENT.value:
        raise ValueError("'current' is reserved")
    hooks.kind = name
    _KINDS[name] = hooks


def inference_kinds() -> list[str]:
    return list(_KINDS)


@dataclass(eq=False)
class Engine:
    id: int
    kind: str
    hooks: Hooks
    register1: Any = None
    register2: Any = None
    rng: random.Random | None = None

    def __repr__(self):
        return f"Engine(id={self.id}, kind={self.kind!r})"


@dataclass(eq=False)
class EngineSession:
    program: Program
    active: Engine
    rng_seed: int = 0
    stack: list[Engine] = field(default_factory=list)
    next_engine_id: int = 1
    options: InferenceOptions = field(default_factory=InferenceOptions)

    def __post_init__(self):
        self.rng = random.Random(self.rng_seed)
        self.fresh = itertools.count()

    @property
    def depth(self) -> int:
        return len(self.stack)


def session_new(program: Program, seed: int = 0, options: InferenceOptions | None = None) -> EngineSession:
    root = Engine(0, InferenceKind.PURE.value, _KINDS[InferenceKind.PURE.value])
    session = EngineSession(program, root, seed, options=options or InferenceOptions())
    root.hooks.init_registers(root, session)
    return session


def _kind_name(kind) -> str:
    return kind.value if isinstance(kind, InferenceKind) else str(kind)


def resolve_kind(session: EngineSession, kind) -> str:
    """Concrete kind name; ``current`` inherits from the nearest non-pure engine."""
    name = _kind_name(kind)
    if name != InferenceKind.CURRENT.value:
        if name not in _KINDS:
            raise UnknownInferenceKind(f"unknown inference kind {name!r}")
        return name
    for eng in [session.active, *reversed(session.stack)]:
        if eng.kind != InferenceKind.PURE.value:
            return eng.kind
    raise CurrentWithoutContext("'current' inference requested with no enclosing probabilistic engine")


def engine_push(session: EngineSession, kind) -> Engine:
    name = resolve_kind(session, kind)
    hooks = _KINDS[name]
    engine = Engine(session.next_engine_id, name, hooks, rng=session.rng)
    session.next_engine_id += 1
    hooks.init_registers(engine, session)
    session.stack.append(session.active)
    session.active = engine
    return engine


def engine_pop(session: EngineSession) -> Engine:
    if not session.stack:
        raise EngineStackError("pop on an empty engine stack")
    finished = session.active
    session.active = session.stack.pop()
    return finished


def engine_swap_top(session: EngineSession) -> None:
    if not session.stack:
        raise EngineStackError("swap on an empty engine stack")
    session.active, session.stack[-1] = session.stack[-1], session.active


def problog_inference(session: EngineSession, kind, goal: Term,
                      result_type: ResultType | str = ResultType.PROBABILITY,
                      options: InferenceOptions | None = None) -> InferenceResult:
    """Run a (possibly nested) inference of ``goal`` and return its result.

    Variables of ``goal`` are never bound: the probability covers all of its
    instances together.
    """
    if options is None:
        options = session.options
    options.validate()
    result_type = ResultType(result_type)
    if not is_callable(goal):
        raise NonCallableError(f"goal is not callable: {format_term(goal)}")
    name = resolve_kind(session, kind)
    if name == InferenceKind.PURE.value:
        raise InvalidOptions("pure inference has no probability; use solve() or problog_answers()")
    engine = engine_push(session, name)
    try:
        return engine.hooks.run(session, engine, goal, result_type, options)
    finally:
        if session.active is not engine:
            raise EngineStackError("engine stack unbalanced after inference")
        engine_pop(session)


# --------------------------------------------------------------------------
# Meta-call surface inside SLD bodies


def kind_from_term(t: Term) -> str:
    if type(t) is not Atom:
        raise UnknownInferenceKind(f"inference kind must be an atom, got {format_term(t)}")
    return t.name


def result_to_term(result: InferenceResult) -> Term:
    if isinstance(result, Probability):
        return Float(result.value)
    payload = result.payload
    if hasattr(payload, "to_term"):
        return payload.to_term()
    raise TypeError(f"cannot convert {payload!r} to a term")


@meta_predicate("problog_inference", 2, 3, 4)
def _problog_inference_goal(solver: Solver, args: tuple):
    session = solver.session
    if len(args) == 2:
        kind, goal, rtype, out = InferenceKind.CURRENT.value, args[0], ResultType.PROBABILITY, args[1]
    elif len(args) == 3:
        kind, goal, rtype, out = kind_from_term(solver.deref(args[0])), args[1], ResultType.PROBABILITY, args[2]
    else:
        kind = kind_from_term(solver.deref(args[0]))
        rt = solver.deref(args[2])
        if type(rt) is not Atom or rt.name not in ("probability", "info"):
            raise InvalidOptions(f"result type must be probability or info, got {format_term(rt)}")
        goal, rtype, out = args[1], ResultType(rt.name), args[3]
    goal = solver.resolve(goal)
    result = session.active.hooks.nested_inference(session, kind, goal, rtype, session.options)
    return solver.unify(out, result_to_term(result))


def resolve_meta_goal(solver: Solver, goal: Term):
    """Dispatch a meta-call body goal; returns a bool or an iterator of solutions."""
    if type(goal) is Struct:
        key = (goal.functor, len(goal.args))
        args = goal.args
    elif type(goal) is Atom:
        key, args = (goal.name, 0), ()
    else:
        raise NonCallableError(f"goal is not callable: {format_term(goal)}")
    handler = META_PREDICATES.get(key)
    if handler is None:
        raise KeyError(f"{key[0]}/{key[1]} is not a meta-call")
    return handler(solver, args)
