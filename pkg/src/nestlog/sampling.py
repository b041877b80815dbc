"""Program sampling: lazily sampled possible worlds and a Monte Carlo estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import (
    EngineSession,
    Hooks,
    Info,
    InferenceKind,
    InferenceOptions,
    Probability,
    ResultType,
    problog_inference,
    register_inference_kind,
)
from .errors import EngineStackError, InvalidOptions
from .resolution import DEFAULT_DEPTH_LIMIT, GroundFactId, Outcome, Solver
from .terms import Float, Int, Struct, Term


@dataclass
class PossibleWorld:
    """Truth values of the facts sampled so far in one sample."""

    assignments: dict[GroundFactId, bool] = field(default_factory=dict)
    sample_index: int = 0


def confidence_width(p: float, n: int) -> float:
    """Width of the 95% confidence interval of a success fraction ``p`` over ``n`` samples."""
    if n < 1:
        raise InvalidOptions(f"need at least one sample, got n={n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidOptions(f"p={p} outside [0,1]")
    return 2.0 * math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class SampleEstimate:
    successes: int
    n: int
    p: float
    delta: float

    @classmethod
    def from_counts(cls, successes: int, n: int) -> SampleEstimate:
        p = successes / n
        return cls(successes, n, p, confidence_width(p, n))

    def to_term(self) -> Term:
        return Struct("estimate", (Int(self.successes), Int(self.n), Float(self.p), Float(self.delta)))

    def __str__(self):
        return f"p={self.p:.6f} n={self.n} delta={self.delta:.6f}"


@dataclass(frozen=True)
class FixedSamples:
    n: int


@dataclass(frozen=True)
class PrecisionTarget:
    max_delta: float
    batch: int = 1000
    cap: int = 10_000_000


def stop_from_options(options: InferenceOptions) -> FixedSamples | PrecisionTarget:
    if options.max_delta is not None:
        return PrecisionTarget(options.max_delta, options.batch, options.cap)
    return FixedSamples(options.sample_count or InferenceOptions.DEFAULT_SAMPLES)


class SamplingHooks(Hooks):
    """register1: the current possible world; register2: the sample counter."""

    def init_registers(self, engine, session):
        engine.register1 = PossibleWorld()
        engine.register2 = 0

    def on_annotated_fact(self, engine, fact, probability):
        world = engine.register1.assignments
        value = world.get(fact)
        if value is None:
            value = world[fact] = engine.rng.random() < probability
        return Outcome.SUCCEED if value else Outcome.FAIL

    def run(self, session, engine, goal, result_type, options):
        estimate = _estimate(session, goal, stop_from_options(options), options.depth_limit)
        if result_type is ResultType.INFO:
            return Info(estimate)
        return Probability(estimate.p)

    # negation needs nothing special: Hooks.negate is negation as failure
    # against the world being sampled


register_inference_kind(InferenceKind.PROGRAM_SAMPLING.value, SamplingHooks())


def run_one_sample(session: EngineSession, goal: Term, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> bool:
    """Prove ``goal`` once in a fresh lazily sampled world."""
    engine = session.active
    if not isinstance(engine.hooks, SamplingHooks):
        raise EngineStackError("run_one_sample needs an active program-sampling engine")
    engine.register1 = PossibleWorld({}, engine.register2)
    engine.register2 += 1
    answers = Solver(session, depth_limit).solve(goal)
    try:
        for _ in answers:
            return True
        return False
    finally:
        answers.close()


def _estimate(session, goal, stop, depth_limit) -> SampleEstimate:
    successes = n = 0
    if isinstance(stop, FixedSamples):
        if stop.n < 1:
            raise InvalidOptions("fixed sample count must be positive")
        for _ in range(stop.n):
            successes += run_one_sample(session, goal, depth_limit)
        return SampleEstimate.from_counts(successes, stop.n)
    if not stop.max_delta > 0 or stop.batch < 1 or stop.cap < stop.batch:
        raise InvalidOptions("need max_delta > 0, batch >= 1 and cap >= batch")
    while True:
        for _ in range(stop.batch):
            successes += run_one_sample(session, goal, depth_limit)
        n += stop.batch
        estimate = SampleEstimate.from_counts(successes, n)
        if estimate.delta <= stop.max_delta or n >= stop.cap:
            return estimate


def estimate_probability(session: EngineSession, goal: Term,
                         stop: FixedSamples | PrecisionTarget,
                         depth_limit: int = DEFAULT_DEPTH_LIMIT) -> SampleEstimate:
    """Monte Carlo estimate of ``goal``'s success probability.

    Runs on the active engine when it is a sampling engine, otherwise inside a
    freshly pushed one.
    """
    if isinstance(session.active.hooks, SamplingHooks):
        return _estimate(session, goal, stop, depth_limit)
    if isinstance(stop, FixedSamples):
        options = InferenceOptions(sample_count=stop.n, depth_limit=depth_limit)
    else:
        options = InferenceOptions(max_delta=stop.max_delta, batch=stop.batch, cap=stop.cap,
                                   depth_limit=depth_limit)
    return problog_inference(session, InferenceKind.PROGRAM_SAMPLING, goal, ResultType.INFO, options).payload
