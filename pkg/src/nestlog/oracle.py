"""Ground truth by enumerating possible worlds.

Independent of the exact and sampling engines: a query is decided in each
total world by plain SLD resolution, and world probabilities are summed.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Mapping

from .engine import (
    EngineSession,
    Hooks,
    InferenceOptions,
    Probability,
    ResultType,
    engine_pop,
    engine_push,
    register_inference_kind,
    session_new,
)
from .errors import InvalidOptions, UniverseTooLarge
from .resolution import DEFAULT_DEPTH_LIMIT, GroundFactId, Outcome, Solver
from .syntax import Program, format_term
from .terms import Term, order_key

MAX_UNIVERSE = 24
WORLD_KIND = "world"


class _Unassigned(Exception):
    def __init__(self, fact: GroundFactId, probability: float):
        super().__init__(str(fact))
        self.fact = fact
        self.probability = probability


class WorldHooks(Hooks):
    """Annotated facts take their value from a fixed world (register1)."""

    def init_registers(self, engine, session):
        engine.register1 = {}
        engine.register2 = None

    def on_annotated_fact(self, engine, fact, probability):
        value = engine.register1.get(fact)
        if value is None:
            raise _Unassigned(fact, probability)
        return Outcome.SUCCEED if value else Outcome.FAIL

    def run(self, session, engine, goal, result_type, options):
        raise InvalidOptions("the world engine is internal to the oracle")

    def nested_inference(self, session, kind, goal, result_type, options):
        # a nested query's value does not depend on the outer world: compute
        # it by enumeration once per program
        if result_type is not ResultType.PROBABILITY:
            raise InvalidOptions("the oracle only evaluates nested probability queries")
        memo = session.program.runtime_cache.setdefault("oracle_nested", {})
        key = (format_term(goal), options.depth_limit)
        if key not in memo:
            memo[key] = brute_force_success_probability(session.program, goal, options.depth_limit)
        return Probability(memo[key])


register_inference_kind(WORLD_KIND, WorldHooks())


@dataclass(frozen=True)
class WorldAssignment:
    facts: Mapping[GroundFactId, bool]
    probability: float

    @classmethod
    def build(cls, facts: Mapping[GroundFactId, bool], weights: Mapping[GroundFactId, float]):
        return cls(dict(facts), world_probability(facts, weights))


def world_probability(facts: Mapping[GroundFactId, bool], weights: Mapping[GroundFactId, float]) -> float:
    prob = 1.0
    for fid, value in facts.items():
        p = weights[fid]
        prob *= p if value else 1.0 - p
    return prob


def _fact_key(fid: GroundFactId):
    return (fid.fact_index, tuple(order_key(a) for a in fid.ground_args))


def _world_session(program: Program) -> tuple[EngineSession, object]:
    session = session_new(program, 0)
    engine = engine_push(session, WORLD_KIND)
    return session, engine


# A decision tree over fact values: a leaf is the goal's outcome, an inner
# node is (fact, tree if false, tree if true).


def _decision_tree(program: Program, goal: Term, depth_limit: int,
                   limit: int) -> tuple[object, dict[GroundFactId, float]]:
    """Search every derivation, branching on each fact the first time it is met.

    Returns the tree and every fact met on the way with its probability.
    """
    session, engine = _world_session(program)
    found: dict[GroundFactId, float] = {}

    def grow(world):
        engine.register1 = world
        proved = False
        try:
            # run to exhaustion so every fact some derivation touches is met
            for _ in Solver(session, depth_limit).solve(goal):
                proved = True
        except _Unassigned as u:
            if u.fact not in found:
                found[u.fact] = u.probability
                if len(found) > limit:
                    raise UniverseTooLarge(
                        f"more than {limit} relevant ground facts for {format_term(goal)}") from None
            return (u.fact, grow({**world, u.fact: False}), grow({**world, u.fact: True}))
        return proved

    try:
        tree = grow({})
    finally:
        engine_pop(session)
    return tree, found


def _follow(node, world, flipped, value):
    while type(node) is tuple:
        fact, low, high = node
        if fact == flipped:
            node = high if value else low
        elif fact in world:
            node = high if world[fact] else low
        else:
            break
    return node


def _matters(tree, fact) -> bool:
    """Whether some world's outcome changes when only ``fact`` is flipped."""

    def differs(world):
        a = _follow(tree, world, fact, False)
        b = _follow(tree, world, fact, True)
        if type(a) is not tuple and type(b) is not tuple:
            return a != b
        g = a[0] if type(a) is tuple else b[0]
        return differs({**world, g: False}) or differs({**world, g: True})

    return differs({})


def _sorted(facts):
    return sorted(facts, key=_fact_key)


def _reachable_facts(program: Program, goal: Term, depth_limit: int,
                     limit: int) -> dict[GroundFactId, float]:
    _, found = _decision_tree(program, goal, depth_limit, limit)
    return {fid: found[fid] for fid in _sorted(found)}


def _relevant_facts(program: Program, goal: Term, depth_limit: int,
                    limit: int) -> dict[GroundFactId, float]:
    tree, found = _decision_tree(program, goal, depth_limit, limit)
    return {fid: found[fid] for fid in _sorted(found) if _matters(tree, fid)}


def ground_fact_universe(program: Program, goal: Term, depth_limit: int = DEFAULT_DEPTH_LIMIT,
                         limit: int = MAX_UNIVERSE) -> list[GroundFactId]:
    """Ground annotated facts whose truth value can change whether ``goal`` succeeds.

    Every fact met in any derivation is tried both true and false, so facts
    that only matter once another fact has failed are found as well; facts on
    dead-end branches are then dropped, since they marginalise out.
    """
    return list(_relevant_facts(program, goal, depth_limit, limit))


def _worlds(weights: Mapping[GroundFactId, float]):
    ids = list(weights)
    for values in itertools.product((False, True), repeat=len(ids)):
        facts = dict(zip(ids, values))
        yield facts, world_probability(facts, weights)


def brute_force_success_probability(program: Program, goal: Term,
                                    depth_limit: int = DEFAULT_DEPTH_LIMIT) -> float:
    tree, found = _decision_tree(program, goal, depth_limit, MAX_UNIVERSE)
    weights = {fid: found[fid] for fid in _sorted(found) if _matters(tree, fid)}
    # facts outside the universe cannot change the outcome: any fixed value will do
    idle = {fid: False for fid in found if fid not in weights}
    session, engine = _world_session(program)
    terms = []
    for facts, prob in _worlds(weights):
        engine.register1 = {**idle, **facts}
        answers = Solver(session, depth_limit).solve(goal)
        for _ in answers:
            terms.append(prob)
            break
        answers.close()
    return math.fsum(terms)


def brute_force_answer_probabilities(program: Program, goal: Term,
                                     depth_limit: int = DEFAULT_DEPTH_LIMIT) -> dict[Term, float]:
    """Success probability of every ground instance of ``goal`` provable in some world."""
    from .resolution import apply

    # every reached fact, since one that cannot change whether some answer
    # exists may still decide which answers there are
    weights = _reachable_facts(program, goal, depth_limit, MAX_UNIVERSE)
    session, engine = _world_session(program)
    terms: dict[str, list[float]] = {}
    instances: dict[str, Term] = {}
    for facts, prob in _worlds(weights):
        engine.register1 = facts
        seen = set()
        for subst in Solver(session, depth_limit).solve(goal):
            instance = apply(goal, subst)
            key = format_term(instance)
            if key not in seen:
                seen.add(key)
                instances.setdefault(key, instance)
                terms.setdefault(key, []).append(prob)
    return {instances[k]: math.fsum(v) for k, v in terms.items()}


# --------------------------------------------------------------------------
# Random programs for oracle comparisons


def random_program(seed: int, max_facts: int = 12, max_clauses: int = 8,
                   negation: bool = True) -> tuple[str, str]:
    """A random acyclic program and a ground query, as source text.

    Facts are ground with probabilities in [0.05, 0.95]; derived predicates
    only call facts or earlier derived predicates.
    """
    rng = random.Random(seed)
    consts = ["a", "b", "c"]
    fact_preds = [(f"f{i}", rng.choice([0, 1])) for i in range(rng.randint(1, 4))]
    instances = []
    for name, arity in fact_preds:
        if arity == 0:
            instances.append(name)
        else:
            instances += [f"{name}({c})" for c in consts]
    rng.shuffle(instances)
    facts = instances[: rng.randint(1, min(max_facts, len(instances)))]
    defined = {}
    for inst in facts:
        name = inst.split("(")[0]
        defined[name] = 1 if "(" in inst else 0
    lines = [f"{rng.uniform(0.05, 0.95):.2f} :: {inst}." for inst in facts]
    fact_sigs = sorted(defined.items())

    derived: list[tuple[str, int]] = []
    n_clauses = rng.randint(1, max_clauses)
    n_preds = rng.randint(1, min(4, n_clauses))
    for i in range(n_preds):
        derived.append((f"d{i}", rng.choice([0, 1])))
    # every derived predicate gets at least one clause
    owners = list(range(n_preds)) + [rng.randrange(n_preds) for _ in range(n_clauses - n_preds)]
    owners.sort()
    for owner in owners:
        name, arity = derived[owner]
        callable_sigs = fact_sigs + derived[:owner]
        head = f"{name}(X)" if arity else name
        body = []
        for _ in range(rng.randint(1, 3)):
            cname, carity = rng.choice(callable_sigs)
            if carity:
                arg = rng.choice(["X", "X", *consts]) if arity else rng.choice(["Y", *consts])
                lit = f"{cname}({arg})"
            else:
                lit = cname
            if negation and rng.random() < 0.2:
                lit = f"problog_not({lit})"
            body.append(lit)
        if arity and not any("X" in b for b in body):
            fname, farity = rng.choice(fact_sigs)
            body.insert(0, f"{fname}(X)" if farity else fname)
            if not farity:
                # keep X bound: fall back to a constant head
                head = f"{name}(a)"
        lines.append(f"{head} :- {', '.join(body)}.")
    top, top_arity = derived[-1]
    query = f"{top}({rng.choice(consts)})" if top_arity else top
    return "\n".join(lines) + "\n", query
