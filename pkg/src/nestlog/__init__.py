"""A probabilistic logic programming interpreter with nested inference."""

from .engine import (
    Engine,
    EngineSession,
    Hooks,
    Info,
    InferenceKind,
    InferenceOptions,
    Probability,
    ResultType,
    engine_pop,
    engine_push,
    engine_swap_top,
    problog_inference,
    register_inference_kind,
    resolve_meta_goal,
    session_new,
)
from .errors import NestlogError
from .exact import (
    DnfTrie,
    FactLiteral,
    NestedFormula,
    Robdd,
    build_robdd,
    exact_probability,
    naive_proof_sum,
    robdd_probability,
    trie_to_formula,
)
from .metacalls import AnswerRecord, find_most_probable_answer, problog_answers, problog_not
from .oracle import (
    brute_force_answer_probabilities,
    brute_force_success_probability,
    ground_fact_universe,
    world_probability,
)
from .programs import bundled_examples, load_bundled
from .resolution import GroundFactId, Outcome, Solver, rename_apart, solve, unify
from .sampling import (
    FixedSamples,
    PrecisionTarget,
    SampleEstimate,
    confidence_width,
    estimate_probability,
    run_one_sample,
)
from .syntax import AnnotatedFact, Clause, Program, format_term, parse_program, parse_query

__all__ = [name for name in dir() if not name.startswith("_")]
