from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestlog import load_bundled, parse_program
from nestlog.errors import UniverseTooLarge
from nestlog.oracle import (
    MAX_UNIVERSE,
    WorldAssignment,
    brute_force_answer_probabilities,
    brute_force_success_probability,
    ground_fact_universe,
    random_program,
    world_probability,
)
from nestlog.resolution import GroundFactId
from nestlog.syntax import format_term, parse_query
from nestlog.terms import Atom

from .conftest import exact


def edge(a: str, b: str, index: int) -> GroundFactId:
    return GroundFactId(index, "edge", (Atom(a), Atom(b)))


BE, BD, EF, DF = edge("b", "e", 2), edge("b", "d", 3), edge("e", "f", 5), edge("d", "f", 6)
WEIGHTS = {BE: 0.8, BD: 0.2, EF: 0.3, DF: 0.5}


def test_universe_of_path_b_f(graph):
    assert ground_fact_universe(graph, parse_query("path(b,f)")) == [BE, BD, EF, DF]


def test_trivial_universes(graph):
    assert ground_fact_universe(graph, parse_query("true")) == []
    assert [str(f) for f in ground_fact_universe(graph, parse_query("edge(a,b)"))] == ["edge(a,b)"]


def test_universe_drops_facts_that_cannot_matter():
    prog = parse_program("0.5 :: a. 0.5 :: b. p :- a, fail. p :- b.")
    assert [str(f) for f in ground_fact_universe(prog, parse_query("p"))] == ["b"]


def test_universe_includes_facts_reached_only_after_a_failure():
    prog = parse_program("0.5 :: a. 0.5 :: b. 0.5 :: c. p :- a, b. p :- c.")
    assert [str(f) for f in ground_fact_universe(prog, parse_query("p"))] == ["a", "b", "c"]
    prog = parse_program("0.5 :: a. 0.5 :: b. p :- problog_not(a), b.")
    assert [str(f) for f in ground_fact_universe(prog, parse_query("p"))] == ["a", "b"]


def test_world_probability_examples():
    world = {BE: True, BD: True, EF: False, DF: False}
    assert world_probability(world, WEIGHTS) == pytest.approx(0.8 * 0.2 * 0.7 * 0.5, abs=1e-15)
    assert world_probability(world, WEIGHTS) == pytest.approx(0.056, abs=1e-12)
    assert world_probability(dict.fromkeys(WEIGHTS, True), WEIGHTS) == pytest.approx(0.024, abs=1e-12)
    assert world_probability({}, {}) == 1.0
    assert WorldAssignment.build(world, WEIGHTS).probability == world_probability(world, WEIGHTS)


@given(st.lists(st.floats(0.0, 1.0), min_size=0, max_size=10))
def test_world_probabilities_sum_to_one(ps):
    ids = [GroundFactId(i, "f", ()) for i in range(len(ps))]
    weights = dict(zip(ids, ps))
    terms = [world_probability(dict(zip(ids, vals)), weights)
             for vals in itertools.product((False, True), repeat=len(ids))]
    assert math.fsum(terms) == pytest.approx(1.0, abs=1e-12)


def test_success_probability_examples(graph):
    assert brute_force_success_probability(graph, parse_query("path(b,f)")) == pytest.approx(0.316, abs=1e-12)
    assert brute_force_success_probability(load_bundled("sprinkler.pl"), parse_query("grass_wet")) == \
        pytest.approx(0.44838, abs=1e-12)
    assert brute_force_success_probability(graph, parse_query("fail")) == 0.0


def test_answer_probabilities(graph):
    got = {format_term(t): p for t, p in brute_force_answer_probabilities(graph, parse_query("path(b,X)")).items()}
    expected = {"path(b,e)": 0.8, "path(b,d)": 0.2, "path(b,f)": 0.316, "path(b,g)": 0.12, "path(b,h)": 0.268744}
    assert got.keys() == expected.keys()
    for k, v in expected.items():
        assert got[k] == pytest.approx(v, abs=1e-12)
    got = {format_term(t): p for t, p in brute_force_answer_probabilities(graph, parse_query("edge(a,Y)")).items()}
    assert got == pytest.approx({"edge(a,b)": 0.40, "edge(a,c)": 0.55})
    assert brute_force_answer_probabilities(graph, parse_query("path(h,X)")) == {}


def test_universe_guard():
    facts = " ".join(f"0.5 :: f({i})." for i in range(MAX_UNIVERSE + 1))
    prog = parse_program(facts + " p :- f(X), fail.")
    with pytest.raises(UniverseTooLarge):
        brute_force_success_probability(prog, parse_query("p"))


def test_nested_inference_under_the_oracle():
    route = load_bundled("route.pl")
    assert brute_force_success_probability(route, parse_query("model(input)")) == pytest.approx(0.24, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_agrees_with_exact_on_random_programs(seed):
    source, query = random_program(seed)
    prog = parse_program(source)
    assert len(prog.annotated_facts) <= 12 and len(prog.clauses) <= 8
    bf = brute_force_success_probability(prog, parse_query(query))
    assert 0.0 <= bf <= 1.0
    assert exact(prog, query) == pytest.approx(bf, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(["a", "b", "c"]))
def test_adding_a_clause_never_lowers_probability(seed, const):
    source, query = random_program(seed, negation=False)
    prog = parse_program(source)
    base = brute_force_success_probability(prog, parse_query(query))
    fact = prog.annotated_facts[0].template
    head = query if "(" not in query else query.split("(")[0] + f"({const})"
    extended = parse_program(source + f"{head} :- {format_term(fact)}.\n")
    assert brute_force_success_probability(extended, parse_query(query)) >= base - 1e-12


def test_random_programs_are_reproducible():
    assert random_program(17) == random_program(17)
    assert random_program(17) != random_program(18)
