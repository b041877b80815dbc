from __future__ import annotations

import pytest

from nestlog import load_bundled, parse_program, session_new
from nestlog.engine import InferenceKind, InferenceOptions, ResultType, problog_inference
from nestlog.syntax import parse_query


@pytest.fixture
def graph():
    return load_bundled("graph.pl")


@pytest.fixture
def graph_session(graph):
    return session_new(graph)


def exact(program_or_session, query: str, **opts) -> float:
    """Exact success probability of ``query``; accepts a program, a session or source text."""
    session = program_or_session
    if isinstance(session, str):
        session = parse_program(session)
    if not hasattr(session, "active"):
        session = session_new(session)
    return problog_inference(session, InferenceKind.EXACT, parse_query(query),
                             ResultType.PROBABILITY, InferenceOptions(**opts)).value


def stack_snapshot(session):
    return session.active.id, [e.id for e in session.stack]


# --- acceptance report ------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class Criterion:
    """Records one acceptance criterion's outcome for the end-of-run report."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.notes: list[str] = []
        ACCEPTANCE[number] = (False, title)

    def note(self, text: str) -> None:
        self.notes.append(text)

    def check(self, ok: bool, text: str) -> None:
        self.note(text if ok else f"FAILED {text}")
        ACCEPTANCE[self.number] = (False, "; ".join([self.title, *self.notes]))
        if not ok:
            raise AssertionError(f"criterion {self.number}: {text}")

    def passed(self) -> None:
        ACCEPTANCE[self.number] = (True, "; ".join([self.title, *self.notes]))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}")
