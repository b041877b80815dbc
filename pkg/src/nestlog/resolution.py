"""Unification and the SLD resolution kernel.

The kernel is an iterative machine (goal continuation + choicepoint stack +
trail) so that derivations as deep as the depth limit do not exhaust the
Python stack. It knows nothing about probabilities: whenever a subgoal is
resolved against an annotated fact it asks the session's *active* engine
what to do, and it notifies that engine whenever a derivation succeeds.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator

from .errors import (
    ArithmeticTypeError,
    DepthLimitExceeded,
    InstantiationError,
    NonCallableError,
    NonGroundAnnotatedFact,
    UnknownPredicate,
)
from .syntax import AnnotatedFact, Clause, Program, format_term
from .terms import Atom, Float, Int, Struct, Term, Var

Substitution = dict  # Var -> Term

DEFAULT_DEPTH_LIMIT = 100_000


class Outcome(enum.Enum):
    """What an engine's annotated-fact hook reports back to the kernel."""

    FAIL = 0
    SUCCEED = 1
    # succeed, and the engine appended one item to its register1 list; the
    # kernel removes it again on backtracking
    SUCCEED_WITH_LITERAL = 2


@dataclass(frozen=True, slots=True)
class GroundFactId:
    """Identity of one ground instance of an annotated fact."""

    fact_index: int
    functor: str
    ground_args: tuple

    @property
    def term(self) -> Term:
        return Struct(self.functor, self.ground_args) if self.ground_args else Atom(self.functor)

    def __str__(self):
        return format_term(self.term)


# --------------------------------------------------------------------------
# Substitutions


def deref(t: Term, bindings: Substitution) -> Term:
    while type(t) is Var:
        nt = bindings.get(t)
        if nt is None:
            return t
        t = nt
    return t


def resolve(t: Term, bindings: Substitution) -> Term:
    """Apply ``bindings`` to ``t`` completely."""
    tt = type(t)
    if tt is Var:
        t = deref(t, bindings)
        if type(t) is not Struct:
            return t
    elif tt is not Struct:
        return t
    args = t.args
    new = tuple(resolve(a, bindings) for a in args)
    for a, b in zip(args, new):
        if a is not b:
            return Struct(t.functor, new)
    return t


apply = resolve


def _occurs(v: Var, t: Term, bindings: Substitution) -> bool:
    stack = [t]
    while stack:
        x = deref(stack.pop(), bindings)
        tx = type(x)
        if tx is Var:
            if x == v:
                return True
        elif tx is Struct:
            stack.extend(x.args)
    return False


def _unify(a: Term, b: Term, bindings: Substitution, trail: list, occurs_check: bool = True) -> bool:
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = deref(x, bindings)
        y = deref(y, bindings)
        if x is y:
            continue
        tx, ty = type(x), type(y)
        if tx is Var:
            if ty is Var and x == y:
                continue
            if occurs_check and ty is Struct and _occurs(x, y, bindings):
                return False
            bindings[x] = y
            trail.append(x)
        elif ty is Var:
            if occurs_check and tx is Struct and _occurs(y, x, bindings):
                return False
            bindings[y] = x
            trail.append(y)
        elif tx is Struct:
            if ty is not Struct or x.functor != y.functor or len(x.args) != len(y.args):
                return False
            stack.extend(zip(x.args, y.args))
        elif tx is not ty or x != y:
            return False
    return True


def unify(t1: Term, t2: Term, s: Substitution | None = None) -> Substitution | None:
    """Most general unifier of ``t1`` and ``t2`` extending ``s``; None on failure."""
    bindings = dict(s) if s else {}
    if _unify(t1, t2, bindings, []):
        return bindings
    return None


def rename_apart(c: Clause, counter: Iterator[int]) -> Clause:
    """Variant of ``c`` whose variables are all fresh ``_V<n>`` names."""
    mapping: dict[Var, Var] = {}

    def ren(t):
        tt = type(t)
        if tt is Var:
            v = mapping.get(t)
            if v is None:
                v = mapping[t] = Var(f"_V{next(counter)}")
            return v
        if tt is Struct:
            return Struct(t.functor, tuple(ren(a) for a in t.args))
        return t

    return Clause(ren(c.head), tuple(ren(g) for g in c.body))


# Compiled clause skeletons: ground subterms are shared, variables become slots.

class _Slot:
    __slots__ = ("i",)

    def __init__(self, i):
        self.i = i


class _Skel:
    __slots__ = ("functor", "args")

    def __init__(self, functor, args):
        self.functor = functor
        self.args = args


def _compile(t: Term, slots: dict[Var, _Slot]):
    tt = type(t)
    if tt is Var:
        s = slots.get(t)
        if s is None:
            s = slots[t] = _Slot(len(slots))
        return s
    if tt is Struct:
        args = tuple(_compile(a, slots) for a in t.args)
        if all(type(a) not in (_Slot, _Skel) for a in args):
            return t
        return _Skel(t.functor, args)
    return t


def _instantiate(t, vs: list):
    tt = type(t)
    if tt is _Slot:
        return vs[t.i]
    if tt is _Skel:
        return Struct(t.functor, tuple([_instantiate(a, vs) for a in t.args]))
    return t


class _Compiled:
    __slots__ = ("nvars", "head", "body", "entry")

    def __init__(self, entry):
        slots: dict[Var, _Slot] = {}
        self.entry = entry
        if type(entry) is AnnotatedFact:
            self.head = _compile(entry.template, slots)
            self.body = ()
        else:
            self.head = _compile(entry.head, slots)
            self.body = tuple(_compile(g, slots) for g in entry.body)
        self.nvars = len(slots)


def _fill(t, vs: list, counter):
    """Instantiate a head skeleton, giving unset slots fresh variables."""
    tt = type(t)
    if tt is _Slot:
        v = vs[t.i]
        if v is None:
            v = vs[t.i] = Var(f"_V{next(counter)}")
        return v
    if tt is _Skel:
        return Struct(t.functor, tuple([_fill(a, vs, counter) for a in t.args]))
    return t


def _match(skel, t, vs: list, bindings: Substitution, trail: list, occurs_check: bool, counter) -> bool:
    """Unify a head skeleton with a goal term without building the head.

    The first occurrence of a head variable simply takes the goal subterm, so
    most head variables never become bindings at all.
    """
    ts = type(skel)
    if ts is _Slot:
        cur = vs[skel.i]
        if cur is None:
            vs[skel.i] = t
            return True
        return _unify(cur, t, bindings, trail, occurs_check)
    while type(t) is Var:
        nt = bindings.get(t)
        if nt is None:
            break
        t = nt
    tt = type(t)
    if ts is _Skel:
        if tt is Struct:
            args = t.args
            if t.functor != skel.functor or len(args) != len(skel.args):
                return False
            for a, b in zip(skel.args, args):
                if not _match(a, b, vs, bindings, trail, occurs_check, counter):
                    return False
            return True
        if tt is Var:
            return _unify(t, _fill(skel, vs, counter), bindings, trail, occurs_check)
        return False
    if tt is Var:
        bindings[t] = skel
        trail.append(t)
        return True
    if ts is Atom:
        return tt is Atom and skel.name == t.name
    return _unify(skel, t, bindings, trail, occurs_check)


def _compiled_entries(program: Program, entries: list) -> list[_Compiled]:
    cache = program.runtime_cache.setdefault("compiled", {})
    got = cache.get(id(entries))
    if got is None:
        got = cache[id(entries)] = ([_Compiled(e) for e in entries], entries)
    return got[0]


# --------------------------------------------------------------------------
# Arithmetic and simple built-ins


def eval_arith(t: Term, bindings: Substitution):
    t = deref(t, bindings)
    tt = type(t)
    if tt is Int or tt is Float:
        return t.value
    if tt is Var:
        raise InstantiationError("arithmetic on an unbound variable")
    if tt is Struct:
        f, args = t.functor, t.args
        if len(args) == 2:
            x = eval_arith(args[0], bindings)
            y = eval_arith(args[1], bindings)
            if f == "+":
                return x + y
            if f == "-":
                return x - y
            if f == "*":
                return x * y
            if f == "/":
                if y == 0:
                    raise ArithmeticTypeError("division by zero")
                if type(x) is int and type(y) is int and x % y == 0:
                    return x // y
                return x / y
            if f == "//" or f == "mod":
                if type(x) is not int or type(y) is not int:
                    raise ArithmeticTypeError(f"{f} expects integers")
                if y == 0:
                    raise ArithmeticTypeError("division by zero")
                if f == "mod":
                    return x % y
                q = abs(x) // abs(y)
                return q if (x >= 0) == (y >= 0) else -q
            if f == "min":
                return min(x, y)
            if f == "max":
                return max(x, y)
        elif len(args) == 1:
            x = eval_arith(args[0], bindings)
            if f == "-":
                return -x
            if f == "+":
                return x
            if f == "abs":
                return abs(x)
            if f == "sqrt":
                return math.sqrt(x)
    raise ArithmeticTypeError(f"not an arithmetic expression: {format_term(resolve(t, bindings))}")


def _number_term(v) -> Term:
    return Int(v) if type(v) is int else Float(float(v))


def _compare(op):
    def builtin(solver, args):
        x = eval_arith(args[0], solver.bindings)
        y = eval_arith(args[1], solver.bindings)
        return op(x, y)
    return builtin


def _bi_unify(solver, args):
    return solver.unify(args[0], args[1])


def _bi_not_unify(solver, args):
    return unify(resolve(args[0], solver.bindings), resolve(args[1], solver.bindings)) is None


def _bi_eq(solver, args):
    return resolve(args[0], solver.bindings) == resolve(args[1], solver.bindings)


def _bi_neq(solver, args):
    return resolve(args[0], solver.bindings) != resolve(args[1], solver.bindings)


def _bi_is(solver, args):
    return solver.unify(args[0], _number_term(eval_arith(args[1], solver.bindings)))


BUILTINS: dict[tuple[str, int], Callable] = {
    ("=", 2): _bi_unify,
    ("\\=", 2): _bi_not_unify,
    ("==", 2): _bi_eq,
    ("\\==", 2): _bi_neq,
    ("is", 2): _bi_is,
    ("<", 2): _compare(lambda x, y: x < y),
    ("=<", 2): _compare(lambda x, y: x <= y),
    (">", 2): _compare(lambda x, y: x > y),
    (">=", 2): _compare(lambda x, y: x >= y),
    ("=:=", 2): _compare(lambda x, y: x == y),
    ("=\\=", 2): _compare(lambda x, y: x != y),
}

# Meta-call predicates (problog_inference/2-4 etc.) register themselves here.
# A handler receives (solver, args) and returns a bool for a deterministic
# outcome or an iterator whose every step is one more solution.
META_PREDICATES: dict[tuple[str, int], Callable] = {}


def meta_predicate(name: str, *arities: int):
    def register(fn):
        for a in arities:
            META_PREDICATES[(name, a)] = fn
        return fn
    return register


# --------------------------------------------------------------------------
# The machine

_CONTROL = {("true", 0), ("fail", 0), ("false", 0), ("!", 0), (",", 2), (";", 2), ("->", 2),
            ("call", 1)}


class _CutTo:
    __slots__ = ("height",)

    def __init__(self, height):
        self.height = height


class _Truncate:
    __slots__ = ("lst", "n")

    def __init__(self, lst, n):
        self.lst = lst
        self.n = n

    def __call__(self):
        del self.lst[self.n:]


class _ClauseCP:
    __slots__ = ("mark", "steps", "goal", "entries", "i", "rest")

    def __init__(self, mark, steps, goal, entries, i, rest):
        self.mark, self.steps, self.goal = mark, steps, goal
        self.entries, self.i, self.rest = entries, i, rest


class _AltCP:
    __slots__ = ("mark", "steps", "goals")

    def __init__(self, mark, steps, goals):
        self.mark, self.steps, self.goals = mark, steps, goals


class _GenCP:
    __slots__ = ("mark", "steps", "gen", "rest")

    def __init__(self, mark, steps, gen, rest):
        self.mark, self.steps, self.gen, self.rest = mark, steps, gen, rest


_FAILED = object()


class Solver:
    """One SLD resolution run bound to an engine session.

    ``session`` must provide ``program``, ``active`` (the engine whose hooks
    are called) and ``fresh`` (an iterator of integers for variable names).
    """

    def __init__(self, session, depth_limit: int = DEFAULT_DEPTH_LIMIT, occurs_check: bool = True):
        self.session = session
        self.program: Program = session.program
        self.depth_limit = depth_limit
        self.occurs_check = occurs_check
        self.bindings: Substitution = {}
        self.trail: list = []
        self.cps: list = []
        # predicate -> first-argument key -> compiled entries, shared by all solvers
        self._tables: dict = session.program.runtime_cache.setdefault("calls", {})

    # helpers usable from built-ins
    def unify(self, a: Term, b: Term) -> bool:
        return _unify(a, b, self.bindings, self.trail, self.occurs_check)

    def resolve(self, t: Term) -> Term:
        return resolve(t, self.bindings)

    def deref(self, t: Term) -> Term:
        return deref(t, self.bindings)

    def push_literal(self, engine, item, probability) -> bool:
        """Hand ``item`` to ``engine``'s annotated-fact hook, trailing any literal it records."""
        reg = engine.register1
        n = len(reg) if type(reg) is list else 0
        outcome = engine.hooks.on_annotated_fact(engine, item, probability)
        if outcome is Outcome.FAIL:
            return False
        if outcome is Outcome.SUCCEED_WITH_LITERAL:
            self.trail.append(_Truncate(reg, n))
        return True

    def undo_to(self, mark: int) -> None:
        """Undo bindings and recorded literals back to trail length ``mark``."""
        self._undo(mark)

    def _undo(self, mark: int) -> None:
        trail, bindings = self.trail, self.bindings
        while len(trail) > mark:
            e = trail.pop()
            if type(e) is Var:
                del bindings[e]
            else:
                e()

    def _cut_to(self, height: int) -> None:
        cps = self.cps
        while len(cps) > height:
            cp = cps.pop()
            if type(cp) is _GenCP:
                cp.gen.close()

    def solve(self, goal: Term) -> Iterator[Substitution]:
        """Lazily yield one answer substitution (over ``goal``'s variables) per derivation."""
        counter = self.session.fresh
        mapping: dict[Var, Var] = {}
        for v in _vars_in(goal):
            if v not in mapping:
                mapping[v] = Var(f"_V{next(counter)}")
        renamed = _rename(goal, mapping)
        for _ in self._run(renamed):
            yield {v: resolve(fv, self.bindings) for v, fv in mapping.items()}

    def _run(self, goal: Term):
        session = self.session
        cps = self.cps
        goals = (goal, 0, None)
        steps = 0
        try:
            while True:
                if goals is _FAILED:
                    goals, steps = self._backtrack()
                    if goals is _FAILED:
                        return
                    continue
                if goals is None:
                    engine = session.active
                    engine.hooks.on_derivation_success(engine)
                    yield True
                    goals = _FAILED
                    continue
                goal, cutb, rest = goals
                if type(goal) is _CutTo:
                    self._cut_to(goal.height)
                    goals = rest
                    continue
                goal = deref(goal, self.bindings)
                tg = type(goal)
                if tg is Struct:
                    name, args = goal.functor, goal.args
                elif tg is Atom:
                    name, args = goal.name, ()
                elif tg is Var:
                    raise InstantiationError("call of an unbound variable")
                else:
                    raise NonCallableError(f"goal is not callable: {format_term(goal)}")
                key = (name, len(args))

                if key in _CONTROL:
                    if name == "true":
                        goals = rest
                    elif name == "fail" or name == "false":
                        goals = _FAILED
                    elif name == ",":
                        goals = (args[0], cutb, (args[1], cutb, rest))
                    elif name == "!":
                        self._cut_to(cutb)
                        goals = rest
                    elif name == "call":
                        goals = (args[0], len(cps), rest)
                    else:
                        left = deref(args[0], self.bindings)
                        if name == "->":
                            cond, then, other = args[0], args[1], Atom("fail")
                        elif type(left) is Struct and left.functor == "->" and len(left.args) == 2:
                            cond, then, other = left.args[0], left.args[1], args[1]
                        else:
                            cps.append(_AltCP(len(self.trail), steps, (args[1], cutb, rest)))
                            goals = (left, cutb, rest)
                            continue
                        h = len(cps)
                        cps.append(_AltCP(len(self.trail), steps, (other, cutb, rest)))
                        goals = (cond, len(cps), (_CutTo(h), None, (then, cutb, rest)))
                    continue

                builtin = BUILTINS.get(key)
                if builtin is not None:
                    goals = rest if builtin(self, args) else _FAILED
                    continue

                meta = META_PREDICATES.get(key)
                if meta is not None:
                    mark = len(self.trail)
                    res = meta(self, args)
                    if res is True or res is False:
                        goals = rest if res else _FAILED
                        continue
                    gen = iter(res)
                    cp = _GenCP(mark, steps, gen, rest)
                    cps.append(cp)
                    try:
                        next(gen)
                    except StopIteration:
                        if cps and cps[-1] is cp:
                            cps.pop()
                        self._undo(mark)
                        goals = _FAILED
                        continue
                    goals = rest
                    continue

                steps += 1
                if steps > self.depth_limit:
                    raise DepthLimitExceeded(
                        f"derivation exceeded {self.depth_limit} resolution steps "
                        f"while calling {name}/{len(args)}")
                entries = self._lookup(key, args)
                goals = self._try(goal, entries, 0, rest, steps)
        finally:
            self._cut_to(0)
            self._undo(0)

    def _lookup(self, key, args):
        table = self._tables.get(key)
        if table is None:
            table = self._table(key)
        if not args:
            return table[None]
        first = args[0]
        while type(first) is Var:
            nt = self.bindings.get(first)
            if nt is None:
                return table[None]
            first = nt
        if type(first) is Struct:
            first = (first.functor, len(first.args))
        got = table.get(first)
        if got is None:
            got = table[first] = _compiled_entries(
                self.program, self.program.entries_for_first_arg(key, first))
        return got

    def _table(self, key):
        program = self.program
        if key not in program.predicate_index:
            raise UnknownPredicate(f"unknown predicate {key[0]}/{key[1]}")
        entries = program.entries_for_first_arg(key, None) if key[1] else program.predicate_index[key]
        table = self._tables[key] = {None: _compiled_entries(program, entries)}
        return table

    def _try(self, goal, entries, i, rest, steps):
        cps = self.cps
        h = len(cps)
        n = len(entries)
        trail = self.trail
        bindings = self.bindings
        occurs_check = self.occurs_check
        counter = self.session.fresh
        while i < n:
            ce = entries[i]
            i += 1
            mark = len(trail)
            vs = [None] * ce.nvars
            head = ce.head
            if type(head) is _Skel or type(head) is Struct:
                # the goal's indicator already matches the head's
                ok = True
                for a, b in zip(head.args, goal.args):
                    if not _match(a, b, vs, bindings, trail, occurs_check, counter):
                        ok = False
                        break
            else:
                ok = _unify(head, goal, bindings, trail, occurs_check)
            if not ok:
                self._undo(mark)
                continue
            entry = ce.entry
            if type(entry) is AnnotatedFact:
                fid = self._fact_id(entry, goal)
                if not self.push_literal(self.session.active, fid, entry.probability):
                    self._undo(mark)
                    continue
                if i < n:
                    cps.append(_ClauseCP(mark, steps, goal, entries, i, rest))
                return rest
            if i < n:
                cps.append(_ClauseCP(mark, steps, goal, entries, i, rest))
            g = rest
            body = ce.body
            if body and ce.nvars:
                for k, v in enumerate(vs):
                    if v is None:
                        vs[k] = Var(f"_V{next(counter)}")
                for bg in reversed(body):
                    g = (_instantiate(bg, vs), h, g)
            else:
                for bg in reversed(body):
                    g = (bg, h, g)
            return g
        return _FAILED

    def _fact_id(self, entry: AnnotatedFact, head: Term) -> GroundFactId:
        # ``head`` is the goal, already unified with the fact's template
        if type(head) is Atom:
            return GroundFactId(entry.index, head.name, ())
        args = tuple(resolve(a, self.bindings) for a in head.args)
        for a in args:
            if not _ground(a):
                raise NonGroundAnnotatedFact(
                    f"annotated fact {format_term(Struct(head.functor, args))} is not ground when used")
        return GroundFactId(entry.index, head.functor, args)

    def _backtrack(self):
        cps = self.cps
        while cps:
            cp = cps[-1]
            self._undo(cp.mark)
            tc = type(cp)
            if tc is _ClauseCP:
                cps.pop()
                g = self._try(cp.goal, cp.entries, cp.i, cp.rest, cp.steps)
                if g is not _FAILED:
                    return g, cp.steps
            elif tc is _AltCP:
                cps.pop()
                return cp.goals, cp.steps
            else:
                try:
                    next(cp.gen)
                except StopIteration:
                    if cps and cps[-1] is cp:
                        cps.pop()
                    continue
                return cp.rest, cp.steps
        return _FAILED, 0


def _ground(t: Term) -> bool:
    tt = type(t)
    if tt is Var:
        return False
    if tt is Struct:
        for a in t.args:
            if not _ground(a):
                return False
    return True


def _vars_in(t: Term) -> Iterator[Var]:
    tt = type(t)
    if tt is Var:
        yield t
    elif tt is Struct:
        for a in t.args:
            yield from _vars_in(a)


def _rename(t: Term, mapping: dict[Var, Var]) -> Term:
    tt = type(t)
    if tt is Var:
        return mapping[t]
    if tt is Struct:
        return Struct(t.functor, tuple(_rename(a, mapping) for a in t.args))
    return t


def solve(goal: Term, program: Program, session, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Iterator[Substitution]:
    """Answer substitutions of ``goal`` under ``session``'s active engine.

    ``program`` must be the session's program; it is accepted for symmetry with
    the rest of the API and checked.
    """
    if program is not session.program:
        raise ValueError("program does not belong to this session")
    return Solver(session, depth_limit).solve(goal)


def fresh_counter() -> Iterator[int]:
    return itertools.count()
