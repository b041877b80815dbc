"""Exact inference: explanations -> DNF trie -> ROBDD -> weighted model count."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .engine import (
    Engine,
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
from .errors import MissingWeight, OrderMismatch
from .resolution import GroundFactId, Outcome, Solver
from .syntax import format_term
from .terms import Atom, Struct, Term, order_key


@dataclass(frozen=True, slots=True)
class FactLiteral:
    """A (possibly negated) ground fact; ``probability`` is always the positive one's."""

    id: GroundFactId
    positive: bool
    probability: float

    @property
    def weight(self) -> float:
        return self.probability if self.positive else 1.0 - self.probability

    def negated(self) -> FactLiteral:
        return FactLiteral(self.id, not self.positive, self.probability)

    def sort_key(self):
        return (self.id.fact_index, tuple(order_key(a) for a in self.id.ground_args), not self.positive)


# --------------------------------------------------------------------------
# Nested formulas


class NestedFormula:
    __slots__ = ()

    def key(self):
        raise NotImplementedError

    def to_term(self) -> Term:
        raise NotImplementedError


@dataclass(frozen=True, slots=True)
class Leaf(NestedFormula):
    literal: FactLiteral

    def key(self):
        return (0, self.literal.sort_key())

    def to_term(self):
        t = self.literal.id.term
        return t if self.literal.positive else Struct("not", (t,))


@dataclass(frozen=True, slots=True)
class And(NestedFormula):
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("And needs at least one child")

    def key(self):
        return (2, tuple(c.key() for c in self.children))

    def to_term(self):
        return Struct("and", tuple(c.to_term() for c in self.children))


@dataclass(frozen=True, slots=True)
class Or(NestedFormula):
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("Or needs at least one child")

    def key(self):
        return (3, tuple(c.key() for c in self.children))

    def to_term(self):
        return Struct("or", tuple(c.to_term() for c in self.children))


@dataclass(frozen=True, slots=True)
class Not(NestedFormula):
    child: NestedFormula

    def key(self):
        return (1, self.child.key())

    def to_term(self):
        return Struct("not", (self.child.to_term(),))


@dataclass(frozen=True, slots=True)
class _Const(NestedFormula):
    value: bool

    def key(self):
        return (-1, self.value)

    def to_term(self):
        return Atom("true" if self.value else "false")

    def __repr__(self):
        return "TRUE_FORMULA" if self.value else "FALSE_FORMULA"


TRUE_FORMULA = _Const(True)
FALSE_FORMULA = _Const(False)


def formula_leaves(f: NestedFormula) -> Iterator[FactLiteral]:
    """Leaf literals in depth-first, left-to-right order."""
    stack = [f]
    while stack:
        x = stack.pop()
        tx = type(x)
        if tx is Leaf:
            yield x.literal
        elif tx is Not:
            stack.append(x.child)
        elif tx is And or tx is Or:
            stack.extend(reversed(x.children))


def default_order(f: NestedFormula) -> list[GroundFactId]:
    seen: dict[GroundFactId, None] = {}
    for lit in formula_leaves(f):
        seen.setdefault(lit.id)
    return list(seen)


def formula_weights(f: NestedFormula) -> dict[GroundFactId, float]:
    return {lit.id: lit.probability for lit in formula_leaves(f)}


# --------------------------------------------------------------------------
# Explanations and the DNF trie


@dataclass(frozen=True)
class Explanation:
    """One proof: fact literals plus negated sub-formulas (from probabilistic negation)."""

    literals: tuple  # FactLiteral, sorted
    negations: tuple = ()  # Not nodes, in order of use

    @classmethod
    def from_items(cls, items: Iterable) -> Explanation | None:
        """Canonical explanation, or None when it uses a fact with both polarities."""
        lits: dict[tuple, FactLiteral] = {}
        polarity: dict[GroundFactId, bool] = {}
        negs: dict[tuple, Not] = {}
        for item in items:
            if type(item) is FactLiteral:
                seen = polarity.get(item.id)
                if seen is None:
                    polarity[item.id] = item.positive
                    lits[item.sort_key()] = item
                elif seen != item.positive:
                    return None
            else:
                node = item if type(item) is Not else Not(item)
                negs.setdefault(node.key(), node)
        return cls(tuple(lits[k] for k in sorted(lits)), tuple(negs.values()))

    def items(self) -> tuple:
        return self.literals + self.negations

    def item_keys(self) -> tuple:
        return tuple(Leaf(l).key() for l in self.literals) + tuple(n.key() for n in self.negations)


class DnfTrie:
    """Distinct explanations, stored as a trie over their sorted literal keys."""

    _END = object()

    def __init__(self):
        self.root: dict = {}
        self.explanations: list[Explanation] = []
        self.legend: dict[GroundFactId, tuple[Term, float]] = {}

    def __len__(self):
        return len(self.explanations)

    def insert(self, items: Iterable) -> bool:
        """Add the explanation made of ``items``; False if inconsistent or already present."""
        expl = items if isinstance(items, Explanation) else Explanation.from_items(items)
        if expl is None:
            return False
        node = self.root
        for k in expl.item_keys():
            node = node.setdefault(k, {})
        if self._END in node:
            return False
        node[self._END] = expl
        self.explanations.append(expl)
        for lit in expl.literals:
            self.legend.setdefault(lit.id, (lit.id.term, lit.probability))
        for neg in expl.negations:
            for lit in formula_leaves(neg):
                self.legend.setdefault(lit.id, (lit.id.term, lit.probability))
        return True


def trie_to_formula(t: DnfTrie) -> NestedFormula:
    if not t.explanations:
        return FALSE_FORMULA
    ands = []
    for expl in t.explanations:
        items = expl.items()
        if not items:
            return TRUE_FORMULA
        ands.append(And(tuple(Leaf(i) if type(i) is FactLiteral else i for i in items)))
    return Or(tuple(ands))


def naive_proof_sum(t: DnfTrie) -> float:
    """Sum of per-proof products. A diagnostic only: overlapping proofs are double-counted."""
    total = 0.0
    for expl in t.explanations:
        prod = 1.0
        for lit in expl.literals:
            prod *= lit.weight
        for neg in expl.negations:
            prod *= 1.0 - formula_probability(neg.child)
        total += prod
    return total


# --------------------------------------------------------------------------
# ROBDD


class Robdd:
    """Reduced ordered BDD with a hash-consed node store.

    Node refs are ints; 0 and 1 are the terminals. ``nodes[r]`` is
    ``(rank, low, high)`` where rank indexes ``order``.
    """

    def __init__(self, order: Iterable[GroundFactId]):
        self.order = list(order)
        self.rank = {v: i for i, v in enumerate(self.order)}
        if len(self.rank) != len(self.order):
            raise OrderMismatch("variable order lists an id more than once")
        terminal_rank = len(self.order)
        self.nodes: list[tuple[int, int, int]] = [(terminal_rank, 0, 0), (terminal_rank, 1, 1)]
        self.unique: dict[tuple[int, int, int], int] = {}
        self._apply_memo: dict = {}
        self._neg_memo: dict[int, int] = {}
        self.root = 0

    def __len__(self):
        return len(self.nodes)

    def mk(self, rank: int, low: int, high: int) -> int:
        if low == high:
            return low
        key = (rank, low, high)
        r = self.unique.get(key)
        if r is None:
            r = self.unique[key] = len(self.nodes)
            self.nodes.append(key)
        return r

    def var(self, v: GroundFactId) -> int:
        rank = self.rank.get(v)
        if rank is None:
            raise OrderMismatch(f"{v} is missing from the variable order")
        return self.mk(rank, 0, 1)

    def negate(self, u: int) -> int:
        if u < 2:
            return 1 - u
        r = self._neg_memo.get(u)
        if r is None:
            rank, lo, hi = self.nodes[u]
            r = self.mk(rank, self.negate(lo), self.negate(hi))
            self._neg_memo[u] = r
        return r

    def apply(self, op: str, u: int, v: int) -> int:
        if op == "and":
            if u == 0 or v == 0:
                return 0
            if u == 1:
                return v
            if v == 1 or u == v:
                return u
        else:
            if u == 1 or v == 1:
                return 1
            if u == 0:
                return v
            if v == 0 or u == v:
                return u
        if u > v:
            u, v = v, u
        key = (op, u, v)
        r = self._apply_memo.get(key)
        if r is not None:
            return r
        ru, lu, hu = self.nodes[u]
        rv, lv, hv = self.nodes[v]
        if ru == rv:
            r = self.mk(ru, self.apply(op, lu, lv), self.apply(op, hu, hv))
        elif ru < rv:
            r = self.mk(ru, self.apply(op, lu, v), self.apply(op, hu, v))
        else:
            r = self.mk(rv, self.apply(op, u, lv), self.apply(op, u, hv))
        self._apply_memo[key] = r
        return r

    def build(self, f: NestedFormula) -> int:
        tf = type(f)
        if tf is Leaf:
            r = self.var(f.literal.id)
            return r if f.literal.positive else self.negate(r)
        if tf is And or tf is Or:
            op = "and" if tf is And else "or"
            acc = 1 if tf is And else 0
            for c in f.children:
                acc = self.apply(op, acc, self.build(c))
            return acc
        if tf is Not:
            return self.negate(self.build(f.child))
        if f == TRUE_FORMULA:
            return 1
        if f == FALSE_FORMULA:
            return 0
        raise TypeError(f"not a formula node: {f!r}")

    def reachable(self) -> list[int]:
        seen, stack = set(), [self.root]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            if u >= 2:
                _, lo, hi = self.nodes[u]
                stack += [lo, hi]
        return sorted(seen)


def build_robdd(f: NestedFormula, order: list[GroundFactId] | None = None) -> Robdd:
    if order is None:
        order = default_order(f)
    d = Robdd(order)
    d.root = d.build(f)
    return d


def robdd_probability(d: Robdd, weights: Mapping[GroundFactId, float]) -> float:
    memo = {0: 0.0, 1: 1.0}
    nodes, order = d.nodes, d.order
    # mk() creates children before parents, so ascending refs is bottom-up
    for u in d.reachable():
        if u < 2:
            continue
        rank, lo, hi = nodes[u]
        v = order[rank]
        try:
            p = weights[v]
        except KeyError:
            raise MissingWeight(f"no weight for {v}") from None
        memo[u] = p * memo[hi] + (1.0 - p) * memo[lo]
    return memo[d.root]


def formula_probability(f: NestedFormula) -> float:
    return robdd_probability(build_robdd(f), formula_weights(f))


# --------------------------------------------------------------------------
# Engine parametrisation


class ExactHooks(Hooks):
    """register1: the current explanation (list); register2: the DNF trie."""

    def init_registers(self, engine: Engine, session: EngineSession) -> None:
        engine.register1 = []
        engine.register2 = DnfTrie()

    def on_annotated_fact(self, engine, fact, probability):
        if type(fact) is GroundFactId:
            fact = FactLiteral(fact, True, probability)
        engine.register1.append(fact)
        return Outcome.SUCCEED_WITH_LITERAL

    def on_derivation_success(self, engine):
        engine.register2.insert(engine.register1)

    def run(self, session, engine, goal, result_type, options):
        for _ in Solver(session, options.depth_limit).solve(goal):
            pass
        formula = trie_to_formula(engine.register2)
        if result_type is ResultType.INFO:
            return Info(formula)
        return Probability(formula_probability(formula))

    def negate(self, solver, goal):
        session = solver.session
        formula = problog_inference(session, InferenceKind.CURRENT, goal, ResultType.INFO,
                                    session.options).payload
        if formula == TRUE_FORMULA:
            return False
        if formula == FALSE_FORMULA:
            return True
        return solver.push_literal(session.active, negation_item(formula), None)


def negation_item(formula: NestedFormula):
    """What ``problog_not`` records: a complemented fact when the goal is a single fact."""
    if type(formula) is Or and len(formula.children) == 1:
        conj = formula.children[0]
        if type(conj) is And and len(conj.children) == 1 and type(conj.children[0]) is Leaf:
            return conj.children[0].literal.negated()
    return Not(formula)


register_inference_kind(InferenceKind.EXACT.value, ExactHooks())


def exact_probability(session: EngineSession, goal: Term, options: InferenceOptions | None = None) -> float:
    return problog_inference(session, InferenceKind.EXACT, goal, ResultType.PROBABILITY, options).value


# --------------------------------------------------------------------------
# Serialisation


def fact_labels(f: NestedFormula) -> dict[GroundFactId, str]:
    """Short labels: the fact index, suffixed ``_k`` when one fact has several ground instances."""
    ids = default_order(f)
    by_index: dict[int, list[GroundFactId]] = {}
    for i in ids:
        by_index.setdefault(i.fact_index, []).append(i)
    labels = {}
    for index, group in by_index.items():
        if len(group) == 1:
            labels[group[0]] = str(index)
        else:
            for k, i in enumerate(group):
                labels[i] = f"{index}_{k}"
    return labels


def format_formula(f: NestedFormula, labels: Mapping[GroundFactId, str] | None = None) -> str:
    if labels is None:
        labels = fact_labels(f)
    tf = type(f)
    if tf is Leaf:
        s = labels[f.literal.id]
        return s if f.literal.positive else f"not({s})"
    if tf is And or tf is Or:
        name = "and" if tf is And else "or"
        return f"{name}({','.join(format_formula(c, labels) for c in f.children)})"
    if tf is Not:
        return f"not({format_formula(f.child, labels)})"
    return "true" if f == TRUE_FORMULA else "false"


def format_info(f: NestedFormula) -> str:
    """Formula line followed by one legend line per fact."""
    labels = fact_labels(f)
    weights = formula_weights(f)
    lines = [format_formula(f, labels)]
    for fid, label in labels.items():
        lines.append(f"fact {label} = {format_term(fid.term)} p={weights[fid]:g}")
    return "\n".join(lines)


def formula_to_json(f: NestedFormula) -> dict:
    labels = fact_labels(f)
    weights = formula_weights(f)

    def node(x):
        tx = type(x)
        if tx is Leaf:
            leaf = {"op": "fact", "id": labels[x.literal.id]}
            return leaf if x.literal.positive else {"op": "not", "children": [leaf]}
        if tx is And or tx is Or:
            return {"op": "and" if tx is And else "or", "children": [node(c) for c in x.children]}
        if tx is Not:
            return {"op": "not", "children": [node(x.child)]}
        return {"op": "true" if x == TRUE_FORMULA else "false"}

    return {
        "formula": node(f),
        "legend": [{"id": label, "term": format_term(fid.term), "p": weights[fid]}
                   for fid, label in labels.items()],
    }


def formula_json_text(f: NestedFormula) -> str:
    return json.dumps(formula_to_json(f))
