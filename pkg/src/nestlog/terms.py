"""Term model: variables, atoms, numbers and compound terms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


class Var:
    """A logic variable. Two variables are the same iff their names match."""

    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("Var", name))

    def __eq__(self, other):
        return type(other) is Var and other.name == self.name

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, slots=True)
class Atom:
    name: str

    def __repr__(self):
        return f"Atom({self.name!r})"


@dataclass(frozen=True, slots=True)
class Int:
    value: int


@dataclass(frozen=True, slots=True)
class Float:
    value: float


@dataclass(frozen=True, slots=True)
class Struct:
    functor: str
    args: tuple

    def __post_init__(self):
        if not self.functor:
            raise ValueError("compound functor must be non-empty")
        if not self.args:
            raise ValueError("compound arity must be at least 1")

    @property
    def arity(self) -> int:
        return len(self.args)


Term = Union[Var, Atom, Int, Float, Struct]

TRUE = Atom("true")
FAIL = Atom("fail")
EMPTY_LIST = Atom("[]")


def is_callable(t: Term) -> bool:
    return type(t) is Atom or type(t) is Struct


def indicator(t: Term) -> tuple[str, int]:
    """(name, arity) of a callable term."""
    if type(t) is Atom:
        return (t.name, 0)
    return (t.functor, len(t.args))


def term_vars(t: Term) -> Iterator[Var]:
    """Variables of ``t`` in depth-first, left-to-right order (with repeats)."""
    stack = [t]
    while stack:
        x = stack.pop()
        tx = type(x)
        if tx is Var:
            yield x
        elif tx is Struct:
            stack.extend(reversed(x.args))


def is_ground(t: Term) -> bool:
    tt = type(t)
    if tt is Var:
        return False
    if tt is Struct:
        return all(is_ground(a) for a in t.args)
    return True


def make_term(functor: str, *args: Term) -> Term:
    return Struct(functor, tuple(args)) if args else Atom(functor)


def order_key(t: Term):
    """Sort key implementing the usual standard order of terms.

    Variables < numbers < atoms < compounds; compounds by arity, name, args.
    """
    tt = type(t)
    if tt is Var:
        return (0, t.name)
    if tt is Int or tt is Float:
        return (1, t.value, 0 if tt is Float else 1)
    if tt is Atom:
        return (3, t.name)
    return (4, len(t.args), t.functor, tuple(order_key(a) for a in t.args))
