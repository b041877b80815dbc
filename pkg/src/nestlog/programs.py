"""Example programs shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .syntax import Program, parse_program

EXAMPLE_NAMES = ("graph.pl", "route.pl", "coin.pl", "sprinkler.pl")


def bundled_examples() -> dict[str, Path]:
    """Installed example files by name."""
    root = resources.files("nestlog") / "examples"
    return {name: Path(str(root / name)) for name in EXAMPLE_NAMES}


def bundled_source(name: str) -> str:
    return (resources.files("nestlog") / "examples" / name).read_text(encoding="utf-8")


def load_bundled(name: str) -> Program:
    return parse_program(bundled_source(name))
