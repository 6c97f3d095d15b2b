"""Bundled reference models."""

from __future__ import annotations

from importlib import resources

from . import dsl
from .graph import PolicyGraph

__all__ = ["fixture_text", "load_fixture", "FIXTURE_NAMES"]

FIXTURE_NAMES = ("lander_kim", "racing_kim", "mlp_template")


def fixture_text(name: str) -> str:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}, expected one of {FIXTURE_NAMES}")
    path = resources.files("kim").joinpath(f"fixtures/{name}.kim")
    return path.read_text(encoding="utf-8")


def load_fixture(name: str) -> PolicyGraph:
    return dsl.parse(fixture_text(name))
