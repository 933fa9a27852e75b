"""Locate the bundled fixture systems."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).parent / "data"
NAMES = ("toy3", "ercot-mini")


def fixture_path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(NAMES)}")
    return DATA_DIR / name


def load_fixture(name: str, validate: bool = True):
    from .ingest import load_system

    return load_system(fixture_path(name), validate=validate)
