"""Bundled benchmark programs."""

from importlib import resources

NAMES = ("alarm", "ship")


def load(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.pl").read_text(encoding="utf-8")
