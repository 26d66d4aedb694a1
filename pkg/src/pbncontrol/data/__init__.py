"""Shipped network fixtures and run configurations."""
from importlib import resources

from ..pbn import PBNSpec, parse_spec


def fixture_path(name: str):
    return resources.files(__name__).joinpath(name)


def load_fixture(name: str) -> PBNSpec:
    return parse_spec(fixture_path(name).read_text())
