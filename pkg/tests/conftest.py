from __future__ import annotations

from pathlib import Path

import pytest

from hormander_spectral import schemas
from hormander_spectral.dnsystem import DiffOp, DNNumbers, DNSystem


SYSTEMS = Path(__file__).resolve().parent.parent / "systems"


def load(name: str) -> DNSystem:
    return schemas.load_system(SYSTEMS / f"{name}.json")


@pytest.fixture
def one_minus_laplace_circle() -> DNSystem:
    """
    `1 − d²/dx²` on the circle, with `l = 0` and `m = 2`.
    """
    op = DiffOp.from_terms({(0,): 1.0, (2,): 1.0}, 1)
    return DNSystem(1, 1, ((op,),), DNNumbers((0.0,), (2.0,)))


@pytest.fixture
def systems_dir() -> Path:
    return SYSTEMS


@pytest.fixture
def laplace() -> DNSystem:
    return load("laplace")


@pytest.fixture
def one_minus_laplace() -> DNSystem:
    return load("one_minus_laplace")


@pytest.fixture
def cauchy_riemann() -> DNSystem:
    return load("cauchy_riemann")


@pytest.fixture
def mixed_dn() -> DNSystem:
    return load("mixed_dn")


@pytest.fixture
def non_elliptic() -> DNSystem:
    return load("non_elliptic")


@pytest.fixture
def diag_laplace() -> DNSystem:
    return load("diag_laplace")


@pytest.fixture(params=["one_minus_laplace", "laplace", "cauchy_riemann", "mixed_dn"])
def elliptic_system(request: pytest.FixtureRequest) -> DNSystem:
    return load(request.param)
