from __future__ import annotations

import enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


__all__ = [
    "TORUS_NOTE",
    "Report",
    "Verdict",
    "combine",
]

TORUS_NOTE = "ℝⁿ modelled by the 2π-periodic torus with integer lattice frequencies"


class Verdict(enum.StrEnum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


def _plain(value: Any) -> Any:
    """
    Convert numpy scalars and arrays into JSON-friendly Python values.
    """
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    return value


class Report(BaseModel):
    """
    Structured result of a check or experiment.

    `invariant` names the property the verdict was judged against,
    and `tolerances` the thresholds used, so that a failing report
    explains itself without the code that produced it.
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    name: str
    invariant: str
    verdict: Verdict
    values: dict[str, Any] = Field(default_factory=dict)
    tolerances: dict[str, float] = Field(default_factory=dict)
    config: dict[str, Any] = Field(default_factory=dict)
    grid_sizes: list[int] = Field(default_factory=list)
    seeds: list[int] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)
    children: list[Report] = Field(default_factory=list)

    @field_validator("values", "config", mode="before")
    @classmethod
    def _to_plain(cls, value: Any) -> Any:
        return _plain(value)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def combine(name: str, invariant: str, children: list[Report], **extra: Any) -> Report:
    """
    Merge child reports into one, in the order given.

    The combined verdict fails if any child fails,
    is inconclusive if any child is inconclusive, and passes otherwise.
    """
    verdicts = {child.verdict for child in children}
    if Verdict.FAIL in verdicts:
        verdict = Verdict.FAIL
    elif Verdict.INCONCLUSIVE in verdicts:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.PASS
    return Report(
        name=name, invariant=invariant, verdict=verdict, children=children, **extra
    )
